// Copyright 2026 The hierlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HIERLABEL_CHECKPOINT_H_
#define HIERLABEL_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hierlabel/model.h"
#include "hierlabel/taxonomy.h"
#include "json.hpp"

namespace hierlabel {

// What the model's outputs mean.
enum class OutputKind {
  kFlat,          // one score per leaf, leaf order
  kHierarchical,  // the taxonomy's full logit layout
  kGroupMember,   // one sibling group (group_id) of a base composition
};

std::string to_string(OutputKind kind);
OutputKind parse_output_kind(std::string_view name);

inline constexpr std::string_view kCheckpointMagic = "HLCKPT01";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelSpec spec;
  OutputKind output = OutputKind::kFlat;
  std::string group_id;  // kGroupMember only
  std::string taxonomy_fingerprint;
  std::vector<double> params;
  nlohmann::json training = nlohmann::json::object();

  bool operator==(const Checkpoint&) const = default;
};

// Output count the taxonomy implies for this checkpoint's output kind.
std::size_t expected_outputs(const Taxonomy& t, OutputKind output,
                             std::string_view group_id);

// Throws kInvalidArgument when the fingerprint or output size disagrees with
// the taxonomy.
void check_compatible(const Checkpoint& c, const Taxonomy& t);

// Layout: magic, u64 little-endian metadata length, UTF-8 JSON metadata,
// little-endian IEEE-754 doubles.
std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::string_view bytes, std::string_view context);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hierlabel

#endif  // HIERLABEL_CHECKPOINT_H_
