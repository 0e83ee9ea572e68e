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

#ifndef HIERLABEL_MANIFEST_H_
#define HIERLABEL_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace hierlabel {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

struct RunManifest {
  std::string command;
  std::string config_hash;  // FNV-1a of the canonical config JSON
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;  // relative to the output directory
  double wall_time_seconds = 0.0;
};

std::string config_hash(const nlohmann::json& config);

nlohmann::json to_json(const RunManifest& m);

// Every regular file below dir except the manifest, relative and sorted.
std::vector<std::string> list_outputs(const std::filesystem::path& dir);

// Writes dir/manifest.json through a temporary file and a rename.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace hierlabel

#endif  // HIERLABEL_MANIFEST_H_
