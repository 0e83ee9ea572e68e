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

#include "hierlabel/manifest.h"

#include <algorithm>
#include <system_error>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"

namespace hierlabel {

std::string config_hash(const nlohmann::json& config) {
  return hex64(fnv1a64(config.dump()));
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_hash", m.config_hash},
          {"seed", m.seed},
          {"tool_version", m.tool_version},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"wall_time_seconds", m.wall_time_seconds}};
}

std::vector<std::string> list_outputs(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = entry.path().lexically_relative(dir).generic_string();
    if (rel == kManifestName) continue;
    out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  const std::filesystem::path tmp = dir / (std::string(kManifestName) + ".tmp");
  write_file(tmp, to_json(m).dump(2) + "\n");
  std::error_code ec;
  std::filesystem::rename(tmp, dir / kManifestName, ec);
  if (ec) {
    fail(ErrorKind::kInternal, "cannot finalize manifest in " + dir.string() + ": " +
                                   ec.message());
  }
}

}  // namespace hierlabel
