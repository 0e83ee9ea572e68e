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

#include "hierlabel/checkpoint.h"

#include <bit>
#include <cstring>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"

namespace hierlabel {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string to_string(OutputKind kind) {
  switch (kind) {
    case OutputKind::kFlat:
      return "flat";
    case OutputKind::kHierarchical:
      return "hierarchical";
    case OutputKind::kGroupMember:
      return "group_member";
  }
  return "flat";
}

OutputKind parse_output_kind(std::string_view name) {
  if (name == "flat") return OutputKind::kFlat;
  if (name == "hierarchical") return OutputKind::kHierarchical;
  if (name == "group_member") return OutputKind::kGroupMember;
  fail(ErrorKind::kInvalidArgument, "unknown output kind '" + std::string(name) + "'");
}

std::size_t expected_outputs(const Taxonomy& t, OutputKind output,
                             std::string_view group_id) {
  switch (output) {
    case OutputKind::kFlat:
      return t.leaf_count();
    case OutputKind::kHierarchical:
      return t.layout().total_logits;
    case OutputKind::kGroupMember: {
      const auto group = t.group_of_parent(t.index_of(group_id));
      if (!group) {
        fail(ErrorKind::kInvalidArgument,
             "'" + std::string(group_id) + "' is a leaf and has no sibling group");
      }
      return t.groups()[*group].children.size();
    }
  }
  return 0;
}

void check_compatible(const Checkpoint& c, const Taxonomy& t) {
  if (c.taxonomy_fingerprint != t.fingerprint()) {
    fail(ErrorKind::kInvalidArgument,
         "taxonomy fingerprint mismatch: checkpoint " + c.taxonomy_fingerprint +
             ", taxonomy " + t.fingerprint());
  }
  const std::size_t want = expected_outputs(t, c.output, c.group_id);
  if (c.spec.outputs != want) {
    fail(ErrorKind::kInvalidArgument,
         "checkpoint has " + std::to_string(c.spec.outputs) + " outputs, taxonomy implies " +
             std::to_string(want));
  }
}

std::string encode_checkpoint(const Checkpoint& c) {
  if (c.params.size() != c.spec.parameter_count()) {
    fail(ErrorKind::kInternal, "checkpoint parameter count does not match its spec");
  }
  nlohmann::json meta = {{"format_version", kCheckpointVersion},
                         {"spec", to_json(c.spec)},
                         {"output", to_string(c.output)},
                         {"taxonomy_fingerprint", c.taxonomy_fingerprint},
                         {"parameter_count", c.params.size()},
                         {"training", c.training}};
  if (c.output == OutputKind::kGroupMember) meta["group_id"] = c.group_id;
  const std::string text = meta.dump();
  std::string out(kCheckpointMagic);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + 8 * c.params.size());
  for (const double p : c.params) put_u64(out, std::bit_cast<std::uint64_t>(p));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, std::string_view context) {
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::kCorruptFile, std::string(context) + ": " + why);
  };
  if (bytes.size() < 16 || bytes.substr(0, 8) != kCheckpointMagic) {
    bad("not a checkpoint (bad magic)");
  }
  const std::uint64_t meta_len = get_u64(bytes, 8);
  if (meta_len > bytes.size() - 16) {
    bad("metadata length " + std::to_string(meta_len) + " exceeds file size");
  }
  Checkpoint c;
  try {
    const nlohmann::json meta = nlohmann::json::parse(bytes.substr(16, meta_len));
    const int version = meta.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      bad("unsupported format version " + std::to_string(version));
    }
    c.spec = model_spec_from_json(meta.at("spec"));
    c.output = parse_output_kind(meta.at("output").get<std::string>());
    c.group_id = meta.value("group_id", "");
    c.taxonomy_fingerprint = meta.at("taxonomy_fingerprint").get<std::string>();
    c.training = meta.value("training", nlohmann::json::object());
    c.spec.validate();
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("bad metadata: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorruptFile) throw;
    bad(std::string("bad metadata: ") + e.what());
  }
  const std::size_t count = c.spec.parameter_count();
  const std::size_t have = bytes.size() - 16 - meta_len;
  if (have != 8 * count) {
    bad("expected " + std::to_string(8 * count) + " parameter bytes, found " +
        std::to_string(have));
  }
  c.params.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    c.params[i] = std::bit_cast<double>(get_u64(bytes, 16 + meta_len + 8 * i));
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace hierlabel
