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

#ifndef HIERLABEL_TAXONOMY_H_
#define HIERLABEL_TAXONOMY_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hierlabel {

struct TaxonomyNode {
  std::string id;
  std::string display_name;
  std::optional<std::size_t> parent;  // empty for the root
  int level = 0;                      // root = 0
  bool is_leaf = false;
  std::vector<std::size_t> children;  // document order
};

// Input to Taxonomy::from_nodes. An empty parent marks the root.
struct NodeSpec {
  std::string id;
  std::string display_name;
  std::string parent;
};

// Children of one internal node. Each group gets its own softmax.
struct SiblingGroup {
  std::size_t parent = 0;
  std::vector<std::size_t> children;
};

struct LogitSegment {
  std::string group_id;  // id of the parent node
  int level = 1;         // level of the children
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const LogitSegment&) const = default;
};

// Position of every sibling group inside one flat score vector.
struct LogitLayout {
  std::size_t total_logits = 0;
  std::vector<LogitSegment> segments;

  bool operator==(const LogitLayout&) const = default;
};

struct PathLabel {
  std::string leaf;
  std::vector<std::string> path;  // level-1 node first, leaf last

  bool operator==(const PathLabel&) const = default;
};

// Per sibling group: index of the on-path child, or empty when the group's
// parent is not on the label's path (group inactive).
using GroupTargets = std::vector<std::optional<std::size_t>>;

enum class RootPolicy { kExclude, kInclude };

// Immutable rooted label tree. Nodes are stored in pre-order (root at index
// 0), children in document order; leaf order and group order follow the same
// traversal, so both are deterministic functions of the input document.
class Taxonomy {
 public:
  // Validates and builds. Rejects duplicate or empty ids, missing or
  // multiple roots, unknown parents, cycles, and internal nodes with a single
  // child. Nodes may appear in any order; sibling order follows input order.
  static Taxonomy from_nodes(std::span<const NodeSpec> nodes);

  std::size_t size() const { return nodes_.size(); }
  const TaxonomyNode& node(std::size_t index) const { return nodes_.at(index); }
  const TaxonomyNode& root() const { return nodes_.front(); }
  const std::vector<TaxonomyNode>& nodes() const { return nodes_; }

  std::optional<std::size_t> find(std::string_view id) const;
  // Throws kUnknownNode.
  std::size_t index_of(std::string_view id) const;

  // Leaves in pre-order; this is the fixed class indexing.
  const std::vector<std::size_t>& leaf_order() const { return leaf_order_; }
  std::size_t leaf_count() const { return leaf_order_.size(); }
  // Class index of a leaf id. Throws kUnknownNode or kNotALeaf.
  std::size_t leaf_index(std::string_view id) const;
  std::size_t leaf_index_of_node(std::size_t node) const;
  const std::string& leaf_id(std::size_t leaf_index) const {
    return nodes_[leaf_order_.at(leaf_index)].id;
  }
  std::vector<std::string> leaf_ids() const;

  const std::vector<SiblingGroup>& groups() const { return groups_; }
  // Group whose parent is `node`, if `node` is internal.
  std::optional<std::size_t> group_of_parent(std::size_t node) const;
  // Group containing non-root `node` and its position among the siblings.
  std::pair<std::size_t, std::size_t> group_position(std::size_t node) const;
  // Display label of a group, e.g. "Acute vs Chronic".
  std::string group_label(std::size_t group) const;

  const LogitLayout& layout() const { return layout_; }
  // Logit index of a non-root node inside the grouped score vector.
  std::size_t logit_of_node(std::size_t node) const;

  int max_level() const { return max_level_; }

  // True when `ancestor` lies on the root path of `node` (or equals it).
  bool is_ancestor_or_self(std::size_t ancestor, std::size_t node) const;

  // Node and its proper ancestors, top-down.
  std::vector<std::size_t> lineage(std::size_t node, RootPolicy policy) const;
  std::set<std::string> augmented_set(
      std::string_view id, RootPolicy policy = RootPolicy::kExclude) const;

  // Throws kUnknownNode for unknown ids and kNotALeaf for internal nodes.
  PathLabel leaf_path(std::string_view leaf) const;
  PathLabel leaf_path_of(std::size_t leaf_index) const;

  GroupTargets encode_target(std::string_view leaf) const;
  GroupTargets encode_target_of(std::size_t leaf_index) const;

  // Canonical JSON document; parse_taxonomy(to_json()) == *this.
  std::string to_json() const;
  // Indented tree for terminal output.
  std::string to_text() const;
  // Content hash of the canonical JSON.
  std::string fingerprint() const;

  bool operator==(const Taxonomy& other) const;

 private:
  Taxonomy() = default;

  std::vector<TaxonomyNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> leaf_order_;
  std::vector<std::size_t> leaf_index_;  // per node, SIZE_MAX for internal
  std::vector<SiblingGroup> groups_;
  std::vector<std::size_t> group_of_parent_;  // per node, SIZE_MAX if leaf
  std::vector<std::size_t> child_position_;   // per node
  LogitLayout layout_;
  int max_level_ = 0;
};

// Accepts the JSON object format {"name": ..., "children": [...]} (optional
// "id" overrides the name as identifier) or an indentation format with one
// node per line, "id" or "id: Display Name", children indented deeper than
// their parent and '#' starting a comment.
Taxonomy parse_taxonomy(std::string_view text);
Taxonomy load_taxonomy(const std::filesystem::path& path);

LogitLayout logit_layout(const Taxonomy& taxonomy);

}  // namespace hierlabel

#endif  // HIERLABEL_TAXONOMY_H_
