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

#include "hierlabel/taxonomy.h"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"
#include "json.hpp"

namespace hierlabel {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void check_id(const std::string& id) {
  if (id.empty()) fail(ErrorKind::kStructure, "taxonomy node with empty id");
  for (const char c : id) {
    const auto u = static_cast<unsigned char>(c);
    if (c == ',' || c == '"' || u <= 0x20 || u == 0x7f) {
      fail(ErrorKind::kStructure, "taxonomy node id '" + id +
                                      "' contains a comma, quote, space or "
                                      "control character");
    }
  }
}

void collect_json(const nlohmann::json& object, const std::string& parent,
                  const std::string& where, std::vector<NodeSpec>& out) {
  if (!object.is_object()) {
    fail(ErrorKind::kParse, "taxonomy node at " + where + " is not an object");
  }
  const auto name = object.find("name");
  if (name == object.end() || !name->is_string()) {
    fail(ErrorKind::kParse,
         "taxonomy node at " + where + " lacks a string \"name\"");
  }
  NodeSpec spec;
  spec.display_name = name->get<std::string>();
  spec.id = spec.display_name;
  if (const auto id = object.find("id"); id != object.end()) {
    if (!id->is_string()) {
      fail(ErrorKind::kParse, "taxonomy node at " + where + ": \"id\" must be a string");
    }
    spec.id = id->get<std::string>();
  }
  spec.parent = parent;
  for (const auto& [key, value] : object.items()) {
    if (key != "name" && key != "id" && key != "children") {
      fail(ErrorKind::kParse,
           "taxonomy node '" + spec.id + "' has unknown key \"" + key + "\"");
    }
  }
  out.push_back(spec);
  const auto children = object.find("children");
  if (children == object.end()) return;
  if (!children->is_array()) {
    fail(ErrorKind::kParse,
         "taxonomy node '" + spec.id + "': \"children\" must be an array");
  }
  for (std::size_t i = 0; i < children->size(); ++i) {
    collect_json((*children)[i], spec.id,
                 where + "/children/" + std::to_string(i), out);
  }
}

std::vector<NodeSpec> parse_json_document(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParse, "taxonomy syntax error at byte " +
                                std::to_string(e.byte) + ": " + e.what());
  }
  std::vector<NodeSpec> nodes;
  collect_json(doc, "", "/", nodes);
  return nodes;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<NodeSpec> parse_indented_document(std::string_view text) {
  std::vector<NodeSpec> nodes;
  std::vector<std::pair<std::size_t, std::string>> stack;  // (indent, id)
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (trim(line).empty()) continue;
    std::size_t indent = 0;
    while (indent < line.size() && line[indent] == ' ') ++indent;
    if (line[indent] == '\t') {
      fail(ErrorKind::kParse, "taxonomy syntax error at line " +
                                  std::to_string(line_no) + " column " +
                                  std::to_string(indent + 1) +
                                  ": tabs are not allowed for indentation");
    }
    std::string body = trim(line);
    NodeSpec spec;
    if (const std::size_t colon = body.find(':'); colon != std::string::npos) {
      spec.id = trim(std::string_view(body).substr(0, colon));
      spec.display_name = trim(std::string_view(body).substr(colon + 1));
      if (spec.id.empty()) {
        fail(ErrorKind::kParse, "taxonomy syntax error at line " +
                                    std::to_string(line_no) + " column " +
                                    std::to_string(indent + 1) +
                                    ": missing id before ':'");
      }
    } else {
      spec.id = body;
    }
    if (spec.display_name.empty()) spec.display_name = spec.id;
    while (!stack.empty() && stack.back().first >= indent) stack.pop_back();
    if (stack.empty()) {
      if (!nodes.empty()) {
        fail(ErrorKind::kParse, "taxonomy syntax error at line " +
                                    std::to_string(line_no) + " column " +
                                    std::to_string(indent + 1) +
                                    ": second top-level node '" + spec.id +
                                    "' (only one root allowed)");
      }
    } else {
      spec.parent = stack.back().second;
    }
    stack.emplace_back(indent, spec.id);
    nodes.push_back(std::move(spec));
  }
  if (nodes.empty()) fail(ErrorKind::kParse, "taxonomy document is empty");
  return nodes;
}

nlohmann::json node_to_json(const Taxonomy& t, std::size_t index) {
  const TaxonomyNode& node = t.node(index);
  nlohmann::json out;
  out["name"] = node.display_name;
  if (node.id != node.display_name) out["id"] = node.id;
  if (!node.children.empty()) {
    nlohmann::json children = nlohmann::json::array();
    for (const std::size_t c : node.children) {
      children.push_back(node_to_json(t, c));
    }
    out["children"] = std::move(children);
  }
  return out;
}

}  // namespace

Taxonomy Taxonomy::from_nodes(std::span<const NodeSpec> specs) {
  if (specs.empty()) fail(ErrorKind::kStructure, "taxonomy has no nodes");
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    check_id(specs[i].id);
    if (!by_id.emplace(specs[i].id, i).second) {
      fail(ErrorKind::kStructure,
           "duplicate taxonomy node id '" + specs[i].id + "'");
    }
  }
  std::size_t root = kNone;
  std::vector<std::vector<std::size_t>> children(specs.size());
  std::vector<std::size_t> parent(specs.size(), kNone);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].parent.empty()) {
      if (root != kNone) {
        fail(ErrorKind::kStructure, "taxonomy has two roots: '" +
                                        specs[root].id + "' and '" +
                                        specs[i].id + "'");
      }
      root = i;
      continue;
    }
    const auto it = by_id.find(specs[i].parent);
    if (it == by_id.end()) {
      fail(ErrorKind::kStructure, "node '" + specs[i].id +
                                      "' names unknown parent '" +
                                      specs[i].parent + "'");
    }
    parent[i] = it->second;
    children[it->second].push_back(i);
  }
  if (root == kNone) {
    fail(ErrorKind::kStructure, "taxonomy has no root (every node has a parent, so the parent links form a cycle)");
  }

  // Pre-order walk from the root; anything unreached sits on a parent cycle.
  std::vector<std::size_t> order;
  std::vector<int> level(specs.size(), -1);
  std::vector<std::size_t> stack = {root};
  level[root] = 0;
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto it = children[n].rbegin(); it != children[n].rend(); ++it) {
      level[*it] = level[n] + 1;
      stack.push_back(*it);
    }
  }
  if (order.size() != specs.size()) {
    std::size_t n = 0;
    while (level[n] >= 0) ++n;
    std::vector<bool> seen(specs.size(), false);
    while (!seen[n]) {
      seen[n] = true;
      n = parent[n];
    }
    fail(ErrorKind::kStructure, "taxonomy parent links form a cycle through '" +
                                    specs[n].id + "'");
  }
  for (const std::size_t n : order) {
    if (children[n].size() == 1) {
      fail(ErrorKind::kStructure,
           "node '" + specs[n].id + "' has a single child ('" +
               specs[children[n][0]].id +
               "'); internal nodes need at least two children");
    }
  }
  if (children[root].empty()) {
    fail(ErrorKind::kStructure, "taxonomy root '" + specs[root].id + "' has no children");
  }

  Taxonomy t;
  std::vector<std::size_t> new_index(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) new_index[order[i]] = i;
  t.nodes_.resize(order.size());
  t.leaf_index_.assign(order.size(), kNone);
  t.group_of_parent_.assign(order.size(), kNone);
  t.child_position_.assign(order.size(), kNone);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t old = order[i];
    TaxonomyNode& node = t.nodes_[i];
    node.id = specs[old].id;
    node.display_name =
        specs[old].display_name.empty() ? specs[old].id : specs[old].display_name;
    if (parent[old] != kNone) node.parent = new_index[parent[old]];
    node.level = level[old];
    node.is_leaf = children[old].empty();
    for (const std::size_t c : children[old]) node.children.push_back(new_index[c]);
    t.index_.emplace(node.id, i);
    t.max_level_ = std::max(t.max_level_, node.level);
  }
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const TaxonomyNode& node = t.nodes_[i];
    if (node.is_leaf) {
      t.leaf_index_[i] = t.leaf_order_.size();
      t.leaf_order_.push_back(i);
      continue;
    }
    const std::size_t g = t.groups_.size();
    t.group_of_parent_[i] = g;
    t.groups_.push_back(SiblingGroup{i, node.children});
    for (std::size_t k = 0; k < node.children.size(); ++k) {
      t.child_position_[node.children[k]] = k;
    }
    t.layout_.segments.push_back(LogitSegment{node.id, node.level + 1,
                                              t.layout_.total_logits,
                                              node.children.size()});
    t.layout_.total_logits += node.children.size();
  }
  return t;
}

std::optional<std::size_t> Taxonomy::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Taxonomy::index_of(std::string_view id) const {
  const auto found = find(id);
  if (!found) {
    fail(ErrorKind::kUnknownNode, "unknown taxonomy node '" + std::string(id) + "'");
  }
  return *found;
}

std::size_t Taxonomy::leaf_index(std::string_view id) const {
  return leaf_index_of_node(index_of(id));
}

std::size_t Taxonomy::leaf_index_of_node(std::size_t node) const {
  if (leaf_index_.at(node) == kNone) {
    fail(ErrorKind::kNotALeaf,
         "taxonomy node '" + nodes_[node].id + "' is internal, not a leaf");
  }
  return leaf_index_[node];
}

std::vector<std::string> Taxonomy::leaf_ids() const {
  std::vector<std::string> ids;
  ids.reserve(leaf_order_.size());
  for (const std::size_t n : leaf_order_) ids.push_back(nodes_[n].id);
  return ids;
}

std::optional<std::size_t> Taxonomy::group_of_parent(std::size_t node) const {
  const std::size_t g = group_of_parent_.at(node);
  if (g == kNone) return std::nullopt;
  return g;
}

std::pair<std::size_t, std::size_t> Taxonomy::group_position(
    std::size_t node) const {
  const auto& parent = nodes_.at(node).parent;
  if (!parent) {
    fail(ErrorKind::kInvalidArgument, "the root belongs to no sibling group");
  }
  return {group_of_parent_[*parent], child_position_[node]};
}

std::string Taxonomy::group_label(std::size_t group) const {
  std::string label;
  for (const std::size_t c : groups_.at(group).children) {
    if (!label.empty()) label += " vs ";
    label += nodes_[c].display_name;
  }
  return label;
}

std::size_t Taxonomy::logit_of_node(std::size_t node) const {
  const auto [group, position] = group_position(node);
  return layout_.segments[group].offset + position;
}

bool Taxonomy::is_ancestor_or_self(std::size_t ancestor, std::size_t node) const {
  std::optional<std::size_t> cur = node;
  while (cur) {
    if (*cur == ancestor) return true;
    cur = nodes_[*cur].parent;
  }
  return false;
}

std::vector<std::size_t> Taxonomy::lineage(std::size_t node,
                                           RootPolicy policy) const {
  std::vector<std::size_t> chain;
  std::optional<std::size_t> cur = node;
  while (cur) {
    if (nodes_.at(*cur).parent || policy == RootPolicy::kInclude) {
      chain.push_back(*cur);
    }
    cur = nodes_[*cur].parent;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::set<std::string> Taxonomy::augmented_set(std::string_view id,
                                              RootPolicy policy) const {
  std::set<std::string> out;
  for (const std::size_t n : lineage(index_of(id), policy)) out.insert(nodes_[n].id);
  return out;
}

PathLabel Taxonomy::leaf_path(std::string_view leaf) const {
  return leaf_path_of(leaf_index(leaf));
}

PathLabel Taxonomy::leaf_path_of(std::size_t leaf_index) const {
  const std::size_t node = leaf_order_.at(leaf_index);
  PathLabel label;
  label.leaf = nodes_[node].id;
  for (const std::size_t n : lineage(node, RootPolicy::kExclude)) {
    label.path.push_back(nodes_[n].id);
  }
  return label;
}

GroupTargets Taxonomy::encode_target(std::string_view leaf) const {
  return encode_target_of(leaf_index(leaf));
}

GroupTargets Taxonomy::encode_target_of(std::size_t leaf_index) const {
  GroupTargets targets(groups_.size());
  for (const std::size_t n : lineage(leaf_order_.at(leaf_index), RootPolicy::kExclude)) {
    const auto [group, position] = group_position(n);
    targets[group] = position;
  }
  return targets;
}

std::string Taxonomy::to_json() const { return node_to_json(*this, 0).dump(2) + "\n"; }

std::string Taxonomy::to_text() const {
  std::ostringstream out;
  for (const TaxonomyNode& node : nodes_) {
    out << std::string(static_cast<std::size_t>(node.level) * 2, ' ') << node.id;
    if (node.display_name != node.id) out << ": " << node.display_name;
    out << "\n";
  }
  return out.str();
}

std::string Taxonomy::fingerprint() const {
  return hex64(fnv1a64(node_to_json(*this, 0).dump()));
}

bool Taxonomy::operator==(const Taxonomy& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TaxonomyNode& a = nodes_[i];
    const TaxonomyNode& b = other.nodes_[i];
    if (a.id != b.id || a.display_name != b.display_name ||
        a.parent != b.parent || a.level != b.level || a.is_leaf != b.is_leaf ||
        a.children != b.children) {
      return false;
    }
  }
  return true;
}

Taxonomy parse_taxonomy(std::string_view text) {
  std::size_t first = 0;
  while (first < text.size() &&
         (text[first] == ' ' || text[first] == '\n' || text[first] == '\r' ||
          text[first] == '\t')) {
    ++first;
  }
  // UTF-8 byte order mark.
  if (text.substr(first, 3) == "\xEF\xBB\xBF") first += 3;
  const bool is_json = first < text.size() && text[first] == '{';
  const std::vector<NodeSpec> specs =
      is_json ? parse_json_document(text.substr(first))
              : parse_indented_document(text.substr(first));
  return Taxonomy::from_nodes(specs);
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(read_file(path));
}

LogitLayout logit_layout(const Taxonomy& taxonomy) { return taxonomy.layout(); }

}  // namespace hierlabel
