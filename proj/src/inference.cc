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

#include "hierlabel/inference.h"

#include <cmath>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"
#include "hierlabel/objective.h"

namespace hierlabel {
namespace {

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t leaves_below(const Taxonomy& t, std::size_t node) {
  std::size_t n = 0;
  for (const std::size_t leaf : t.leaf_order()) {
    if (t.is_ancestor_or_self(node, leaf)) ++n;
  }
  return n;
}

// Largest conditional; exact ties go to the child covering more leaves, then
// to the first in document order.
std::size_t pick_child(const Taxonomy& t, const SiblingGroup& g,
                       std::span<const double> cond) {
  std::size_t best = 0;
  std::size_t best_leaves = leaves_below(t, g.children[0]);
  for (std::size_t i = 1; i < cond.size(); ++i) {
    if (cond[i] < cond[best]) continue;
    const std::size_t leaves = leaves_below(t, g.children[i]);
    if (cond[i] > cond[best] || leaves > best_leaves) {
      best = i;
      best_leaves = leaves;
    }
  }
  return best;
}

void check_grouped(std::span<const double> scores, const Taxonomy& t) {
  if (scores.size() != t.layout().total_logits) {
    fail(ErrorKind::kShapeMismatch,
         "grouped scores have " + std::to_string(scores.size()) +
             " entries, layout expects " +
             std::to_string(t.layout().total_logits));
  }
}

std::vector<std::vector<double>> all_group_probs(
    std::span<const double> scores, const Taxonomy& t) {
  std::vector<std::vector<double>> probs;
  probs.reserve(t.layout().segments.size());
  for (const LogitSegment& seg : t.layout().segments) {
    probs.push_back(softmax(scores.subspan(seg.offset, seg.length)));
  }
  return probs;
}

}  // namespace

std::string to_string(Decoder decoder) {
  return decoder == Decoder::kGreedy ? "greedy" : "marginal";
}

Decoder parse_decoder(std::string_view name) {
  if (name == "greedy") return Decoder::kGreedy;
  if (name == "marginal") return Decoder::kMarginal;
  fail(ErrorKind::kInvalidArgument, "unknown decoder '" + std::string(name) + "'");
}

std::vector<double> node_probabilities(const Taxonomy& t,
                                       std::span<const double> leaf_probs) {
  if (leaf_probs.size() != t.leaf_count()) {
    fail(ErrorKind::kShapeMismatch, "leaf probabilities do not match taxonomy");
  }
  std::vector<double> probs(t.size(), 0.0);
  // Pre-order storage: children follow parents, so a reverse sweep folds
  // every subtree before its parent is read.
  for (std::size_t l = 0; l < t.leaf_count(); ++l) {
    probs[t.leaf_order()[l]] = leaf_probs[l];
  }
  for (std::size_t n = t.size(); n-- > 0;) {
    const TaxonomyNode& node = t.node(n);
    if (node.is_leaf) continue;
    double sum = 0.0;
    for (const std::size_t c : node.children) sum += probs[c];
    probs[n] = sum;
  }
  return probs;
}

Prediction decode_flat(std::span<const double> leaf_scores, const Taxonomy& t) {
  if (leaf_scores.size() != t.leaf_count()) {
    fail(ErrorKind::kShapeMismatch,
         "flat scores have " + std::to_string(leaf_scores.size()) +
             " entries, taxonomy has " + std::to_string(t.leaf_count()) +
             " leaves");
  }
  Prediction p;
  p.leaf_probs = softmax(leaf_scores);
  p.leaf = argmax(p.leaf_probs);
  p.confidence = p.leaf_probs[p.leaf];
  p.path = t.leaf_path_of(p.leaf);
  const std::vector<double> nodes = node_probabilities(t, p.leaf_probs);
  for (const SiblingGroup& group : t.groups()) {
    std::vector<double> cond;
    double total = 0.0;
    for (const std::size_t c : group.children) total += nodes[c];
    for (const std::size_t c : group.children) {
      cond.push_back(total > 0.0 ? nodes[c] / total
                                 : 1.0 / static_cast<double>(group.children.size()));
    }
    p.group_probs.push_back(std::move(cond));
  }
  return p;
}

std::vector<double> leaf_marginals(std::span<const double> grouped_scores,
                                   const Taxonomy& t) {
  check_grouped(grouped_scores, t);
  const auto probs = all_group_probs(grouped_scores, t);
  std::vector<double> out(t.leaf_count());
  for (std::size_t l = 0; l < t.leaf_count(); ++l) {
    double p = 1.0;
    for (const std::size_t n : t.lineage(t.leaf_order()[l], RootPolicy::kExclude)) {
      const auto [group, position] = t.group_position(n);
      p *= probs[group][position];
    }
    out[l] = p;
  }
  return out;
}

Prediction decode_greedy(std::span<const double> grouped_scores,
                         const Taxonomy& t) {
  check_grouped(grouped_scores, t);
  Prediction p;
  p.group_probs = all_group_probs(grouped_scores, t);
  p.leaf_probs = leaf_marginals(grouped_scores, t);
  std::size_t node = 0;
  double confidence = 1.0;
  while (!t.node(node).is_leaf) {
    const std::size_t group = *t.group_of_parent(node);
    const std::vector<double>& cond = p.group_probs[group];
    const std::size_t pick = pick_child(t, t.groups()[group], cond);
    confidence *= cond[pick];
    node = t.groups()[group].children[pick];
  }
  p.leaf = t.leaf_index_of_node(node);
  p.confidence = confidence;
  p.path = t.leaf_path_of(p.leaf);
  return p;
}

Prediction decode_marginal(std::span<const double> grouped_scores,
                           const Taxonomy& t) {
  check_grouped(grouped_scores, t);
  Prediction p;
  p.group_probs = all_group_probs(grouped_scores, t);
  p.leaf_probs = leaf_marginals(grouped_scores, t);
  p.leaf = argmax(p.leaf_probs);
  p.confidence = p.leaf_probs[p.leaf];
  p.path = t.leaf_path_of(p.leaf);
  return p;
}

Prediction decode_grouped(std::span<const double> grouped_scores,
                          const Taxonomy& t, Decoder decoder) {
  return decoder == Decoder::kGreedy ? decode_greedy(grouped_scores, t)
                                     : decode_marginal(grouped_scores, t);
}

Prediction compose_base(const Taxonomy& t,
                        std::span<const Predictor* const> members,
                        std::span<const double> input) {
  if (members.size() != t.groups().size()) {
    fail(ErrorKind::kShapeMismatch,
         "base composition needs " + std::to_string(t.groups().size()) +
             " members, got " + std::to_string(members.size()));
  }
  Prediction p;
  p.group_probs.resize(t.groups().size());
  std::size_t node = 0;
  double confidence = 1.0;
  while (!t.node(node).is_leaf) {
    const std::size_t group = *t.group_of_parent(node);
    const SiblingGroup& g = t.groups()[group];
    const Predictor* member = members[group];
    if (member == nullptr) {
      fail(ErrorKind::kInvalidArgument,
           "no member model for group '" + t.node(g.parent).id + "'");
    }
    const std::vector<double> scores = member->scores(input);
    if (scores.size() != g.children.size()) {
      fail(ErrorKind::kShapeMismatch,
           "member for group '" + t.node(g.parent).id + "' produced " +
               std::to_string(scores.size()) + " scores, expected " +
               std::to_string(g.children.size()));
    }
    p.group_probs[group] = softmax(scores);
    const std::size_t pick = pick_child(t, g, p.group_probs[group]);
    confidence *= p.group_probs[group][pick];
    node = g.children[pick];
  }
  p.leaf = t.leaf_index_of_node(node);
  p.confidence = confidence;
  p.path = t.leaf_path_of(p.leaf);
  return p;
}

PredictionRecord make_record(const Taxonomy& t, std::string sample_id,
                             std::string slide_id, const Prediction& p) {
  PredictionRecord r;
  r.sample_id = std::move(sample_id);
  r.slide_id = std::move(slide_id);
  r.leaf = t.leaf_id(p.leaf);
  r.confidence = p.confidence;
  if (!p.leaf_probs.empty()) {
    const std::vector<double> nodes = node_probabilities(t, p.leaf_probs);
    r.node_probs.assign(nodes.begin() + 1, nodes.end());
  }
  return r;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const Taxonomy& t,
                           std::span<const PredictionRecord> records) {
  CsvTable table;
  table.header = {"sample_id", "slide_id", "decoded_leaf", "confidence"};
  for (std::size_t n = 1; n < t.size(); ++n) {
    table.header.push_back("p_" + t.node(n).id);
  }
  for (const PredictionRecord& r : records) {
    if (r.node_probs.size() != t.size() - 1) {
      fail(ErrorKind::kShapeMismatch,
           "prediction '" + r.sample_id + "' lacks node probabilities");
    }
    CsvRow row = {r.sample_id, r.slide_id, r.leaf, format_double(r.confidence)};
    for (const double v : r.node_probs) row.push_back(format_double(v));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

std::vector<PredictionRecord> read_predictions_csv(
    const std::filesystem::path& path, const Taxonomy& t) {
  const CsvTable table = read_csv(path);
  const std::string source = path.string();
  const std::size_t sample_col = table.column("sample_id", source);
  const std::size_t slide_col = table.column("slide_id", source);
  const std::size_t leaf_col = table.column("decoded_leaf", source);
  const std::size_t conf_col = table.column("confidence", source);
  std::vector<std::size_t> node_cols;
  for (std::size_t n = 1; n < t.size(); ++n) {
    node_cols.push_back(table.column("p_" + t.node(n).id, source));
  }
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const CsvRow& row = table.rows[i];
    const std::string where = source + " row " + std::to_string(i + 1);
    PredictionRecord r;
    r.sample_id = row[sample_col];
    r.slide_id = row[slide_col];
    if (r.slide_id.empty()) {
      fail(ErrorKind::kCorruptFile, where + ": missing slide_id");
    }
    r.leaf = row[leaf_col];
    t.leaf_index(r.leaf);
    r.confidence = parse_double(row[conf_col], where);
    for (const std::size_t c : node_cols) {
      r.node_probs.push_back(parse_double(row[c], where));
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace hierlabel
