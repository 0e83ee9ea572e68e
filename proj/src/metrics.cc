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

#include "hierlabel/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"

namespace hierlabel {
namespace {

void check_lengths(std::size_t preds, std::size_t truths) {
  if (preds != truths) {
    fail(ErrorKind::kShapeMismatch,
         "predictions (" + std::to_string(preds) + ") and truths (" +
             std::to_string(truths) + ") differ in length");
  }
  if (preds == 0) fail(ErrorKind::kInvalidArgument, "no samples to evaluate");
}

std::vector<std::size_t> to_indices(std::span<const std::string> ids,
                                    const Taxonomy& t) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) out.push_back(t.leaf_index(id));
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double a, double b) {
  return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

nlohmann::json class_scores_json(const std::vector<ClassScores>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const ClassScores& c : rows) {
    out.push_back({{"class", c.label},
                   {"precision", c.precision},
                   {"recall", c.recall},
                   {"f1", c.f1},
                   {"support", c.support}});
  }
  return out;
}

void render_class_table(std::ostringstream& out,
                        const std::vector<ClassScores>& rows) {
  std::size_t width = 5;
  for (const ClassScores& c : rows) width = std::max(width, c.label.size());
  out << pad("Class", width) << "  Precision  Recall     F1  Support\n";
  for (const ClassScores& c : rows) {
    out << pad(c.label, width) << "  " << pad_left(format_fixed(c.precision, 2), 9)
        << "  " << pad_left(format_fixed(c.recall, 2), 6) << "  "
        << pad_left(format_fixed(c.f1, 2), 5) << "  "
        << pad_left(std::to_string(c.support), 7) << "\n";
  }
}

}  // namespace

CountMatrix confusion_from_indices(std::span<const std::size_t> preds,
                                   std::span<const std::size_t> truths,
                                   std::size_t classes) {
  check_lengths(preds.size(), truths.size());
  CountMatrix m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= classes || truths[i] >= classes) {
      fail(ErrorKind::kInvalidArgument, "class index out of range");
    }
    ++m[truths[i]][preds[i]];
  }
  return m;
}

CountMatrix confusion_matrix(std::span<const std::string> preds,
                             std::span<const std::string> truths,
                             const Taxonomy& t) {
  check_lengths(preds.size(), truths.size());
  const auto p = to_indices(preds, t);
  const auto y = to_indices(truths, t);
  return confusion_from_indices(p, y, t.leaf_count());
}

FlatMetrics flat_metrics_from_confusion(const CountMatrix& confusion,
                                        const std::vector<std::string>& labels) {
  const std::size_t k = confusion.size();
  FlatMetrics out;
  std::size_t total = 0, correct = 0;
  std::vector<std::size_t> predicted(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      total += confusion[i][j];
      predicted[j] += confusion[i][j];
    }
    correct += confusion[i][i];
  }
  out.accuracy = ratio(correct, total);
  double present_sum = 0.0, all_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t support =
        std::accumulate(confusion[i].begin(), confusion[i].end(), std::size_t{0});
    ClassScores c;
    c.label = labels.at(i);
    c.support = support;
    c.precision = ratio(confusion[i][i], predicted[i]);
    c.recall = ratio(confusion[i][i], support);
    c.f1 = harmonic(c.precision, c.recall);
    all_sum += c.f1;
    if (support > 0) {
      present_sum += c.f1;
      ++present;
    }
    out.per_class.push_back(c);
  }
  out.macro_f1 = present == 0 ? 0.0 : present_sum / static_cast<double>(present);
  out.macro_f1_all = k == 0 ? 0.0 : all_sum / static_cast<double>(k);
  return out;
}

FlatMetrics flat_metrics(std::span<const std::string> preds,
                         std::span<const std::string> truths,
                         const Taxonomy& t) {
  return flat_metrics_from_confusion(confusion_matrix(preds, truths, t),
                                     t.leaf_ids());
}

double auroc_binary(std::span<const double> scores,
                    std::span<const std::size_t> truths,
                    std::size_t positive_class) {
  if (scores.size() != truths.size()) {
    fail(ErrorKind::kShapeMismatch, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j+1 share their mean.
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (truths[order[k]] == positive_class) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    fail(ErrorKind::kInvalidArgument, "AUROC needs positive and negative samples");
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

AurocResult auroc_macro_indices(const std::vector<std::vector<double>>& scores,
                                std::span<const std::size_t> truths,
                                const Taxonomy& t) {
  check_lengths(scores.size(), truths.size());
  const std::size_t k = t.leaf_count();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != k) {
      fail(ErrorKind::kShapeMismatch,
           "score row " + std::to_string(i) + " has " +
               std::to_string(scores[i].size()) + " columns, expected " +
               std::to_string(k));
    }
    const double sum = std::accumulate(scores[i].begin(), scores[i].end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6) {
      fail(ErrorKind::kInvalidArgument,
           "score row " + std::to_string(i) + " sums to " + format_double(sum));
    }
  }
  std::vector<bool> seen(k, false);
  std::size_t distinct = 0;
  for (const std::size_t y : truths) {
    if (y >= k) fail(ErrorKind::kInvalidArgument, "truth index out of range");
    if (!seen[y]) {
      seen[y] = true;
      ++distinct;
    }
  }
  if (distinct < 2) {
    fail(ErrorKind::kInvalidArgument,
         "AUROC needs at least two distinct truth classes");
  }
  AurocResult out;
  out.per_class.resize(k);
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> column(scores.size());
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      column[i] = scores[i][c];
      n_pos += truths[i] == c;
    }
    if (n_pos == 0 || n_pos == scores.size()) {
      out.skipped.push_back(t.leaf_id(c));
      continue;
    }
    const double auc = auroc_binary(column, truths, c);
    out.per_class[c] = auc;
    sum += auc;
    ++used;
  }
  out.macro = sum / static_cast<double>(used);
  return out;
}

AurocResult auroc_macro(const std::vector<std::vector<double>>& scores,
                        std::span<const std::string> truths,
                        const Taxonomy& t) {
  const auto y = to_indices(truths, t);
  return auroc_macro_indices(scores, y, t);
}

HierarchicalScores hierarchical_prf_indices(
    std::span<const std::size_t> pred_leaves,
    std::span<const std::size_t> true_leaves, const Taxonomy& t,
    RootPolicy policy) {
  check_lengths(pred_leaves.size(), true_leaves.size());
  std::size_t overlap = 0, pred_total = 0, true_total = 0;
  for (std::size_t i = 0; i < pred_leaves.size(); ++i) {
    const auto p = t.lineage(t.leaf_order().at(pred_leaves[i]), policy);
    const auto y = t.lineage(t.leaf_order().at(true_leaves[i]), policy);
    // Both chains run top-down from the same level, so their intersection
    // is the common prefix.
    std::size_t common = 0;
    while (common < p.size() && common < y.size() && p[common] == y[common]) {
      ++common;
    }
    overlap += common;
    pred_total += p.size();
    true_total += y.size();
  }
  HierarchicalScores out;
  out.precision = ratio(overlap, pred_total);
  out.recall = ratio(overlap, true_total);
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

HierarchicalScores hierarchical_prf(std::span<const PathLabel> pred_paths,
                                    std::span<const PathLabel> true_paths,
                                    const Taxonomy& t, RootPolicy policy) {
  check_lengths(pred_paths.size(), true_paths.size());
  auto resolve = [&t](const PathLabel& label) {
    const std::optional<std::size_t> node = t.find(label.leaf);
    if (!node || !t.node(*node).is_leaf || t.leaf_path(label.leaf) != label) {
      fail(ErrorKind::kInvalidArgument,
           "path for '" + label.leaf + "' is not from this taxonomy");
    }
    return t.leaf_index_of_node(*node);
  };
  std::vector<std::size_t> p, y;
  for (const PathLabel& l : pred_paths) p.push_back(resolve(l));
  for (const PathLabel& l : true_paths) y.push_back(resolve(l));
  return hierarchical_prf_indices(p, y, t, policy);
}

std::vector<StageAccuracy> stage_accuracies(
    const Taxonomy& t,
    std::span<const std::vector<std::vector<double>>> group_probs,
    std::span<const std::size_t> true_leaves) {
  check_lengths(group_probs.size(), true_leaves.size());
  std::vector<StageAccuracy> out;
  for (std::size_t g = 0; g < t.groups().size(); ++g) {
    StageAccuracy stage;
    stage.group_id = t.node(t.groups()[g].parent).id;
    stage.label = t.group_label(g);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < true_leaves.size(); ++i) {
      const GroupTargets target = t.encode_target_of(true_leaves[i]);
      if (!target[g]) continue;
      const std::vector<double>& probs = group_probs[i].at(g);
      if (probs.size() != t.groups()[g].children.size()) {
        fail(ErrorKind::kShapeMismatch,
             "missing probabilities for group '" + stage.group_id + "'");
      }
      const std::size_t pick = static_cast<std::size_t>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
      ++stage.count;
      correct += pick == *target[g];
    }
    stage.accuracy = ratio(correct, stage.count);
    out.push_back(stage);
  }
  return out;
}

std::vector<ClassScores> merged_class_scores(
    const Taxonomy& t, std::span<const std::size_t> preds,
    std::span<const std::size_t> truths, const MergeMap& merge) {
  std::vector<std::string> labels;
  std::vector<std::size_t> class_of_leaf(t.leaf_count());
  for (std::size_t l = 0; l < t.leaf_count(); ++l) {
    const std::string& id = t.leaf_id(l);
    const auto it = merge.find(id);
    const std::string label = it == merge.end() ? id : it->second;
    const auto found = std::find(labels.begin(), labels.end(), label);
    class_of_leaf[l] = static_cast<std::size_t>(found - labels.begin());
    if (found == labels.end()) labels.push_back(label);
  }
  for (const auto& [leaf, label] : merge) t.leaf_index(leaf);
  std::vector<std::size_t> p, y;
  for (const std::size_t v : preds) p.push_back(class_of_leaf.at(v));
  for (const std::size_t v : truths) y.push_back(class_of_leaf.at(v));
  return flat_metrics_from_confusion(confusion_from_indices(p, y, labels.size()),
                                     labels)
      .per_class;
}

MetricReport evaluate(const Taxonomy& t, std::span<const std::size_t> preds,
                      std::span<const std::size_t> truths,
                      const std::vector<std::vector<double>>* leaf_probs,
                      const MergeMap* merge) {
  check_lengths(preds.size(), truths.size());
  MetricReport r;
  r.samples = preds.size();
  r.labels = t.leaf_ids();
  r.confusion = confusion_from_indices(preds, truths, t.leaf_count());
  const FlatMetrics flat = flat_metrics_from_confusion(r.confusion, r.labels);
  r.accuracy = flat.accuracy;
  r.macro_f1 = flat.macro_f1;
  r.macro_f1_all = flat.macro_f1_all;
  r.per_class = flat.per_class;
  const HierarchicalScores h = hierarchical_prf_indices(preds, truths, t);
  r.h_precision = h.precision;
  r.h_recall = h.recall;
  r.h_f1 = h.f1;
  if (leaf_probs != nullptr) {
    std::size_t distinct = 0;
    std::vector<bool> seen(t.leaf_count(), false);
    for (const std::size_t y : truths) {
      if (!seen.at(y)) {
        seen[y] = true;
        ++distinct;
      }
    }
    if (distinct >= 2) {
      const AurocResult auc = auroc_macro_indices(*leaf_probs, truths, t);
      r.auroc_macro = auc.macro;
      r.auroc_skipped = auc.skipped;
    }
  }
  if (merge != nullptr && !merge->empty()) {
    r.merged_per_class = merged_class_scores(t, preds, truths, *merge);
  }
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json out;
  out["samples"] = r.samples;
  out["accuracy"] = r.accuracy;
  out["macro_f1"] = r.macro_f1;
  out["macro_f1_all_classes"] = r.macro_f1_all;
  out["macro_f1_averaging"] = "classes present in truth";
  out["per_class"] = class_scores_json(r.per_class);
  out["auroc_macro"] =
      r.auroc_macro ? nlohmann::json(*r.auroc_macro) : nlohmann::json(nullptr);
  out["auroc_averaging"] = "macro one-vs-rest";
  out["auroc_skipped"] = r.auroc_skipped;
  out["h_precision"] = r.h_precision;
  out["h_recall"] = r.h_recall;
  out["h_f1"] = r.h_f1;
  out["confusion_labels"] = r.labels;
  out["confusion"] = r.confusion;
  if (!r.merged_per_class.empty()) {
    out["merged_per_class"] = class_scores_json(r.merged_per_class);
  }
  return out;
}

std::string render_text(const MetricReport& r) {
  std::ostringstream out;
  out << "samples   " << r.samples << "\n";
  out << "ACC       " << format_fixed(100.0 * r.accuracy, 2) << "\n";
  out << "F1        " << format_fixed(100.0 * r.macro_f1, 2)
      << "  (macro over classes present; all classes "
      << format_fixed(100.0 * r.macro_f1_all, 2) << ")\n";
  out << "AUROC     "
      << (r.auroc_macro ? format_fixed(100.0 * *r.auroc_macro, 2) : "n/a")
      << "\n";
  out << "hP / hR / hF  " << format_fixed(r.h_precision, 4) << " / "
      << format_fixed(r.h_recall, 4) << " / " << format_fixed(r.h_f1, 4) << "\n\n";
  render_class_table(out, r.per_class);
  if (!r.merged_per_class.empty()) {
    out << "\nMerged classes\n";
    render_class_table(out, r.merged_per_class);
  }
  out << "\nConfusion (rows truth, columns prediction)\n";
  std::size_t width = 4;
  for (const std::string& l : r.labels) width = std::max(width, l.size());
  out << pad("", width);
  for (const std::string& l : r.labels) out << " " << pad_left(l, width);
  out << "\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    out << pad(r.labels[i], width);
    for (const std::size_t v : r.confusion[i]) {
      out << " " << pad_left(std::to_string(v), width);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hierlabel
