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

#ifndef HIERLABEL_METRICS_H_
#define HIERLABEL_METRICS_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierlabel/taxonomy.h"
#include "json.hpp"

namespace hierlabel {

using CountMatrix = std::vector<std::vector<std::size_t>>;

struct ClassScores {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // truth count
};

struct FlatMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;      // over classes present in the truths
  double macro_f1_all = 0.0;  // over every class
  std::vector<ClassScores> per_class;
};

// Entry (i, j) counts samples of truth i predicted as j, in leaf order.
CountMatrix confusion_matrix(std::span<const std::string> preds,
                             std::span<const std::string> truths,
                             const Taxonomy& t);
CountMatrix confusion_from_indices(std::span<const std::size_t> preds,
                                   std::span<const std::size_t> truths,
                                   std::size_t classes);

// Precision, recall and F1 use 0 for 0/0.
FlatMetrics flat_metrics(std::span<const std::string> preds,
                         std::span<const std::string> truths,
                         const Taxonomy& t);
FlatMetrics flat_metrics_from_confusion(const CountMatrix& confusion,
                                        const std::vector<std::string>& labels);

// Mann-Whitney AUROC of `positive_class` against the rest, with midranks
// for tied scores. Requires both positives and negatives.
double auroc_binary(std::span<const double> scores,
                    std::span<const std::size_t> truths,
                    std::size_t positive_class);

struct AurocResult {
  double macro = 0.0;
  std::vector<std::optional<double>> per_class;  // empty when skipped
  std::vector<std::string> skipped;
};

// One-vs-rest AUROC per leaf, averaged over leaves with at least one positive
// and one negative sample. Rows must sum to 1 within 1e-6.
AurocResult auroc_macro(const std::vector<std::vector<double>>& scores,
                        std::span<const std::string> truths, const Taxonomy& t);
AurocResult auroc_macro_indices(const std::vector<std::vector<double>>& scores,
                                std::span<const std::size_t> truths,
                                const Taxonomy& t);

struct HierarchicalScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-summed hierarchical precision, recall and F1 over augmented sets
// (node plus ancestors, root excluded unless requested).
HierarchicalScores hierarchical_prf(std::span<const PathLabel> pred_paths,
                                    std::span<const PathLabel> true_paths,
                                    const Taxonomy& t,
                                    RootPolicy policy = RootPolicy::kExclude);
HierarchicalScores hierarchical_prf_indices(
    std::span<const std::size_t> pred_leaves,
    std::span<const std::size_t> true_leaves, const Taxonomy& t,
    RootPolicy policy = RootPolicy::kExclude);

// Accuracy of one sibling-group decision, restricted to samples whose true
// path passes through the group.
struct StageAccuracy {
  std::string group_id;
  std::string label;  // e.g. "CLL vs CML"
  double accuracy = 0.0;
  std::size_t count = 0;
};

// group_probs[i][g] is sample i's distribution over group g's children.
std::vector<StageAccuracy> stage_accuracies(
    const Taxonomy& t,
    std::span<const std::vector<std::vector<double>>> group_probs,
    std::span<const std::size_t> true_leaves);

// Report-level relabeling of leaves, e.g. {"AML": "AML + APML",
// "APML": "AML + APML"}. Unmapped leaves keep their id.
using MergeMap = std::map<std::string, std::string>;

struct MetricReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_f1_all = 0.0;
  std::vector<ClassScores> per_class;
  std::optional<double> auroc_macro;
  std::vector<std::string> auroc_skipped;
  double h_precision = 0.0;
  double h_recall = 0.0;
  double h_f1 = 0.0;
  std::vector<std::string> labels;
  CountMatrix confusion;
  std::vector<ClassScores> merged_per_class;  // empty without a merge map
};

// leaf_probs may be null (AUROC omitted). AUROC is also omitted when fewer
// than two truth classes are present.
MetricReport evaluate(const Taxonomy& t, std::span<const std::size_t> preds,
                      std::span<const std::size_t> truths,
                      const std::vector<std::vector<double>>* leaf_probs,
                      const MergeMap* merge = nullptr);

std::vector<ClassScores> merged_class_scores(
    const Taxonomy& t, std::span<const std::size_t> preds,
    std::span<const std::size_t> truths, const MergeMap& merge);

nlohmann::json to_json(const MetricReport& report);
std::string render_text(const MetricReport& report);

}  // namespace hierlabel

#endif  // HIERLABEL_METRICS_H_
