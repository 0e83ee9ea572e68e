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

#ifndef HIERLABEL_INFERENCE_H_
#define HIERLABEL_INFERENCE_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierlabel/taxonomy.h"

namespace hierlabel {

struct Prediction {
  PathLabel path;
  std::size_t leaf = 0;  // class index in leaf_order
  double confidence = 0.0;
  // Probability per leaf in leaf_order. Empty only for compose_base, which
  // never evaluates members off the routed path.
  std::vector<double> leaf_probs;
  // Conditional distribution per sibling group (group order). Groups that
  // were not evaluated hold an empty vector.
  std::vector<std::vector<double>> group_probs;
};

enum class Decoder { kGreedy, kMarginal };

std::string to_string(Decoder decoder);
Decoder parse_decoder(std::string_view name);

// Argmax over leaf scores; ties go to the lowest leaf index. group_probs holds
// each group's children marginals renormalized within the group.
Prediction decode_flat(std::span<const double> leaf_scores, const Taxonomy& t);

// Top-down argmax per sibling group starting at the root group. Exact ties go
// to the child whose subtree holds more leaves, then to the first child.
// confidence is the product of the chosen conditional probabilities.
Prediction decode_greedy(std::span<const double> grouped_scores,
                         const Taxonomy& t);

// Leaf with the largest exact marginal (product of on-path conditionals).
Prediction decode_marginal(std::span<const double> grouped_scores,
                           const Taxonomy& t);

Prediction decode_grouped(std::span<const double> grouped_scores,
                          const Taxonomy& t, Decoder decoder);

// p(leaf) = product over on-path groups of softmax(group)[on-path child].
std::vector<double> leaf_marginals(std::span<const double> grouped_scores,
                                   const Taxonomy& t);

// Probability of every node (index = node index; root = 1) as the sum of the
// probabilities of its descendant leaves.
std::vector<double> node_probabilities(const Taxonomy& t,
                                       std::span<const double> leaf_probs);

// Score function behind one trained model. Implementations must be safe for
// concurrent const calls.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t output_size() const = 0;
  virtual std::vector<double> scores(std::span<const double> input) const = 0;
};

// The four-model "base" composition, generalized to one predictor per sibling
// group (group order). Starting at the root group, the member for the current
// group picks a child; internal children hand over to their own group's
// member. Members off the routed path are never invoked.
Prediction compose_base(const Taxonomy& t,
                        std::span<const Predictor* const> members,
                        std::span<const double> input);

// One row of the prediction CSV.
struct PredictionRecord {
  std::string sample_id;
  std::string slide_id;
  std::string leaf;
  double confidence = 0.0;
  std::vector<double> node_probs;  // non-root nodes in pre-order
};

PredictionRecord make_record(const Taxonomy& t, std::string sample_id,
                             std::string slide_id, const Prediction& p);

// Columns: sample_id, slide_id, decoded_leaf, confidence, p_<node>...
void write_predictions_csv(const std::filesystem::path& path,
                           const Taxonomy& t,
                           std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions_csv(
    const std::filesystem::path& path, const Taxonomy& t);

}  // namespace hierlabel

#endif  // HIERLABEL_INFERENCE_H_
