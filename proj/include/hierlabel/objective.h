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

#ifndef HIERLABEL_OBJECTIVE_H_
#define HIERLABEL_OBJECTIVE_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hierlabel/taxonomy.h"

namespace hierlabel {

enum class LossKind { kCrossEntropy, kWeightedCrossEntropy, kFocal };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
  LossKind kind = LossKind::kFocal;
  double gamma = 2.0;
  // Per output position (leaf index for flat models, logit index for grouped
  // outputs). Empty means uniform. Ignored for kCrossEntropy; for kFocal the
  // entries act as the per-class alpha.
  std::vector<double> class_weights;
  // Indexed by level - 1. Empty means 1.0 everywhere.
  std::vector<double> level_weights;

  // Throws kInvalidArgument on negative gamma or non-positive weights.
  void validate() const;
};

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d raw scores
};

// Max-subtracted, so large shifts never overflow. Throws on non-finite input.
std::vector<double> softmax(std::span<const double> scores);
std::vector<double> log_softmax(std::span<const double> scores);

// -w[t] * log softmax(s)[t]; gradient w[t] * (softmax(s) - onehot(t)).
// Empty weights mean uniform 1.
LossValue cross_entropy(std::span<const double> scores, std::size_t target,
                        std::span<const double> class_weights = {});

// -alpha_t * (1 - p_t)^gamma * log p_t with p_t = softmax(s)[t]. The
// gradient is closed-form through both factors; gamma = 0 reproduces
// cross_entropy bit-for-bit.
LossValue focal_loss(std::span<const double> scores, std::size_t target,
                     double gamma, std::span<const double> class_weights = {});

// Dispatches on cfg.kind with the given per-class weights.
LossValue classification_loss(std::span<const double> scores,
                              std::size_t target, const LossConfig& cfg,
                              std::span<const double> class_weights);

// Level-isolated hierarchical loss over one grouped score vector. Only
// groups with an active target contribute; the gradient entries of inactive
// groups are never written and stay exactly 0.0. cfg.class_weights, when
// present, is indexed by logit position.
LossValue hierarchical_loss(const LogitLayout& layout,
                            std::span<const double> scores,
                            const GroupTargets& targets, const LossConfig& cfg);

// Largest per-coordinate relative error between `analytic` and central
// differences of `f` at `x`, with denominator max(1, |analytic|, |numeric|).
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> x, std::span<const double> analytic,
                  double h = 1e-5);

}  // namespace hierlabel

#endif  // HIERLABEL_OBJECTIVE_H_
