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

#include "hierlabel/objective.h"

#include <algorithm>
#include <cmath>

#include "hierlabel/error.h"

namespace hierlabel {
namespace {

void check_scores(std::span<const double> scores) {
  if (scores.empty()) fail(ErrorKind::kShapeMismatch, "empty score vector");
  for (const double s : scores) {
    if (!std::isfinite(s)) {
      fail(ErrorKind::kInvalidArgument, "non-finite score");
    }
  }
}

void check_target(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) {
    fail(ErrorKind::kInvalidArgument,
         "target " + std::to_string(target) + " out of range for " +
             std::to_string(scores.size()) + " classes");
  }
}

double weight_at(std::span<const double> weights, std::size_t target) {
  if (weights.empty()) return 1.0;
  return weights[target];
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy:
      return "cross_entropy";
    case LossKind::kWeightedCrossEntropy:
      return "weighted_cross_entropy";
    case LossKind::kFocal:
      return "focal";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "weighted_cross_entropy") return LossKind::kWeightedCrossEntropy;
  if (name == "focal") return LossKind::kFocal;
  fail(ErrorKind::kInvalidArgument, "unknown loss kind '" + std::string(name) + "'");
}

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    fail(ErrorKind::kInvalidArgument, "focal gamma must be >= 0");
  }
  for (const double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      fail(ErrorKind::kInvalidArgument, "class weights must be positive");
    }
  }
  for (const double w : level_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      fail(ErrorKind::kInvalidArgument, "level weights must be positive");
    }
  }
}

std::vector<double> log_softmax(std::span<const double> scores) {
  check_scores(scores);
  const double max = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (const double s : scores) sum += std::exp(s - max);
  const double log_norm = max + std::log(sum);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - log_norm;
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  check_scores(scores);
  const double max = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

LossValue cross_entropy(std::span<const double> scores, std::size_t target,
                        std::span<const double> class_weights) {
  check_target(scores, target);
  const double w = weight_at(class_weights, target);
  const std::vector<double> logp = log_softmax(scores);
  LossValue out;
  out.loss = -w * logp[target];
  out.grad.resize(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double p = std::exp(logp[j]);
    out.grad[j] = w * (p - (j == target ? 1.0 : 0.0));
  }
  return out;
}

LossValue focal_loss(std::span<const double> scores, std::size_t target,
                     double gamma, std::span<const double> class_weights) {
  check_target(scores, target);
  if (!(gamma >= 0.0)) fail(ErrorKind::kInvalidArgument, "focal gamma must be >= 0");
  const double alpha = weight_at(class_weights, target);
  const std::vector<double> logp = log_softmax(scores);
  std::vector<double> p(scores.size());
  // 1 - p_t as the sum of the other probabilities: exact when p_t -> 1.
  double rest = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    p[j] = std::exp(logp[j]);
    if (j != target) rest += p[j];
  }
  const double log_pt = logp[target];
  const double pt = p[target];

  LossValue out;
  out.grad.resize(scores.size());
  if (gamma == 0.0) {
    out.loss = -alpha * log_pt;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      out.grad[j] = alpha * (p[j] - (j == target ? 1.0 : 0.0));
    }
    return out;
  }
  const double modulator = std::pow(rest, gamma);
  out.loss = -alpha * modulator * log_pt;
  // dL/ds_j = F * (p_j - [j == t]),
  // F = alpha * ((1-p_t)^gamma - gamma * (1-p_t)^(gamma-1) * p_t * log p_t).
  double factor = 0.0;
  if (rest > 0.0) {
    factor = alpha * (modulator -
                      gamma * std::pow(rest, gamma - 1.0) * pt * log_pt);
  }
  for (std::size_t j = 0; j < scores.size(); ++j) {
    out.grad[j] = factor * (p[j] - (j == target ? 1.0 : 0.0));
  }
  return out;
}

LossValue classification_loss(std::span<const double> scores,
                              std::size_t target, const LossConfig& cfg,
                              std::span<const double> class_weights) {
  switch (cfg.kind) {
    case LossKind::kCrossEntropy:
      return cross_entropy(scores, target);
    case LossKind::kWeightedCrossEntropy:
      return cross_entropy(scores, target, class_weights);
    case LossKind::kFocal:
      return focal_loss(scores, target, cfg.gamma, class_weights);
  }
  fail(ErrorKind::kInternal, "unhandled loss kind");
}

LossValue hierarchical_loss(const LogitLayout& layout,
                            std::span<const double> scores,
                            const GroupTargets& targets,
                            const LossConfig& cfg) {
  if (scores.size() != layout.total_logits) {
    fail(ErrorKind::kShapeMismatch,
         "grouped scores have " + std::to_string(scores.size()) +
             " entries, layout expects " + std::to_string(layout.total_logits));
  }
  if (targets.size() != layout.segments.size()) {
    fail(ErrorKind::kShapeMismatch,
         "targets cover " + std::to_string(targets.size()) +
             " groups, layout has " + std::to_string(layout.segments.size()));
  }
  if (!cfg.class_weights.empty() &&
      cfg.class_weights.size() != layout.total_logits) {
    fail(ErrorKind::kShapeMismatch, "class weights do not match the layout");
  }
  LossValue out;
  out.grad.assign(scores.size(), 0.0);
  for (std::size_t g = 0; g < layout.segments.size(); ++g) {
    if (!targets[g]) continue;
    const LogitSegment& seg = layout.segments[g];
    if (*targets[g] >= seg.length) {
      fail(ErrorKind::kInvalidArgument,
           "target " + std::to_string(*targets[g]) + " outside group '" +
               seg.group_id + "'");
    }
    double level_weight = 1.0;
    if (!cfg.level_weights.empty()) {
      if (static_cast<std::size_t>(seg.level) > cfg.level_weights.size()) {
        fail(ErrorKind::kInvalidArgument,
             "no level weight for level " + std::to_string(seg.level));
      }
      level_weight = cfg.level_weights[static_cast<std::size_t>(seg.level) - 1];
    }
    std::span<const double> weights;
    if (!cfg.class_weights.empty()) {
      weights = std::span<const double>(cfg.class_weights).subspan(seg.offset, seg.length);
    }
    const LossValue part = classification_loss(
        scores.subspan(seg.offset, seg.length), *targets[g], cfg, weights);
    out.loss += level_weight * part.loss;
    for (std::size_t j = 0; j < seg.length; ++j) {
      out.grad[seg.offset + j] = level_weight * part.grad[j];
    }
  }
  return out;
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> x, std::span<const double> analytic,
                  double h) {
  if (x.size() != analytic.size()) {
    fail(ErrorKind::kShapeMismatch, "gradient length differs from point");
  }
  if (!(h > 0.0)) fail(ErrorKind::kInvalidArgument, "step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * h);
    const double denom =
        std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace hierlabel
