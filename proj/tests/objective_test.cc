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

#include <cmath>
#include <numeric>

#include "gtest/gtest.h"
#include "hierlabel/error.h"
#include "hierlabel/objective.h"
#include "test_util.h"

namespace hierlabel {
namespace {

using testing::leukemia;
using testing::random_vector;

// Independent focal loss value: -alpha (1 - p)^gamma log p.
double focal_oracle(std::span<const double> s, std::size_t t, double gamma, double alpha) {
  long double max = s[0];
  for (double v : s) max = std::max<long double>(max, v);
  long double z = 0;
  for (double v : s) z += std::exp(static_cast<long double>(v) - max);
  const long double logp = static_cast<long double>(s[t]) - max - std::log(z);
  const long double p = std::exp(logp);
  return static_cast<double>(-alpha * std::pow(1.0L - p, gamma) * logp);
}

TEST(SoftmaxTest, Examples) {
  const std::vector<double> a = softmax(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  const std::vector<double> b = softmax(std::vector<double>{1000.0, 1000.0, 1000.0});
  for (double p : b) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  const std::vector<double> c = softmax(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(c[0], 0.25, 1e-15);
  EXPECT_NEAR(c[1], 0.75, 1e-15);
}

TEST(SoftmaxTest, RejectsNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{0.0, NAN}), Error);
  EXPECT_THROW(softmax(std::vector<double>{0.0, INFINITY}), Error);
}

TEST(SoftmaxTest, ShiftInvariance) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> s = random_vector(rng, 2 + rng.below(6), 3.0);
    const double c = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted = s;
    for (double& v : shifted) v += c;
    const std::vector<double> p = softmax(s), q = softmax(shifted);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
  }
}

TEST(CrossEntropyTest, Examples) {
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.0, 0.0}, 0).loss, std::log(2.0), 1e-15);
  const LossValue sure = cross_entropy(std::vector<double>{60.0, 0.0, 0.0}, 0);
  EXPECT_LT(sure.loss, 1e-20);
  for (double g : sure.grad) EXPECT_LT(std::abs(g), 1e-20);
  EXPECT_THROW(cross_entropy(std::vector<double>{0.0, 0.0}, 2), Error);
}

TEST(CrossEntropyTest, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> s = random_vector(rng, 5, 2.0);
    const std::size_t t = rng.below(5);
    const std::vector<double> w = {0.5, 1.0, 2.0, 1.5, 0.7};
    const LossValue lv = cross_entropy(s, t, w);
    const double err = grad_check(
        [&](std::span<const double> x) { return cross_entropy(x, t, w).loss; }, s, lv.grad);
    EXPECT_LT(err, 1e-6);
  }
}

TEST(FocalTest, KnownValue) {
  // Two equal scores give p_t = 0.5.
  const LossValue lv = focal_loss(std::vector<double>{0.0, 0.0}, 0, 2.0);
  EXPECT_NEAR(lv.loss, 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(lv.loss, 0.173287, 1e-6);
  EXPECT_LT(focal_loss(std::vector<double>{40.0, 0.0}, 0, 2.0).loss, 1e-30);
  EXPECT_THROW(focal_loss(std::vector<double>{0.0, 0.0}, 0, -1.0), Error);
}

TEST(FocalTest, MatchesIndependentFormula) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 2 + rng.below(5);
    const std::vector<double> s = random_vector(rng, n, 3.0);
    const std::size_t t = rng.below(n);
    const double gamma = rng.uniform(0.0, 4.0);
    std::vector<double> w(n);
    for (double& x : w) x = rng.uniform(0.2, 3.0);
    EXPECT_NEAR(focal_loss(s, t, gamma, w).loss, focal_oracle(s, t, gamma, w[t]), 1e-12);
  }
}

TEST(FocalTest, GammaZeroEqualsWeightedCrossEntropy) {
  Rng rng(14);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.below(6);
    const std::vector<double> s = random_vector(rng, n, 4.0);
    const std::size_t t = rng.below(n);
    std::vector<double> w(n);
    for (double& x : w) x = rng.uniform(0.1, 5.0);
    const LossValue f = focal_loss(s, t, 0.0, w);
    const LossValue c = cross_entropy(s, t, w);
    worst = std::max(worst, std::abs(f.loss - c.loss));
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(f.grad[k] - c.grad[k]));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(FocalTest, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  for (const double gamma : {0.5, 1.0, 2.0, 3.0}) {
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> s = random_vector(rng, 4, 2.0);
      const std::size_t t = rng.below(4);
      const LossValue lv = focal_loss(s, t, gamma);
      const double err = grad_check(
          [&](std::span<const double> x) { return focal_loss(x, t, gamma).loss; }, s, lv.grad);
      EXPECT_LT(err, 1e-5) << "gamma " << gamma;
    }
  }
}

TEST(LossPropertyTest, NonNegativeAndGradientSumsToZero) {
  Rng rng(16);
  LossConfig cfg;
  for (int i = 0; i < 600; ++i) {
    cfg.kind = static_cast<LossKind>(i % 3);
    cfg.gamma = rng.uniform(0.0, 3.0);
    const std::size_t n = 2 + rng.below(5);
    const std::vector<double> s = random_vector(rng, n, 3.0);
    const LossValue lv = classification_loss(s, rng.below(n), cfg, {});
    EXPECT_GE(lv.loss, 0.0);
    EXPECT_NEAR(std::accumulate(lv.grad.begin(), lv.grad.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(HierarchicalLossTest, NormalTouchesOnlyLevelOne) {
  const Taxonomy& t = leukemia();
  Rng rng(17);
  const std::vector<double> s = random_vector(rng, 10);
  LossConfig cfg;
  cfg.kind = LossKind::kCrossEntropy;
  const LossValue lv = hierarchical_loss(t.layout(), s, t.encode_target("Normal"), cfg);
  EXPECT_EQ(lv.loss, cross_entropy(std::span(s).subspan(0, 3), 0).loss);
  for (std::size_t i = 3; i < 10; ++i) EXPECT_TRUE(lv.grad[i] == 0.0 && !std::signbit(lv.grad[i]));
}

TEST(HierarchicalLossTest, UniformScoresForAll) {
  const Taxonomy& t = leukemia();
  LossConfig cfg;
  cfg.kind = LossKind::kCrossEntropy;
  const std::vector<double> zeros(10, 0.0);
  const LossValue lv = hierarchical_loss(t.layout(), zeros, t.encode_target("ALL"), cfg);
  EXPECT_NEAR(lv.loss, 2.0 * std::log(3.0) + std::log(2.0), 1e-14);
  EXPECT_NEAR(lv.loss, 2.890372, 1e-6);
}

TEST(HierarchicalLossTest, AdditiveOverActiveGroupsAndIsolated) {
  Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const Taxonomy t = testing::random_taxonomy(rng);
    const LogitLayout& layout = t.layout();
    LossConfig cfg;
    cfg.kind = static_cast<LossKind>(trial % 3);
    cfg.gamma = 1.5;
    cfg.level_weights = {1.0, 0.5, 2.0, 0.75};
    cfg.class_weights.resize(layout.total_logits);
    for (double& w : cfg.class_weights) w = rng.uniform(0.5, 2.0);
    const std::vector<double> s = random_vector(rng, layout.total_logits, 2.0);
    const std::size_t leaf = rng.below(t.leaf_count());
    const GroupTargets targets = t.encode_target_of(leaf);
    const LossValue lv = hierarchical_loss(layout, s, targets, cfg);
    double sum = 0.0;
    for (std::size_t g = 0; g < targets.size(); ++g) {
      const LogitSegment& seg = layout.segments[g];
      if (!targets[g]) {
        for (std::size_t i = 0; i < seg.length; ++i) {
          const double v = lv.grad[seg.offset + i];
          EXPECT_TRUE(v == 0.0 && !std::signbit(v));
        }
        continue;
      }
      const std::span<const double> w(cfg.class_weights.data() + seg.offset, seg.length);
      sum += cfg.level_weights[seg.level - 1] *
             classification_loss(std::span(s).subspan(seg.offset, seg.length), *targets[g],
                                 cfg, w)
                 .loss;
    }
    EXPECT_NEAR(lv.loss, sum, 1e-12);
    const double err = grad_check(
        [&](std::span<const double> x) { return hierarchical_loss(layout, x, targets, cfg).loss; },
        s, lv.grad);
    EXPECT_LT(err, 1e-5);
  }
}

TEST(HierarchicalLossTest, LayoutMismatchRejected) {
  const Taxonomy& t = leukemia();
  EXPECT_THROW(hierarchical_loss(t.layout(), std::vector<double>(9, 0.0),
                                 t.encode_target("ALL"), LossConfig{}),
               Error);
}

TEST(GradCheckTest, Polynomial) {
  const std::vector<double> x = {3.0};
  const std::vector<double> g = {6.0};
  EXPECT_LT(grad_check([](std::span<const double> v) { return v[0] * v[0]; }, x, g), 1e-9);
}

}  // namespace
}  // namespace hierlabel
