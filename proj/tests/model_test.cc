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
#include <fstream>

#include "gtest/gtest.h"
#include "hierlabel/checkpoint.h"
#include "hierlabel/error.h"
#include "hierlabel/model.h"
#include "hierlabel/objective.h"
#include "hierlabel/optimizer.h"
#include "test_util.h"

namespace hierlabel {
namespace {

using testing::leukemia;
using testing::random_vector;

ModelSpec spec_of(ModelKind kind, std::size_t outputs) {
  ModelSpec s;
  s.kind = kind;
  s.outputs = outputs;
  switch (kind) {
    case ModelKind::kLinear:
      s.input_dim = 5;
      break;
    case ModelKind::kMlp:
      s.input_dim = 5;
      s.hidden = 6;
      break;
    case ModelKind::kTinyCnn:
      s.channels = 3;
      s.height = 8;
      s.width = 8;
      s.conv_channels = {3, 4};
      break;
  }
  return s;
}

Model random_model(const ModelSpec& spec, Rng& rng) {
  Model m(spec);
  for (double& p : m.params()) p = 0.5 * rng.normal();
  return m;
}

// Loss on the model outputs for one sample as a function of the parameters.
double loss_at(const ModelSpec& spec, std::span<const double> params,
               std::span<const double> x, std::size_t target, const LossConfig& cfg) {
  const Model m(spec, std::vector<double>(params.begin(), params.end()));
  return classification_loss(m.forward(x), target, cfg, {}).loss;
}

class ModelGradientTest : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelGradientTest, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(61 + static_cast<int>(GetParam()));
  const ModelSpec spec = spec_of(GetParam(), 4);
  LossConfig cfg;
  cfg.kind = LossKind::kFocal;
  cfg.gamma = 1.0;
  for (int i = 0; i < 20; ++i) {
    const Model m = random_model(spec, rng);
    const std::vector<double> x = random_vector(rng, spec.input_size());
    const std::size_t target = rng.below(4);
    ForwardCache cache;
    const std::vector<double> s = m.forward(x, &cache);
    const LossValue lv = classification_loss(s, target, cfg, {});
    std::vector<double> grad(m.params().size(), 0.0);
    m.backward(cache, lv.grad, grad);
    const double err = grad_check(
        [&](std::span<const double> p) { return loss_at(spec, p, x, target, cfg); },
        m.params(), grad);
    EXPECT_LT(err, 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, ModelGradientTest,
                         ::testing::Values(ModelKind::kLinear, ModelKind::kMlp,
                                           ModelKind::kTinyCnn));

TEST(ModelTest, ParameterCounts) {
  ModelSpec s = spec_of(ModelKind::kLinear, 7);
  EXPECT_EQ(s.parameter_count(), 6u * 7);
  s = spec_of(ModelKind::kMlp, 7);
  EXPECT_EQ(s.parameter_count(), 6u * 6 + 7u * 7);
  s = spec_of(ModelKind::kTinyCnn, 7);
  EXPECT_EQ(s.parameter_count(), 3u * 28 + 4u * 28 + 5u * 7);
  EXPECT_THROW(Model(s, std::vector<double>(3)), Error);
}

TEST(ModelTest, ZeroParametersGiveZeroScores) {
  Rng rng(62);
  for (ModelKind k : {ModelKind::kLinear, ModelKind::kMlp, ModelKind::kTinyCnn}) {
    const Model m(spec_of(k, 3));
    for (double v : m.forward(random_vector(rng, m.spec().input_size()))) EXPECT_EQ(v, 0.0);
  }
}

TEST(ModelTest, LinearOneHotSelectsWeightColumn) {
  Rng rng(63);
  const ModelSpec spec = spec_of(ModelKind::kLinear, 3);
  const Model m = random_model(spec, rng);
  const std::span<const double> p = m.params();
  for (std::size_t j = 0; j < spec.input_dim; ++j) {
    std::vector<double> x(spec.input_dim, 0.0);
    x[j] = 1.0;
    const std::vector<double> s = m.forward(x);
    for (std::size_t o = 0; o < 3; ++o)
      EXPECT_EQ(s[o], p[o * spec.input_dim + j] + p[3 * spec.input_dim + o]);
  }
}

TEST(ModelTest, ForwardIsDeterministic) {
  Rng rng(64);
  const Model m = random_model(spec_of(ModelKind::kTinyCnn, 3), rng);
  const std::vector<double> x(m.spec().input_size(), 0.25);
  EXPECT_EQ(m.forward(x), m.forward(x));
}

TEST(ModelTest, GlorotInitIsSeeded) {
  const ModelSpec spec = spec_of(ModelKind::kMlp, 3);
  Model a(spec), b(spec);
  Rng r1(5), r2(5);
  a.init_glorot(r1);
  b.init_glorot(r2);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  const double bound = std::sqrt(6.0 / (spec.input_dim + spec.hidden));
  for (std::size_t i = 0; i < spec.input_dim * spec.hidden; ++i)
    EXPECT_LE(std::abs(a.params()[i]), bound);
}

TEST(ModelTest, DuplicatedSampleDoublesGradient) {
  Rng rng(65);
  const Model m = random_model(spec_of(ModelKind::kMlp, 3), rng);
  const std::vector<double> x = random_vector(rng, 5);
  ForwardCache cache;
  const LossValue lv = cross_entropy(m.forward(x, &cache), 1);
  std::vector<double> once(m.params().size(), 0.0), twice(m.params().size(), 0.0);
  m.backward(cache, lv.grad, once);
  m.backward(cache, lv.grad, twice);
  m.backward(cache, lv.grad, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice[i], 2.0 * once[i]);
}

TEST(ModelTest, PerfectPredictionHasTinyGradient) {
  const ModelSpec spec = spec_of(ModelKind::kLinear, 2);
  Model m(spec);
  m.params()[2 * spec.input_dim] = 60.0;  // bias of output 0
  const std::vector<double> x(spec.input_dim, 0.3);
  ForwardCache cache;
  const LossValue lv = cross_entropy(m.forward(x, &cache), 0);
  std::vector<double> g(m.params().size(), 0.0);
  m.backward(cache, lv.grad, g);
  double norm = 0.0;
  for (double v : g) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-8);
}

TEST(ModelTest, LastConvOnlyForTinyCnn) {
  Rng rng(66);
  const Model lin = random_model(spec_of(ModelKind::kLinear, 2), rng);
  EXPECT_THROW(lin.last_conv(std::vector<double>(5, 0.0), std::vector<double>{1.0, 0.0}),
               Error);
  const Model cnn = random_model(spec_of(ModelKind::kTinyCnn, 2), rng);
  const ConvActivation a =
      cnn.last_conv(random_vector(rng, cnn.spec().input_size()), std::vector<double>{1.0, 0.0});
  EXPECT_EQ(a.channels, 4u);
  EXPECT_EQ(a.height, 4u);
  EXPECT_EQ(a.width, 4u);
  for (double v : a.activation) EXPECT_GE(v, 0.0);
}

TEST(ModelTest, LastConvIsHomogeneousWithHead) {
  Rng rng(67);
  const Model cnn = random_model(spec_of(ModelKind::kTinyCnn, 2), rng);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x = random_vector(rng, cnn.spec().input_size());
    const ConvActivation a = cnn.last_conv(x, std::vector<double>{1.0, 0.0});
    ForwardCache cache;
    const std::vector<double> s = cnn.forward(x, &cache);
    ASSERT_EQ(a.activation, cache.conv2);
    // Pooling and averaging are positively homogeneous, so the activation
    // weighted by its gradient recovers the score minus the bias.
    double dot = 0.0;
    for (std::size_t k = 0; k < a.activation.size(); ++k) dot += a.activation[k] * a.gradient[k];
    const double bias = cnn.params()[cnn.params().size() - 2];
    EXPECT_NEAR(dot, s[0] - bias, 1e-12);
  }
}

TEST(ModelSpecTest, ValidationAndJson) {
  ModelSpec s = spec_of(ModelKind::kTinyCnn, 3);
  EXPECT_EQ(model_spec_from_json(to_json(s)), s);
  s.height = 3;
  EXPECT_THROW(s.validate(), Error);
  s = spec_of(ModelKind::kTinyCnn, 3);
  s.conv_channels = {4};
  EXPECT_THROW(s.validate(), Error);
  EXPECT_THROW(parse_model_kind("resnet"), Error);
}

TEST(AdamWTest, FirstStepMovesByLearningRate) {
  std::vector<double> p = {1.0};
  const std::vector<double> g = {2.0};
  AdamWState st(1);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  adamw_step(p, g, st, cfg);
  EXPECT_NEAR(p[0], 1.0 - 0.1 * (2.0 / (2.0 + 1e-8)), 1e-15);
  EXPECT_NEAR(p[0], 0.9, 1e-8);
  EXPECT_EQ(st.step, 1u);
}

TEST(AdamWTest, DecayWithZeroGradient) {
  std::vector<double> p = {2.0, -3.0};
  const std::vector<double> g = {0.0, 0.0};
  AdamWState st(2);
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.5;
  for (int i = 1; i <= 5; ++i) {
    const std::vector<double> before = p;
    adamw_step(p, g, st, cfg);
    EXPECT_NEAR(p[0], before[0] * (1.0 - 0.005), 1e-15);
    EXPECT_NEAR(p[1], before[1] * (1.0 - 0.005), 1e-15);
  }
}

TEST(AdamWTest, SameInputsSameTrajectory) {
  Rng rng(68);
  const std::vector<double> start = random_vector(rng, 20);
  std::vector<std::vector<double>> grads;
  for (int i = 0; i < 30; ++i) grads.push_back(random_vector(rng, 20));
  auto run = [&] {
    std::vector<double> p = start;
    AdamWState st(p.size());
    for (const auto& g : grads) adamw_step(p, g, st, AdamWConfig{});
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(AdamWTest, RejectsBadConfigAndShapes) {
  AdamWConfig cfg;
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  std::vector<double> p(2);
  AdamWState st(3);
  EXPECT_THROW(adamw_step(p, std::vector<double>(2), st, AdamWConfig{}), Error);
}

Checkpoint sample_checkpoint(Rng& rng) {
  const Taxonomy& t = leukemia();
  Checkpoint c;
  c.spec = spec_of(ModelKind::kMlp, 10);
  c.output = OutputKind::kHierarchical;
  c.taxonomy_fingerprint = t.fingerprint();
  c.params = random_vector(rng, c.spec.parameter_count());
  c.params[0] = -0.0;
  c.params[1] = 1e-310;
  c.training = {{"mode", "hier_multilabel"}, {"final_epoch", 3}};
  return c;
}

TEST(CheckpointTest, ByteRoundTrip) {
  Rng rng(69);
  const Checkpoint c = sample_checkpoint(rng);
  const std::string bytes = encode_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 8), "HLCKPT01");
  const Checkpoint back = decode_checkpoint(bytes, "mem");
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_TRUE(std::signbit(back.params[0]));

  const auto path = testing::temp_dir("ckpt") / "model.ckpt";
  save_checkpoint(c, path);
  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(encode_checkpoint(loaded), bytes);
  check_compatible(loaded, leukemia());
}

TEST(CheckpointTest, TruncationNamesByteCounts) {
  Rng rng(70);
  const Checkpoint c = sample_checkpoint(rng);
  const std::string bytes = encode_checkpoint(c);
  const std::size_t want = 8 * c.params.size();
  try {
    decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 5), "cut");
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCorruptFile);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected " + std::to_string(want) + " parameter bytes, found " +
                       std::to_string(want - 5)),
              std::string::npos)
        << msg;
  }
  EXPECT_THROW(decode_checkpoint("HLCKPT02", "magic"), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), Error);
}

TEST(CheckpointTest, FingerprintAndShapeMismatchRejected) {
  Rng rng(71);
  Checkpoint c = sample_checkpoint(rng);
  const Taxonomy other = testing::two_leaf();
  EXPECT_THROW(check_compatible(c, other), Error);
  c.output = OutputKind::kFlat;  // 7 outputs expected, 10 present
  EXPECT_THROW(check_compatible(c, leukemia()), Error);
  EXPECT_EQ(expected_outputs(leukemia(), OutputKind::kGroupMember, "Chronic"), 2u);
  EXPECT_EQ(expected_outputs(leukemia(), OutputKind::kFlat, ""), 7u);
}

}  // namespace
}  // namespace hierlabel
