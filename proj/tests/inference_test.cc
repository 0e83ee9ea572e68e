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

#include <atomic>
#include <cmath>
#include <deque>
#include <numeric>

#include "gtest/gtest.h"
#include "hierlabel/error.h"
#include "hierlabel/inference.h"
#include "hierlabel/objective.h"
#include "test_util.h"

namespace hierlabel {
namespace {

using testing::leukemia;
using testing::random_vector;

// Returns fixed scores and counts its invocations.
class FixedPredictor : public Predictor {
 public:
  explicit FixedPredictor(std::vector<double> s) : s_(std::move(s)) {}
  std::size_t output_size() const override { return s_.size(); }
  std::vector<double> scores(std::span<const double>) const override {
    ++calls_;
    return s_;
  }
  int calls() const { return calls_; }

 private:
  std::vector<double> s_;
  mutable std::atomic<int> calls_{0};
};

// Leaf marginals by walking each leaf's path through the layout.
std::vector<double> marginal_oracle(const Taxonomy& t, std::span<const double> s) {
  std::vector<double> out;
  for (std::size_t leaf = 0; leaf < t.leaf_count(); ++leaf) {
    double p = 1.0;
    for (const std::string& id : t.leaf_path_of(leaf).path) {
      const std::size_t node = t.index_of(id);
      const auto [g, pos] = t.group_position(node);
      const LogitSegment& seg = t.layout().segments[g];
      double z = 0.0;
      for (std::size_t i = 0; i < seg.length; ++i) z += std::exp(s[seg.offset + i]);
      p *= std::exp(s[seg.offset + pos]) / z;
    }
    out.push_back(p);
  }
  return out;
}

TEST(DecodeFlatTest, DominantScore) {
  const Taxonomy& t = leukemia();
  std::vector<double> s(7, 0.0);
  s[t.leaf_index("CML")] = 10.0;
  const Prediction p = decode_flat(s, t);
  EXPECT_EQ(p.path.leaf, "CML");
  EXPECT_EQ(p.path.path, (std::vector<std::string>{"Leukemia", "Chronic", "CML"}));
}

TEST(DecodeFlatTest, TiesGoToFirstLeaf) {
  const Prediction p = decode_flat(std::vector<double>(7, 1.5), leukemia());
  EXPECT_EQ(p.leaf, 0u);
  EXPECT_EQ(p.path.leaf, "Normal");
  EXPECT_NEAR(p.confidence, 1.0 / 7.0, 1e-15);
}

TEST(DecodeFlatTest, AgreesWithNaiveScan) {
  const Taxonomy& t = leukemia();
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> s = random_vector(rng, 7, 2.0);
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.size(); ++k)
      if (s[k] > s[best]) best = k;
    const Prediction p = decode_flat(s, t);
    EXPECT_EQ(p.leaf, best);
    EXPECT_EQ(p.path.leaf, t.leaf_id(best));
    EXPECT_NEAR(std::accumulate(p.leaf_probs.begin(), p.leaf_probs.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(DecodeFlatTest, WrongSizeRejected) {
  EXPECT_THROW(decode_flat(std::vector<double>(6, 0.0), leukemia()), Error);
}

TEST(DecodeGreedyTest, ShallowLeafStops) {
  const Taxonomy& t = leukemia();
  std::vector<double> s(10, 0.0);
  s[t.logit_of_node(t.index_of("Normal"))] = 5.0;
  const Prediction p = decode_greedy(s, t);
  EXPECT_EQ(p.path.path, std::vector<std::string>{"Normal"});
  EXPECT_EQ(p.path.leaf, "Normal");
}

TEST(DecodeGreedyTest, UniformScores) {
  const Prediction p = decode_greedy(std::vector<double>(10, 0.0), leukemia());
  EXPECT_EQ(p.path.leaf, "ALL");
  EXPECT_NEAR(p.confidence, 1.0 / 18.0, 1e-15);
}

TEST(DecodeGreedyTest, PicksArgmaxPerGroupAndMatchesMarginalWhenAgreeing) {
  const Taxonomy& t = leukemia();
  Rng rng(22);
  int agreeing = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> s = random_vector(rng, 10, 2.0);
    const Prediction g = decode_greedy(s, t);
    const Prediction m = decode_marginal(s, t);
    const std::vector<double> oracle = marginal_oracle(t, s);
    const std::size_t best = static_cast<std::size_t>(
        std::max_element(oracle.begin(), oracle.end()) - oracle.begin());
    EXPECT_EQ(m.leaf, best);
    EXPECT_NEAR(m.confidence, oracle[best], 1e-12);
    EXPECT_NEAR(g.confidence, oracle[g.leaf], 1e-12);
    // Each greedy step takes the largest score of the routed group.
    for (const std::string& id : g.path.path) {
      const auto [group, pos] = t.group_position(t.index_of(id));
      const LogitSegment& seg = t.layout().segments[group];
      for (std::size_t k = 0; k < seg.length; ++k)
        EXPECT_LE(s[seg.offset + k], s[seg.offset + pos]);
    }
    if (g.leaf == best) {
      ++agreeing;
      EXPECT_EQ(g.path, m.path);
    }
  }
  EXPECT_GT(agreeing, 0);
}

TEST(LeafMarginalsTest, UniformScores) {
  const Taxonomy& t = leukemia();
  const std::vector<double> p = leaf_marginals(std::vector<double>(10, 0.0), t);
  const std::vector<double> expected = {1.0 / 3,  1.0 / 3,  1.0 / 18, 1.0 / 18,
                                        1.0 / 18, 1.0 / 12, 1.0 / 12};
  ASSERT_EQ(p.size(), expected.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], expected[i], 1e-15);
}

TEST(LeafMarginalsTest, MatchesPathProductOracleAndSumsToOne) {
  const Taxonomy& t = leukemia();
  Rng rng(23);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> s = random_vector(rng, 10, 4.0);
    const std::vector<double> p = leaf_marginals(s, t);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    if (i % 10 == 0) {
      const std::vector<double> o = marginal_oracle(t, s);
      for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], o[k], 1e-12);
    }
  }
}

TEST(LeafMarginalsTest, DeterministicScoresConcentrate) {
  const Taxonomy& t = leukemia();
  std::vector<double> s(10, -1000.0);
  s[t.logit_of_node(t.index_of("Leukemia"))] = 1000.0;
  s[t.logit_of_node(t.index_of("Chronic"))] = 1000.0;
  s[t.logit_of_node(t.index_of("CLL"))] = 1000.0;
  const std::vector<double> p = leaf_marginals(s, t);
  EXPECT_NEAR(p[t.leaf_index("CLL")], 1.0, 1e-12);
}

TEST(LeafMarginalsTest, RandomTaxonomiesSumToOne) {
  Rng rng(24);
  for (int i = 0; i < 300; ++i) {
    const Taxonomy t = testing::random_taxonomy(rng);
    const std::vector<double> s = random_vector(rng, t.layout().total_logits, 3.0);
    const std::vector<double> p = leaf_marginals(s, t);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    const std::vector<double> nodes = node_probabilities(t, p);
    EXPECT_NEAR(nodes[0], 1.0, 1e-9);
  }
}

TEST(ComposeBaseTest, NormalNeverInvokesOtherMembers) {
  const Taxonomy& t = leukemia();
  FixedPredictor level1({5.0, 0.0, 0.0}), level2({0.0, 0.0}), acute({0.0, 0.0, 0.0}),
      chronic({0.0, 0.0});
  const Predictor* members[] = {&level1, &level2, &acute, &chronic};
  const Prediction p = compose_base(t, members, std::vector<double>{1.0});
  EXPECT_EQ(p.path.leaf, "Normal");
  EXPECT_EQ(level1.calls(), 1);
  EXPECT_EQ(level2.calls(), 0);
  EXPECT_EQ(acute.calls(), 0);
  EXPECT_EQ(chronic.calls(), 0);
  EXPECT_TRUE(p.leaf_probs.empty());
}

TEST(ComposeBaseTest, RoutesToChronicCml) {
  const Taxonomy& t = leukemia();
  FixedPredictor level1({0.0, 0.0, 3.0}), level2({0.0, 2.0}), acute({0.0, 0.0, 0.0}),
      chronic({0.0, 4.0});
  const Predictor* members[] = {&level1, &level2, &acute, &chronic};
  const Prediction p = compose_base(t, members, std::vector<double>{1.0});
  EXPECT_EQ(p.path.leaf, "CML");
  EXPECT_EQ(p.path.path, (std::vector<std::string>{"Leukemia", "Chronic", "CML"}));
  EXPECT_EQ(acute.calls(), 0);
  EXPECT_EQ(chronic.calls(), 1);
}

TEST(ComposeBaseTest, UniformMembers) {
  const Taxonomy& t = leukemia();
  FixedPredictor level1({0.0, 0.0, 0.0}), level2({0.0, 0.0}), acute({0.0, 0.0, 0.0}),
      chronic({0.0, 0.0});
  const Predictor* members[] = {&level1, &level2, &acute, &chronic};
  const Prediction p = compose_base(t, members, std::vector<double>{});
  EXPECT_EQ(p.path.leaf, "ALL");
  EXPECT_NEAR(p.confidence, 1.0 / 18.0, 1e-15);
}

TEST(ComposeBaseTest, EqualsGreedyOnConcatenatedScores) {
  const Taxonomy& t = leukemia();
  Rng rng(25);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> s = random_vector(rng, 10, 2.0);
    std::deque<FixedPredictor> preds;
    for (const LogitSegment& seg : t.layout().segments)
      preds.emplace_back(std::vector<double>(s.begin() + seg.offset,
                                             s.begin() + seg.offset + seg.length));
    std::vector<const Predictor*> members;
    for (const FixedPredictor& p : preds) members.push_back(&p);
    const Prediction a = compose_base(t, members, std::vector<double>{});
    const Prediction b = decode_greedy(s, t);
    EXPECT_EQ(a.path, b.path);
    EXPECT_NEAR(a.confidence, b.confidence, 1e-12);
  }
}

TEST(ComposeBaseTest, MemberSizeMismatchRejected) {
  const Taxonomy& t = leukemia();
  FixedPredictor level1({0.0, 0.0}), level2({0.0, 0.0}), acute({0.0, 0.0, 0.0}),
      chronic({0.0, 0.0});
  const Predictor* members[] = {&level1, &level2, &acute, &chronic};
  EXPECT_THROW(compose_base(t, members, std::vector<double>{}), Error);
  const Predictor* too_few[] = {&level2};
  EXPECT_THROW(compose_base(t, too_few, std::vector<double>{}), Error);
}

TEST(PredictionCsvTest, RoundTrip) {
  const Taxonomy& t = leukemia();
  Rng rng(26);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 20; ++i) {
    const Prediction p = decode_greedy(random_vector(rng, 10, 2.0), t);
    records.push_back(make_record(t, "s/" + std::to_string(i), "s", p));
  }
  const auto path = testing::temp_dir("pred_csv") / "predictions.csv";
  write_predictions_csv(path, t, records);
  const std::vector<PredictionRecord> back = read_predictions_csv(path, t);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].sample_id, records[i].sample_id);
    EXPECT_EQ(back[i].leaf, records[i].leaf);
    EXPECT_EQ(back[i].confidence, records[i].confidence);
    EXPECT_EQ(back[i].node_probs, records[i].node_probs);
  }
}

}  // namespace
}  // namespace hierlabel
