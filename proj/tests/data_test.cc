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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "gtest/gtest.h"
#include "hierlabel/data.h"
#include "hierlabel/error.h"
#include "test_util.h"

namespace hierlabel {
namespace {

using testing::leukemia;

GenConfig small_features(std::uint64_t seed = 7) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.slides_per_leaf = 3;
  cfg.patches_min = 2;
  cfg.patches_max = 5;
  cfg.feature_dim = 6;
  return cfg;
}

GenConfig small_images() {
  GenConfig cfg = small_features();
  cfg.mode = DataMode::kImages;
  cfg.slides_per_leaf = 2;
  cfg.patches_min = cfg.patches_max = 3;
  cfg.height = 32;
  cfg.width = 40;
  return cfg;
}

// Random label-only dataset for split tests.
Dataset random_slides(Rng& rng) {
  Dataset ds;
  const std::size_t leaves = 1 + rng.below(7);
  const std::size_t n = 2 + rng.below(60);
  for (std::size_t i = 0; i < n; ++i) {
    SlideRecord s;
    s.slide_id = "s" + std::to_string(rng.next() % 1000000) + "_" + std::to_string(i);
    s.leaf = "L" + std::to_string(rng.below(leaves));
    s.features.push_back({0.0});
    ds.slides.push_back(std::move(s));
  }
  ds.feature_dim = 1;
  return ds;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(GenConfigTest, Validation) {
  GenConfig cfg;
  cfg.reactive_ambiguity = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = GenConfig{};
  cfg.patches_min = 30;
  cfg.patches_max = 10;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = GenConfig{};
  cfg.slides_per_leaf = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(GenConfigTest, JsonRoundTrip) {
  GenConfig cfg = small_features(99);
  cfg.reactive_ambiguity = 0.25;
  const GenConfig back = gen_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  const GenConfig fixed = gen_config_from_json({{"patches_per_slide", 9}});
  EXPECT_EQ(fixed.patches_min, 9u);
  EXPECT_EQ(fixed.patches_max, 9u);
}

TEST(GenerateTest, DefaultConfigHas1680Patches) {
  GenConfig cfg;
  cfg.feature_dim = 2;
  const Dataset ds = gen_features(leukemia(), cfg);
  EXPECT_EQ(ds.slides.size(), 84u);
  EXPECT_EQ(ds.sample_count(), 1680u);
}

TEST(GenerateTest, SameSeedIdentical) {
  const Taxonomy& t = leukemia();
  EXPECT_EQ(gen_features(t, small_features()), gen_features(t, small_features()));
  EXPECT_NE(gen_features(t, small_features(1)), gen_features(t, small_features(2)));
  EXPECT_EQ(gen_images(t, small_images()), gen_images(t, small_images()));
}

TEST(GenerateTest, ZeroAmbiguityCopiesHighMean) {
  const Taxonomy& t = leukemia();
  GenConfig cfg = small_features();
  cfg.reactive_ambiguity = 0.0;
  const auto means = feature_means(t, cfg);
  EXPECT_EQ(means[t.index_of("Reactive")], means[t.index_of("ALL")]);
  cfg.reactive_ambiguity = 1.0;
  const auto low = feature_means(t, cfg);
  EXPECT_EQ(low[t.index_of("Reactive")], low[t.index_of("Normal")]);
}

TEST(GenerateTest, NodeOffsetNormsShrinkWithLevel) {
  const Taxonomy& t = leukemia();
  GenConfig cfg = small_features();
  cfg.feature_dim = 12;
  const auto means = feature_means(t, cfg);
  for (std::size_t n = 1; n < t.size(); ++n) {
    if (t.node(n).id == "Reactive") continue;
    double sq = 0.0;
    for (std::size_t k = 0; k < cfg.feature_dim; ++k) {
      const double d = means[n][k] - means[*t.node(n).parent][k];
      sq += d * d;
    }
    EXPECT_NEAR(std::sqrt(sq), 2.0 * cfg.class_separation / t.node(n).level, 1e-12) << t.node(n).id;
  }
}

TEST(GenerateTest, DeepestSiblingsDifferByHueGap) {
  const Taxonomy& t = leukemia();
  GenConfig cfg = small_images();
  const auto sig = cell_signatures(t, cfg);
  EXPECT_NEAR(std::abs(sig[t.index_of("AML")].hue - sig[t.index_of("ALL")].hue),
              cfg.min_hue_gap, 1e-15);
  EXPECT_NEAR(std::abs(sig[t.index_of("CML")].hue - sig[t.index_of("CLL")].hue),
              cfg.min_hue_gap, 1e-15);
}

TEST(GenerateTest, OneCellDiskInsideEveryImage) {
  const Dataset ds = gen_images(leukemia(), small_images());
  for (const SlideRecord& s : ds.slides) {
    ASSERT_EQ(s.images.size(), s.wbc.size());
    for (std::size_t i = 0; i < s.images.size(); ++i) {
      const Disk& d = s.wbc[i];
      EXPECT_GT(d.radius, 0.0);
      EXPECT_GE(d.cx - d.radius, 0.0);
      EXPECT_GE(d.cy - d.radius, 0.0);
      EXPECT_LE(d.cx + d.radius, static_cast<double>(ds.width));
      EXPECT_LE(d.cy + d.radius, static_cast<double>(ds.height));
      EXPECT_EQ(s.images[i].rgb.size(), 3u * ds.height * ds.width);
    }
  }
  EXPECT_EQ(ds.input_size(), 3u * 32 * 40);
}

TEST(GenerateTest, ConfusableLeafMustExist) {
  GenConfig cfg = small_features();
  cfg.confusable_high = "Nope";
  EXPECT_THROW(gen_features(leukemia(), cfg), Error);
  cfg.confusable_high = "ALL";
  cfg.confusable = "Acute";
  EXPECT_THROW(gen_features(leukemia(), cfg), Error);
  // Taxonomies without the confusable class skip the override.
  cfg.confusable = "Nope";
  EXPECT_NO_THROW(gen_features(leukemia(), cfg));
}

TEST(GroupedKFoldTest, EightyFourSlidesFiveFolds) {
  GenConfig cfg = small_features();
  cfg.slides_per_leaf = 12;
  cfg.patches_min = cfg.patches_max = 1;
  const Dataset ds = gen_features(leukemia(), cfg);
  const SplitPlan plan = grouped_kfold(ds, 5, 7);
  std::vector<std::size_t> sizes;
  for (const auto& f : plan.folds) sizes.push_back(f.size());
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{17, 17, 17, 17, 16}));
  // Every leaf is spread as evenly as possible.
  for (const auto& f : plan.folds) {
    std::map<std::string, std::size_t> per_leaf;
    for (const std::string& id : f)
      for (const SlideRecord& s : ds.slides)
        if (s.slide_id == id) ++per_leaf[s.leaf];
    for (const auto& [leaf, c] : per_leaf) {
      EXPECT_GE(c, 2u);
      EXPECT_LE(c, 3u);
    }
  }
}

TEST(GroupedKFoldTest, LeaveOneSlideOut) {
  Rng rng(51);
  Dataset ds = random_slides(rng);
  const SplitPlan plan = grouped_kfold(ds, ds.slides.size(), 3);
  for (const auto& f : plan.folds) EXPECT_EQ(f.size(), 1u);
}

TEST(GroupedKFoldTest, Errors) {
  Rng rng(52);
  const Dataset ds = random_slides(rng);
  EXPECT_THROW(grouped_kfold(ds, 1, 7), Error);
  EXPECT_THROW(grouped_kfold(ds, ds.slides.size() + 1, 7), Error);
}

TEST(GroupedKFoldTest, FuzzedPlansNeverLeak) {
  Rng rng(53);
  for (int i = 0; i < 500; ++i) {
    const Dataset ds = random_slides(rng);
    const std::size_t k = 2 + rng.below(std::min<std::size_t>(ds.slides.size() - 1, 9));
    const SplitPlan plan = grouped_kfold(ds, k, rng.next());
    ASSERT_EQ(plan.folds.size(), k);
    std::set<std::string> seen;
    std::size_t total = 0;
    std::size_t largest = 0, smallest = ds.slides.size();
    for (std::size_t f = 0; f < k; ++f) {
      for (const std::string& id : plan.folds[f]) {
        EXPECT_TRUE(seen.insert(id).second) << "slide in two folds: " << id;
        EXPECT_EQ(plan.assignment.at(id), f);
      }
      total += plan.folds[f].size();
      largest = std::max(largest, plan.folds[f].size());
      smallest = std::min(smallest, plan.folds[f].size());
    }
    EXPECT_EQ(total, ds.slides.size());
    EXPECT_LE(largest - smallest, 1u);
    EXPECT_EQ(grouped_kfold(ds, k, 5).assignment, grouped_kfold(ds, k, 5).assignment);
  }
}

TEST(DatasetIoTest, FeatureRoundTrip) {
  const Taxonomy& t = leukemia();
  const Dataset ds = gen_features(t, small_features());
  const auto dir = testing::temp_dir("features_io");
  save_dataset(ds, t, dir);
  EXPECT_EQ(load_dataset(dir), ds);
  EXPECT_EQ(load_dataset_taxonomy(dir), t);
}

TEST(DatasetIoTest, ImageRoundTrip) {
  const Taxonomy& t = leukemia();
  const Dataset ds = gen_images(t, small_images());
  const auto dir = testing::temp_dir("images_io");
  save_dataset(ds, t, dir);
  EXPECT_EQ(load_dataset(dir), ds);
}

TEST(DatasetIoTest, MissingLabelFileNamed) {
  const Taxonomy& t = leukemia();
  const auto dir = testing::temp_dir("missing_labels");
  save_dataset(gen_features(t, small_features()), t, dir);
  std::filesystem::remove(dir / "labels.csv");
  EXPECT_EQ(kind_of([&] { load_dataset(dir); }), ErrorKind::kMissingFile);
  EXPECT_NE(message_of([&] { load_dataset(dir); }).find("labels.csv"), std::string::npos);
}

TEST(DatasetIoTest, CorruptImageHeaderNamesSlideAndSample) {
  const Taxonomy& t = leukemia();
  const Dataset ds = gen_images(t, small_images());
  const auto dir = testing::temp_dir("corrupt_image");
  save_dataset(ds, t, dir);
  const std::string slide = ds.slides[3].slide_id;
  std::ofstream(dir / "images" / slide / "1.ppm", std::ios::binary) << "P3\n2 2\n255\n";
  EXPECT_EQ(kind_of([&] { load_dataset(dir); }), ErrorKind::kCorruptFile);
  const std::string msg = message_of([&] { load_dataset(dir); });
  EXPECT_NE(msg.find("slide '" + slide + "'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("sample 1"), std::string::npos) << msg;
}

TEST(DatasetTest, ValidateRejectsUnknownLeaf) {
  const Taxonomy& t = leukemia();
  Dataset ds = gen_features(t, small_features());
  ds.slides[0].leaf = "Acute";
  EXPECT_THROW(ds.validate(t), Error);
}

}  // namespace
}  // namespace hierlabel
