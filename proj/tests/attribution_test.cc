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

#include "gtest/gtest.h"
#include "hierlabel/attribution.h"
#include "hierlabel/csv.h"
#include "hierlabel/error.h"
#include "test_util.h"

namespace hierlabel {
namespace {

using testing::leukemia;

Dataset tiny_images() {
  GenConfig g;
  g.mode = DataMode::kImages;
  g.slides_per_leaf = 1;
  g.patches_min = g.patches_max = 2;
  g.height = g.width = 32;
  return gen_images(leukemia(), g);
}

Checkpoint random_cnn(OutputKind output, std::uint64_t seed) {
  const Taxonomy& t = leukemia();
  Checkpoint c;
  c.spec.kind = ModelKind::kTinyCnn;
  c.spec.height = c.spec.width = 32;
  c.spec.conv_channels = {4, 6};
  c.output = output;
  c.spec.outputs = expected_outputs(t, output, "");
  c.taxonomy_fingerprint = t.fingerprint();
  Model m(c.spec);
  Rng rng(seed);
  m.init_glorot(rng);
  // Nonzero biases keep the rectifiers partly open.
  for (double& p : m.params()) p += 0.05 * rng.normal();
  c.params.assign(m.params().begin(), m.params().end());
  return c;
}

// Offset of the head weights (outputs x c2) inside the parameter vector.
std::size_t head_offset(const Checkpoint& c) {
  return c.params.size() - (c.spec.conv_channels[1] + 1) * c.spec.outputs;
}

TEST(TargetLogitTest, FlatAndHierarchical) {
  const Taxonomy& t = leukemia();
  const Checkpoint flat = random_cnn(OutputKind::kFlat, 1);
  EXPECT_EQ(target_logit(flat, t, "CML"), 6u);
  EXPECT_THROW(target_logit(flat, t, "Acute"), Error);
  const Checkpoint hier = random_cnn(OutputKind::kHierarchical, 1);
  EXPECT_EQ(target_logit(hier, t, "Leukemia"), 2u);
  EXPECT_EQ(target_logit(hier, t, "CLL"), 8u);
  EXPECT_THROW(target_logit(hier, t, "root"), Error);
  EXPECT_THROW(target_logit(hier, t, "XYZ"), Error);
}

TEST(GradCamTest, DeadHeadGivesZeroMap) {
  const Taxonomy& t = leukemia();
  Checkpoint c = random_cnn(OutputKind::kFlat, 2);
  const std::size_t off = head_offset(c);
  const std::size_t c2 = c.spec.conv_channels[1];
  const std::size_t target = t.leaf_index("ALL");
  for (std::size_t k = 0; k < c2; ++k) c.params[off + target * c2 + k] = 0.0;
  const Dataset ds = tiny_images();
  const Heatmap h = grad_cam(c, t, ds.input(0, 0), "ALL");
  EXPECT_EQ(h.max_value, 0.0);
  for (double v : h.values) EXPECT_EQ(v, 0.0);
  for (std::uint8_t p : h.upsampled.pixels) EXPECT_EQ(p, 0);
  EXPECT_FALSE(peak_in_disk(h.upsampled, ds.slides[0].wbc[0]));
}

TEST(GradCamTest, MapsAreNormalizedAndNonnegative) {
  const Taxonomy& t = leukemia();
  const Dataset ds = tiny_images();
  for (std::uint64_t seed = 3; seed < 8; ++seed) {
    const Checkpoint c = random_cnn(OutputKind::kHierarchical, seed);
    for (const char* node : {"Leukemia", "Acute", "CML", "Reactive"}) {
      const Heatmap h = grad_cam(c, t, ds.input(seed % ds.slides.size(), 1), node);
      EXPECT_EQ(h.height, 16u);
      EXPECT_EQ(h.upsampled.height, 32u);
      double top = 0.0;
      for (double v : h.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        top = std::max(top, v);
      }
      if (h.max_value > 0.0) {
        EXPECT_EQ(top, 1.0);
      }
      EXPECT_EQ(h.target_node, node);
    }
  }
}

TEST(GradCamTest, PositiveHeadScalingLeavesMapUnchanged) {
  const Taxonomy& t = leukemia();
  const Dataset ds = tiny_images();
  const Checkpoint c = random_cnn(OutputKind::kFlat, 9);
  Checkpoint scaled = c;
  const std::size_t off = head_offset(c);
  const std::size_t c2 = c.spec.conv_channels[1];
  const std::size_t target = t.leaf_index("APML");
  for (std::size_t k = 0; k < c2; ++k) scaled.params[off + target * c2 + k] *= 4.0;
  const Heatmap a = grad_cam(c, t, ds.input(2, 0), "APML");
  const Heatmap b = grad_cam(scaled, t, ds.input(2, 0), "APML");
  EXPECT_NEAR(b.max_value, 4.0 * a.max_value, 1e-12 * (1.0 + a.max_value));
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

TEST(GradCamTest, RejectsNonConvolutionalModels) {
  const Taxonomy& t = leukemia();
  Checkpoint c;
  c.spec.kind = ModelKind::kLinear;
  c.spec.input_dim = 4;
  c.spec.outputs = 7;
  c.taxonomy_fingerprint = t.fingerprint();
  c.params.assign(c.spec.parameter_count(), 0.1);
  EXPECT_THROW(grad_cam(c, t, std::vector<double>(4, 0.0), "ALL"), Error);
}

TEST(PeakTest, FirstBrightestPixelAndDiskTest) {
  GrayImage g{4, 4, std::vector<std::uint8_t>(16, 0)};
  g.pixels[6] = 200;
  g.pixels[9] = 200;
  EXPECT_EQ(peak_pixel(g), 6u);
  // Pixel 6 is (x 2, y 1), centre (2.5, 1.5).
  EXPECT_TRUE(peak_in_disk(g, Disk{2.5, 1.5, 0.1}));
  EXPECT_FALSE(peak_in_disk(g, Disk{0.5, 3.5, 1.0}));
}

TEST(CamReportTest, RowsMatchItemsAndHitsRecomputeFromStoredMaps) {
  const Taxonomy& t = leukemia();
  const Dataset ds = tiny_images();
  const Checkpoint c = random_cnn(OutputKind::kHierarchical, 10);
  std::vector<CamItem> items;
  for (std::size_t s = 0; s < ds.slides.size(); ++s) items.push_back({s, s % 2});
  const auto dir = testing::temp_dir("cam_report");
  const CamReport r = cam_batch_report(c, t, ds, items, dir);
  ASSERT_EQ(r.rows.size(), items.size());
  std::size_t pgms = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    pgms += e.path().extension() == ".pgm";
  EXPECT_EQ(pgms, items.size());

  const CsvTable csv = read_csv(dir / "cam.csv");
  ASSERT_EQ(csv.rows.size(), items.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const SlideRecord& slide = ds.slides[items[i].slide];
    const GrayImage map = read_pgm(dir / (slide.slide_id + "_" +
                                          std::to_string(items[i].sample) + ".pgm"));
    const Disk& d = slide.wbc[items[i].sample];
    const std::size_t peak = peak_pixel(map);
    const double x = static_cast<double>(peak % map.width) + 0.5;
    const double y = static_cast<double>(peak / map.width) + 0.5;
    bool any = false;
    for (std::uint8_t p : map.pixels) any = any || p != 0;
    const bool hit = any && (x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) <= d.radius * d.radius;
    EXPECT_EQ(r.rows[i].hit, hit);
    EXPECT_EQ(csv.rows[i][csv.column("hit", "cam.csv")], hit ? "1" : "0");
    hits += hit;
  }
  EXPECT_DOUBLE_EQ(r.hit_rate, static_cast<double>(hits) / items.size());
  EXPECT_NE(render_text(r).find("hit rate"), std::string::npos);
}

TEST(CamReportTest, AllZeroMapsAreFlagged) {
  const Taxonomy& t = leukemia();
  const Dataset ds = tiny_images();
  Checkpoint c = random_cnn(OutputKind::kFlat, 11);
  const std::size_t off = head_offset(c);
  for (std::size_t i = off; i < off + c.spec.conv_channels[1] * 7; ++i) c.params[i] = 0.0;
  const std::vector<CamItem> items = {{0, 0}, {1, 1}};
  const CamReport r = cam_batch_report(c, t, ds, items, {});
  EXPECT_EQ(r.hit_rate, 0.0);
  EXPECT_EQ(r.zero_maps, 2u);
  EXPECT_NE(render_text(r).find("zero"), std::string::npos);
}

}  // namespace
}  // namespace hierlabel
