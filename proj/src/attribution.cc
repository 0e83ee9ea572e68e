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

#include "hierlabel/attribution.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"
#include "hierlabel/model.h"
#include "hierlabel/objective.h"

namespace hierlabel {
namespace {

double rate(std::size_t hits, std::size_t n) {
  return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                : static_cast<double>(hits) / static_cast<double>(n);
}

std::string percent(double v) {
  return std::isfinite(v) ? format_fixed(100.0 * v, 1) + "%" : std::string("n/a");
}

}  // namespace

std::size_t target_logit(const Checkpoint& c, const Taxonomy& t,
                         std::string_view node) {
  const std::size_t n = t.index_of(node);
  switch (c.output) {
    case OutputKind::kFlat:
      return t.leaf_index(node);
    case OutputKind::kHierarchical:
      if (n == 0) fail(ErrorKind::kInvalidArgument, "the root has no logit");
      return t.logit_of_node(n);
    case OutputKind::kGroupMember: {
      const TaxonomyNode& tn = t.node(n);
      if (!tn.parent || t.node(*tn.parent).id != c.group_id) {
        fail(ErrorKind::kInvalidArgument, "'" + std::string(node) +
                                              "' is not a child of group '" +
                                              c.group_id + "'");
      }
      return t.group_position(n).second;
    }
  }
  return 0;
}

Heatmap grad_cam(const Checkpoint& c, const Taxonomy& t,
                 std::span<const double> input, std::string_view target) {
  if (c.spec.kind != ModelKind::kTinyCnn) {
    fail(ErrorKind::kInvalidArgument,
         "Grad-CAM needs a tinycnn checkpoint, got " + to_string(c.spec.kind));
  }
  const std::size_t logit = target_logit(c, t, target);
  const Model model(c.spec, c.params);
  std::vector<double> select(c.spec.outputs, 0.0);
  select[logit] = 1.0;
  const ConvActivation a = model.last_conv(input, select);
  const std::size_t cells = a.height * a.width;

  Heatmap h;
  h.height = a.height;
  h.width = a.width;
  h.target_node = std::string(target);
  h.values.assign(cells, 0.0);
  for (std::size_t k = 0; k < a.channels; ++k) {
    double alpha = 0.0;
    for (std::size_t i = 0; i < cells; ++i) alpha += a.gradient[k * cells + i];
    alpha /= static_cast<double>(cells);
    if (alpha == 0.0) continue;
    for (std::size_t i = 0; i < cells; ++i) h.values[i] += alpha * a.activation[k * cells + i];
  }
  for (double& v : h.values) v = v > 0.0 ? v : 0.0;
  h.max_value = *std::max_element(h.values.begin(), h.values.end());
  if (h.max_value > 0.0) {
    for (double& v : h.values) v /= h.max_value;
  }

  const std::size_t oh = c.spec.height, ow = c.spec.width;
  h.upsampled.height = oh;
  h.upsampled.width = ow;
  h.upsampled.pixels.resize(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    const std::size_t sy = y * a.height / oh;
    for (std::size_t x = 0; x < ow; ++x) {
      const std::size_t sx = x * a.width / ow;
      h.upsampled.pixels[y * ow + x] =
          static_cast<std::uint8_t>(std::lround(255.0 * h.values[sy * a.width + sx]));
    }
  }
  return h;
}

std::size_t peak_pixel(const GrayImage& map) {
  return static_cast<std::size_t>(
      std::max_element(map.pixels.begin(), map.pixels.end()) - map.pixels.begin());
}

bool peak_in_disk(const GrayImage& map, const Disk& disk) {
  if (map.pixels.empty()) return false;
  const std::size_t peak = peak_pixel(map);
  if (map.pixels[peak] == 0) return false;
  const double x = static_cast<double>(peak % map.width) + 0.5;
  const double y = static_cast<double>(peak / map.width) + 0.5;
  return disk.contains(x, y);
}

CamReport cam_batch_report(const Checkpoint& c, const Taxonomy& t,
                           const Dataset& ds, std::span<const CamItem> items,
                           const std::filesystem::path& out_dir,
                           std::string_view target, Decoder decoder) {
  if (c.spec.kind != ModelKind::kTinyCnn) {
    fail(ErrorKind::kInvalidArgument,
         "Grad-CAM needs a tinycnn checkpoint, got " + to_string(c.spec.kind));
  }
  check_compatible(c, t);
  if (ds.mode != DataMode::kImages) {
    fail(ErrorKind::kInvalidArgument, "Grad-CAM needs an image dataset");
  }
  const Model model(c.spec, c.params);
  CamReport report;
  std::size_t hits = 0, hits_correct = 0, hits_incorrect = 0;
  CsvTable table;
  table.header = {"sample_id", "target", "hit", "max_value", "correct"};
  for (const CamItem& item : items) {
    const SlideRecord& slide = ds.slides.at(item.slide);
    if (item.sample >= slide.images.size()) {
      fail(ErrorKind::kInvalidArgument, "slide '" + slide.slide_id + "' has no sample " +
                                            std::to_string(item.sample));
    }
    const std::vector<double> input = ds.input(item.slide, item.sample);
    const std::vector<double> scores = model.forward(input);
    const std::size_t truth = t.leaf_index(slide.leaf);
    std::string predicted;
    bool correct = false;
    switch (c.output) {
      case OutputKind::kFlat: {
        const Prediction p = decode_flat(scores, t);
        predicted = t.leaf_id(p.leaf);
        correct = p.leaf == truth;
        break;
      }
      case OutputKind::kHierarchical: {
        const Prediction p = decode_grouped(scores, t, decoder);
        predicted = t.leaf_id(p.leaf);
        correct = p.leaf == truth;
        break;
      }
      case OutputKind::kGroupMember: {
        const std::size_t g = *t.group_of_parent(t.index_of(c.group_id));
        const std::size_t pick = static_cast<std::size_t>(
            std::max_element(scores.begin(), scores.end()) - scores.begin());
        predicted = t.node(t.groups()[g].children[pick]).id;
        const auto want = t.encode_target_of(truth)[g];
        correct = want && *want == pick;
        break;
      }
    }
    const std::string explain = target.empty() ? predicted : std::string(target);
    const Heatmap h = grad_cam(c, t, input, explain);
    CamRow row;
    row.sample_id = slide.slide_id + "/" + std::to_string(item.sample);
    row.target = explain;
    row.hit = peak_in_disk(h.upsampled, slide.wbc.at(item.sample));
    row.max_value = h.max_value;
    row.correct = correct;
    if (h.max_value == 0.0) ++report.zero_maps;
    if (row.hit) {
      ++hits;
      (correct ? hits_correct : hits_incorrect) += 1;
    }
    if (correct) ++report.correct;
    if (!out_dir.empty()) {
      write_file(out_dir / (slide.slide_id + "_" + std::to_string(item.sample) + ".pgm"),
                 encode_pgm(h.upsampled));
    }
    table.rows.push_back({row.sample_id, row.target, row.hit ? "1" : "0",
                          format_double(row.max_value), row.correct ? "1" : "0"});
    report.rows.push_back(std::move(row));
  }
  report.hit_rate = rate(hits, report.rows.size());
  if (report.rows.empty()) report.hit_rate = 0.0;
  report.hit_rate_correct = rate(hits_correct, report.correct);
  report.hit_rate_incorrect = rate(hits_incorrect, report.rows.size() - report.correct);
  if (!out_dir.empty()) write_csv(out_dir / "cam.csv", table);
  return report;
}

std::string render_text(const CamReport& report) {
  std::ostringstream os;
  os << "hit rate " << percent(report.hit_rate) << " over " << report.rows.size()
     << " images; correct " << percent(report.hit_rate_correct) << " ("
     << report.correct << "), incorrect " << percent(report.hit_rate_incorrect) << " ("
     << report.rows.size() - report.correct << ")\n";
  if (report.zero_maps > 0) {
    os << "warning: " << report.zero_maps << " all-zero heatmaps (counted as misses)\n";
  }
  return os.str();
}

}  // namespace hierlabel
