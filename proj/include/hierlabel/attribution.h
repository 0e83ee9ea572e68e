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

#ifndef HIERLABEL_ATTRIBUTION_H_
#define HIERLABEL_ATTRIBUTION_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierlabel/checkpoint.h"
#include "hierlabel/data.h"
#include "hierlabel/image.h"
#include "hierlabel/inference.h"
#include "hierlabel/taxonomy.h"

namespace hierlabel {

struct Heatmap {
  std::size_t height = 0;  // last conv feature-map size
  std::size_t width = 0;
  std::vector<double> values;  // normalized to [0, 1]
  double max_value = 0.0;      // before normalization
  GrayImage upsampled;         // input resolution, nearest neighbour
  std::string target_node;
};

// Logit index that explains `node`: the leaf position for flat models, the
// node's logit for hierarchical models. Throws kUnknownNode / kNotALeaf /
// kInvalidArgument.
std::size_t target_logit(const Checkpoint& c, const Taxonomy& t,
                         std::string_view node);

// Grad-CAM on the rectified second convolution of a tiny CNN.
Heatmap grad_cam(const Checkpoint& c, const Taxonomy& t,
                 std::span<const double> input, std::string_view target);

// Row-major index of the brightest upsampled pixel (first on ties).
std::size_t peak_pixel(const GrayImage& map);
// True when the peak pixel's centre lies inside the disk and the map is not
// all zero.
bool peak_in_disk(const GrayImage& map, const Disk& disk);

struct CamItem {
  std::size_t slide = 0;   // index into Dataset::slides
  std::size_t sample = 0;
};

struct CamRow {
  std::string sample_id;
  std::string target;
  bool hit = false;
  double max_value = 0.0;
  bool correct = false;
};

struct CamReport {
  std::vector<CamRow> rows;
  double hit_rate = 0.0;
  double hit_rate_correct = 0.0;    // NaN without correct rows
  double hit_rate_incorrect = 0.0;  // NaN without incorrect rows
  std::size_t correct = 0;
  std::size_t zero_maps = 0;
};

// Explains the predicted leaf of each item (or `target` when non-empty).
// With a non-empty out_dir writes <slide>_<n>.pgm per item and cam.csv
// (sample_id, target, hit, max_value, correct).
CamReport cam_batch_report(const Checkpoint& c, const Taxonomy& t,
                           const Dataset& ds, std::span<const CamItem> items,
                           const std::filesystem::path& out_dir,
                           std::string_view target = {},
                           Decoder decoder = Decoder::kGreedy);

std::string render_text(const CamReport& report);

}  // namespace hierlabel

#endif  // HIERLABEL_ATTRIBUTION_H_
