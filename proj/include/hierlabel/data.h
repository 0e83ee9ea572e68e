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

#ifndef HIERLABEL_DATA_H_
#define HIERLABEL_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hierlabel/image.h"
#include "hierlabel/taxonomy.h"
#include "json.hpp"

namespace hierlabel {

enum class DataMode { kFeatures, kImages };

std::string to_string(DataMode mode);
DataMode parse_data_mode(std::string_view name);

// Ground-truth localization of the class-dependent cell in an image.
struct Disk {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;

  bool contains(double x, double y) const {
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
  }
  bool operator==(const Disk&) const = default;
};

// One patient slide: a single label shared by all of its samples.
struct SlideRecord {
  std::string slide_id;
  std::string leaf;
  std::vector<std::vector<double>> features;  // feature mode
  std::vector<Image> images;                  // image mode
  std::vector<Disk> wbc;                      // image mode, aligned to images

  std::size_t sample_count() const {
    return features.empty() ? images.size() : features.size();
  }
  bool operator==(const SlideRecord&) const = default;
};

struct Dataset {
  DataMode mode = DataMode::kFeatures;
  std::size_t feature_dim = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::string taxonomy_fingerprint;
  std::vector<SlideRecord> slides;

  std::size_t sample_count() const;
  // Length of one model input vector.
  std::size_t input_size() const;
  // Model input for one sample (features as-is, images via image_to_input).
  std::vector<double> input(std::size_t slide, std::size_t sample) const;
  // Throws kInvalidArgument when labels, ids or shapes are inconsistent.
  void validate(const Taxonomy& t) const;

  bool operator==(const Dataset&) const = default;
};

struct GenConfig {
  std::uint64_t seed = 7;
  DataMode mode = DataMode::kFeatures;
  std::size_t slides_per_leaf = 12;
  std::size_t patches_min = 20;
  std::size_t patches_max = 20;
  std::size_t feature_dim = 16;
  std::size_t height = 32;
  std::size_t width = 32;
  // Feature mode: norm of a level-L node offset is 2 * class_separation / L.
  // Image mode: scales the size and texture differences between classes.
  double class_separation = 4.0;
  // Confusable-class mixing weight: the confusable class's signature becomes
  // lambda * low + (1 - lambda) * high.
  double reactive_ambiguity = 0.5;
  // Per-slide perturbation (feature offset norm; image hue shift in units of
  // min_hue_gap).
  double slide_effect = 0.5;
  // Hue separation (fraction of the colour wheel) between deepest-level
  // siblings; doubles with each level towards the root.
  double min_hue_gap = 0.04;
  std::string confusable = "Reactive";
  std::string confusable_low = "Normal";
  std::string confusable_high = "ALL";

  void validate() const;
};

GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenConfig& cfg);

// Class mean per node (index = node index) after the confusable override.
std::vector<std::vector<double>> feature_means(const Taxonomy& t,
                                               const GenConfig& cfg);

// Colour and shape signature of the class-dependent cell per node.
struct CellSignature {
  double hue = 0.0;     // fraction of the colour wheel
  double radius = 0.0;  // fraction of min(height, width)
  double texture = 0.0; // stripe frequency across the cell
};
std::vector<CellSignature> cell_signatures(const Taxonomy& t,
                                           const GenConfig& cfg);

Dataset gen_features(const Taxonomy& t, const GenConfig& cfg);
Dataset gen_images(const Taxonomy& t, const GenConfig& cfg);
Dataset generate_dataset(const Taxonomy& t, const GenConfig& cfg);

struct SplitPlan {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignment;  // slide_id -> fold
  std::vector<std::vector<std::string>> folds;    // slide ids per fold
};

// Slides are grouped by leaf (first-appearance order), shuffled within each
// leaf by `seed`, concatenated and dealt round-robin, so every fold receives
// whole slides and each leaf is spread as evenly as its count allows.
SplitPlan grouped_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed);

// Directory layout: dataset.json, taxonomy.json, labels.csv and either
// features.csv or images/<slide>/<n>.ppm plus images/wbc.csv.
void save_dataset(const Dataset& ds, const Taxonomy& t,
                  const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
// Taxonomy stored next to a saved dataset.
Taxonomy load_dataset_taxonomy(const std::filesystem::path& dir);

}  // namespace hierlabel

#endif  // HIERLABEL_DATA_H_
