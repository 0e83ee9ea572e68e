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

#include "hierlabel/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"
#include "hierlabel/rng.h"

namespace hierlabel {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOffsetScale = 2.0;
constexpr double kRootHue = 0.75;
constexpr double kRootRadius = 0.20;
constexpr double kRootTexture = 2.0;

std::vector<double> random_direction(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::string slide_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "slide_%03zu", index);
  return buf;
}

std::size_t patch_count(Rng& rng, const GenConfig& cfg) {
  return cfg.patches_min + static_cast<std::size_t>(
                               rng.below(cfg.patches_max - cfg.patches_min + 1));
}

// Indices of the confusable leaf and its two anchors, when all exist.
struct Confusable {
  std::size_t target, low, high;
};

std::optional<Confusable> find_confusable(const Taxonomy& t,
                                          const GenConfig& cfg) {
  const auto target = t.find(cfg.confusable);
  if (!target) return std::nullopt;
  if (!t.node(*target).is_leaf) {
    fail(ErrorKind::kInvalidArgument, "confusable class '" + cfg.confusable + "' is not a leaf");
  }
  return Confusable{*target, t.index_of(cfg.confusable_low), t.index_of(cfg.confusable_high)};
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h -= std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double r = v * (1.0 - s * (1.0 - f));
  const double table[6][3] = {{v, r, p}, {q, v, p}, {p, v, r},
                              {p, q, v}, {r, p, v}, {v, p, q}};
  for (int c = 0; c < 3; ++c) rgb[c] = 255.0 * table[sector][c];
}

void put(Image& img, std::size_t x, std::size_t y, const double rgb[3]) {
  std::uint8_t* px = &img.rgb[3 * (y * img.width + x)];
  for (int c = 0; c < 3; ++c) px[c] = clamp_byte(rgb[c]);
}

void draw_rbc(Image& img, Rng& rng) {
  const double size = static_cast<double>(std::min(img.height, img.width));
  const double r = size * rng.uniform(0.08, 0.11);
  const double cx = rng.uniform(0.0, static_cast<double>(img.width));
  const double cy = rng.uniform(0.0, static_cast<double>(img.height));
  const double jitter = rng.uniform(-12.0, 12.0);
  const double rim[3] = {200.0 + jitter, 80.0 + jitter * 0.5, 90.0 + jitter * 0.5};
  const double pale[3] = {222.0 + jitter, 145.0 + jitter * 0.5, 150.0 + jitter * 0.5};
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx;
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d > r) continue;
      put(img, x, y, d < 0.45 * r ? pale : rim);
    }
  }
}

}  // namespace

std::string to_string(DataMode mode) {
  return mode == DataMode::kFeatures ? "features" : "images";
}

DataMode parse_data_mode(std::string_view name) {
  if (name == "features") return DataMode::kFeatures;
  if (name == "images") return DataMode::kImages;
  fail(ErrorKind::kInvalidArgument, "unknown data mode '" + std::string(name) + "'");
}

std::size_t Dataset::sample_count() const {
  std::size_t n = 0;
  for (const SlideRecord& s : slides) n += s.sample_count();
  return n;
}

std::size_t Dataset::input_size() const {
  return mode == DataMode::kFeatures ? feature_dim : 3 * height * width;
}

std::vector<double> Dataset::input(std::size_t slide, std::size_t sample) const {
  const SlideRecord& s = slides.at(slide);
  if (mode == DataMode::kFeatures) return s.features.at(sample);
  return image_to_input(s.images.at(sample));
}

void Dataset::validate(const Taxonomy& t) const {
  std::set<std::string> ids;
  for (const SlideRecord& s : slides) {
    if (s.slide_id.empty() || !ids.insert(s.slide_id).second) {
      fail(ErrorKind::kInvalidArgument,
           "duplicate or empty slide id '" + s.slide_id + "'");
    }
    t.leaf_index(s.leaf);
    if (s.sample_count() == 0) {
      fail(ErrorKind::kInvalidArgument, "slide '" + s.slide_id + "' has no samples");
    }
    if (mode == DataMode::kFeatures) {
      if (!s.images.empty()) {
        fail(ErrorKind::kInvalidArgument, "feature dataset holds images");
      }
      for (const auto& f : s.features) {
        if (f.size() != feature_dim) {
          fail(ErrorKind::kInvalidArgument,
               "slide '" + s.slide_id + "' has a sample of the wrong length");
        }
      }
    } else {
      if (!s.features.empty()) {
        fail(ErrorKind::kInvalidArgument, "image dataset holds features");
      }
      if (s.wbc.size() != s.images.size()) {
        fail(ErrorKind::kInvalidArgument,
             "slide '" + s.slide_id + "' lacks cell metadata");
      }
      for (const Image& img : s.images) {
        if (img.height != height || img.width != width ||
            img.rgb.size() != 3 * height * width) {
          fail(ErrorKind::kInvalidArgument,
               "slide '" + s.slide_id + "' has an image of the wrong shape");
        }
      }
    }
  }
}

void GenConfig::validate() const {
  auto bad = [](const std::string& why) { fail(ErrorKind::kInvalidArgument, why); };
  if (slides_per_leaf == 0) bad("slides_per_leaf must be >= 1");
  if (patches_min == 0 || patches_max < patches_min) {
    bad("patches range must satisfy 1 <= min <= max");
  }
  if (!(class_separation > 0.0)) bad("class_separation must be positive");
  if (!(reactive_ambiguity >= 0.0 && reactive_ambiguity <= 1.0)) {
    bad("reactive_ambiguity must lie in [0, 1]");
  }
  if (!(slide_effect >= 0.0)) bad("slide_effect must be >= 0");
  if (!(min_hue_gap > 0.0 && min_hue_gap < 1.0)) bad("min_hue_gap must lie in (0, 1)");
  if (mode == DataMode::kFeatures && feature_dim == 0) bad("feature_dim must be >= 1");
  if (mode == DataMode::kImages && (height < 32 || width < 32)) {
    bad("image height and width must be >= 32");
  }
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig cfg;
  if (!j.is_object()) fail(ErrorKind::kInvalidArgument, "generator config must be an object");
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.mode = parse_data_mode(j.value("mode", to_string(cfg.mode)));
    cfg.slides_per_leaf = j.value("slides_per_leaf", cfg.slides_per_leaf);
    if (j.contains("patches_per_slide")) {
      const auto& p = j.at("patches_per_slide");
      if (p.is_array() && p.size() == 2) {
        cfg.patches_min = p[0].get<std::size_t>();
        cfg.patches_max = p[1].get<std::size_t>();
      } else {
        cfg.patches_min = cfg.patches_max = p.get<std::size_t>();
      }
    }
    cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
    cfg.height = j.value("height", cfg.height);
    cfg.width = j.value("width", cfg.width);
    cfg.class_separation = j.value("class_separation", cfg.class_separation);
    cfg.reactive_ambiguity = j.value("reactive_ambiguity", cfg.reactive_ambiguity);
    cfg.slide_effect = j.value("slide_effect", cfg.slide_effect);
    cfg.min_hue_gap = j.value("min_hue_gap", cfg.min_hue_gap);
    cfg.confusable = j.value("confusable", cfg.confusable);
    cfg.confusable_low = j.value("confusable_low", cfg.confusable_low);
    cfg.confusable_high = j.value("confusable_high", cfg.confusable_high);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("generator config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const GenConfig& cfg) {
  return {{"seed", cfg.seed},
          {"mode", to_string(cfg.mode)},
          {"slides_per_leaf", cfg.slides_per_leaf},
          {"patches_per_slide", {cfg.patches_min, cfg.patches_max}},
          {"feature_dim", cfg.feature_dim},
          {"height", cfg.height},
          {"width", cfg.width},
          {"class_separation", cfg.class_separation},
          {"reactive_ambiguity", cfg.reactive_ambiguity},
          {"slide_effect", cfg.slide_effect},
          {"min_hue_gap", cfg.min_hue_gap},
          {"confusable", cfg.confusable},
          {"confusable_low", cfg.confusable_low},
          {"confusable_high", cfg.confusable_high}};
}

std::vector<std::vector<double>> feature_means(const Taxonomy& t,
                                               const GenConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).fork(1);
  std::vector<std::vector<double>> means(t.size(),
                                         std::vector<double>(cfg.feature_dim, 0.0));
  for (std::size_t n = 1; n < t.size(); ++n) {
    const TaxonomyNode& node = t.node(n);
    const std::vector<double> dir = random_direction(rng, cfg.feature_dim);
    const double norm = kOffsetScale * cfg.class_separation / static_cast<double>(node.level);
    for (std::size_t i = 0; i < cfg.feature_dim; ++i) {
      means[n][i] = means[*node.parent][i] + norm * dir[i];
    }
  }
  if (const auto c = find_confusable(t, cfg)) {
    const double lambda = cfg.reactive_ambiguity;
    for (std::size_t i = 0; i < cfg.feature_dim; ++i) {
      means[c->target][i] =
          lambda * means[c->low][i] + (1.0 - lambda) * means[c->high][i];
    }
  }
  return means;
}

std::vector<CellSignature> cell_signatures(const Taxonomy& t,
                                           const GenConfig& cfg) {
  cfg.validate();
  const double scale = cfg.class_separation / 4.0;
  std::vector<CellSignature> sig(t.size());
  sig[0] = {kRootHue, kRootRadius, kRootTexture};
  for (std::size_t n = 1; n < t.size(); ++n) {
    const TaxonomyNode& node = t.node(n);
    const auto [group, position] = t.group_position(n);
    const double siblings = static_cast<double>(t.groups()[group].children.size());
    const double centered = static_cast<double>(position) - 0.5 * (siblings - 1.0);
    const double spread = std::ldexp(1.0, t.max_level() - node.level);
    const CellSignature& parent = sig[*node.parent];
    sig[n].hue = parent.hue + centered * cfg.min_hue_gap * spread;
    sig[n].radius = parent.radius + centered * 0.015 * scale * spread;
    sig[n].texture = parent.texture + centered * 0.5 * scale * spread;
  }
  if (const auto c = find_confusable(t, cfg)) {
    const double lambda = cfg.reactive_ambiguity;
    const CellSignature& lo = sig[c->low];
    const CellSignature& hi = sig[c->high];
    sig[c->target] = {lambda * lo.hue + (1.0 - lambda) * hi.hue,
                      lambda * lo.radius + (1.0 - lambda) * hi.radius,
                      lambda * lo.texture + (1.0 - lambda) * hi.texture};
  }
  return sig;
}

Dataset gen_features(const Taxonomy& t, const GenConfig& cfg) {
  cfg.validate();
  const auto means = feature_means(t, cfg);
  Rng rng = Rng(cfg.seed).fork(2);
  Dataset ds;
  ds.mode = DataMode::kFeatures;
  ds.feature_dim = cfg.feature_dim;
  ds.taxonomy_fingerprint = t.fingerprint();
  std::size_t index = 0;
  for (std::size_t l = 0; l < t.leaf_count(); ++l) {
    const std::vector<double>& mean = means[t.leaf_order()[l]];
    for (std::size_t s = 0; s < cfg.slides_per_leaf; ++s) {
      SlideRecord slide;
      slide.slide_id = slide_name(index++);
      slide.leaf = t.leaf_id(l);
      const std::vector<double> dir = random_direction(rng, cfg.feature_dim);
      const std::size_t patches = patch_count(rng, cfg);
      for (std::size_t p = 0; p < patches; ++p) {
        std::vector<double> x(cfg.feature_dim);
        for (std::size_t i = 0; i < cfg.feature_dim; ++i) {
          x[i] = mean[i] + cfg.slide_effect * dir[i] + rng.normal();
        }
        slide.features.push_back(std::move(x));
      }
      ds.slides.push_back(std::move(slide));
    }
  }
  return ds;
}

Dataset gen_images(const Taxonomy& t, const GenConfig& cfg) {
  cfg.validate();
  const auto sig = cell_signatures(t, cfg);
  Rng rng = Rng(cfg.seed).fork(3);
  Dataset ds;
  ds.mode = DataMode::kImages;
  ds.height = cfg.height;
  ds.width = cfg.width;
  ds.taxonomy_fingerprint = t.fingerprint();
  const double size = static_cast<double>(std::min(cfg.height, cfg.width));
  std::size_t index = 0;
  for (std::size_t l = 0; l < t.leaf_count(); ++l) {
    const CellSignature& leaf = sig[t.leaf_order()[l]];
    for (std::size_t s = 0; s < cfg.slides_per_leaf; ++s) {
      SlideRecord slide;
      slide.slide_id = slide_name(index++);
      slide.leaf = t.leaf_id(l);
      const double slide_hue = cfg.slide_effect * cfg.min_hue_gap * rng.normal();
      const double slide_scale = 1.0 + 0.05 * cfg.slide_effect * rng.normal();
      const std::size_t patches = patch_count(rng, cfg);
      for (std::size_t p = 0; p < patches; ++p) {
        Image img;
        img.height = cfg.height;
        img.width = cfg.width;
        img.rgb.resize(3 * cfg.height * cfg.width);
        for (std::size_t i = 0; i < cfg.height * cfg.width; ++i) {
          const double noise = static_cast<double>(rng.below(11)) - 5.0;
          const double bg[3] = {232.0 + noise, 224.0 + noise, 236.0 + noise};
          put(img, i % cfg.width, i / cfg.width, bg);
        }
        const std::size_t rbc_count = 4 + static_cast<std::size_t>(rng.below(4));
        for (std::size_t r = 0; r < rbc_count; ++r) draw_rbc(img, rng);

        const double hue = leaf.hue + slide_hue + 0.35 * cfg.min_hue_gap * rng.normal();
        const double radius = std::clamp(
            size * leaf.radius * slide_scale * (1.0 + 0.06 * rng.normal()),
            0.08 * size, 0.32 * size);
        const double texture = leaf.texture * (1.0 + 0.08 * rng.normal());
        const double angle = rng.uniform(0.0, kPi);
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        Disk disk;
        disk.radius = radius;
        disk.cx = rng.uniform(radius + 1.0, static_cast<double>(cfg.width) - radius - 1.0);
        disk.cy = rng.uniform(radius + 1.0, static_cast<double>(cfg.height) - radius - 1.0);
        double cytoplasm[3], nucleus[3];
        hsv_to_rgb(hue, 0.45, 0.80, cytoplasm);
        hsv_to_rgb(hue, 0.75, 0.50, nucleus);
        const double ux = std::cos(angle), uy = std::sin(angle);
        for (std::size_t y = 0; y < cfg.height; ++y) {
          for (std::size_t x = 0; x < cfg.width; ++x) {
            const double dx = static_cast<double>(x) + 0.5 - disk.cx;
            const double dy = static_cast<double>(y) + 0.5 - disk.cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d > radius) continue;
            if (d > 0.65 * radius) {
              put(img, x, y, cytoplasm);
              continue;
            }
            const double u = (dx * ux + dy * uy) / radius;
            const double shade = 0.8 + 0.2 * std::cos(2.0 * kPi * texture * u + phase);
            const double px[3] = {nucleus[0] * shade, nucleus[1] * shade,
                                  nucleus[2] * shade};
            put(img, x, y, px);
          }
        }
        slide.images.push_back(std::move(img));
        slide.wbc.push_back(disk);
      }
      ds.slides.push_back(std::move(slide));
    }
  }
  return ds;
}

Dataset generate_dataset(const Taxonomy& t, const GenConfig& cfg) {
  return cfg.mode == DataMode::kFeatures ? gen_features(t, cfg) : gen_images(t, cfg);
}

SplitPlan grouped_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kInvalidArgument, "fold count must be >= 2");
  if (k > ds.slides.size()) {
    fail(ErrorKind::kInvalidArgument,
         "fold count " + std::to_string(k) + " exceeds slide count " +
             std::to_string(ds.slides.size()));
  }
  std::vector<std::string> leaf_order;
  std::unordered_map<std::string, std::vector<std::string>> by_leaf;
  for (const SlideRecord& s : ds.slides) {
    auto [it, inserted] = by_leaf.try_emplace(s.leaf);
    if (inserted) leaf_order.push_back(s.leaf);
    it->second.push_back(s.slide_id);
  }
  const Rng base(seed);
  std::vector<std::string> dealt;
  for (std::size_t l = 0; l < leaf_order.size(); ++l) {
    std::vector<std::string>& ids = by_leaf[leaf_order[l]];
    Rng rng = base.fork(l);
    rng.shuffle(std::span<std::string>(ids));
    dealt.insert(dealt.end(), ids.begin(), ids.end());
  }
  SplitPlan plan;
  plan.k = k;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < dealt.size(); ++i) {
    if (!plan.assignment.emplace(dealt[i], i % k).second) {
      fail(ErrorKind::kInvalidArgument, "duplicate slide id '" + dealt[i] + "'");
    }
    plan.folds[i % k].push_back(dealt[i]);
  }
  return plan;
}

void save_dataset(const Dataset& ds, const Taxonomy& t,
                  const std::filesystem::path& dir) {
  ds.validate(t);
  std::filesystem::create_directories(dir);
  nlohmann::json meta = {{"format", "hierlabel-dataset"},
                         {"version", 1},
                         {"mode", to_string(ds.mode)},
                         {"taxonomy", "taxonomy.json"},
                         {"taxonomy_fingerprint", t.fingerprint()}};
  if (ds.mode == DataMode::kFeatures) {
    meta["feature_dim"] = ds.feature_dim;
  } else {
    meta["height"] = ds.height;
    meta["width"] = ds.width;
  }
  write_file(dir / "dataset.json", meta.dump(2) + "\n");
  write_file(dir / "taxonomy.json", t.to_json());

  CsvTable labels;
  labels.header = {"slide_id", "leaf", "fold_eligible"};
  for (const SlideRecord& s : ds.slides) labels.rows.push_back({s.slide_id, s.leaf, "1"});
  write_csv(dir / "labels.csv", labels);

  if (ds.mode == DataMode::kFeatures) {
    CsvTable features;
    features.header = {"slide_id", "sample"};
    for (std::size_t i = 0; i < ds.feature_dim; ++i) {
      features.header.push_back("f" + std::to_string(i));
    }
    for (const SlideRecord& s : ds.slides) {
      for (std::size_t p = 0; p < s.features.size(); ++p) {
        CsvRow row = {s.slide_id, std::to_string(p)};
        for (const double v : s.features[p]) row.push_back(format_double(v));
        features.rows.push_back(std::move(row));
      }
    }
    write_csv(dir / "features.csv", features);
    return;
  }
  CsvTable cells;
  cells.header = {"slide_id", "sample", "cx", "cy", "radius"};
  for (const SlideRecord& s : ds.slides) {
    for (std::size_t p = 0; p < s.images.size(); ++p) {
      write_file(dir / "images" / s.slide_id / (std::to_string(p) + ".ppm"),
                 encode_ppm(s.images[p]));
      cells.rows.push_back({s.slide_id, std::to_string(p), format_double(s.wbc[p].cx),
                            format_double(s.wbc[p].cy), format_double(s.wbc[p].radius)});
    }
  }
  write_csv(dir / "images" / "wbc.csv", cells);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path meta_path = dir / "dataset.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCorruptFile, meta_path.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.mode = parse_data_mode(meta.at("mode").get<std::string>());
    ds.taxonomy_fingerprint = meta.value("taxonomy_fingerprint", "");
    if (ds.mode == DataMode::kFeatures) {
      ds.feature_dim = meta.at("feature_dim").get<std::size_t>();
    } else {
      ds.height = meta.at("height").get<std::size_t>();
      ds.width = meta.at("width").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCorruptFile, meta_path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kCorruptFile, meta_path.string() + ": " + e.what());
  }

  const std::filesystem::path labels_path = dir / "labels.csv";
  if (!std::filesystem::exists(labels_path)) {
    fail(ErrorKind::kMissingFile, "missing label file " + labels_path.string());
  }
  const CsvTable labels = read_csv(labels_path);
  const std::size_t id_col = labels.column("slide_id", labels_path.string());
  const std::size_t leaf_col = labels.column("leaf", labels_path.string());
  std::unordered_map<std::string, std::size_t> slot;
  for (const CsvRow& row : labels.rows) {
    SlideRecord s;
    s.slide_id = row[id_col];
    s.leaf = row[leaf_col];
    if (!slot.emplace(s.slide_id, ds.slides.size()).second) {
      fail(ErrorKind::kCorruptFile,
           labels_path.string() + ": duplicate slide '" + s.slide_id + "'");
    }
    ds.slides.push_back(std::move(s));
  }
  auto slide_for = [&](const std::string& id, const std::string& source) -> SlideRecord& {
    const auto it = slot.find(id);
    if (it == slot.end()) {
      fail(ErrorKind::kCorruptFile, source + ": unknown slide '" + id + "'");
    }
    return ds.slides[it->second];
  };

  if (ds.mode == DataMode::kFeatures) {
    const std::filesystem::path path = dir / "features.csv";
    const CsvTable table = read_csv(path);
    const std::size_t slide_col = table.column("slide_id", path.string());
    const std::size_t sample_col = table.column("sample", path.string());
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < ds.feature_dim; ++i) {
      cols.push_back(table.column("f" + std::to_string(i), path.string()));
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const CsvRow& row = table.rows[r];
      const std::string where = path.string() + " row " + std::to_string(r + 1);
      SlideRecord& s = slide_for(row[slide_col], where);
      if (parse_int(row[sample_col], where) != static_cast<std::int64_t>(s.features.size())) {
        fail(ErrorKind::kCorruptFile, where + ": samples out of order");
      }
      std::vector<double> x;
      x.reserve(cols.size());
      for (const std::size_t c : cols) x.push_back(parse_double(row[c], where));
      s.features.push_back(std::move(x));
    }
    return ds;
  }

  const std::filesystem::path cells_path = dir / "images" / "wbc.csv";
  const CsvTable cells = read_csv(cells_path);
  const std::size_t slide_col = cells.column("slide_id", cells_path.string());
  const std::size_t sample_col = cells.column("sample", cells_path.string());
  const std::size_t cx_col = cells.column("cx", cells_path.string());
  const std::size_t cy_col = cells.column("cy", cells_path.string());
  const std::size_t r_col = cells.column("radius", cells_path.string());
  for (std::size_t r = 0; r < cells.rows.size(); ++r) {
    const CsvRow& row = cells.rows[r];
    const std::string where = cells_path.string() + " row " + std::to_string(r + 1);
    SlideRecord& s = slide_for(row[slide_col], where);
    const std::int64_t sample = parse_int(row[sample_col], where);
    if (sample != static_cast<std::int64_t>(s.images.size())) {
      fail(ErrorKind::kCorruptFile, where + ": samples out of order");
    }
    const std::filesystem::path image_path =
        dir / "images" / s.slide_id / (std::to_string(sample) + ".ppm");
    const std::string context =
        "slide '" + s.slide_id + "' sample " + std::to_string(sample) + " (" +
        image_path.string() + ")";
    Image img = decode_ppm(read_file(image_path), context);
    if (img.height != ds.height || img.width != ds.width) {
      fail(ErrorKind::kCorruptFile, context + ": unexpected image size");
    }
    s.images.push_back(std::move(img));
    s.wbc.push_back(Disk{parse_double(row[cx_col], where),
                         parse_double(row[cy_col], where),
                         parse_double(row[r_col], where)});
  }
  return ds;
}

Taxonomy load_dataset_taxonomy(const std::filesystem::path& dir) {
  return load_taxonomy(dir / "taxonomy.json");
}

}  // namespace hierlabel
