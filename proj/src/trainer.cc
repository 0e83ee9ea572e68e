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

#include "hierlabel/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"
#include "hierlabel/rng.h"

namespace hierlabel {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

// Inverse frequencies scaled to mean 1 over the classes present; absent
// classes get 1.
std::vector<double> balanced_weights(const std::vector<std::size_t>& counts) {
  std::vector<double> w(counts.size(), 1.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    w[i] = 1.0 / static_cast<double>(counts[i]);
    sum += w[i];
    ++present;
  }
  if (present == 0) return w;
  const double mean = sum / static_cast<double>(present);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] != 0) w[i] /= mean;
  }
  return w;
}

// On-path child position of a leaf inside group g, if the group is active.
std::optional<std::size_t> group_target(const Taxonomy& t, std::size_t group,
                                        std::size_t leaf) {
  return t.encode_target_of(leaf)[group];
}

std::vector<std::string> slides_of(const SampleTable& s,
                                   std::span<const std::size_t> rows) {
  std::set<std::string> ids;
  for (const std::size_t r : rows) ids.insert(s.slide_ids[r]);
  return {ids.begin(), ids.end()};
}

// One model to fit: which rows it sees and how its scores are scored.
struct Task {
  OutputKind output = OutputKind::kFlat;
  std::string group_id;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::function<LossValue(std::span<const double>, std::size_t)> loss;
  std::function<bool(std::span<const double>, std::size_t)> correct;
};

TrainedModel fit(const SampleTable& s, const Taxonomy& t, const ModelSpec& spec,
                 const TrainConfig& cfg, const Task& task, std::uint64_t stream,
                 const TrainHooks* hooks, TrainMode mode) {
  Model model(spec);
  const Rng base(cfg.seed);
  Rng init = base.fork(2 * stream);
  Rng order = base.fork(2 * stream + 1);
  model.init_glorot(init);
  AdamWState state(model.params().size());
  std::vector<double> grad(model.params().size());
  std::vector<std::size_t> perm = task.train_rows;
  ForwardCache cache;
  TrainedModel out;
  std::size_t step = 0;
  const std::size_t n = perm.size();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order.shuffle(std::span<std::size_t>(perm));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> batch(perm.data() + start, stop - start);
      const double scale = 1.0 / static_cast<double>(batch.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      std::vector<std::vector<double>> score_grads(batch.size());
      std::vector<double> scaled;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::vector<double> scores = model.forward(s.inputs[batch[i]], &cache);
        LossValue lv = task.loss(scores, batch[i]);
        epoch_loss += lv.loss;
        scaled.resize(lv.grad.size());
        for (std::size_t j = 0; j < lv.grad.size(); ++j) scaled[j] = lv.grad[j] * scale;
        model.backward(cache, scaled, grad);
        score_grads[i] = std::move(lv.grad);
      }
      ++step;
      if (hooks != nullptr && hooks->on_step) {
        hooks->on_step(StepInfo{epoch, step, task.output, task.group_id, batch,
                                score_grads});
      }
      adamw_step(model.params(), grad, state, cfg.optimizer);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(n);
    stats.val_loss = kNaN;
    stats.val_acc = kNaN;
    if (!task.val_rows.empty()) {
      double loss = 0.0;
      std::size_t hits = 0;
      for (const std::size_t r : task.val_rows) {
        const std::vector<double> scores = model.forward(s.inputs[r]);
        loss += task.loss(scores, r).loss;
        if (task.correct(scores, r)) ++hits;
      }
      const double m = static_cast<double>(task.val_rows.size());
      stats.val_loss = loss / m;
      stats.val_acc = static_cast<double>(hits) / m;
    }
    out.curve.push_back(stats);
  }

  out.train_slides = slides_of(s, task.train_rows);
  Checkpoint& c = out.checkpoint;
  c.spec = spec;
  c.output = task.output;
  c.group_id = task.group_id;
  c.taxonomy_fingerprint = t.fingerprint();
  c.params.assign(model.params().begin(), model.params().end());
  const EpochStats& last = out.curve.back();
  c.training = {{"mode", to_string(mode)},
                {"config", to_json(cfg)},
                {"init", "glorot_uniform"},
                {"final_epoch", last.epoch},
                {"final_train_loss", number_or_null(last.train_loss)},
                {"final_val_loss", number_or_null(last.val_loss)},
                {"train_samples", task.train_rows.size()},
                {"train_slides", out.train_slides},
                {"validation_slides", slides_of(s, task.val_rows)}};
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Predictor over one group member.
class MemberPredictor : public Predictor {
 public:
  explicit MemberPredictor(const Model* model) : model_(model) {}
  std::size_t output_size() const override { return model_->spec().outputs; }
  std::vector<double> scores(std::span<const double> input) const override {
    return model_->forward(input);
  }

 private:
  const Model* model_;
};

struct Stat {
  std::vector<std::optional<double>> folds;

  nlohmann::json to_json() const {
    nlohmann::json values = nlohmann::json::array();
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : folds) {
      values.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
      if (v) {
        sum += *v;
        ++n;
      }
    }
    const double mean = n > 0 ? sum / static_cast<double>(n) : kNaN;
    double ss = 0.0;
    for (const auto& v : folds) {
      if (v) ss += (*v - mean) * (*v - mean);
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : kNaN;
    return {{"folds", values}, {"mean", number_or_null(mean)}, {"std", number_or_null(sd)}};
  }
};

std::string cell(const nlohmann::json& v) {
  return v.is_number() ? format_fixed(v.get<double>(), 4) : std::string("-");
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

// Fold rows followed by Avg and Std, one column per metric.
void render_table(std::ostringstream& os, const std::vector<std::string>& names,
                  const std::vector<nlohmann::json>& stats, std::size_t folds) {
  std::size_t first = 6;
  std::vector<std::size_t> widths;
  for (const std::string& n : names) widths.push_back(std::max<std::size_t>(n.size() + 2, 10));
  os << pad("fold", first);
  for (std::size_t i = 0; i < names.size(); ++i) os << pad(names[i], widths[i]);
  os << "\n";
  for (std::size_t f = 0; f <= folds + 1; ++f) {
    os << pad(f < folds ? std::to_string(f + 1) : (f == folds ? "Avg" : "Std"), first);
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const nlohmann::json& s = stats[i];
      const nlohmann::json v = f < folds ? s["folds"][f] : (f == folds ? s["mean"] : s["std"]);
      os << pad(cell(v), widths[i]);
    }
    os << "\n";
  }
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kFlat:
      return "flat";
    case TrainMode::kHierMultilabel:
      return "hier_multilabel";
    case TrainMode::kHierBase:
      return "hier_base";
  }
  return "flat";
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "flat") return TrainMode::kFlat;
  if (name == "hier_multilabel") return TrainMode::kHierMultilabel;
  if (name == "hier_base") return TrainMode::kHierBase;
  fail(ErrorKind::kInvalidArgument, "unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  optimizer.validate();
  loss.validate();
  if (epochs == 0) fail(ErrorKind::kInvalidArgument, "epochs must be >= 1");
  if (batch_size == 0) fail(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
}

nlohmann::json to_json(const LossConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"gamma", cfg.gamma},
          {"class_weights", cfg.class_weights},
          {"level_weights", cfg.level_weights}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  LossConfig cfg;
  try {
    cfg.kind = parse_loss_kind(j.value("kind", to_string(cfg.kind)));
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.class_weights = j.value("class_weights", cfg.class_weights);
    cfg.level_weights = j.value("level_weights", cfg.level_weights);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("loss config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"optimizer", to_json(cfg.optimizer)},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"loss", to_json(cfg.loss)},
          {"seed", cfg.seed},
          {"decoder", to_string(cfg.decoder)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (!j.is_object()) fail(ErrorKind::kInvalidArgument, "train config must be an object");
  try {
    if (j.contains("optimizer")) cfg.optimizer = adamw_config_from_json(j.at("optimizer"));
    if (j.contains("loss")) cfg.loss = loss_config_from_json(j.at("loss"));
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.decoder = parse_decoder(j.value("decoder", to_string(cfg.decoder)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SampleTable make_sample_table(const Dataset& ds, const Taxonomy& t) {
  ds.validate(t);
  SampleTable s;
  for (std::size_t i = 0; i < ds.slides.size(); ++i) {
    const SlideRecord& slide = ds.slides[i];
    const std::size_t leaf = t.leaf_index(slide.leaf);
    for (std::size_t j = 0; j < slide.sample_count(); ++j) {
      s.inputs.push_back(ds.input(i, j));
      s.leaves.push_back(leaf);
      s.slide_ids.push_back(slide.slide_id);
      s.sample_ids.push_back(slide.slide_id + "/" + std::to_string(j));
      s.slide_index.push_back(i);
      s.sample_index.push_back(j);
    }
  }
  return s;
}

ModelSpec resolve_spec(const ModelSpec& arch, const Dataset& ds) {
  ModelSpec spec = arch;
  if (spec.kind == ModelKind::kTinyCnn) {
    if (ds.mode != DataMode::kImages) {
      fail(ErrorKind::kInvalidArgument, "tinycnn models need an image dataset");
    }
    spec.channels = 3;
    spec.height = ds.height;
    spec.width = ds.width;
  } else {
    spec.input_dim = ds.input_size();
  }
  return spec;
}

void write_curve_csv(const std::filesystem::path& path,
                     std::span<const EpochStats> curve) {
  CsvTable table;
  table.header = {"epoch", "train_loss", "val_loss", "val_acc"};
  for (const EpochStats& e : curve) {
    table.rows.push_back({std::to_string(e.epoch), format_double(e.train_loss),
                          format_double(e.val_loss), format_double(e.val_acc)});
  }
  write_csv(path, table);
}

std::vector<TrainedModel> train(const SampleTable& samples,
                                std::span<const std::size_t> train_rows,
                                std::span<const std::size_t> val_rows,
                                const Taxonomy& t, TrainMode mode,
                                const ModelSpec& arch, const TrainConfig& cfg,
                                const TrainHooks* hooks) {
  cfg.validate();
  if (train_rows.empty()) fail(ErrorKind::kInvalidArgument, "no training samples");
  if (!samples.inputs.empty() && samples.inputs.front().size() != arch.input_size()) {
    fail(ErrorKind::kInvalidArgument,
         "model expects " + std::to_string(arch.input_size()) + " inputs, data has " +
             std::to_string(samples.inputs.front().size()));
  }
  const LogitLayout& layout = t.layout();
  const std::vector<std::size_t> train_vec(train_rows.begin(), train_rows.end());
  const std::vector<std::size_t> val_vec(val_rows.begin(), val_rows.end());
  const bool auto_weights =
      cfg.loss.kind == LossKind::kWeightedCrossEntropy && cfg.loss.class_weights.empty();
  std::vector<TrainedModel> out;

  if (mode == TrainMode::kFlat) {
    auto weights = std::make_shared<std::vector<double>>(cfg.loss.class_weights);
    if (auto_weights) {
      std::vector<std::size_t> counts(t.leaf_count(), 0);
      for (const std::size_t r : train_vec) ++counts[samples.leaves[r]];
      *weights = balanced_weights(counts);
    } else if (!weights->empty() && weights->size() != t.leaf_count()) {
      fail(ErrorKind::kInvalidArgument, "flat class_weights need one entry per leaf");
    }
    ModelSpec spec = arch;
    spec.outputs = t.leaf_count();
    Task task;
    task.output = OutputKind::kFlat;
    task.train_rows = train_vec;
    task.val_rows = val_vec;
    task.loss = [&samples, &cfg, weights](std::span<const double> s, std::size_t r) {
      return classification_loss(s, samples.leaves[r], cfg.loss, *weights);
    };
    task.correct = [&samples](std::span<const double> s, std::size_t r) {
      return argmax(s) == samples.leaves[r];
    };
    out.push_back(fit(samples, t, spec, cfg, task, 0, hooks, mode));
    return out;
  }

  std::vector<double> logit_weights = cfg.loss.class_weights;
  if (auto_weights) {
    std::vector<std::size_t> counts(layout.total_logits, 0);
    for (const std::size_t r : train_vec) {
      const GroupTargets targets = t.encode_target_of(samples.leaves[r]);
      for (std::size_t g = 0; g < targets.size(); ++g) {
        if (targets[g]) ++counts[layout.segments[g].offset + *targets[g]];
      }
    }
    logit_weights.assign(layout.total_logits, 1.0);
    for (const LogitSegment& seg : layout.segments) {
      const std::vector<std::size_t> group_counts(counts.begin() + seg.offset,
                                                  counts.begin() + seg.offset + seg.length);
      const std::vector<double> w = balanced_weights(group_counts);
      std::copy(w.begin(), w.end(), logit_weights.begin() + seg.offset);
    }
  } else if (!logit_weights.empty() && logit_weights.size() != layout.total_logits) {
    fail(ErrorKind::kInvalidArgument,
         "hierarchical class_weights need one entry per logit (" +
             std::to_string(layout.total_logits) + ")");
  }

  if (mode == TrainMode::kHierMultilabel) {
    auto loss_cfg = std::make_shared<LossConfig>(cfg.loss);
    loss_cfg->class_weights = logit_weights;
    ModelSpec spec = arch;
    spec.outputs = layout.total_logits;
    Task task;
    task.output = OutputKind::kHierarchical;
    task.train_rows = train_vec;
    task.val_rows = val_vec;
    task.loss = [&samples, &t, &layout, loss_cfg](std::span<const double> s, std::size_t r) {
      return hierarchical_loss(layout, s, t.encode_target_of(samples.leaves[r]), *loss_cfg);
    };
    task.correct = [&samples, &t, &cfg](std::span<const double> s, std::size_t r) {
      return decode_grouped(s, t, cfg.decoder).leaf == samples.leaves[r];
    };
    out.push_back(fit(samples, t, spec, cfg, task, 0, hooks, mode));
    return out;
  }

  for (std::size_t g = 0; g < t.groups().size(); ++g) {
    const LogitSegment& seg = layout.segments[g];
    Task task;
    task.output = OutputKind::kGroupMember;
    task.group_id = seg.group_id;
    for (const std::size_t r : train_vec) {
      if (group_target(t, g, samples.leaves[r])) task.train_rows.push_back(r);
    }
    for (const std::size_t r : val_vec) {
      if (group_target(t, g, samples.leaves[r])) task.val_rows.push_back(r);
    }
    if (task.train_rows.empty()) {
      fail(ErrorKind::kInvalidArgument,
           "no training samples reach group '" + seg.group_id + "'; member not trained");
    }
    auto weights = std::make_shared<std::vector<double>>();
    if (!logit_weights.empty()) {
      weights->assign(logit_weights.begin() + seg.offset,
                      logit_weights.begin() + seg.offset + seg.length);
    }
    ModelSpec spec = arch;
    spec.outputs = seg.length;
    task.loss = [&samples, &t, &cfg, g, weights](std::span<const double> s, std::size_t r) {
      return classification_loss(s, *group_target(t, g, samples.leaves[r]), cfg.loss,
                                 *weights);
    };
    task.correct = [&samples, &t, g](std::span<const double> s, std::size_t r) {
      return argmax(s) == *group_target(t, g, samples.leaves[r]);
    };
    out.push_back(fit(samples, t, spec, cfg, task, g, hooks, mode));
  }
  return out;
}

ModelSet::ModelSet(const Taxonomy& t, std::vector<Checkpoint> checkpoints,
                   Decoder decoder)
    : t_(&t), checkpoints_(std::move(checkpoints)), decoder_(decoder) {
  if (checkpoints_.empty()) fail(ErrorKind::kInvalidArgument, "no checkpoints given");
  for (const Checkpoint& c : checkpoints_) {
    check_compatible(c, t);
    if (c.spec.input_size() != checkpoints_.front().spec.input_size()) {
      fail(ErrorKind::kInvalidArgument, "checkpoints disagree on the input size");
    }
    models_.emplace_back(c.spec, c.params);
  }
  const OutputKind kind = checkpoints_.front().output;
  if (kind != OutputKind::kGroupMember) {
    if (checkpoints_.size() != 1) {
      fail(ErrorKind::kInvalidArgument,
           "a " + to_string(kind) + " model set takes exactly one checkpoint");
    }
    return;
  }
  const std::size_t none = checkpoints_.size();
  member_of_group_.assign(t.groups().size(), none);
  for (std::size_t i = 0; i < checkpoints_.size(); ++i) {
    const Checkpoint& c = checkpoints_[i];
    if (c.output != OutputKind::kGroupMember) {
      fail(ErrorKind::kInvalidArgument, "cannot mix group members with other models");
    }
    const std::size_t g = *t.group_of_parent(t.index_of(c.group_id));
    if (member_of_group_[g] != none) {
      fail(ErrorKind::kInvalidArgument, "two members for group '" + c.group_id + "'");
    }
    member_of_group_[g] = i;
  }
  for (std::size_t g = 0; g < member_of_group_.size(); ++g) {
    if (member_of_group_[g] == none) {
      fail(ErrorKind::kInvalidArgument,
           "no member for group '" + t.node(t.groups()[g].parent).id + "'");
    }
  }
}

Prediction ModelSet::predict(std::span<const double> input) const {
  const Taxonomy& t = *t_;
  switch (output()) {
    case OutputKind::kFlat:
      return decode_flat(models_.front().forward(input), t);
    case OutputKind::kHierarchical:
      return decode_grouped(models_.front().forward(input), t, decoder_);
    case OutputKind::kGroupMember:
      break;
  }
  std::vector<MemberPredictor> members;
  members.reserve(member_of_group_.size());
  for (const std::size_t i : member_of_group_) members.emplace_back(&models_[i]);
  std::vector<const Predictor*> ptrs;
  for (const MemberPredictor& m : members) ptrs.push_back(&m);
  Prediction p = compose_base(t, ptrs, input);
  std::vector<double> grouped(t.layout().total_logits);
  for (std::size_t g = 0; g < member_of_group_.size(); ++g) {
    const std::vector<double> s = members[g].scores(input);
    std::copy(s.begin(), s.end(), grouped.begin() + t.layout().segments[g].offset);
    p.group_probs[g] = softmax(s);
  }
  p.leaf_probs = leaf_marginals(grouped, t);
  return p;
}

Evaluation evaluate_models(const ModelSet& models, const SampleTable& samples,
                           std::span<const std::size_t> rows,
                           const Taxonomy& t, const MergeMap* merge) {
  if (rows.empty()) fail(ErrorKind::kInvalidArgument, "nothing to evaluate");
  Evaluation e;
  e.rows.assign(rows.begin(), rows.end());
  std::vector<std::size_t> preds, truths;
  std::vector<std::vector<double>> leaf_probs;
  std::vector<std::vector<std::vector<double>>> group_probs;
  std::vector<PatchVote> votes;
  std::map<std::string, std::string> slide_truths;
  for (const std::size_t r : rows) {
    Prediction p = models.predict(samples.inputs[r]);
    preds.push_back(p.leaf);
    truths.push_back(samples.leaves[r]);
    leaf_probs.push_back(p.leaf_probs);
    group_probs.push_back(p.group_probs);
    votes.push_back({samples.slide_ids[r], t.leaf_id(p.leaf), p.confidence});
    slide_truths[samples.slide_ids[r]] = t.leaf_id(samples.leaves[r]);
    e.predictions.push_back(std::move(p));
  }
  e.patch = evaluate(t, preds, truths, &leaf_probs, merge);
  e.stages = stage_accuracies(t, group_probs, truths);
  e.votes = slide_mode(votes, t);
  e.slide = slide_metrics(e.votes, slide_truths, t, merge);
  return e;
}

namespace {

nlohmann::json stages_json(std::span<const StageAccuracy> stages) {
  nlohmann::json out = nlohmann::json::array();
  for (const StageAccuracy& s : stages) {
    out.push_back({{"group", s.group_id},
                   {"label", s.label},
                   {"accuracy", number_or_null(s.accuracy)},
                   {"count", s.count}});
  }
  return out;
}

std::string render_stages(std::span<const StageAccuracy> stages) {
  std::size_t width = 5;
  for (const StageAccuracy& s : stages) width = std::max(width, s.label.size());
  std::ostringstream os;
  os << pad("stage", width + 2) << pad("accuracy", 10) << "count\n";
  for (const StageAccuracy& s : stages) {
    os << pad(s.label, width + 2)
       << pad(s.count > 0 ? format_fixed(s.accuracy, 4) : "-", 10) << s.count << "\n";
  }
  return os.str();
}

}  // namespace

void write_evaluation(const std::filesystem::path& dir, const Taxonomy& t,
                      const SampleTable& samples, const Evaluation& e) {
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < e.rows.size(); ++i) {
    const std::size_t r = e.rows[i];
    records.push_back(make_record(t, samples.sample_ids[r], samples.slide_ids[r],
                                  e.predictions[i]));
  }
  write_predictions_csv(dir / "predictions.csv", t, records);
  write_slide_csv(dir / "slides.csv", e.votes);
  const nlohmann::json metrics = {{"patch", to_json(e.patch)},
                                  {"slide", to_json(e.slide)},
                                  {"stages", stages_json(e.stages)}};
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  write_file(dir / "metrics.txt", "Patch level\n" + render_text(e.patch) +
                                      "\nSlide level\n" + render_text(e.slide) +
                                      "\nStage accuracy\n" + render_stages(e.stages));
}

ExperimentResult run_experiment(const Dataset& ds, const Taxonomy& t,
                                const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir,
                                const TrainHooks* hooks) {
  cfg.train.validate();
  if (cfg.modes.empty()) fail(ErrorKind::kInvalidArgument, "no training modes given");
  ExperimentResult result;
  result.plan = grouped_kfold(ds, cfg.folds, cfg.seed);
  const SampleTable samples = make_sample_table(ds, t);
  const ModelSpec spec = resolve_spec(cfg.model, ds);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;
  const std::size_t k = cfg.folds;
  const std::size_t modes = cfg.modes.size();
  result.runs.resize(k * modes);

  std::vector<std::size_t> fold_of(samples.size());
  for (std::size_t r = 0; r < samples.size(); ++r) {
    fold_of[r] = result.plan.assignment.at(samples.slide_ids[r]);
  }

  auto run_fold = [&](std::size_t f) {
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t r = 0; r < samples.size(); ++r) {
      (fold_of[r] == f ? val_rows : train_rows).push_back(r);
    }
    for (std::size_t m = 0; m < modes; ++m) {
      FoldRun& run = result.runs[f * modes + m];
      run.mode = cfg.modes[m];
      run.fold = f;
      run.models = train(samples, train_rows, val_rows, t, run.mode, spec, train_cfg, hooks);
      std::vector<Checkpoint> checkpoints;
      for (const TrainedModel& tm : run.models) checkpoints.push_back(tm.checkpoint);
      const ModelSet set(t, std::move(checkpoints), train_cfg.decoder);
      run.eval = evaluate_models(set, samples, val_rows, t,
                                 cfg.merge.empty() ? nullptr : &cfg.merge);
      if (out_dir.empty()) continue;
      const std::filesystem::path dir =
          out_dir / ("fold_" + std::to_string(f + 1)) / to_string(run.mode);
      for (const TrainedModel& tm : run.models) {
        const Checkpoint& c = tm.checkpoint;
        const std::string stem =
            c.output == OutputKind::kGroupMember ? "member_" + c.group_id : "model";
        save_checkpoint(c, dir / (stem + ".ckpt"));
        write_curve_csv(dir / (c.output == OutputKind::kGroupMember
                                   ? "curve_" + c.group_id + ".csv"
                                   : std::string("curve.csv")),
                        tm.curve);
      }
      write_evaluation(dir, t, samples, run.eval);
    }
  };

  if (cfg.parallel_folds) {
    std::vector<std::exception_ptr> errors(k);
    std::vector<std::thread> workers;
    for (std::size_t f = 0; f < k; ++f) {
      workers.emplace_back([&, f] {
        try {
          run_fold(f);
        } catch (...) {
          errors[f] = std::current_exception();
        }
      });
    }
    for (std::thread& w : workers) w.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t f = 0; f < k; ++f) run_fold(f);
  }

  nlohmann::json summary = {{"folds", k},
                            {"seed", cfg.seed},
                            {"fold_sizes", nlohmann::json::array()},
                            {"modes", nlohmann::json::object()}};
  for (const auto& fold : result.plan.folds) summary["fold_sizes"].push_back(fold.size());
  std::ostringstream text;
  for (std::size_t m = 0; m < modes; ++m) {
    const std::string name = to_string(cfg.modes[m]);
    std::map<std::string, Stat> patch, slide, per_class, stages;
    std::vector<std::string> stage_order;
    for (std::size_t f = 0; f < k; ++f) {
      const Evaluation& e = result.runs[f * modes + m].eval;
      patch["accuracy"].folds.push_back(e.patch.accuracy);
      patch["macro_f1"].folds.push_back(e.patch.macro_f1);
      patch["h_precision"].folds.push_back(e.patch.h_precision);
      patch["h_recall"].folds.push_back(e.patch.h_recall);
      patch["h_f1"].folds.push_back(e.patch.h_f1);
      patch["auroc_macro"].folds.push_back(e.patch.auroc_macro);
      slide["accuracy"].folds.push_back(e.slide.accuracy);
      slide["macro_f1"].folds.push_back(e.slide.macro_f1);
      slide["h_f1"].folds.push_back(e.slide.h_f1);
      for (const ClassScores& c : e.patch.per_class) {
        per_class[c.label].folds.push_back(
            c.support > 0 ? std::optional<double>(c.f1) : std::nullopt);
      }
      for (const StageAccuracy& s : e.stages) {
        if (f == 0) stage_order.push_back(s.label);
        stages[s.label].folds.push_back(
            s.count > 0 ? std::optional<double>(s.accuracy) : std::nullopt);
      }
    }
    nlohmann::json mode_json;
    for (auto& [key, stat] : patch) mode_json["patch"][key] = stat.to_json();
    for (auto& [key, stat] : slide) mode_json["slide"][key] = stat.to_json();
    for (auto& [key, stat] : per_class) mode_json["per_class_f1"][key] = stat.to_json();
    for (auto& [key, stat] : stages) mode_json["stages"][key] = stat.to_json();
    summary["modes"][name] = mode_json;

    text << "Mode " << name << "\n\nPatch level\n";
    const std::vector<std::string> patch_cols = {"accuracy", "macro_f1", "h_f1",
                                                 "auroc_macro"};
    std::vector<nlohmann::json> cols;
    for (const std::string& c : patch_cols) cols.push_back(mode_json["patch"][c]);
    render_table(text, patch_cols, cols, k);
    text << "\nSlide level\n";
    const std::vector<std::string> slide_cols = {"accuracy", "macro_f1", "h_f1"};
    cols.clear();
    for (const std::string& c : slide_cols) cols.push_back(mode_json["slide"][c]);
    render_table(text, slide_cols, cols, k);
    text << "\nPer-class F1\n";
    cols.clear();
    for (const std::string& leaf : t.leaf_ids()) cols.push_back(mode_json["per_class_f1"][leaf]);
    render_table(text, t.leaf_ids(), cols, k);
    text << "\nStage accuracy (mean, std)\n";
    std::size_t width = 5;
    for (const std::string& s : stage_order) width = std::max(width, s.size());
    for (const std::string& s : stage_order) {
      const nlohmann::json& st = mode_json["stages"][s];
      text << pad(s, width + 2) << pad(cell(st["mean"]), 10) << cell(st["std"]) << "\n";
    }
    text << "\n";
  }
  result.summary = summary;
  result.summary_text = text.str();
  if (!out_dir.empty()) {
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    write_file(out_dir / "summary.txt", result.summary_text);
  }
  return result;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) fail(ErrorKind::kInvalidArgument, "experiment config must be an object");
  try {
    cfg.folds = j.value("folds", cfg.folds);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : j.at("modes")) cfg.modes.push_back(parse_train_mode(m.get<std::string>()));
    }
    if (j.contains("model")) cfg.model = model_spec_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    cfg.parallel_folds = j.value("parallel_folds", cfg.parallel_folds);
    cfg.merge = j.value("merge", cfg.merge);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("experiment config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json modes = nlohmann::json::array();
  for (const TrainMode m : cfg.modes) modes.push_back(to_string(m));
  nlohmann::json model = {{"kind", to_string(cfg.model.kind)}};
  if (cfg.model.kind == ModelKind::kMlp) model["hidden"] = cfg.model.hidden;
  if (cfg.model.kind == ModelKind::kTinyCnn) model["conv_channels"] = cfg.model.conv_channels;
  return {{"folds", cfg.folds},       {"seed", cfg.seed},
          {"modes", modes},           {"model", model},
          {"train", to_json(cfg.train)}, {"parallel_folds", cfg.parallel_folds},
          {"merge", cfg.merge}};
}

}  // namespace hierlabel
