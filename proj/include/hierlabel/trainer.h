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

#ifndef HIERLABEL_TRAINER_H_
#define HIERLABEL_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierlabel/aggregation.h"
#include "hierlabel/checkpoint.h"
#include "hierlabel/data.h"
#include "hierlabel/inference.h"
#include "hierlabel/metrics.h"
#include "hierlabel/model.h"
#include "hierlabel/objective.h"
#include "hierlabel/optimizer.h"
#include "hierlabel/taxonomy.h"
#include "json.hpp"

namespace hierlabel {

enum class TrainMode { kFlat, kHierMultilabel, kHierBase };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

struct TrainConfig {
  AdamWConfig optimizer;
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  LossConfig loss;
  std::uint64_t seed = 7;
  Decoder decoder = Decoder::kGreedy;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LossConfig& cfg);
LossConfig loss_config_from_json(const nlohmann::json& j);

// Every sample of a dataset as a model input, in slide then sample order.
struct SampleTable {
  std::vector<std::vector<double>> inputs;
  std::vector<std::size_t> leaves;  // leaf index
  std::vector<std::string> slide_ids;
  std::vector<std::string> sample_ids;  // "<slide_id>/<n>"
  std::vector<std::size_t> slide_index;
  std::vector<std::size_t> sample_index;

  std::size_t size() const { return inputs.size(); }
};

SampleTable make_sample_table(const Dataset& ds, const Taxonomy& t);

// Fills the input dimensions of `arch` from the dataset. Throws
// kInvalidArgument when the kind cannot consume the dataset (tinycnn needs
// images).
ModelSpec resolve_spec(const ModelSpec& arch, const Dataset& ds);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without validation samples
  double val_acc = 0.0;
};

// Columns: epoch, train_loss, val_loss, val_acc.
void write_curve_csv(const std::filesystem::path& path,
                     std::span<const EpochStats> curve);

// Seen once per optimizer step, before the update.
struct StepInfo {
  std::size_t epoch = 0;
  std::size_t step = 0;
  OutputKind output = OutputKind::kFlat;
  std::string group_id;
  std::span<const std::size_t> samples;             // SampleTable rows
  std::span<const std::vector<double>> score_grads;  // per sample, unscaled
};

struct TrainHooks {
  std::function<void(const StepInfo&)> on_step;
};

struct TrainedModel {
  Checkpoint checkpoint;
  std::vector<EpochStats> curve;
  std::vector<std::string> train_slides;  // sorted, unique
};

// flat: one model over leaves. hier_multilabel: one model over the full logit
// layout trained with hierarchical_loss. hier_base: one model per sibling
// group (group order), each trained only on samples whose true path passes
// through that group. `arch` must already be resolved against the data; its
// output count is set per mode. For weighted cross-entropy without explicit
// class weights, weights are inverse class frequencies normalized to mean 1
// (per group for hierarchical outputs).
std::vector<TrainedModel> train(const SampleTable& samples,
                                std::span<const std::size_t> train_rows,
                                std::span<const std::size_t> val_rows,
                                const Taxonomy& t, TrainMode mode,
                                const ModelSpec& arch, const TrainConfig& cfg,
                                const TrainHooks* hooks = nullptr);

// A trained flat model, hierarchical model, or complete set of group members,
// checked against the taxonomy.
class ModelSet {
 public:
  ModelSet(const Taxonomy& t, std::vector<Checkpoint> checkpoints,
           Decoder decoder = Decoder::kGreedy);

  // Base compositions decide through compose_base; leaf_probs and
  // group_probs are still filled from all members so that marginals and
  // per-stage accuracies are available.
  Prediction predict(std::span<const double> input) const;

  const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }
  OutputKind output() const { return checkpoints_.front().output; }

 private:
  const Taxonomy* t_;
  std::vector<Checkpoint> checkpoints_;
  std::vector<Model> models_;
  std::vector<std::size_t> member_of_group_;
  Decoder decoder_;
};

struct ExperimentConfig {
  std::size_t folds = 5;
  std::uint64_t seed = 7;  // fold assignment and training
  std::vector<TrainMode> modes = {TrainMode::kFlat, TrainMode::kHierMultilabel};
  ModelSpec model;
  TrainConfig train;
  bool parallel_folds = false;
  MergeMap merge;
};

// Patch and slide evaluation of one model set on a set of samples.
struct Evaluation {
  std::vector<std::size_t> rows;
  std::vector<Prediction> predictions;
  MetricReport patch;
  MetricReport slide;
  std::vector<StageAccuracy> stages;
  std::vector<SlideVote> votes;
};

Evaluation evaluate_models(const ModelSet& models, const SampleTable& samples,
                           std::span<const std::size_t> rows,
                           const Taxonomy& t, const MergeMap* merge);

// Writes predictions.csv, slides.csv, metrics.json and metrics.txt.
void write_evaluation(const std::filesystem::path& dir, const Taxonomy& t,
                      const SampleTable& samples, const Evaluation& e);

struct FoldRun {
  TrainMode mode = TrainMode::kFlat;
  std::size_t fold = 0;
  std::vector<TrainedModel> models;
  Evaluation eval;
};

struct ExperimentResult {
  SplitPlan plan;
  std::vector<FoldRun> runs;  // fold-major, then mode order
  nlohmann::json summary;
  std::string summary_text;
};

// For each fold: trains every mode on the other folds and evaluates on the
// held-out fold. With a non-empty out_dir, writes fold_<i>/<mode>/ artifacts
// plus summary.json and summary.txt. Hooks may be called from worker
// threads when parallel_folds is set.
ExperimentResult run_experiment(const Dataset& ds, const Taxonomy& t,
                                const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir = {},
                                const TrainHooks* hooks = nullptr);

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace hierlabel

#endif  // HIERLABEL_TRAINER_H_
