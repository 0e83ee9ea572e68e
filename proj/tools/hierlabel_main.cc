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

// Command-line front end: taxonomy checks, data generation, training,
// evaluation, slide aggregation and Grad-CAM reports.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hierlabel/aggregation.h"
#include "hierlabel/attribution.h"
#include "hierlabel/checkpoint.h"
#include "hierlabel/csv.h"
#include "hierlabel/data.h"
#include "hierlabel/error.h"
#include "hierlabel/manifest.h"
#include "hierlabel/taxonomy.h"
#include "hierlabel/trainer.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hierlabel {
namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct LoadedConfig {
  json doc;
  fs::path base;  // directory the config's relative paths resolve against
};

LoadedConfig read_config(const std::string& path) {
  if (path.empty()) fail(ErrorKind::kInvalidArgument, "--config is required");
  LoadedConfig c;
  const std::string text = read_file(path);
  try {
    c.doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidArgument, path + ": " + e.what());
  }
  if (!c.doc.is_object()) fail(ErrorKind::kInvalidArgument, path + ": expected an object");
  c.base = fs::path(path).parent_path();
  return c;
}

fs::path resolve(const LoadedConfig& c, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : c.base / path;
}

std::string required_string(const LoadedConfig& c, const char* key) {
  if (!c.doc.contains(key) || !c.doc.at(key).is_string()) {
    fail(ErrorKind::kInvalidArgument, std::string("config needs a string '") + key + "'");
  }
  return c.doc.at(key).get<std::string>();
}

fs::path output_dir(const Options& o, const LoadedConfig& c) {
  if (!o.out.empty()) return o.out;
  if (c.doc.contains("out")) return resolve(c, c.doc.at("out").get<std::string>());
  fail(ErrorKind::kInvalidArgument, "no output directory (--out or \"out\")");
}

Taxonomy config_taxonomy(const LoadedConfig& c) {
  if (c.doc.contains("taxonomy")) {
    return load_taxonomy(resolve(c, c.doc.at("taxonomy").get<std::string>()));
  }
  return load_taxonomy(HIERLABEL_DEFAULT_TAXONOMY);
}

MergeMap config_merge(const LoadedConfig& c) {
  try {
    return c.doc.value("merge", MergeMap{});
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("merge: ") + e.what());
  }
}

class Run {
 public:
  Run(std::string command, const Options& o)
      : command_(std::move(command)), quiet_(o.quiet),
        start_(std::chrono::steady_clock::now()) {}

  std::ostream& out() { return quiet_ ? null_ : std::cout; }

  void finish(const fs::path& dir, const json& config, std::uint64_t seed,
              std::vector<std::string> inputs) {
    RunManifest m;
    m.command = command_;
    m.config_hash = config_hash(config);
    m.seed = seed;
    m.inputs = std::move(inputs);
    m.outputs = list_outputs(dir);
    m.wall_time_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start_).count();
    write_manifest(dir, m);
  }

 private:
  std::string command_;
  bool quiet_;
  std::chrono::steady_clock::time_point start_;
  std::ostream null_{nullptr};
};

int cmd_taxonomy_check(const std::string& path, bool quiet) {
  const Taxonomy t = load_taxonomy(path);
  if (!quiet) {
    std::cout << t.to_text();
    std::cout << "levels: " << t.max_level() << ", leaves: " << t.leaf_count() << "\n";
    for (std::size_t g = 0; g < t.groups().size(); ++g) {
      const LogitSegment& s = t.layout().segments[g];
      std::cout << "  group " << s.group_id << " (level " << s.level << "): logits ["
                << s.offset << ", " << s.offset + s.length << ") " << t.group_label(g)
                << "\n";
    }
    std::cout << t.groups().size() << " groups, " << t.layout().total_logits
              << " logits\n";
  }
  return 0;
}

int cmd_data_gen(const Options& o) {
  Run run("data-gen", o);
  const LoadedConfig c = read_config(o.config);
  const Taxonomy t = config_taxonomy(c);
  json gen = c.doc;
  gen.erase("taxonomy");
  gen.erase("out");
  if (o.seed) gen["seed"] = *o.seed;
  const GenConfig cfg = gen_config_from_json(gen);
  const fs::path out = output_dir(o, c);
  const Dataset ds = generate_dataset(t, cfg);
  save_dataset(ds, t, out);
  run.out() << "wrote " << ds.slides.size() << " slides, " << ds.sample_count() << " "
            << (ds.mode == DataMode::kImages ? "images" : "feature vectors") << " to "
            << out.string() << "\n";
  json effective = to_json(cfg);
  effective["taxonomy_fingerprint"] = t.fingerprint();
  run.finish(out, effective, cfg.seed, {o.config});
  return 0;
}

// Dataset named by "dataset", or generated in memory from "generate".
Dataset config_dataset(const LoadedConfig& c, Taxonomy& t, std::vector<std::string>& inputs,
                       json& effective) {
  if (c.doc.contains("dataset")) {
    const fs::path dir = resolve(c, c.doc.at("dataset").get<std::string>());
    t = load_dataset_taxonomy(dir);
    inputs.push_back(dir.string());
    effective["dataset_fingerprint"] = t.fingerprint();
    Dataset ds = load_dataset(dir);
    if (!ds.taxonomy_fingerprint.empty() && ds.taxonomy_fingerprint != t.fingerprint()) {
      fail(ErrorKind::kCorruptFile, dir.string() + ": taxonomy fingerprint mismatch");
    }
    return ds;
  }
  if (c.doc.contains("generate")) {
    t = config_taxonomy(c);
    const GenConfig g = gen_config_from_json(c.doc.at("generate"));
    effective["generate"] = to_json(g);
    return generate_dataset(t, g);
  }
  fail(ErrorKind::kInvalidArgument, "config needs \"dataset\" or \"generate\"");
}

int cmd_train(const Options& o) {
  Run run("train", o);
  const LoadedConfig c = read_config(o.config);
  json exp = c.doc;
  if (o.seed) exp["seed"] = *o.seed;
  const ExperimentConfig cfg = experiment_config_from_json(exp);
  const fs::path out = output_dir(o, c);
  Taxonomy t = config_taxonomy(c);
  std::vector<std::string> inputs = {o.config};
  json effective = to_json(cfg);
  const Dataset ds = config_dataset(c, t, inputs, effective);
  resolve_spec(cfg.model, ds);
  const ExperimentResult r = run_experiment(ds, t, cfg, out);
  run.out() << r.summary_text;
  run.finish(out, effective, cfg.seed, inputs);
  return 0;
}

int cmd_eval(const Options& o) {
  Run run("eval", o);
  const LoadedConfig c = read_config(o.config);
  const fs::path out = output_dir(o, c);
  const fs::path dir = resolve(c, required_string(c, "dataset"));
  const Taxonomy t = load_dataset_taxonomy(dir);
  std::vector<std::string> inputs = {o.config, dir.string()};
  if (!c.doc.contains("checkpoints") || !c.doc.at("checkpoints").is_array()) {
    fail(ErrorKind::kInvalidArgument, "config needs a \"checkpoints\" list");
  }
  std::vector<Checkpoint> checkpoints;
  for (const json& p : c.doc.at("checkpoints")) {
    const fs::path path = resolve(c, p.get<std::string>());
    checkpoints.push_back(load_checkpoint(path));
    inputs.push_back(path.string());
  }
  const Decoder decoder = parse_decoder(c.doc.value("decoder", "greedy"));
  const ModelSet models(t, std::move(checkpoints), decoder);
  const Dataset ds = load_dataset(dir);
  const SampleTable samples = make_sample_table(ds, t);
  std::set<std::string> subset;
  if (c.doc.contains("slides")) {
    for (const json& s : c.doc.at("slides")) subset.insert(s.get<std::string>());
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (subset.empty() || subset.count(samples.slide_ids[r])) rows.push_back(r);
  }
  const MergeMap merge = config_merge(c);
  const Evaluation e =
      evaluate_models(models, samples, rows, t, merge.empty() ? nullptr : &merge);
  fs::create_directories(out);
  write_evaluation(out, t, samples, e);
  run.out() << read_file(out / "metrics.txt");
  run.finish(out, c.doc, 0, inputs);
  return 0;
}

int cmd_cam(const Options& o) {
  Run run("cam", o);
  const LoadedConfig c = read_config(o.config);
  const fs::path out = output_dir(o, c);
  const fs::path dir = resolve(c, required_string(c, "dataset"));
  const fs::path ckpt_path = resolve(c, required_string(c, "checkpoint"));
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.spec.kind != ModelKind::kTinyCnn) {
    fail(ErrorKind::kInvalidArgument,
         "Grad-CAM needs a tinycnn checkpoint, got " + to_string(ckpt.spec.kind));
  }
  const Taxonomy t = load_dataset_taxonomy(dir);
  const Dataset ds = load_dataset(dir);
  std::set<std::string> subset;
  if (c.doc.contains("slides")) {
    for (const json& s : c.doc.at("slides")) subset.insert(s.get<std::string>());
  } else if (ckpt.training.contains("validation_slides")) {
    for (const json& s : ckpt.training.at("validation_slides")) {
      subset.insert(s.get<std::string>());
    }
  }
  const std::size_t per_slide = c.doc.value("samples_per_slide", std::size_t{0});
  std::vector<CamItem> items;
  for (std::size_t i = 0; i < ds.slides.size(); ++i) {
    if (!subset.empty() && !subset.count(ds.slides[i].slide_id)) continue;
    const std::size_t n = ds.slides[i].sample_count();
    for (std::size_t j = 0; j < n && (per_slide == 0 || j < per_slide); ++j) {
      items.push_back({i, j});
    }
  }
  const std::string target = c.doc.value("target", "");
  const Decoder decoder = parse_decoder(c.doc.value("decoder", "greedy"));
  fs::create_directories(out);
  const CamReport report = cam_batch_report(ckpt, t, ds, items, out, target, decoder);
  const std::string text = render_text(report);
  write_file(out / "cam.txt", text);
  run.out() << text;
  run.finish(out, c.doc, 0, {o.config, dir.string(), ckpt_path.string()});
  return 0;
}

int cmd_aggregate(const Options& o) {
  Run run("aggregate", o);
  const LoadedConfig c = read_config(o.config);
  const fs::path out = output_dir(o, c);
  const fs::path dir = resolve(c, required_string(c, "dataset"));
  const fs::path pred_path = resolve(c, required_string(c, "predictions"));
  const Taxonomy t = load_dataset_taxonomy(dir);
  const Dataset ds = load_dataset(dir);
  std::map<std::string, std::string> truths;
  for (const SlideRecord& s : ds.slides) truths[s.slide_id] = s.leaf;
  std::vector<PatchVote> patches;
  for (const PredictionRecord& r : read_predictions_csv(pred_path, t)) {
    patches.push_back({r.slide_id, r.leaf, r.confidence});
  }
  const std::vector<SlideVote> votes = slide_mode(patches, t);
  const MergeMap merge = config_merge(c);
  const MetricReport report =
      slide_metrics(votes, truths, t, merge.empty() ? nullptr : &merge);
  fs::create_directories(out);
  write_slide_csv(out / "slides.csv", votes);
  write_file(out / "slide_metrics.json", to_json(report).dump(2) + "\n");
  const std::string text = render_text(report);
  write_file(out / "slide_metrics.txt", text);
  std::size_t tie_breaks = 0;
  for (const SlideVote& v : votes) tie_breaks += v.tie_break != TieBreak::kNone;
  run.out() << text << tie_breaks << " of " << votes.size()
            << " slides needed a tie-break\n";
  run.finish(out, c.doc, 0, {o.config, dir.string(), pred_path.string()});
  return 0;
}

void add_common(CLI::App* cmd, Options& o, bool with_seed) {
  cmd->add_option("--config", o.config, "experiment or command config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory");
  if (with_seed) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&o](const std::uint64_t& s) { o.seed = s; }, "overrides the config seed");
  }
  cmd->add_flag("--quiet", o.quiet, "print errors only");
}

}  // namespace
}  // namespace hierlabel

int main(int argc, char** argv) {
  using namespace hierlabel;
  CLI::App app{"Hierarchical label classification toolkit"};
  app.require_subcommand(1);
  Options o;
  std::string taxonomy_path;

  CLI::App* check = app.add_subcommand("taxonomy-check", "validate a taxonomy file");
  check->add_option("path", taxonomy_path, "taxonomy file")->required();
  check->add_flag("--quiet", o.quiet, "print errors only");
  CLI::App* gen = app.add_subcommand("data-gen", "generate a synthetic dataset");
  add_common(gen, o, true);
  CLI::App* train = app.add_subcommand("train", "run a cross-validated experiment");
  add_common(train, o, true);
  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints on a dataset");
  add_common(eval, o, false);
  CLI::App* cam = app.add_subcommand("cam", "Grad-CAM heatmaps and localization report");
  add_common(cam, o, false);
  CLI::App* aggregate = app.add_subcommand("aggregate", "slide-level majority vote");
  add_common(aggregate, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*check) return cmd_taxonomy_check(taxonomy_path, o.quiet);
    if (*gen) return cmd_data_gen(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*cam) return cmd_cam(o);
    if (*aggregate) return cmd_aggregate(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}
