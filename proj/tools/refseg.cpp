// Copyright 2026 The refseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// refseg command-line tool: gen, train, eval, infer, render.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "refseg/refseg.hpp"

namespace fs = std::filesystem;
using namespace refseg;

namespace {

AppConfig config_or_default(const std::string& path) { return path.empty() ? AppConfig{} : load_config(path); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

std::string hexdouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

InferenceOptions inference_options(const AppConfig& c) {
  InferenceOptions o;
  o.use_trm = c.eval.use_trm;
  o.tracker = c.tracker;
  o.track_score = c.eval.track_score;
  return o;
}

std::string frame_file(int sample, std::size_t frame) {
  char buf[64];
  if (sample >= 0) std::snprintf(buf, sizeof buf, "sample_%05d_frame_%02zu.ppm", sample, frame);
  else std::snprintf(buf, sizeof buf, "frame_%02zu.ppm", frame);
  return buf;
}

// One overlay per frame: every candidate blended, the predicted one outlined.
void render_prediction(const Scene& scene, const StoredPrediction& p, const fs::path& dir) {
  require(p.frames.size() == scene.frames.size(),
          "render: prediction for sample " + std::to_string(p.sample) + " has " + std::to_string(p.frames.size()) +
              " frames, scene has " + std::to_string(scene.frames.size()));
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const auto& cands = scene.candidates[f];
    std::optional<std::size_t> ref;
    const int c = p.frames[f].candidate;
    if (c >= 0) {
      require(static_cast<std::size_t>(c) < cands.size(), "render: candidate index out of range in frame " +
                                                              std::to_string(f) + " of sample " +
                                                              std::to_string(p.sample));
      ref = static_cast<std::size_t>(c);
    }
    write_file_bytes(dir / frame_file(p.sample, f), encode_ppm(compose_overlay(scene.frames[f], cands, ref)));
  }
}

int cmd_gen(std::uint64_t seed, const std::string& config, const std::string& out, std::optional<int> scenes) {
  AppConfig c = config_or_default(config);
  if (scenes) c.gen.scenes = *scenes;
  const Dataset ds = generate_dataset(c.gen, seed);
  save_dataset(ds, out);
  std::cout << "scenes=" << ds.scenes.size() << " samples=" << ds.samples.size()
            << " train=" << ds.split("train").size() << " test=" << ds.split("test").size() << " out=" << out << "\n";
  return 0;
}

int cmd_train(std::uint64_t seed, const std::string& config, const std::string& dataset, const std::string& out,
              std::optional<std::size_t> epochs) {
  AppConfig c = config_or_default(config);
  if (epochs) c.train.epochs = *epochs;
  c.train.seed = seed;
  const Dataset ds = load_dataset(dataset);
  c.model.vocab_size = ds.vocab.size();
  const auto samples = make_video_samples(ds, "train", ds.vocab);
  Rng init(seed);
  ModelParams params = ModelParams::random(c.model, init);
  fs::create_directories(out);
  std::ofstream log(fs::path(out) / "train_log.tsv");
  if (!log) throw Error("cannot write " + (fs::path(out) / "train_log.tsv").string());
  log << "epoch\tloss\tlr\tskipped\n";
  const TrainLog tl = train_model(params, c.model, c.train, samples, ds.vocab, [&](const EpochRecord& r) {
    log << r.epoch << "\t" << hexdouble(r.loss) << "\t" << hexdouble(r.lr) << "\t" << r.skipped << "\n";
    log.flush();
    std::cout << "epoch " << r.epoch << " loss " << format_fixed(r.loss) << " lr " << r.lr << "\n" << std::flush;
  });
  Checkpoint ck{c.model, ds.vocab, std::move(params), tl.steps};
  save_checkpoint(fs::path(out) / "model.ckpt", ck);
  std::cout << "checkpoint " << (fs::path(out) / "model.ckpt").string() << " steps " << tl.steps << "\n";
  return 0;
}

int cmd_eval(const std::string& config, const std::string& checkpoint, const std::string& dataset,
             const std::string& out, const std::string& split) {
  const AppConfig c = config_or_default(config);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(dataset);
  require(!ds.split(split).empty(), "eval: split '" + split + "' has no samples");
  const EvalSummary e = evaluate_split(ck.params, ck.config, ds, ck.vocab, split, inference_options(c));
  const std::string report = eval_report_text(e, split);
  std::cout << report;
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(fs::path(out) / "report.txt", report);
    std::vector<StoredPrediction> preds;
    for (const auto& o : e.outcomes) {
      preds.push_back({o.sample->id, o.sample->scene, o.sample->query, o.prediction.track_id,
                       o.prediction.track_score, o.prediction.frames});
    }
    write_json(fs::path(out) / "predictions.json", predictions_json(preds));
  }
  return 0;
}

int cmd_infer(const std::string& config, const std::string& checkpoint, const std::string& dataset, int scene_id,
              const std::string& query, const std::string& out) {
  const AppConfig c = config_or_default(config);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(dataset);
  require(scene_id >= 0 && static_cast<std::size_t>(scene_id) < ds.scenes.size(),
          "infer: scene " + std::to_string(scene_id) + " out of range (dataset has " +
              std::to_string(ds.scenes.size()) + " scenes)");
  const Scene& scene = ds.scenes[static_cast<std::size_t>(scene_id)];
  VideoSample v;
  for (const auto& f : scene.frames) v.frames.push_back(std::make_shared<const Frame>(f));
  v.candidates = scene.candidates;
  v.tokens = tokenize(query, ck.vocab);
  const Prediction p = predict(ck.params, ck.config, v, inference_options(c));
  for (std::size_t i = 0; i < p.all_track_scores.size(); ++i) {
    std::cout << "track " << i << " score " << format_fixed(p.all_track_scores[i]) << "\n";
  }
  std::cout << "selected track " << p.track_id << " score " << format_fixed(p.track_score) << "\n";
  for (std::size_t f = 0; f < p.frames.size(); ++f) {
    std::cout << "frame " << f << " candidate " << p.frames[f].candidate << " score "
              << format_fixed(p.frames[f].score) << "\n";
  }
  if (!out.empty()) {
    fs::create_directories(out);
    const StoredPrediction sp{-1, scene_id, query, p.track_id, p.track_score, p.frames};
    write_json(fs::path(out) / "prediction.json", predictions_json({sp}));
    render_prediction(scene, sp, out);
  }
  return 0;
}

int cmd_render(const std::string& dataset, const std::string& predictions, const std::string& out,
               std::optional<int> sample) {
  const Dataset ds = load_dataset(dataset);
  std::ifstream in(predictions);
  if (!in) throw Error("cannot open " + predictions);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(predictions + ": " + e.what());
  }
  const auto preds = predictions_from_json(j, predictions);
  fs::create_directories(out);
  std::size_t rendered = 0;
  for (const auto& p : preds) {
    if (sample && p.sample != *sample) continue;
    require(p.scene >= 0 && static_cast<std::size_t>(p.scene) < ds.scenes.size(),
            predictions + ": scene " + std::to_string(p.scene) + " not in dataset");
    render_prediction(ds.scenes[static_cast<std::size_t>(p.scene)], p, out);
    ++rendered;
  }
  if (sample && rendered == 0) throw Error("render: sample " + std::to_string(*sample) + " not in " + predictions);
  std::cout << "rendered " << rendered << " predictions to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refseg: referring segmentation of synthetic videos"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::uint64_t seed = 0;
  std::string config, out, dataset, checkpoint, query, predictions, split = "test";
  std::optional<int> scenes, sample;
  std::optional<std::size_t> epochs;
  int scene_id = 0;

  auto* gen = app.add_subcommand("gen", "generate a dataset");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--scenes", scenes, "number of scenes (overrides config)");

  auto* train = app.add_subcommand("train", "train a model on the train split");
  train->add_option("--seed", seed, "initialization and shuffling seed");
  train->add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
  train->add_option("--dataset", dataset, "dataset directory")->required();
  train->add_option("--out", out, "run directory (model.ckpt, train_log.tsv)")->required();
  train->add_option("--epochs", epochs, "number of epochs (overrides config)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "dataset directory")->required();
  eval->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--out", out, "directory for report.txt and predictions.json");

  auto* infer = app.add_subcommand("infer", "answer one query on one scene");
  infer->add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
  infer->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  infer->add_option("--dataset", dataset, "dataset directory")->required();
  infer->add_option("--scene", scene_id, "scene index")->required();
  infer->add_option("--query", query, "referring expression")->required();
  infer->add_option("--out", out, "directory for prediction.json and frame overlays");

  auto* render = app.add_subcommand("render", "write overlay images for stored predictions");
  render->add_option("--dataset", dataset, "dataset directory")->required();
  render->add_option("--predictions", predictions, "predictions.json from eval or infer")->required();
  render->add_option("--out", out, "output directory")->required();
  render->add_option("--sample", sample, "render only this sample id");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(seed, config, out, scenes);
    if (*train) return cmd_train(seed, config, dataset, out, epochs);
    if (*eval) return cmd_eval(config, checkpoint, dataset, out, split);
    if (*infer) return cmd_infer(config, checkpoint, dataset, scene_id, query, out);
    if (*render) return cmd_render(dataset, predictions, out, sample);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
