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

#ifndef REFSEG_PIPELINE_HPP_
#define REFSEG_PIPELINE_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refseg/dataset.hpp"
#include "refseg/evaluation.hpp"
#include "refseg/model.hpp"
#include "refseg/tracker.hpp"
#include "refseg/training.hpp"

namespace refseg {

// Frames of every scene, shared by all samples that refer to the scene.
struct SceneFrames {
  std::vector<std::vector<std::shared_ptr<const Frame>>> frames;

  explicit SceneFrames(const Dataset& ds) {
    for (const auto& s : ds.scenes) {
      std::vector<std::shared_ptr<const Frame>> f;
      for (const auto& frame : s.frames) f.push_back(std::make_shared<const Frame>(frame));
      frames.push_back(std::move(f));
    }
  }
};

inline VideoSample make_video_sample(const Dataset& ds, const SceneFrames& shared, const QuerySample& q,
                                     const Vocabulary& vocab) {
  const Scene& s = ds.scene_of(q);
  VideoSample v;
  v.frames = shared.frames.at(static_cast<std::size_t>(q.scene));
  v.candidates = s.candidates;
  v.candidate_sources = s.candidate_sources;
  for (const auto& masks : s.gt_masks) v.referent_masks.emplace_back(masks.at(static_cast<std::size_t>(q.referent)));
  v.tokens = tokenize(q.query, vocab);
  v.referent = q.referent;
  v.family = static_cast<int>(q.family);
  return v;
}

inline std::vector<VideoSample> make_video_samples(const Dataset& ds, const std::string& split, const Vocabulary& vocab) {
  const SceneFrames shared(ds);
  std::vector<VideoSample> out;
  for (const auto* q : ds.split(split)) out.push_back(make_video_sample(ds, shared, *q, vocab));
  return out;
}

// ---------------------------------------------------------------------------
// Inference.

struct InferenceOptions {
  bool use_trm = true;
  TrackerConfig tracker;
  TrackScoreMode track_score = TrackScoreMode::kMean;
};

struct FramePrediction {
  int candidate = -1;  // -1 when the chosen track skips this frame
  std::optional<BinaryMask> mask;
  double score = 0.0;
};

struct Prediction {
  int track_id = -1;
  double track_score = 0.0;
  std::vector<FramePrediction> frames;
  std::vector<double> all_track_scores;
};

struct SampleEmbeddings {
  Vector language;
  std::vector<std::vector<Vector>> frames;  // [frame][candidate], L2-normalized
};

inline SampleEmbeddings embed_sample(const ModelParams& params, const ModelConfig& cfg, const VideoSample& sample) {
  SampleEmbeddings out;
  const LanguageOutput lang = encode_language(params, cfg, sample.tokens);
  out.language = lang.language;
  for (std::size_t f = 0; f < sample.frames.size(); ++f) {
    if (sample.candidates[f].empty()) {
      out.frames.emplace_back();
      continue;
    }
    out.frames.push_back(embed_frame(params, cfg, *sample.frames[f], sample.candidates[f], lang.text).normalized);
  }
  return out;
}

inline Prediction predict(const ModelParams& params, const ModelConfig& cfg, const VideoSample& sample,
                          const InferenceOptions& opts = {}) {
  const SampleEmbeddings emb = embed_sample(params, cfg, sample);
  Prediction p;
  p.frames.resize(sample.frames.size());
  if (!opts.use_trm) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t f = 0; f < emb.frames.size(); ++f) {
      if (emb.frames[f].empty()) continue;
      std::size_t best = 0;
      double best_score = -2.0;
      for (std::size_t i = 0; i < emb.frames[f].size(); ++i) {
        const double s = dot(emb.frames[f][i], emb.language);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      p.frames[f] = {static_cast<int>(best), sample.candidates[f][best], best_score};
      total += best_score;
      ++n;
    }
    p.track_score = n ? total / static_cast<double>(n) : 0.0;
    return p;
  }
  Tracker tracker(opts.tracker);
  for (std::size_t f = 0; f < emb.frames.size(); ++f) {
    std::vector<TrackInput> inputs;
    for (std::size_t i = 0; i < emb.frames[f].size(); ++i) inputs.push_back({emb.frames[f][i], sample.candidates[f][i]});
    tracker.update(inputs, f);
  }
  if (tracker.tracks().empty()) return p;
  for (const auto& t : tracker.tracks()) p.all_track_scores.push_back(score_track(t, emb.language, opts.track_score));
  const std::size_t best = select_track(tracker.tracks(), emb.language, opts.track_score);
  const Track& track = tracker.tracks()[best];
  p.track_id = track.id;
  p.track_score = p.all_track_scores[best];
  for (const auto& slot : track.slots) {
    p.frames[slot.frame] = {static_cast<int>(slot.candidate), slot.mask, cosine_or_zero(slot.embedding, emb.language)};
  }
  return p;
}

// ---------------------------------------------------------------------------
// Evaluation over a split.

struct FrameOutcome {
  SampleResult result;
  bool correct = false;
};

struct SampleOutcome {
  const QuerySample* sample = nullptr;
  Prediction prediction;
  std::vector<FrameOutcome> frames;
};

inline SampleOutcome score_sample(const VideoSample& v, const QuerySample& q, Prediction p) {
  SampleOutcome out;
  out.sample = &q;
  for (std::size_t f = 0; f < v.frames.size(); ++f) {
    if (!v.referent_masks[f]) continue;
    FrameOutcome fo;
    fo.result = score_prediction(p.frames[f].mask, *v.referent_masks[f]);
    const int c = p.frames[f].candidate;
    fo.correct = c >= 0 && !v.candidate_sources.empty() &&
                 v.candidate_sources[f][static_cast<std::size_t>(c)] == v.referent;
    out.frames.push_back(fo);
  }
  out.prediction = std::move(p);
  return out;
}

struct EvalSummary {
  MetricReport overall;
  std::map<std::string, MetricReport> by_family;
  std::vector<SampleOutcome> outcomes;
};

inline MetricReport report_of(const std::vector<const SampleOutcome*>& outcomes) {
  std::vector<SampleResult> results;
  std::size_t correct = 0;
  for (const auto* o : outcomes) {
    for (const auto& f : o->frames) {
      results.push_back(f.result);
      if (f.correct) ++correct;
    }
  }
  const double acc = results.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(results.size());
  return summarize(results, acc);
}

inline EvalSummary evaluate_split(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds,
                                  const Vocabulary& vocab, const std::string& split, const InferenceOptions& opts) {
  const SceneFrames shared(ds);
  EvalSummary out;
  for (const auto* q : ds.split(split)) {
    const VideoSample v = make_video_sample(ds, shared, *q, vocab);
    out.outcomes.push_back(score_sample(v, *q, predict(params, cfg, v, opts)));
  }
  std::vector<const SampleOutcome*> all;
  std::map<std::string, std::vector<const SampleOutcome*>> groups;
  for (const auto& o : out.outcomes) {
    all.push_back(&o);
    groups[family_name(o.sample->family)].push_back(&o);
  }
  out.overall = report_of(all);
  for (const auto& [name, members] : groups) out.by_family[name] = report_of(members);
  return out;
}

inline std::string eval_report_text(const EvalSummary& e, const std::string& split) {
  std::map<std::string, MetricReport> table = e.by_family;
  table["all"] = e.overall;
  std::string out = "split: " + split + "\n" + report_table(table) + "\n";
  out += report_key_values(e.overall, split + ".all.");
  for (const auto& [name, r] : e.by_family) out += report_key_values(r, split + "." + name + ".");
  return out;
}

// ---------------------------------------------------------------------------
// Embedding separation: cosine between candidate embeddings of different
// frames, grouped by whether both candidates come from the same object.

struct SeparationStats {
  double intra = 0.0;
  double inter = 0.0;
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;
  double margin() const { return intra - inter; }
};

inline SeparationStats embedding_separation(const ModelParams& params, const ModelConfig& cfg,
                                            const std::vector<VideoSample>& samples) {
  SeparationStats s;
  double intra = 0.0, inter = 0.0;
  for (const auto& v : samples) {
    require(!v.candidate_sources.empty(), "embedding_separation: samples need candidate sources");
    const SampleEmbeddings emb = embed_sample(params, cfg, v);
    for (std::size_t f = 0; f < emb.frames.size(); ++f) {
      for (std::size_t g = f + 1; g < emb.frames.size(); ++g) {
        for (std::size_t i = 0; i < emb.frames[f].size(); ++i) {
          for (std::size_t j = 0; j < emb.frames[g].size(); ++j) {
            const double c = dot(emb.frames[f][i], emb.frames[g][j]);
            if (v.candidate_sources[f][i] == v.candidate_sources[g][j]) {
              intra += c;
              ++s.intra_pairs;
            } else {
              inter += c;
              ++s.inter_pairs;
            }
          }
        }
      }
    }
  }
  if (s.intra_pairs) s.intra = intra / static_cast<double>(s.intra_pairs);
  if (s.inter_pairs) s.inter = inter / static_cast<double>(s.inter_pairs);
  return s;
}

// ---------------------------------------------------------------------------
// Prediction files: JSON with, per sample, the chosen track score and one RLE
// mask per frame ("mask": null when the track skips the frame).

inline constexpr int kPredictionVersion = 1;

inline nlohmann::json mask_json(const BinaryMask& m) {
  return {{"width", m.width()}, {"height", m.height()}, {"runs", m.runs()}};
}

inline BinaryMask mask_from_json(const nlohmann::json& j) {
  return BinaryMask::from_runs(j.at("width").get<std::uint32_t>(), j.at("height").get<std::uint32_t>(),
                               j.at("runs").get<std::vector<std::uint32_t>>());
}

struct StoredPrediction {
  int sample = 0;
  int scene = 0;
  std::string query;
  int track_id = -1;
  double track_score = 0.0;
  std::vector<FramePrediction> frames;
};

inline nlohmann::json predictions_json(const std::vector<StoredPrediction>& preds) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : preds) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t f = 0; f < p.frames.size(); ++f) {
      const auto& fp = p.frames[f];
      frames.push_back({{"frame", f},
                        {"candidate", fp.candidate},
                        {"score", fp.score},
                        {"mask", fp.mask ? mask_json(*fp.mask) : nlohmann::json(nullptr)}});
    }
    arr.push_back({{"sample", p.sample},
                   {"scene", p.scene},
                   {"query", p.query},
                   {"track_id", p.track_id},
                   {"track_score", p.track_score},
                   {"frames", frames}});
  }
  return {{"format", "refseg-predictions"}, {"version", kPredictionVersion}, {"predictions", arr}};
}

inline std::vector<StoredPrediction> predictions_from_json(const nlohmann::json& j, const std::string& source) {
  try {
    if (j.at("version").get<int>() != kPredictionVersion) throw Error(source + ": prediction file version mismatch");
    std::vector<StoredPrediction> out;
    for (const auto& jp : j.at("predictions")) {
      StoredPrediction p;
      p.sample = jp.at("sample").get<int>();
      p.scene = jp.at("scene").get<int>();
      p.query = jp.at("query").get<std::string>();
      p.track_id = jp.at("track_id").get<int>();
      p.track_score = jp.at("track_score").get<double>();
      for (const auto& jf : jp.at("frames")) {
        FramePrediction fp;
        fp.candidate = jf.at("candidate").get<int>();
        fp.score = jf.at("score").get<double>();
        if (!jf.at("mask").is_null()) fp.mask = mask_from_json(jf.at("mask"));
        p.frames.push_back(std::move(fp));
      }
      out.push_back(std::move(p));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(source + ": malformed prediction file (" + e.what() + ")");
  }
}

}  // namespace refseg

#endif  // REFSEG_PIPELINE_HPP_
