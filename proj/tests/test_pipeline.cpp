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

#include <gtest/gtest.h>

#include <algorithm>

#include "refseg/pipeline.hpp"

namespace refseg {
namespace {

struct Fixture {
  Dataset ds;
  ModelConfig cfg;
  ModelParams params;
};

Fixture random_model(std::uint32_t scenes, std::uint64_t seed) {
  GenConfig g;
  g.scenes = scenes;
  Fixture f;
  f.ds = generate_dataset(g, seed);
  f.cfg.vocab_size = f.ds.vocab.size();
  f.cfg.word_dim = f.cfg.hidden_dim = f.cfg.feature_dim = f.cfg.embed_dim = f.cfg.text_dim = 8;
  Rng rng(seed);
  f.params = ModelParams::random(f.cfg, rng);
  return f;
}

TEST(Predict, ArgmaxPicksBestCandidatePerFrame) {
  const Fixture fx = random_model(6, 1);
  const SceneFrames frames(fx.ds);
  InferenceOptions opts;
  opts.use_trm = false;
  for (const auto& q : fx.ds.samples) {
    const VideoSample v = make_video_sample(fx.ds, frames, q, fx.ds.vocab);
    const Prediction p = predict(fx.params, fx.cfg, v, opts);
    const SampleEmbeddings emb = embed_sample(fx.params, fx.cfg, v);
    ASSERT_EQ(p.frames.size(), v.num_frames());
    for (std::size_t f = 0; f < v.num_frames(); ++f) {
      const int c = p.frames[f].candidate;
      ASSERT_GE(c, 0);
      EXPECT_EQ(*p.frames[f].mask, v.candidates[f][static_cast<std::size_t>(c)]);
      for (const auto& e : emb.frames[f]) EXPECT_LE(dot(e, emb.language), p.frames[f].score + 1e-15);
    }
  }
}

TEST(Predict, TrackerSelectsHighestScoringTrack) {
  const Fixture fx = random_model(6, 2);
  const SceneFrames frames(fx.ds);
  for (const auto& q : fx.ds.samples) {
    const VideoSample v = make_video_sample(fx.ds, frames, q, fx.ds.vocab);
    const Prediction p = predict(fx.params, fx.cfg, v);
    ASSERT_FALSE(p.all_track_scores.empty());
    EXPECT_EQ(p.track_score, *std::max_element(p.all_track_scores.begin(), p.all_track_scores.end()));
    EXPECT_GE(p.track_id, 0);
    for (const auto& fp : p.frames) {
      if (fp.candidate < 0) {
        EXPECT_FALSE(fp.mask.has_value());
        continue;
      }
      EXPECT_TRUE(fp.mask.has_value());
    }
  }
}

TEST(Predict, AbsentObjectStillAnswers) {
  const Fixture fx = random_model(3, 3);
  const Scene& s = fx.ds.scenes[0];
  VideoSample v;
  for (const auto& f : s.frames) v.frames.push_back(std::make_shared<const Frame>(f));
  v.candidates = s.candidates;
  std::string absent;
  for (const char* color : {"red", "green", "blue", "yellow"}) {
    for (const char* shape : {"circle", "square", "triangle"}) {
      bool present = false;
      for (const auto& o : s.spec.objects)
        present = present || (kPalette[static_cast<std::size_t>(o.color)].name == std::string(color) &&
                               shape_name(o.shape) == std::string(shape));
      if (!present && absent.empty()) absent = std::string("the ") + color + " " + shape;
    }
  }
  v.tokens = tokenize(absent, fx.ds.vocab);
  const Prediction p = predict(fx.params, fx.cfg, v);
  EXPECT_GE(p.track_id, 0);
  EXPECT_EQ(p.track_score, *std::max_element(p.all_track_scores.begin(), p.all_track_scores.end()));
}

TEST(Predict, EmptyFramesAreSkipped) {
  const Fixture fx = random_model(2, 4);
  const SceneFrames frames(fx.ds);
  VideoSample v = make_video_sample(fx.ds, frames, fx.ds.samples[0], fx.ds.vocab);
  v.candidates[1].clear();
  for (bool trm : {false, true}) {
    InferenceOptions opts;
    opts.use_trm = trm;
    const Prediction p = predict(fx.params, fx.cfg, v, opts);
    EXPECT_EQ(p.frames[1].candidate, -1);
    const SampleOutcome o = score_sample(v, fx.ds.samples[0], p);
    EXPECT_EQ(o.frames[1].result.iou, 0.0);
    EXPECT_FALSE(o.frames[1].correct);
  }
}

TEST(Evaluate, CountsEveryAnnotatedFrame) {
  const Fixture fx = random_model(10, 5);
  const EvalSummary e = evaluate_split(fx.params, fx.cfg, fx.ds, fx.ds.vocab, "test", {});
  EXPECT_EQ(e.outcomes.size(), fx.ds.split("test").size());
  EXPECT_EQ(e.overall.samples, e.outcomes.size() * fx.ds.config.frames);
  std::size_t by_family = 0;
  for (const auto& [name, r] : e.by_family) by_family += r.samples;
  EXPECT_EQ(by_family, e.overall.samples);
  const std::string text = eval_report_text(e, "test");
  EXPECT_NE(text.find("test.all.map="), std::string::npos);
  EXPECT_NE(text.find("test.all.p@0.9="), std::string::npos);
}

TEST(Evaluate, TrainingHelpsAndTrainSplitScoresAtLeastTest) {
  Fixture fx = random_model(60, 6);
  fx.cfg = ModelConfig{};
  fx.cfg.vocab_size = fx.ds.vocab.size();
  Rng rng(6);
  fx.params = ModelParams::random(fx.cfg, rng);
  InferenceOptions opts;
  const double before = evaluate_split(fx.params, fx.cfg, fx.ds, fx.ds.vocab, "train", opts).overall.accuracy;
  TrainConfig tc;
  tc.epochs = 25;
  train_model(fx.params, fx.cfg, tc, make_video_samples(fx.ds, "train", fx.ds.vocab), fx.ds.vocab);
  const auto train = evaluate_split(fx.params, fx.cfg, fx.ds, fx.ds.vocab, "train", opts).overall;
  const auto test = evaluate_split(fx.params, fx.cfg, fx.ds, fx.ds.vocab, "test", opts).overall;
  EXPECT_GT(train.accuracy, before + 0.1);
  EXPECT_GE(train.accuracy, test.accuracy);
  EXPECT_GE(train.mean_iou, test.mean_iou);
}

TEST(Separation, PairCounts) {
  const Fixture fx = random_model(4, 7);
  const auto samples = make_video_samples(fx.ds, "train", fx.ds.vocab);
  const SeparationStats s = embedding_separation(fx.params, fx.cfg, samples);
  std::size_t intra = 0, total = 0;
  for (const auto& v : samples) {
    const std::size_t n = v.candidates[0].size(), m = v.num_frames();
    intra += n * m * (m - 1) / 2;
    total += n * n * m * (m - 1) / 2;
  }
  EXPECT_EQ(s.intra_pairs, intra);
  EXPECT_EQ(s.inter_pairs, total - intra);
  EXPECT_LE(std::abs(s.intra), 1.0);
  EXPECT_LE(std::abs(s.inter), 1.0);
}

TEST(Predictions, JsonRoundTrip) {
  const Fixture fx = random_model(3, 8);
  const SceneFrames frames(fx.ds);
  std::vector<StoredPrediction> preds;
  for (const auto& q : fx.ds.samples) {
    const Prediction p = predict(fx.params, fx.cfg, make_video_sample(fx.ds, frames, q, fx.ds.vocab));
    preds.push_back({q.id, q.scene, q.query, p.track_id, p.track_score, p.frames});
  }
  preds[0].frames[2] = FramePrediction{};
  const auto back = predictions_from_json(nlohmann::json::parse(predictions_json(preds).dump()), "mem");
  ASSERT_EQ(back.size(), preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(back[i].sample, preds[i].sample);
    EXPECT_EQ(back[i].query, preds[i].query);
    EXPECT_EQ(back[i].track_score, preds[i].track_score);
    ASSERT_EQ(back[i].frames.size(), preds[i].frames.size());
    for (std::size_t f = 0; f < preds[i].frames.size(); ++f) {
      EXPECT_EQ(back[i].frames[f].candidate, preds[i].frames[f].candidate);
      EXPECT_EQ(back[i].frames[f].mask, preds[i].frames[f].mask);
    }
  }
  EXPECT_THROW(predictions_from_json(nlohmann::json::parse("{\"version\": 7}"), "mem"), Error);
}

}  // namespace
}  // namespace refseg
