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

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "flip_oracle.hpp"
#include "refseg/dataset.hpp"
#include "refseg/dataset_io.hpp"
#include "refseg/pipeline.hpp"

namespace refseg {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("refseg_test_dataset_" + name);
  fs::remove_all(p);
  return p;
}

GenConfig small_config(std::uint32_t scenes) {
  GenConfig c;
  c.scenes = scenes;
  return c;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) { return read_file_bytes(p); }

TEST(Generate, Deterministic) {
  const Dataset a = generate_dataset(small_config(20), 3);
  const Dataset b = generate_dataset(small_config(20), 3);
  EXPECT_EQ(a.scenes, b.scenes);
  EXPECT_EQ(a.samples, b.samples);
  const Dataset c = generate_dataset(small_config(20), 4);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Generate, ByteIdenticalDirectories) {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  save_dataset(generate_dataset(small_config(12), 7), a);
  save_dataset(generate_dataset(small_config(12), 7), b);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const fs::path other = b / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(file_bytes(e.path()), file_bytes(other)) << e.path().filename();
    ++files;
  }
  EXPECT_EQ(files, 13u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Generate, SplitSizes) {
  const Dataset ds = generate_dataset(GenConfig{}, 0);
  std::size_t train = 0, test = 0;
  for (const auto& s : ds.scenes) (s.split == "train" ? train : test)++;
  EXPECT_EQ(train, 200u);
  EXPECT_EQ(test, 50u);
}

TEST(Generate, SingleObjectGivesAttributeOnly) {
  GenConfig c = small_config(30);
  c.min_objects = c.max_objects = 1;
  const Dataset ds = generate_dataset(c, 1);
  ASSERT_FALSE(ds.samples.empty());
  for (const auto& q : ds.samples) EXPECT_EQ(q.family, Family::kAttribute) << q.query;
}

TEST(Generate, InfeasibleConfigThrows) {
  GenConfig c = small_config(5);
  c.min_objects = c.max_objects = 1;
  c.family_weights = {0.0, 1.0, 0.0, 0.0};
  EXPECT_THROW(generate_dataset(c, 0), Error);
  c.family_weights = {0.0, 0.0, 1.0, 0.0};
  c.min_objects = 1;
  c.max_objects = 2;
  EXPECT_THROW(generate_dataset(c, 0), Error);
  GenConfig bad = small_config(5);
  bad.min_objects = 4;
  bad.max_objects = 3;
  EXPECT_THROW(generate_dataset(bad, 0), Error);
}

TEST(Generate, CandidatesMatchGroundTruthWithoutNoise) {
  const Dataset ds = generate_dataset(small_config(50), 2);
  for (const auto& q : ds.samples) {
    const Scene& s = ds.scene_of(q);
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
      const auto& src = s.candidate_sources[f];
      const auto it = std::find(src.begin(), src.end(), q.referent);
      ASSERT_NE(it, src.end());
      const auto& cand = s.candidates[f][static_cast<std::size_t>(it - src.begin())];
      EXPECT_EQ(mask_iou(cand, s.gt_masks[f][static_cast<std::size_t>(q.referent)]), 1.0);
    }
  }
}

TEST(Generate, NoiseChangesSomeCandidates) {
  GenConfig c = small_config(10);
  c.noise_prob = 1.0;
  const Dataset ds = generate_dataset(c, 2);
  std::size_t changed = 0, total = 0;
  for (const auto& s : ds.scenes) {
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
      for (std::size_t i = 0; i < s.candidates[f].size(); ++i) {
        const auto& gt = s.gt_masks[f][static_cast<std::size_t>(s.candidate_sources[f][i])];
        changed += s.candidates[f][i] != gt;
        ++total;
        EXPECT_GE(mask_iou(s.candidates[f][i], gt), 0.3);
      }
    }
  }
  EXPECT_EQ(changed, total);
}

TEST(Generate, FamiliesAndVocabulary) {
  const Dataset ds = generate_dataset(small_config(60), 5);
  std::set<Family> seen;
  for (const auto& q : ds.samples) {
    seen.insert(q.family);
    const auto seq = tokenize(q.query, ds.vocab);
    for (std::size_t i = 0; i < seq.length; ++i) EXPECT_NE(seq.ids[i], Vocabulary::kUnk) << q.query;
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Generate, QueriesAreUniquePerScene) {
  const Dataset ds = generate_dataset(small_config(40), 6);
  std::set<std::pair<int, std::string>> seen;
  for (const auto& q : ds.samples) EXPECT_TRUE(seen.insert({q.scene, q.query}).second) << q.query;
}

TEST(Generate, ReferentVisibleAndInsideFrame) {
  const Dataset ds = generate_dataset(small_config(40), 8);
  for (const auto& s : ds.scenes) {
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
      for (const auto& m : s.gt_masks[f]) EXPECT_GT(m.area(), 0u);
      EXPECT_GE(s.candidates[f].size(), 1u);
    }
  }
}

TEST(DatasetIo, RoundTrip) {
  const fs::path dir = scratch_dir("roundtrip");
  GenConfig c = small_config(8);
  c.noise_prob = 0.5;
  const Dataset ds = generate_dataset(c, 11);
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(back.vocab.tokens(), ds.vocab.tokens());
  EXPECT_EQ(back.scenes, ds.scenes);
  EXPECT_EQ(back.samples, ds.samples);
  EXPECT_EQ(to_json(back.config), to_json(ds.config));
  fs::remove_all(dir);
}

TEST(DatasetIo, TruncatedMaskBlockReportsFileAndOffset) {
  const fs::path dir = scratch_dir("truncated");
  const Dataset ds = generate_dataset(small_config(2), 12);
  save_dataset(ds, dir);
  const fs::path blob = dir / scene_file_name(0);
  auto bytes = file_bytes(blob);
  // Header (6 words + crc), then frame 0: channel word, raster, crc, object count.
  const std::size_t raster = static_cast<std::size_t>(ds.config.width) * ds.config.height * kFrameChannels * 4;
  const std::size_t mask0 = 28 + 4 + raster + 4 + 4;
  bytes.resize(mask0 + 16);
  write_file_bytes(blob, bytes);
  try {
    load_dataset(dir);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(blob.string()), std::string::npos) << msg;
    EXPECT_NE(msg.find("checksum"), std::string::npos) << msg;
    EXPECT_NE(msg.find("offset " + std::to_string(mask0)), std::string::npos) << msg;
  }
  fs::remove_all(dir);
}

TEST(DatasetIo, CorruptRunFailsChecksum) {
  const fs::path dir = scratch_dir("corrupt");
  const Dataset ds = generate_dataset(small_config(2), 12);
  save_dataset(ds, dir);
  const fs::path blob = dir / scene_file_name(1);
  auto bytes = file_bytes(blob);
  const std::size_t raster = static_cast<std::size_t>(ds.config.width) * ds.config.height * kFrameChannels * 4;
  bytes[28 + 4 + raster + 4 + 4 + 12] ^= 0x01;
  write_file_bytes(blob, bytes);
  try {
    load_dataset(dir);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("checksum error in mask block"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(DatasetIo, VersionMismatch) {
  const fs::path dir = scratch_dir("version");
  save_dataset(generate_dataset(small_config(1), 1), dir);
  auto j = Json::parse(file_bytes(dir / kManifestName));
  j["version"] = 99;
  std::ofstream(dir / kManifestName) << j.dump();
  EXPECT_THROW(load_dataset(dir), Error);
  fs::remove_all(dir);
}

// Rewrites every JSON object with its keys in reverse order.
nlohmann::ordered_json reversed_keys(const nlohmann::ordered_json& j) {
  if (j.is_object()) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) out[*it] = reversed_keys(j.at(*it));
    return out;
  }
  if (j.is_array()) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& v : j) out.push_back(reversed_keys(v));
    return out;
  }
  return j;
}

TEST(DatasetIo, ManifestKeyOrderDoesNotMatter) {
  const fs::path dir = scratch_dir("reorder");
  const Dataset ds = generate_dataset(small_config(4), 13);
  save_dataset(ds, dir);
  const auto bytes = file_bytes(dir / kManifestName);
  const std::string original(bytes.begin(), bytes.end());
  const std::string reordered = reversed_keys(nlohmann::ordered_json::parse(original)).dump(1);
  ASSERT_NE(reordered.substr(0, 40), original.substr(0, 40));
  std::ofstream(dir / kManifestName, std::ios::trunc) << reordered;
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.scenes, ds.scenes);
  EXPECT_EQ(back.samples, ds.samples);
  fs::remove_all(dir);
}

TEST(DatasetIo, MissingFileIsDescriptive) {
  try {
    load_dataset(scratch_dir("missing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("manifest.json"), std::string::npos);
  }
}

TEST(FlipEndToEnd, MirroredDescriptors) {
  const Dataset ds = generate_dataset(small_config(40), 14);
  const SceneFrames frames(ds);
  Rng rng(0);
  for (const auto& q : ds.samples) {
    const VideoSample v = make_video_sample(ds, frames, q, ds.vocab);
    const VideoSample flipped = augment_flip(v, 1.0, rng, ds.vocab);
    for (std::size_t f = 0; f < v.num_frames(); ++f) {
      EXPECT_EQ(testing::mirrored_descriptor_mismatch(v.candidates[f], flipped.candidates[f]), "")
          << "sample " << q.id << " frame " << f;
    }
  }
}

}  // namespace
}  // namespace refseg
