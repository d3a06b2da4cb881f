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

// Dataset directory layout:
//
//   manifest.json      format version, seed, generator config, vocabulary,
//                      scene specs and query samples (JSON, keys unordered)
//   scene_NNNNN.bin    one blob per scene, little-endian:
//
//     header   "RSCN" u32 version, u32 width, u32 height, u32 frames,
//              u32 objects, u32 CRC32(header)
//     per frame:
//       raster    u32 channels, width*height*channels f32 (pixel-interleaved),
//                 u32 CRC32(raster)
//       u32 object count, then one mask block per object (ground truth)
//       u32 candidate count, then per candidate: i32 source object id, mask block
//
//   mask block: u32 width, u32 height, u32 run count, run lengths (u32 each,
//   row-major, first run is background), u32 CRC32(block)

#ifndef REFSEG_DATASET_IO_HPP_
#define REFSEG_DATASET_IO_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "refseg/binary_io.hpp"
#include "refseg/dataset.hpp"

namespace refseg {

inline constexpr int kDatasetVersion = 1;
inline constexpr std::uint32_t kSceneBlobVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

using Json = nlohmann::json;

inline Json to_json(const GenConfig& c) {
  Json weights;
  for (int f = 0; f < 4; ++f) weights[kFamilyNames[static_cast<std::size_t>(f)]] = c.family_weights[static_cast<std::size_t>(f)];
  return Json{{"width", c.width},
              {"height", c.height},
              {"frames", c.frames},
              {"scenes", c.scenes},
              {"test_fraction", c.test_fraction},
              {"min_objects", c.min_objects},
              {"max_objects", c.max_objects},
              {"queries_per_scene", c.queries_per_scene},
              {"min_radius", c.min_radius},
              {"max_radius", c.max_radius},
              {"min_speed", c.min_speed},
              {"max_speed", c.max_speed},
              {"static_prob", c.static_prob},
              {"homogeneous_prob", c.homogeneous_prob},
              {"ghost_intensity", c.ghost_intensity},
              {"family_weights", weights},
              {"noise_prob", c.noise_prob},
              {"noise_radius", c.noise_radius},
              {"occlusion", c.occlusion},
              {"max_attempts", c.max_attempts}};
}

inline GenConfig gen_config_from_json(const Json& j) {
  GenConfig c;
  c.width = j.at("width").get<std::uint32_t>();
  c.height = j.at("height").get<std::uint32_t>();
  c.frames = j.at("frames").get<std::uint32_t>();
  c.scenes = j.at("scenes").get<std::uint32_t>();
  c.test_fraction = j.at("test_fraction").get<double>();
  c.min_objects = j.at("min_objects").get<std::uint32_t>();
  c.max_objects = j.at("max_objects").get<std::uint32_t>();
  c.queries_per_scene = j.at("queries_per_scene").get<std::uint32_t>();
  c.min_radius = j.at("min_radius").get<int>();
  c.max_radius = j.at("max_radius").get<int>();
  c.min_speed = j.at("min_speed").get<int>();
  c.max_speed = j.at("max_speed").get<int>();
  c.static_prob = j.at("static_prob").get<double>();
  c.homogeneous_prob = j.at("homogeneous_prob").get<double>();
  c.ghost_intensity = j.at("ghost_intensity").get<double>();
  for (int f = 0; f < 4; ++f) {
    c.family_weights[static_cast<std::size_t>(f)] =
        j.at("family_weights").at(kFamilyNames[static_cast<std::size_t>(f)]).get<double>();
  }
  c.noise_prob = j.at("noise_prob").get<double>();
  c.noise_radius = j.at("noise_radius").get<int>();
  c.occlusion = j.at("occlusion").get<bool>();
  c.max_attempts = j.at("max_attempts").get<int>();
  return c;
}

inline std::string scene_file_name(int scene_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05d.bin", scene_id);
  return buf;
}

inline Json manifest_json(const Dataset& ds) {
  Json scenes = Json::array();
  for (const auto& s : ds.scenes) {
    Json objects = Json::array();
    for (const auto& o : s.spec.objects) {
      objects.push_back({{"id", o.id},
                         {"shape", shape_name(o.shape)},
                         {"color", kPalette[static_cast<std::size_t>(o.color)].name},
                         {"radius", o.radius},
                         {"x0", o.x0},
                         {"y0", o.y0},
                         {"vx", o.vx},
                         {"vy", o.vy}});
    }
    scenes.push_back({{"id", s.id},
                      {"split", s.split},
                      {"file", scene_file_name(s.id)},
                      {"width", s.spec.width},
                      {"height", s.spec.height},
                      {"frames", s.spec.frames},
                      {"occlusion", s.spec.occlusion},
                      {"objects", objects}});
  }
  Json samples = Json::array();
  for (const auto& q : ds.samples) {
    samples.push_back({{"id", q.id},
                       {"scene", q.scene},
                       {"query", q.query},
                       {"family", family_name(q.family)},
                       {"referent", q.referent}});
  }
  Json counts = Json::object();
  for (const auto& [w, n] : token_counts(ds)) counts[w] = n;
  return Json{{"format", "refseg-dataset"},
              {"version", kDatasetVersion},
              {"seed", ds.seed},
              {"config", to_json(ds.config)},
              {"vocabulary", {{"tokens", ds.vocab.tokens()}, {"counts", counts}}},
              {"scenes", scenes},
              {"samples", samples}};
}

// ---------------------------------------------------------------------------
// Scene blobs.

inline void write_mask_block(ByteWriter& w, const BinaryMask& m) {
  const std::size_t start = w.size();
  w.u32(m.width());
  w.u32(m.height());
  w.u32(static_cast<std::uint32_t>(m.runs().size()));
  for (auto r : m.runs()) w.u32(r);
  w.crc_from(start);
}

inline BinaryMask read_mask_block(ByteReader& r) {
  const std::size_t start = r.pos();
  const std::uint32_t width = r.u32("mask block");
  const std::uint32_t height = r.u32("mask block");
  const std::uint32_t count = r.u32("mask block");
  if (static_cast<std::uint64_t>(count) * 4 + 4 > r.remaining()) r.fail("checksum error (truncated mask block)", start);
  std::vector<std::uint32_t> runs(count);
  for (auto& v : runs) v = r.u32("mask block");
  r.check_crc(start, "mask block");
  try {
    return BinaryMask::from_runs(width, height, std::move(runs));
  } catch (const Error& e) {
    r.fail(std::string("malformed RLE (") + e.what() + ")", start);
  }
}

inline std::vector<std::uint8_t> scene_blob(const Scene& s) {
  ByteWriter w;
  w.u32(fourcc("RSCN"));
  w.u32(kSceneBlobVersion);
  w.u32(s.spec.width);
  w.u32(s.spec.height);
  w.u32(s.spec.frames);
  w.u32(static_cast<std::uint32_t>(s.spec.objects.size()));
  w.crc_from(0);
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    const Frame& frame = s.frames[f];
    const std::size_t start = w.size();
    w.u32(frame.channels);
    for (float v : frame.data) w.f32(v);
    w.crc_from(start);
    w.u32(static_cast<std::uint32_t>(s.gt_masks[f].size()));
    for (const auto& m : s.gt_masks[f]) write_mask_block(w, m);
    w.u32(static_cast<std::uint32_t>(s.candidates[f].size()));
    for (std::size_t c = 0; c < s.candidates[f].size(); ++c) {
      w.i32(s.candidate_sources[f][c]);
      write_mask_block(w, s.candidates[f][c]);
    }
  }
  return w.bytes();
}

// Fills frames and masks of `s`, whose spec already came from the manifest.
inline void read_scene_blob(ByteReader& r, Scene& s) {
  if (r.u32("scene header") != fourcc("RSCN")) r.fail("not a scene blob (bad magic)", 0);
  const std::uint32_t version = r.u32("scene header");
  if (version != kSceneBlobVersion) r.fail("scene blob version mismatch (found " + std::to_string(version) + ")", 4);
  const std::uint32_t width = r.u32("scene header");
  const std::uint32_t height = r.u32("scene header");
  const std::uint32_t frames = r.u32("scene header");
  const std::uint32_t objects = r.u32("scene header");
  r.check_crc(0, "scene header");
  if (width != s.spec.width || height != s.spec.height || frames != s.spec.frames ||
      objects != s.spec.objects.size()) {
    r.fail("scene header disagrees with manifest", 0);
  }
  s.frames.assign(frames, Frame());
  s.gt_masks.assign(frames, {});
  s.candidates.assign(frames, {});
  s.candidate_sources.assign(frames, {});
  for (std::uint32_t f = 0; f < frames; ++f) {
    const std::size_t start = r.pos();
    const std::uint32_t channels = r.u32("raster");
    if (channels != kFrameChannels) r.fail("unexpected channel count " + std::to_string(channels), start);
    Frame frame(width, height, channels);
    r.need(frame.data.size() * 4 + 4, "raster");
    for (float& v : frame.data) v = r.f32("raster");
    r.check_crc(start, "raster");
    s.frames[f] = std::move(frame);
    const std::size_t count_at = r.pos();
    if (r.u32("object count") != objects) r.fail("object mask count disagrees with header", count_at);
    for (std::uint32_t o = 0; o < objects; ++o) {
      const std::size_t at = r.pos();
      BinaryMask m = read_mask_block(r);
      if (m.width() != width || m.height() != height) r.fail("mask size disagrees with frame", at);
      s.gt_masks[f].push_back(std::move(m));
    }
    const std::uint32_t candidates = r.u32("candidate count");
    for (std::uint32_t c = 0; c < candidates; ++c) {
      const std::size_t at = r.pos();
      const std::int32_t source = r.i32("candidate source");
      if (source < -1 || source >= static_cast<std::int32_t>(objects)) r.fail("candidate source out of range", at);
      BinaryMask m = read_mask_block(r);
      if (m.width() != width || m.height() != height) r.fail("mask size disagrees with frame", at);
      s.candidates[f].push_back(std::move(m));
      s.candidate_sources[f].push_back(source);
    }
  }
  if (!r.done()) r.fail("trailing bytes after scene", r.pos());
}

// ---------------------------------------------------------------------------
// Directory round trip.

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string text = manifest_json(ds).dump(2) + "\n";
  std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / kManifestName).string());
  out << text;
  out.close();
  for (const auto& s : ds.scenes) write_file_bytes(dir / scene_file_name(s.id), scene_blob(s));
}

inline Dataset dataset_from_manifest(const Json& j, const std::string& source) {
  try {
    if (j.at("version").get<int>() != kDatasetVersion) {
      throw Error(source + ": dataset version mismatch (found " + j.at("version").dump() + ", expected " +
                  std::to_string(kDatasetVersion) + ")");
    }
    Dataset ds;
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.config = gen_config_from_json(j.at("config"));
    ds.vocab = Vocabulary::from_tokens(j.at("vocabulary").at("tokens").get<std::vector<std::string>>());
    for (const auto& js : j.at("scenes")) {
      Scene s;
      s.id = js.at("id").get<int>();
      require(s.id == static_cast<int>(ds.scenes.size()), source + ": scene ids must be 0..n-1 in order");
      s.split = js.at("split").get<std::string>();
      require(s.split == "train" || s.split == "test", source + ": unknown split '" + s.split + "'");
      s.spec.width = js.at("width").get<std::uint32_t>();
      s.spec.height = js.at("height").get<std::uint32_t>();
      s.spec.frames = js.at("frames").get<std::uint32_t>();
      s.spec.occlusion = js.at("occlusion").get<bool>();
      for (const auto& jo : js.at("objects")) {
        ObjectSpec o;
        o.id = jo.at("id").get<int>();
        o.shape = parse_shape(jo.at("shape").get<std::string>());
        o.color = parse_color(jo.at("color").get<std::string>());
        o.radius = jo.at("radius").get<int>();
        o.x0 = jo.at("x0").get<int>();
        o.y0 = jo.at("y0").get<int>();
        o.vx = jo.at("vx").get<int>();
        o.vy = jo.at("vy").get<int>();
        s.spec.objects.push_back(o);
      }
      ds.scenes.push_back(std::move(s));
    }
    for (const auto& jq : j.at("samples")) {
      QuerySample q;
      q.id = jq.at("id").get<int>();
      q.scene = jq.at("scene").get<int>();
      q.query = jq.at("query").get<std::string>();
      q.family = parse_family(jq.at("family").get<std::string>());
      q.referent = jq.at("referent").get<int>();
      require(q.scene >= 0 && q.scene < static_cast<int>(ds.scenes.size()), source + ": sample scene out of range");
      require(q.referent >= 0 && q.referent < static_cast<int>(ds.scenes[static_cast<std::size_t>(q.scene)].spec.objects.size()),
              source + ": sample referent out of range");
      ds.samples.push_back(std::move(q));
    }
    return ds;
  } catch (const Json::exception& e) {
    throw Error(source + ": malformed manifest (" + e.what() + ")");
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  const auto bytes = read_file_bytes(manifest_path);
  Json j;
  try {
    j = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw Error(manifest_path.string() + ": invalid JSON (" + e.what() + ")");
  }
  Dataset ds = dataset_from_manifest(j, manifest_path.string());
  for (auto& s : ds.scenes) {
    const auto path = dir / scene_file_name(s.id);
    ByteReader r(read_file_bytes(path), path.string());
    read_scene_blob(r, s);
  }
  return ds;
}

}  // namespace refseg

#endif  // REFSEG_DATASET_IO_HPP_
