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

// Synthetic video/query generator: shapes of a few colors drifting across a
// dark background, each paired with template referring expressions.

#ifndef REFSEG_DATASET_HPP_
#define REFSEG_DATASET_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refseg/language.hpp"
#include "refseg/masks.hpp"
#include "refseg/numerics.hpp"
#include "refseg/object_embedding.hpp"

namespace refseg {

enum class Shape { kCircle = 0, kSquare = 1, kTriangle = 2 };
inline constexpr std::array<const char*, 3> kShapeNames = {"circle", "square", "triangle"};

enum class Family { kAttribute = 0, kRelativePosition = 1, kRelation = 2, kMotion = 3 };
inline constexpr std::array<const char*, 4> kFamilyNames = {"attribute", "relative_position", "relation", "motion"};

struct PaletteColor {
  const char* name;
  float r, g, b;
};
inline constexpr std::array<PaletteColor, 4> kPalette = {{
    {"red", 0.90f, 0.15f, 0.10f},
    {"green", 0.15f, 0.80f, 0.20f},
    {"blue", 0.15f, 0.30f, 0.95f},
    {"yellow", 0.95f, 0.85f, 0.10f},
}};

inline const char* shape_name(Shape s) { return kShapeNames[static_cast<int>(s)]; }
inline const char* family_name(Family f) { return kFamilyNames[static_cast<int>(f)]; }

inline Shape parse_shape(const std::string& s) {
  for (int i = 0; i < 3; ++i)
    if (s == kShapeNames[i]) return static_cast<Shape>(i);
  throw Error("unknown shape: " + s);
}

inline Family parse_family(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kFamilyNames[i]) return static_cast<Family>(i);
  throw Error("unknown template family: " + s);
}

inline int parse_color(const std::string& s) {
  for (int i = 0; i < static_cast<int>(kPalette.size()); ++i)
    if (s == kPalette[i].name) return i;
  throw Error("unknown color: " + s);
}

// Every word the templates can emit.
inline std::vector<std::string> template_words() {
  return {"the",   "red",    "green", "blue", "yellow", "circle", "square", "triangle", "first", "second",
          "third", "from",   "left",  "right", "of",    "above",  "below",  "moving",   "up",    "down"};
}

struct GenConfig {
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint32_t frames = 5;
  std::uint32_t scenes = 250;
  double test_fraction = 0.2;
  std::uint32_t min_objects = 2;
  std::uint32_t max_objects = 5;
  std::uint32_t queries_per_scene = 6;
  int min_radius = 4;
  int max_radius = 7;
  int min_speed = 2;
  int max_speed = 3;
  double static_prob = 0.2;
  // Chance that a relative-position scene uses one shape for every object.
  double homogeneous_prob = 0.0;
  double ghost_intensity = 0.5;
  // attribute, relative_position, relation, motion
  std::array<double, 4> family_weights = {0.25, 0.25, 0.25, 0.25};
  double noise_prob = 0.0;
  int noise_radius = 1;
  bool occlusion = false;
  int max_attempts = 400;

  std::uint32_t test_scenes() const {
    return static_cast<std::uint32_t>(std::lround(scenes * test_fraction));
  }
  std::uint32_t train_scenes() const { return scenes - test_scenes(); }
};

struct ObjectSpec {
  int id = 0;
  Shape shape = Shape::kCircle;
  int color = 0;
  int radius = 4;
  int x0 = 0, y0 = 0;  // body center in frame 0
  int vx = 0, vy = 0;  // pixels per frame

  int x_at(std::size_t f) const { return x0 + vx * static_cast<int>(f); }
  int y_at(std::size_t f) const { return y0 + vy * static_cast<int>(f); }
  bool moving() const { return vx != 0 || vy != 0; }
  const char* direction() const {
    if (vx > 0) return "right";
    if (vx < 0) return "left";
    if (vy > 0) return "down";
    if (vy < 0) return "up";
    return "still";
  }
  bool operator==(const ObjectSpec&) const = default;
};

struct SceneSpec {
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint32_t frames = 5;
  std::vector<ObjectSpec> objects;
  bool occlusion = false;
  bool operator==(const SceneSpec&) const = default;
};

struct Scene {
  int id = 0;
  std::string split = "train";
  SceneSpec spec;
  std::vector<Frame> frames;
  std::vector<std::vector<BinaryMask>> gt_masks;          // [frame][object]
  std::vector<std::vector<BinaryMask>> candidates;        // [frame][candidate]
  std::vector<std::vector<int>> candidate_sources;        // [frame][candidate] -> object id
  bool operator==(const Scene&) const = default;
};

struct QuerySample {
  int id = 0;
  int scene = 0;
  std::string query;
  Family family = Family::kAttribute;
  int referent = 0;
  bool operator==(const QuerySample&) const = default;
};

struct Dataset {
  std::uint64_t seed = 0;
  GenConfig config;
  Vocabulary vocab;
  std::vector<Scene> scenes;
  std::vector<QuerySample> samples;

  const Scene& scene_of(const QuerySample& s) const { return scenes.at(static_cast<std::size_t>(s.scene)); }
  std::vector<const QuerySample*> split(const std::string& name) const {
    std::vector<const QuerySample*> out;
    for (const auto& s : samples)
      if (scene_of(s).split == name) out.push_back(&s);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Rasterization.

inline bool shape_contains(Shape shape, int radius, int dx, int dy) {
  switch (shape) {
    case Shape::kSquare:
      return std::abs(dx) <= radius && std::abs(dy) <= radius;
    case Shape::kCircle:
      return dx * dx + dy * dy <= radius * radius + radius;
    case Shape::kTriangle:
      // Apex up; the half-width grows from 0 at the top row to `radius` at the base.
      return dy >= -radius && dy <= radius && 2 * std::abs(dx) <= dy + radius;
  }
  return false;
}

// Body at the current position plus a dimmer ghost one step back along the
// velocity (motion blur). The mask covers both.
inline void rasterize_object(const ObjectSpec& o, std::size_t frame, std::uint32_t width, std::uint32_t height,
                             std::vector<std::uint8_t>& body, std::vector<std::uint8_t>& ghost) {
  body.assign(static_cast<std::size_t>(width) * height, 0);
  ghost.assign(body.size(), 0);
  auto stamp = [&](int cx, int cy, std::vector<std::uint8_t>& out) {
    for (int dy = -o.radius; dy <= o.radius; ++dy) {
      for (int dx = -o.radius; dx <= o.radius; ++dx) {
        const int x = cx + dx;
        const int y = cy + dy;
        if (x < 0 || y < 0 || x >= static_cast<int>(width) || y >= static_cast<int>(height)) continue;
        if (shape_contains(o.shape, o.radius, dx, dy)) out[static_cast<std::size_t>(y) * width + x] = 1;
      }
    }
  };
  const int cx = o.x_at(frame);
  const int cy = o.y_at(frame);
  stamp(cx, cy, body);
  if (o.moving()) stamp(cx - o.vx, cy - o.vy, ghost);
}

// Extent of body plus ghost in pixels: {x_min, y_min, x_max, y_max}.
inline std::array<int, 4> object_extent(const ObjectSpec& o, std::size_t frame) {
  const int cx = o.x_at(frame), cy = o.y_at(frame);
  const int gx = cx - o.vx, gy = cy - o.vy;
  return {std::min(cx, gx) - o.radius, std::min(cy, gy) - o.radius, std::max(cx, gx) + o.radius,
          std::max(cy, gy) + o.radius};
}

inline void render_scene(Scene& scene, double ghost_intensity) {
  const auto& spec = scene.spec;
  scene.frames.clear();
  scene.gt_masks.clear();
  std::vector<std::uint8_t> body, ghost;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    Frame frame(spec.width, spec.height);
    fill_coordinate_channels(frame);
    std::vector<BinaryMask> masks;
    // Ghosts first so that bodies always stay on top.
    std::vector<std::vector<std::uint8_t>> bodies;
    for (const auto& o : spec.objects) {
      rasterize_object(o, f, spec.width, spec.height, body, ghost);
      const auto& c = kPalette[static_cast<std::size_t>(o.color)];
      std::vector<std::uint8_t> both(body.size());
      for (std::size_t p = 0; p < body.size(); ++p) {
        both[p] = body[p] | ghost[p];
        if (ghost[p] && !body[p]) {
          float* px = frame.pixel(p);
          px[0] = static_cast<float>(c.r * ghost_intensity);
          px[1] = static_cast<float>(c.g * ghost_intensity);
          px[2] = static_cast<float>(c.b * ghost_intensity);
        }
      }
      masks.push_back(BinaryMask::from_bitmap(spec.width, spec.height, both));
      bodies.push_back(body);
    }
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto& c = kPalette[static_cast<std::size_t>(spec.objects[i].color)];
      for (std::size_t p = 0; p < bodies[i].size(); ++p) {
        if (!bodies[i][p]) continue;
        float* px = frame.pixel(p);
        px[0] = c.r;
        px[1] = c.g;
        px[2] = c.b;
      }
    }
    scene.frames.push_back(std::move(frame));
    scene.gt_masks.push_back(std::move(masks));
  }
}

// ---------------------------------------------------------------------------
// Query construction.

namespace detail {

// Box center x of an object's mask in pixels (half-integers allowed).
inline double center_x(const ObjectSpec& o, std::size_t f) {
  const auto e = object_extent(o, f);
  return 0.5 * (e[0] + e[2]);
}
inline double center_y(const ObjectSpec& o, std::size_t f) {
  const auto e = object_extent(o, f);
  return 0.5 * (e[1] + e[3]);
}

inline const char* ordinal(std::size_t k) {
  static constexpr std::array<const char*, 3> kWords = {"first", "second", "third"};
  return k < kWords.size() ? kWords[k] : nullptr;
}

inline std::vector<const ObjectSpec*> members(const SceneSpec& spec, Shape shape) {
  std::vector<const ObjectSpec*> out;
  for (const auto& o : spec.objects)
    if (o.shape == shape) out.push_back(&o);
  return out;
}

}  // namespace detail

inline std::string attribute_query(const SceneSpec&, const ObjectSpec& ref) {
  return std::string("the ") + kPalette[static_cast<std::size_t>(ref.color)].name + " " + shape_name(ref.shape);
}

// "the second square from the left": the left-to-right order of the class
// must be the same in every frame with a gap of at least 2 pixels.
inline std::vector<std::string> relative_position_queries(const SceneSpec& spec, const ObjectSpec& ref) {
  const auto group = detail::members(spec, ref.shape);
  if (group.size() < 2) return {};
  std::optional<std::size_t> rank;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    std::size_t r = 0;
    for (const auto* o : group) {
      if (o == &ref) continue;
      const double d = detail::center_x(*o, f) - detail::center_x(ref, f);
      if (std::abs(d) < 2.0) return {};
      if (d < 0) ++r;
    }
    if (rank && *rank != r) return {};
    rank = r;
  }
  std::vector<std::string> out;
  const std::string shape = shape_name(ref.shape);
  if (const char* w = detail::ordinal(*rank)) out.push_back(std::string("the ") + w + " " + shape + " from the left");
  if (const char* w = detail::ordinal(group.size() - 1 - *rank))
    out.push_back(std::string("the ") + w + " " + shape + " from the right");
  return out;
}

// "the circle left of the triangle", "right of", "above" and "below",
// relative to the only object of the anchor class.
inline std::vector<std::string> relation_queries(const SceneSpec& spec, const ObjectSpec& ref) {
  const auto group = detail::members(spec, ref.shape);
  if (group.size() < 2) return {};
  std::vector<std::string> out;
  for (int s = 0; s < 3; ++s) {
    const auto anchor_shape = static_cast<Shape>(s);
    if (anchor_shape == ref.shape) continue;
    const auto anchors = detail::members(spec, anchor_shape);
    if (anchors.size() != 1) continue;
    const ObjectSpec& anchor = *anchors[0];
    bool left = true, right = true, above = true, below = true;
    for (std::size_t f = 0; f < spec.frames; ++f) {
      const double ax = detail::center_x(anchor, f), ay = detail::center_y(anchor, f);
      const double rx = detail::center_x(ref, f), ry = detail::center_y(ref, f);
      left = left && rx < ax - 2.0;
      right = right && rx > ax + 2.0;
      above = above && ry < ay - 2.0;
      below = below && ry > ay + 2.0;
      for (const auto* o : group) {
        if (o == &ref) continue;
        const double ox = detail::center_x(*o, f), oy = detail::center_y(*o, f);
        left = left && ox > ax + 2.0;
        right = right && ox < ax - 2.0;
        above = above && oy > ay + 2.0;
        below = below && oy < ay - 2.0;
      }
    }
    const std::string tail = std::string(" the ") + shape_name(anchor_shape);
    const std::string head = std::string("the ") + shape_name(ref.shape);
    if (left) out.push_back(head + " left of" + tail);
    if (right) out.push_back(head + " right of" + tail);
    if (above) out.push_back(head + " above" + tail);
    if (below) out.push_back(head + " below" + tail);
  }
  return out;
}

// "the square moving right": the direction must be unique within the class.
inline std::vector<std::string> motion_queries(const SceneSpec& spec, const ObjectSpec& ref) {
  if (!ref.moving()) return {};
  const auto group = detail::members(spec, ref.shape);
  if (group.size() < 2) return {};
  for (const auto* o : group) {
    if (o != &ref && std::string(o->direction()) == ref.direction()) return {};
  }
  return {std::string("the ") + shape_name(ref.shape) + " moving " + ref.direction()};
}

inline std::vector<std::string> family_queries(Family family, const SceneSpec& spec, const ObjectSpec& ref) {
  switch (family) {
    case Family::kAttribute:
      return {attribute_query(spec, ref)};
    case Family::kRelativePosition:
      return relative_position_queries(spec, ref);
    case Family::kRelation:
      return relation_queries(spec, ref);
    case Family::kMotion:
      return motion_queries(spec, ref);
  }
  return {};
}

// Fewest objects a scene needs before a family can be phrased at all.
inline std::uint32_t family_min_objects(Family f) {
  switch (f) {
    case Family::kAttribute:
      return 1;
    case Family::kRelativePosition:
    case Family::kMotion:
      return 2;
    case Family::kRelation:
      return 3;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Generation.

inline void validate(const GenConfig& cfg) {
  require(cfg.width >= 8 && cfg.height >= 8, "GenConfig: frame must be at least 8x8");
  require(cfg.frames >= 1, "GenConfig: need at least one frame");
  require(cfg.min_objects >= 1 && cfg.min_objects <= cfg.max_objects, "GenConfig: invalid object count range");
  require(cfg.max_objects <= 12, "GenConfig: at most 12 objects (unique color/shape pairs)");
  require(cfg.min_radius >= 1 && cfg.min_radius <= cfg.max_radius, "GenConfig: invalid radius range");
  require(cfg.min_speed >= 1 && cfg.min_speed <= cfg.max_speed, "GenConfig: invalid speed range");
  require(cfg.test_fraction >= 0.0 && cfg.test_fraction <= 1.0, "GenConfig: test_fraction outside [0, 1]");
  require(cfg.queries_per_scene >= 1, "GenConfig: queries_per_scene must be >= 1");
  require(cfg.homogeneous_prob >= 0.0 && cfg.homogeneous_prob <= 1.0, "GenConfig: homogeneous_prob outside [0, 1]");
  require(cfg.noise_prob >= 0.0 && cfg.noise_prob <= 1.0, "GenConfig: noise_prob outside [0, 1]");
  double total = 0.0;
  bool feasible = false;
  for (int f = 0; f < 4; ++f) {
    require(cfg.family_weights[f] >= 0.0, "GenConfig: negative family weight");
    total += cfg.family_weights[f];
    if (cfg.family_weights[f] > 0.0 && family_min_objects(static_cast<Family>(f)) <= cfg.max_objects)
      feasible = true;
  }
  require(total > 0.0, "GenConfig: all family weights are zero");
  if (!feasible) {
    throw Error("GenConfig: infeasible template mix; every weighted family needs more than " +
                std::to_string(cfg.max_objects) + " objects per scene");
  }
}

namespace detail {

inline std::size_t pick_weighted(const std::vector<double>& w, Rng& rng) {
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return dist(rng);
}

inline int uniform_int(int lo, int hi, Rng& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Shapes per object so that `family` can be phrased.
inline std::vector<Shape> compose(Family family, std::uint32_t n, double homogeneous_prob, Rng& rng) {
  std::vector<Shape> shapes(n);
  auto random_shape = [&] { return static_cast<Shape>(uniform_int(0, 2, rng)); };
  for (auto& s : shapes) s = random_shape();
  const auto a = random_shape();
  if (family == Family::kRelativePosition && uniform01(rng) < homogeneous_prob) {
    std::fill(shapes.begin(), shapes.end(), a);
  } else if (family == Family::kRelativePosition || family == Family::kMotion) {
    const int count = uniform_int(2, static_cast<int>(n), rng);
    for (int i = 0; i < count; ++i) shapes[static_cast<std::size_t>(i)] = a;
  } else if (family == Family::kRelation) {
    const auto b = static_cast<Shape>((static_cast<int>(a) + uniform_int(1, 2, rng)) % 3);
    const auto c = static_cast<Shape>(3 - static_cast<int>(a) - static_cast<int>(b));
    const int count = uniform_int(2, static_cast<int>(n) - 1, rng);
    for (std::uint32_t i = 0; i < n; ++i) {
      shapes[i] = static_cast<int>(i) < count ? a : (static_cast<int>(i) == count ? b : c);
    }
  }
  std::shuffle(shapes.begin(), shapes.end(), rng);
  return shapes;
}

inline bool place_objects(SceneSpec& spec, const GenConfig& cfg, const std::vector<Shape>& shapes, Rng& rng) {
  const int w = static_cast<int>(spec.width), h = static_cast<int>(spec.height);
  const int last = static_cast<int>(spec.frames) - 1;
  spec.objects.clear();
  std::array<std::array<bool, 3>, 4> used{};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    ObjectSpec o;
    o.id = static_cast<int>(i);
    o.shape = shapes[i];
    std::vector<int> free;
    for (int c = 0; c < static_cast<int>(kPalette.size()); ++c)
      if (!used[static_cast<std::size_t>(c)][static_cast<std::size_t>(o.shape)]) free.push_back(c);
    if (free.empty()) return false;
    o.color = free[static_cast<std::size_t>(uniform_int(0, static_cast<int>(free.size()) - 1, rng))];
    used[static_cast<std::size_t>(o.color)][static_cast<std::size_t>(o.shape)] = true;
    o.radius = uniform_int(cfg.min_radius, cfg.max_radius, rng);
    if (uniform01(rng) >= cfg.static_prob) {
      const int speed = uniform_int(cfg.min_speed, cfg.max_speed, rng);
      switch (uniform_int(0, 3, rng)) {
        case 0: o.vx = speed; break;
        case 1: o.vx = -speed; break;
        case 2: o.vy = speed; break;
        default: o.vy = -speed; break;
      }
    }
    // Keep body and ghost inside the frame with a one-pixel border.
    const int reach_x = o.radius + std::abs(o.vx) * (last + 1);
    const int reach_y = o.radius + std::abs(o.vy) * (last + 1);
    if (2 * reach_x + 2 >= w || 2 * reach_y + 2 >= h) return false;
    const int x_lo = 1 + o.radius + (o.vx < 0 ? std::abs(o.vx) * last : std::abs(o.vx));
    const int x_hi = w - 2 - o.radius - (o.vx > 0 ? o.vx * last : std::abs(o.vx));
    const int y_lo = 1 + o.radius + (o.vy < 0 ? std::abs(o.vy) * last : std::abs(o.vy));
    const int y_hi = h - 2 - o.radius - (o.vy > 0 ? o.vy * last : std::abs(o.vy));
    if (x_lo > x_hi || y_lo > y_hi) return false;
    o.x0 = uniform_int(x_lo, x_hi, rng);
    o.y0 = uniform_int(y_lo, y_hi, rng);
    spec.objects.push_back(o);
  }
  // Pairwise constraints in every frame: separated extents (unless occlusion is
  // allowed) and distinct box centers along x.
  for (std::size_t f = 0; f < spec.frames; ++f) {
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto a = object_extent(spec.objects[i], f);
      for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
        const auto b = object_extent(spec.objects[j], f);
        if (!spec.occlusion) {
          const bool apart = a[2] + 2 < b[0] || b[2] + 2 < a[0] || a[3] + 2 < b[1] || b[3] + 2 < a[1];
          if (!apart) return false;
        }
        if (a[0] + a[2] == b[0] + b[2]) return false;
      }
    }
  }
  return true;
}

inline BinaryMask perturb(const BinaryMask& m, const GenConfig& cfg, Rng& rng) {
  if (cfg.noise_prob <= 0.0 || uniform01(rng) >= cfg.noise_prob) return m;
  if (uniform01(rng) < 0.5) {
    BinaryMask e = erode(m, cfg.noise_radius);
    if (!e.empty()) return e;
  }
  return dilate(m, cfg.noise_radius);
}

}  // namespace detail

// Candidate masks: ground-truth masks in shuffled order, optionally eroded or
// dilated to emulate an imperfect instance segmenter.
inline void make_candidates(Scene& scene, const GenConfig& cfg, Rng& rng) {
  scene.candidates.clear();
  scene.candidate_sources.clear();
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    std::vector<int> order(scene.spec.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<BinaryMask> cands;
    for (int id : order) cands.push_back(detail::perturb(scene.gt_masks[f][static_cast<std::size_t>(id)], cfg, rng));
    scene.candidates.push_back(std::move(cands));
    scene.candidate_sources.push_back(std::move(order));
  }
}

// Per-scene random stream derived from (seed, scene index).
inline Rng scene_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(salt)};
  return Rng(seq);
}

inline Dataset generate_dataset(const GenConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Dataset ds;
  ds.seed = seed;
  ds.config = cfg;
  ds.vocab = Vocabulary(template_words());
  const std::uint32_t train = cfg.train_scenes();

  std::vector<Family> allowed;
  std::vector<double> weights;
  for (int f = 0; f < 4; ++f) {
    if (cfg.family_weights[f] > 0.0 && family_min_objects(static_cast<Family>(f)) <= cfg.max_objects) {
      allowed.push_back(static_cast<Family>(f));
      weights.push_back(cfg.family_weights[f]);
    }
  }

  for (std::uint32_t s = 0; s < cfg.scenes; ++s) {
    Rng rng = scene_rng(seed, s, 0x5ce9e);
    Scene scene;
    scene.id = static_cast<int>(s);
    scene.split = s < train ? "train" : "test";
    scene.spec.width = cfg.width;
    scene.spec.height = cfg.height;
    scene.spec.frames = cfg.frames;
    scene.spec.occlusion = cfg.occlusion;

    const Family target = allowed[detail::pick_weighted(weights, rng)];
    const std::uint32_t lo = std::max(cfg.min_objects, family_min_objects(target));
    const auto n = static_cast<std::uint32_t>(detail::uniform_int(static_cast<int>(lo), static_cast<int>(cfg.max_objects), rng));

    // Rejection-sample a layout in which the target family can be phrased.
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const auto shapes = detail::compose(target, n, cfg.homogeneous_prob, rng);
      if (!detail::place_objects(scene.spec, cfg, shapes, rng)) continue;
      for (const auto& o : scene.spec.objects) {
        if (!family_queries(target, scene.spec, o).empty()) {
          placed = true;
          break;
        }
      }
    }
    if (!placed) {
      // Fall back to any valid layout; attribute queries always exist.
      for (int attempt = 0; attempt < cfg.max_attempts * 10 && !placed; ++attempt) {
        placed = detail::place_objects(scene.spec, cfg, detail::compose(Family::kAttribute, n, 0.0, rng), rng);
      }
      if (!placed) throw Error("generate_dataset: could not place " + std::to_string(n) + " objects in a " +
                               std::to_string(cfg.width) + "x" + std::to_string(cfg.height) + " frame");
    }
    render_scene(scene, cfg.ghost_intensity);
    make_candidates(scene, cfg, rng);

    // Queries: the target family first, then a weighted mix over what the layout allows.
    std::vector<std::string> seen;
    for (std::uint32_t q = 0; q < cfg.queries_per_scene; ++q) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const Family fam = (q == 0 && attempt < 10) ? target : allowed[detail::pick_weighted(weights, rng)];
        std::vector<std::pair<int, std::string>> options;
        for (const auto& o : scene.spec.objects) {
          for (auto& text : family_queries(fam, scene.spec, o)) {
            if (std::find(seen.begin(), seen.end(), text) == seen.end()) options.emplace_back(o.id, std::move(text));
          }
        }
        if (options.empty()) continue;
        auto& pick = options[static_cast<std::size_t>(detail::uniform_int(0, static_cast<int>(options.size()) - 1, rng))];
        seen.push_back(pick.second);
        ds.samples.push_back({static_cast<int>(ds.samples.size()), scene.id, pick.second, fam, pick.first});
        break;
      }
    }
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

// Token frequencies over all sample queries.
inline std::map<std::string, int> token_counts(const Dataset& ds) {
  std::map<std::string, int> counts;
  for (const auto& s : ds.samples)
    for (const auto& w : split_words(s.query)) ++counts[w];
  return counts;
}

}  // namespace refseg

#endif  // REFSEG_DATASET_HPP_
