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

#ifndef REFSEG_TRACKER_HPP_
#define REFSEG_TRACKER_HPP_

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "refseg/masks.hpp"
#include "refseg/numerics.hpp"
#include "refseg/object_embedding.hpp"

namespace refseg {

// ---------------------------------------------------------------------------
// Assignment.

// Row -> column, or -1 when the row is unassigned.
using Assignment = std::vector<int>;

// Minimum-cost one-to-one assignment of every row of a rows <= cols cost
// matrix (shortest augmenting paths with potentials, O(rows^2 cols)).
inline Assignment min_cost_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  require(n <= m, "min_cost_assignment: more rows than columns");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) out[owner[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

// Maximum-total-similarity matching of min(rows, cols) pairs, any shape.
inline Assignment max_similarity_assignment(const Matrix& similarity) {
  check_finite(similarity.data(), "hungarian_assign");
  const std::size_t n = similarity.rows();
  const std::size_t m = similarity.cols();
  if (n == 0 || m == 0) return Assignment(n, -1);
  const double peak = *std::max_element(similarity.data().begin(), similarity.data().end());
  if (n <= m) {
    Matrix cost(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) cost(i, j) = peak - similarity(i, j);
    return min_cost_assignment(cost);
  }
  Matrix cost(m, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost(j, i) = peak - similarity(i, j);
  const Assignment transposed = min_cost_assignment(cost);
  Assignment out(n, -1);
  for (std::size_t j = 0; j < m; ++j) out[static_cast<std::size_t>(transposed[j])] = static_cast<int>(j);
  return out;
}

// Optimal matching on the full matrix, then pairs with similarity <= gamma dropped.
inline Assignment hungarian_assign(const Matrix& similarity, double gamma) {
  Assignment a = max_similarity_assignment(similarity);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= 0 && !(similarity(i, static_cast<std::size_t>(a[i])) > gamma)) a[i] = -1;
  }
  return a;
}

inline double assignment_total(const Matrix& similarity, const Assignment& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= 0) total += similarity(i, static_cast<std::size_t>(a[i]));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Tracks.

struct TrackerConfig {
  double gamma = 0.8;
  int beta = 2;
  double alpha_iou = 0.5;

  void validate() const {
    require(gamma > 0.0 && gamma <= 2.0, "TrackerConfig: gamma must lie in (0, 2]");
    require(beta >= 1, "TrackerConfig: beta must be >= 1");
    require(alpha_iou >= 0.0, "TrackerConfig: alpha_iou must be >= 0");
  }
};

enum class TrackState { kActive, kEnded };

struct TrackSlot {
  std::size_t frame = 0;
  std::size_t candidate = 0;
  Vector embedding;
  BinaryMask mask;
};

struct Track {
  int id = 0;
  std::vector<TrackSlot> slots;  // strictly increasing frame index
  std::size_t last_update = 0;
  int unmatched_rounds = 0;
  TrackState state = TrackState::kActive;

  const TrackSlot& latest() const { return slots.back(); }
  std::optional<std::size_t> candidate_at(std::size_t frame) const {
    for (const auto& s : slots) {
      if (s.frame == frame) return s.candidate;
    }
    return std::nullopt;
  }
};

// Minimal view of a frame candidate for association.
struct TrackInput {
  Vector embedding;
  BinaryMask mask;
};

// S_s = cos(a, b) + alpha * IoU(a, b)
inline double association_similarity(std::span<const double> emb_a, const BinaryMask& mask_a,
                                     std::span<const double> emb_b, const BinaryMask& mask_b, double alpha_iou) {
  return cosine_or_zero(emb_a, emb_b) + alpha_iou * mask_iou(mask_a, mask_b);
}

inline double association_similarity(const ObjectCandidate& a, const ObjectCandidate& b, double alpha_iou) {
  return association_similarity(a.relational, a.mask, b.relational, b.mask, alpha_iou);
}

// Extends matched tracks, ends tracks left unmatched for `beta` consecutive
// rounds and starts a new track for every unassigned candidate.
inline void update_tracks(std::vector<Track>& tracks, const std::vector<TrackInput>& candidates,
                          std::size_t frame_index, const TrackerConfig& cfg) {
  std::vector<std::size_t> active;
  int next_id = 0;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    next_id = std::max(next_id, tracks[t].id + 1);
    if (tracks[t].state == TrackState::kActive) {
      require(tracks[t].slots.empty() || tracks[t].slots.back().frame < frame_index,
              "update_tracks: frame index must increase");
      active.push_back(t);
    }
  }
  Assignment match(active.size(), -1);
  if (!active.empty() && !candidates.empty()) {
    Matrix sim(active.size(), candidates.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const TrackSlot& last = tracks[active[a]].latest();
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        sim(a, c) = association_similarity(last.embedding, last.mask, candidates[c].embedding,
                                           candidates[c].mask, cfg.alpha_iou);
      }
    }
    match = hungarian_assign(sim, cfg.gamma);
  }
  std::vector<char> taken(candidates.size(), 0);
  for (std::size_t a = 0; a < active.size(); ++a) {
    Track& track = tracks[active[a]];
    if (match[a] >= 0) {
      const auto c = static_cast<std::size_t>(match[a]);
      taken[c] = 1;
      track.slots.push_back({frame_index, c, candidates[c].embedding, candidates[c].mask});
      track.last_update = frame_index;
      track.unmatched_rounds = 0;
    } else if (++track.unmatched_rounds >= cfg.beta) {
      track.state = TrackState::kEnded;
    }
  }
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (taken[c]) continue;
    Track track;
    track.id = next_id++;
    track.slots.push_back({frame_index, c, candidates[c].embedding, candidates[c].mask});
    track.last_update = frame_index;
    tracks.push_back(std::move(track));
  }
}

class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  void update(const std::vector<TrackInput>& candidates, std::size_t frame_index) {
    update_tracks(tracks_, candidates, frame_index, cfg_);
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
};

enum class TrackScoreMode { kMean, kMax };

// Mean (or max) over assigned frames of cos(embedding, language).
inline double score_track(const Track& track, std::span<const double> language,
                          TrackScoreMode mode = TrackScoreMode::kMean) {
  if (track.slots.empty()) throw Error("score_track: empty track");
  double total = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : track.slots) {
    const double c = cosine_or_zero(s.embedding, language);
    total += c;
    best = std::max(best, c);
  }
  return mode == TrackScoreMode::kMax ? best : total / static_cast<double>(track.slots.size());
}

// Index of the best-scoring track; ties go to the lower track id.
inline std::size_t select_track(const std::vector<Track>& tracks, std::span<const double> language,
                                TrackScoreMode mode = TrackScoreMode::kMean) {
  if (tracks.empty()) throw Error("select_track: no tracks");
  std::size_t best = 0;
  double best_score = score_track(tracks[0], language, mode);
  for (std::size_t t = 1; t < tracks.size(); ++t) {
    const double s = score_track(tracks[t], language, mode);
    if (s > best_score || (s == best_score && tracks[t].id < tracks[best].id)) {
      best = t;
      best_score = s;
    }
  }
  return best;
}

}  // namespace refseg

#endif  // REFSEG_TRACKER_HPP_
