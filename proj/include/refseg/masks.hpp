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

#ifndef REFSEG_MASKS_HPP_
#define REFSEG_MASKS_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "refseg/numerics.hpp"

namespace refseg {

// Binary object mask stored as run lengths over row-major pixel order. Runs
// alternate background/foreground and the first run is background (possibly
// zero). Masks are kept canonical: no zero-length run after the first, so
// equal bitmaps compare equal.
class BinaryMask {
 public:
  BinaryMask() = default;

  // Empty (all background) mask.
  BinaryMask(std::uint32_t width, std::uint32_t height) : width_(width), height_(height) {
    if (width * height > 0) runs_.push_back(width * height);
  }

  static BinaryMask from_runs(std::uint32_t width, std::uint32_t height,
                              std::vector<std::uint32_t> runs) {
    std::uint64_t total = 0;
    for (auto r : runs) total += r;
    if (total != static_cast<std::uint64_t>(width) * height) {
      throw Error("BinaryMask: run lengths sum to " + std::to_string(total) + ", expected " +
                  std::to_string(static_cast<std::uint64_t>(width) * height));
    }
    BinaryMask m;
    m.width_ = width;
    m.height_ = height;
    // Merge zero-length interior runs so equality is structural.
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i > 0 && runs[i] == 0) {
        if (i + 1 < runs.size()) {
          if (!m.runs_.empty()) {
            m.runs_.back() += runs[i + 1];
          } else {
            m.runs_.push_back(runs[i + 1]);
          }
          ++i;
        }
        continue;
      }
      m.runs_.push_back(runs[i]);
    }
    return m;
  }

  static BinaryMask from_bitmap(std::uint32_t width, std::uint32_t height,
                                std::span<const std::uint8_t> bits) {
    require(bits.size() == static_cast<std::size_t>(width) * height,
            "BinaryMask::from_bitmap: bitmap size mismatch");
    BinaryMask m;
    m.width_ = width;
    m.height_ = height;
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (auto b : bits) {
      const std::uint8_t v = b ? 1 : 0;
      if (v != current) {
        m.runs_.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
    m.runs_.push_back(run);
    return m;
  }

  std::vector<std::uint8_t> to_bitmap() const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width_) * height_, 0);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (i % 2 == 1) std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(pos), runs_[i], 1);
      pos += runs_[i];
    }
    return bits;
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  const std::vector<std::uint32_t>& runs() const { return runs_; }

  std::uint64_t area() const {
    std::uint64_t a = 0;
    for (std::size_t i = 1; i < runs_.size(); i += 2) a += runs_[i];
    return a;
  }
  bool empty() const { return area() == 0; }

  // Calls f(index) for every foreground pixel, in row-major order.
  template <class F>
  void for_each_pixel(F&& f) const {
    std::uint32_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (i % 2 == 1) {
        for (std::uint32_t k = 0; k < runs_[i]; ++k) f(pos + k);
      }
      pos += runs_[i];
    }
  }

  // Foreground intervals [begin, end) in row-major pixel order.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> intervals() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    std::uint32_t pos = 0;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (i % 2 == 1 && runs_[i] > 0) out.emplace_back(pos, pos + runs_[i]);
      pos += runs_[i];
    }
    return out;
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint32_t> runs_;
};

inline std::uint64_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require(a.width() == b.width() && a.height() == b.height(), "mask size mismatch");
  const auto ia = a.intervals();
  const auto ib = b.intervals();
  std::uint64_t total = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ia.size() && j < ib.size()) {
    const auto lo = std::max(ia[i].first, ib[j].first);
    const auto hi = std::min(ia[i].second, ib[j].second);
    if (hi > lo) total += hi - lo;
    if (ia[i].second < ib[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

// |a & b| / |a | b|; two empty masks give 0.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const std::uint64_t inter = intersection_area(a, b);
  const std::uint64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  double x_c = 0, y_c = 0, w = 0, h = 0;
};

// Tight box of the foreground, coordinates divided by (dimension - 1).
inline BoundingBox bounding_box(const BinaryMask& m) {
  if (m.empty()) throw Error("bounding_box: empty mask");
  std::uint32_t x0 = m.width(), y0 = m.height(), x1 = 0, y1 = 0;
  const std::uint32_t w = m.width();
  for (const auto& [begin, end] : m.intervals()) {
    // An interval can wrap across rows.
    const std::uint32_t first_row = begin / w;
    const std::uint32_t last_row = (end - 1) / w;
    y0 = std::min(y0, first_row);
    y1 = std::max(y1, last_row);
    if (first_row == last_row) {
      x0 = std::min(x0, begin % w);
      x1 = std::max(x1, (end - 1) % w);
    } else {
      // The first row runs to the right edge, the last starts at column 0.
      x0 = 0;
      x1 = w - 1;
    }
  }
  const double sx = m.width() > 1 ? static_cast<double>(m.width() - 1) : 1.0;
  const double sy = m.height() > 1 ? static_cast<double>(m.height() - 1) : 1.0;
  BoundingBox b;
  b.x_min = x0 / sx;
  b.x_max = x1 / sx;
  b.y_min = y0 / sy;
  b.y_max = y1 / sy;
  b.x_c = (x0 + x1) / (2.0 * sx);
  b.y_c = (y0 + y1) / (2.0 * sy);
  b.w = b.x_max - b.x_min;
  b.h = b.y_max - b.y_min;
  return b;
}

// (x_min, y_min, x_max, y_max, x_c, y_c, w, h, r_x, r_y)
struct PositionalDescriptor {
  static constexpr std::size_t kDim = 10;
  std::array<double, kDim> values{};

  double x_min() const { return values[0]; }
  double y_min() const { return values[1]; }
  double x_max() const { return values[2]; }
  double y_max() const { return values[3]; }
  double x_c() const { return values[4]; }
  double y_c() const { return values[5]; }
  double w() const { return values[6]; }
  double h() const { return values[7]; }
  double r_x() const { return values[8]; }
  double r_y() const { return values[9]; }
};

// Ascending 0-based rank of each key; ties keep input order.
inline std::vector<std::size_t> stable_ranks(std::span<const double> keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::size_t> rank(keys.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

inline std::vector<PositionalDescriptor> positional_descriptors(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw Error("positional_descriptors: empty candidate list");
  for (const auto& m : masks) {
    require(m.width() == masks[0].width() && m.height() == masks[0].height(),
            "positional_descriptors: masks differ in frame size");
  }
  std::vector<BoundingBox> boxes;
  boxes.reserve(masks.size());
  for (const auto& m : masks) boxes.push_back(bounding_box(m));

  std::vector<double> xs, ys;
  for (const auto& b : boxes) {
    xs.push_back(b.x_c);
    ys.push_back(b.y_c);
  }
  const auto rank_x = stable_ranks(xs);
  const auto rank_y = stable_ranks(ys);
  const double denom = static_cast<double>(std::max<std::size_t>(masks.size() - 1, 1));

  std::vector<PositionalDescriptor> out(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& b = boxes[i];
    out[i].values = {b.x_min, b.y_min, b.x_max, b.y_max, b.x_c, b.y_c, b.w, b.h,
                     static_cast<double>(rank_x[i]) / denom, static_cast<double>(rank_y[i]) / denom};
  }
  return out;
}

inline BinaryMask horizontal_flip(const BinaryMask& m) {
  const std::uint32_t w = m.width();
  const std::uint32_t h = m.height();
  const auto bits = m.to_bitmap();
  std::vector<std::uint8_t> out(bits.size());
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      out[static_cast<std::size_t>(y) * w + (w - 1 - x)] = bits[static_cast<std::size_t>(y) * w + x];
    }
  }
  return BinaryMask::from_bitmap(w, h, out);
}

// Morphology with a 3x3 cross, repeated `radius` times.
inline BinaryMask dilate(const BinaryMask& m, int radius) {
  const int w = static_cast<int>(m.width());
  const int h = static_cast<int>(m.height());
  auto bits = m.to_bitmap();
  for (int step = 0; step < radius; ++step) {
    auto next = bits;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (bits[y * w + x]) continue;
        const bool hit = (x > 0 && bits[y * w + x - 1]) || (x + 1 < w && bits[y * w + x + 1]) ||
                         (y > 0 && bits[(y - 1) * w + x]) || (y + 1 < h && bits[(y + 1) * w + x]);
        if (hit) next[y * w + x] = 1;
      }
    }
    bits = std::move(next);
  }
  return BinaryMask::from_bitmap(m.width(), m.height(), bits);
}

inline BinaryMask erode(const BinaryMask& m, int radius) {
  const int w = static_cast<int>(m.width());
  const int h = static_cast<int>(m.height());
  auto bits = m.to_bitmap();
  for (int step = 0; step < radius; ++step) {
    auto next = bits;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!bits[y * w + x]) continue;
        const bool keep = x > 0 && bits[y * w + x - 1] && x + 1 < w && bits[y * w + x + 1] && y > 0 &&
                          bits[(y - 1) * w + x] && y + 1 < h && bits[(y + 1) * w + x];
        if (!keep) next[y * w + x] = 0;
      }
    }
    bits = std::move(next);
  }
  return BinaryMask::from_bitmap(m.width(), m.height(), bits);
}

}  // namespace refseg

#endif  // REFSEG_MASKS_HPP_
