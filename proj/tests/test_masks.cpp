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

#include <set>

#include "refseg/masks.hpp"

namespace refseg {
namespace {

BinaryMask rect(std::uint32_t w, std::uint32_t h, std::uint32_t x0, std::uint32_t y0, std::uint32_t rw,
                std::uint32_t rh) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  for (std::uint32_t y = y0; y < y0 + rh; ++y)
    for (std::uint32_t x = x0; x < x0 + rw; ++x) bits[y * w + x] = 1;
  return BinaryMask::from_bitmap(w, h, bits);
}

BinaryMask random_mask(std::uint32_t w, std::uint32_t h, double density, Rng& rng) {
  std::bernoulli_distribution on(density);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& b : bits) b = on(rng) ? 1 : 0;
  return BinaryMask::from_bitmap(w, h, bits);
}

TEST(BinaryMask, RunsSumToArea) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const BinaryMask m = random_mask(13, 7, 0.4, rng);
    std::uint64_t total = 0;
    for (auto r : m.runs()) total += r;
    EXPECT_EQ(total, 13u * 7u);
  }
}

TEST(BinaryMask, RoundTrip) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::uint32_t w = 1 + rng() % 64, h = 1 + rng() % 64;
    const BinaryMask m = random_mask(w, h, 0.3, rng);
    const auto bits = m.to_bitmap();
    EXPECT_EQ(BinaryMask::from_bitmap(w, h, bits), m);
    EXPECT_EQ(BinaryMask::from_runs(w, h, m.runs()), m);
  }
}

TEST(BinaryMask, FirstRunIsBackground) {
  const BinaryMask m = BinaryMask::from_bitmap(3, 1, std::vector<std::uint8_t>{1, 1, 0});
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{0, 2, 1}));
}

TEST(BinaryMask, BadRunsThrow) { EXPECT_THROW(BinaryMask::from_runs(2, 2, {1, 2}), Error); }

TEST(MaskIou, Identical) {
  const BinaryMask m = rect(8, 8, 1, 2, 3, 3);
  EXPECT_DOUBLE_EQ(mask_iou(m, m), 1.0);
}

TEST(MaskIou, Disjoint) { EXPECT_DOUBLE_EQ(mask_iou(rect(8, 8, 0, 0, 2, 2), rect(8, 8, 5, 5, 2, 2)), 0.0); }

TEST(MaskIou, ShiftedSquares) {
  EXPECT_DOUBLE_EQ(mask_iou(rect(4, 4, 0, 0, 2, 2), rect(4, 4, 1, 0, 2, 2)), 1.0 / 3.0);
}

TEST(MaskIou, BothEmptyIsZero) { EXPECT_DOUBLE_EQ(mask_iou(BinaryMask(4, 4), BinaryMask(4, 4)), 0.0); }

TEST(MaskIou, SizeMismatchThrows) { EXPECT_THROW(mask_iou(BinaryMask(4, 4), BinaryMask(4, 5)), Error); }

TEST(MaskIou, MatchesPixelOracle) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::uint32_t w = 1 + rng() % 64, h = 1 + rng() % 64;
    const BinaryMask a = random_mask(w, h, 0.5, rng), b = random_mask(w, h, 0.5, rng);
    const auto ba = a.to_bitmap(), bb = b.to_bitmap();
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < ba.size(); ++i) {
      inter += ba[i] && bb[i];
      uni += ba[i] || bb[i];
    }
    const double expected = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    EXPECT_DOUBLE_EQ(mask_iou(a, b), expected);
    EXPECT_DOUBLE_EQ(mask_iou(a, b), mask_iou(b, a));
  }
}

TEST(BoundingBox, FullFrame) {
  const BoundingBox b = bounding_box(rect(5, 7, 0, 0, 5, 7));
  EXPECT_DOUBLE_EQ(b.x_min, 0);
  EXPECT_DOUBLE_EQ(b.y_min, 0);
  EXPECT_DOUBLE_EQ(b.x_max, 1);
  EXPECT_DOUBLE_EQ(b.y_max, 1);
  EXPECT_DOUBLE_EQ(b.x_c, 0.5);
  EXPECT_DOUBLE_EQ(b.y_c, 0.5);
  EXPECT_DOUBLE_EQ(b.w, 1);
  EXPECT_DOUBLE_EQ(b.h, 1);
}

TEST(BoundingBox, TopLeftPixel) {
  const BoundingBox b = bounding_box(rect(6, 6, 0, 0, 1, 1));
  for (double v : {b.x_min, b.y_min, b.x_max, b.y_max, b.x_c, b.y_c, b.w, b.h}) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(BoundingBox, Blob) {
  const BoundingBox b = bounding_box(rect(10, 10, 4, 5, 3, 2));
  EXPECT_NEAR(b.x_min, 0.4444444444444444, 1e-15);
  EXPECT_NEAR(b.y_min, 0.5555555555555556, 1e-15);
  EXPECT_NEAR(b.x_max, 0.6666666666666666, 1e-15);
  EXPECT_NEAR(b.y_max, 0.6666666666666666, 1e-15);
  EXPECT_NEAR(b.x_c, 0.5555555555555556, 1e-15);
  EXPECT_NEAR(b.y_c, 0.6111111111111112, 1e-15);
  EXPECT_NEAR(b.w, 0.2222222222222222, 1e-15);
  EXPECT_NEAR(b.h, 0.1111111111111111, 1e-15);
}

TEST(BoundingBox, WrappingIntervalAndEmpty) {
  // Run from the end of row 0 into row 1.
  const BinaryMask m = BinaryMask::from_runs(4, 3, {3, 2, 7});
  const BoundingBox b = bounding_box(m);
  EXPECT_DOUBLE_EQ(b.x_min, 0.0);
  EXPECT_DOUBLE_EQ(b.x_max, 1.0);
  EXPECT_DOUBLE_EQ(b.y_max, 0.5);
  EXPECT_THROW(bounding_box(BinaryMask(4, 4)), Error);
}

TEST(PositionalDescriptors, SingleObject) {
  const std::vector<BinaryMask> m{rect(8, 8, 2, 2, 2, 2)};
  const auto d = positional_descriptors(m);
  EXPECT_DOUBLE_EQ(d[0].r_x(), 0.0);
  EXPECT_DOUBLE_EQ(d[0].r_y(), 0.0);
}

TEST(PositionalDescriptors, ThreeObjects) {
  // x_c = 0.1, 0.5, 0.9 on an 11-pixel-wide frame.
  const std::vector<BinaryMask> m{rect(11, 3, 5, 0, 1, 1), rect(11, 3, 1, 1, 1, 1), rect(11, 3, 9, 2, 1, 1)};
  const auto d = positional_descriptors(m);
  EXPECT_DOUBLE_EQ(d[0].r_x(), 0.5);
  EXPECT_DOUBLE_EQ(d[1].r_x(), 0.0);
  EXPECT_DOUBLE_EQ(d[2].r_x(), 1.0);
}

TEST(PositionalDescriptors, FiveObjectsSortOracle) {
  const std::vector<std::pair<int, int>> pts{{9, 2}, {3, 11}, {14, 7}, {3, 4}, {6, 13}};
  std::vector<BinaryMask> m;
  for (auto [x, y] : pts) m.push_back(rect(16, 16, x, y, 1, 1));
  const auto d = positional_descriptors(m);
  const double rx[] = {0.75, 0.0, 1.0, 0.25, 0.5};
  const double ry[] = {0.0, 0.75, 0.5, 0.25, 1.0};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(d[i].r_x(), rx[i]);
    EXPECT_DOUBLE_EQ(d[i].r_y(), ry[i]);
    const BoundingBox b = bounding_box(m[i]);
    EXPECT_DOUBLE_EQ(d[i].x_min(), b.x_min);
    EXPECT_DOUBLE_EQ(d[i].h(), b.h);
  }
}

TEST(PositionalDescriptors, Errors) {
  EXPECT_THROW(positional_descriptors(std::vector<BinaryMask>{}), Error);
  EXPECT_THROW(positional_descriptors(std::vector<BinaryMask>{BinaryMask(4, 4)}), Error);
  EXPECT_THROW(positional_descriptors(std::vector<BinaryMask>{rect(4, 4, 0, 0, 1, 1), rect(5, 4, 0, 0, 1, 1)}),
               Error);
}

TEST(HorizontalFlip, Examples) {
  const BinaryMask sym = rect(6, 4, 2, 1, 2, 2);
  EXPECT_EQ(horizontal_flip(sym), sym);
  EXPECT_EQ(horizontal_flip(rect(7, 3, 0, 2, 1, 1)), rect(7, 3, 6, 2, 1, 1));
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const BinaryMask m = random_mask(1 + rng() % 30, 1 + rng() % 30, 0.3, rng);
    EXPECT_EQ(horizontal_flip(horizontal_flip(m)), m);
    EXPECT_EQ(horizontal_flip(m).area(), m.area());
  }
}

TEST(HorizontalFlip, MirroredDescriptors) {
  Rng rng(5);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng() % 5);
    std::vector<BinaryMask> masks;
    std::set<std::uint32_t> center_sums;
    for (int i = 0; i < n; ++i) {
      const std::uint32_t w = 1 + rng() % 6, h = 1 + rng() % 6;
      const std::uint32_t x = rng() % (32 - w), y = rng() % (24 - h);
      masks.push_back(rect(32, 24, x, y, w, h));
      center_sums.insert(2 * x + w - 1);
    }
    if (center_sums.size() != masks.size()) continue;  // x-center ties reorder under the stable rule
    std::vector<BinaryMask> flipped;
    for (const auto& m : masks) flipped.push_back(horizontal_flip(m));
    const auto a = positional_descriptors(masks), b = positional_descriptors(flipped);
    const double denom = std::max(n - 1, 1);
    for (int i = 0; i < n; ++i) {
      const auto& p = a[static_cast<std::size_t>(i)];
      const auto& q = b[static_cast<std::size_t>(i)];
      EXPECT_NEAR(q.x_min(), 1 - p.x_max(), 1e-12);
      EXPECT_NEAR(q.x_max(), 1 - p.x_min(), 1e-12);
      EXPECT_NEAR(q.x_c(), 1 - p.x_c(), 1e-12);
      EXPECT_NEAR(q.w(), p.w(), 1e-12);
      EXPECT_EQ(q.y_min(), p.y_min());
      EXPECT_EQ(q.y_max(), p.y_max());
      EXPECT_EQ(q.y_c(), p.y_c());
      EXPECT_EQ(q.h(), p.h());
      EXPECT_EQ(q.r_y(), p.r_y());
      EXPECT_NEAR(q.r_x(), (n - 1 - p.r_x() * denom) / denom, 1e-12);
    }
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Morphology, DilateErode) {
  const BinaryMask dot = rect(7, 7, 3, 3, 1, 1);
  EXPECT_EQ(dilate(dot, 1).area(), 5u);
  EXPECT_EQ(erode(dilate(dot, 1), 1), dot);
  EXPECT_EQ(erode(dot, 1).area(), 0u);
}

}  // namespace
}  // namespace refseg
