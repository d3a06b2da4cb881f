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

#ifndef REFSEG_RENDER_HPP_
#define REFSEG_RENDER_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refseg/binary_io.hpp"
#include "refseg/masks.hpp"
#include "refseg/object_embedding.hpp"

namespace refseg {

inline constexpr double kOverlayAlpha = 0.5;

// Overlay colors, cycled by mask index.
inline constexpr std::array<std::array<double, 3>, 6> kOverlayColors = {{
    {1.0, 0.0, 0.0},
    {0.0, 1.0, 0.0},
    {0.0, 0.0, 1.0},
    {1.0, 1.0, 0.0},
    {1.0, 0.0, 1.0},
    {0.0, 1.0, 1.0},
}};

struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major

  bool operator==(const RgbImage&) const = default;
};

inline std::uint8_t to_byte(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

// Boundary pixels: inside the mask with a 4-neighbour outside it or on the frame edge.
inline std::vector<std::uint8_t> mask_outline(const BinaryMask& m) {
  const auto bits = m.to_bitmap();
  const std::uint32_t w = m.width(), h = m.height();
  std::vector<std::uint8_t> out(bits.size(), 0);
  auto at = [&](std::int64_t x, std::int64_t y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return false;
    return bits[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] != 0;
  };
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      if (!at(x, y)) continue;
      if (!at(x - 1, y) || !at(x + 1, y) || !at(x, static_cast<std::int64_t>(y) - 1) || !at(x, y + 1)) {
        out[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }
  return out;
}

// Blends mask i with kOverlayColors[i % 6] at kOverlayAlpha, in list order,
// then paints the outline of mask `referent` (if any) white.
inline RgbImage compose_overlay(const Frame& frame, const std::vector<BinaryMask>& masks,
                                std::optional<std::size_t> referent) {
  require(frame.channels >= 3, "render_overlay: frame needs RGB channels");
  require(!referent || *referent < masks.size(), "render_overlay: referent index out of range");
  const std::size_t n = frame.pixels();
  std::vector<std::array<double, 3>> rgb(n);
  for (std::size_t p = 0; p < n; ++p) {
    const float* px = frame.pixel(p);
    rgb[p] = {px[0], px[1], px[2]};
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& m = masks[i];
    if (m.width() != frame.width || m.height() != frame.height) {
      throw Error("render_overlay: mask " + std::to_string(i) + " is " + std::to_string(m.width()) + "x" +
                  std::to_string(m.height()) + ", frame is " + std::to_string(frame.width) + "x" +
                  std::to_string(frame.height));
    }
    const auto& color = kOverlayColors[i % kOverlayColors.size()];
    m.for_each_pixel([&](std::uint32_t p) {
      for (int c = 0; c < 3; ++c) rgb[p][c] = (1.0 - kOverlayAlpha) * rgb[p][c] + kOverlayAlpha * color[c];
    });
  }
  if (referent) {
    const auto outline = mask_outline(masks[*referent]);
    for (std::size_t p = 0; p < n; ++p)
      if (outline[p]) rgb[p] = {1.0, 1.0, 1.0};
  }
  RgbImage img{frame.width, frame.height, std::vector<std::uint8_t>(n * 3)};
  for (std::size_t p = 0; p < n; ++p)
    for (int c = 0; c < 3; ++c) img.pixels[p * 3 + static_cast<std::size_t>(c)] = to_byte(rgb[p][c]);
  return img;
}

// The highest-scoring mask (first on ties) is treated as the referent.
inline RgbImage render_overlay(const Frame& frame, const std::vector<BinaryMask>& masks,
                               const std::vector<double>& scores) {
  require(scores.size() == masks.size(), "render_overlay: one score per mask required");
  std::optional<std::size_t> ref;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!ref || scores[i] > scores[*ref]) ref = i;
  return compose_overlay(frame, masks, ref);
}

inline std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline void render_overlay(const Frame& frame, const std::vector<BinaryMask>& masks, const std::vector<double>& scores,
                           const std::filesystem::path& out_path) {
  write_file_bytes(out_path, encode_ppm(render_overlay(frame, masks, scores)));
}

}  // namespace refseg

#endif  // REFSEG_RENDER_HPP_
