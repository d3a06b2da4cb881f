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

#ifndef REFSEG_OBJECT_EMBEDDING_HPP_
#define REFSEG_OBJECT_EMBEDDING_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "refseg/language.hpp"
#include "refseg/masks.hpp"
#include "refseg/numerics.hpp"

namespace refseg {

inline constexpr std::size_t kFrameChannels = 5;  // R, G, B, x/(W-1), y/(H-1)

// Pixel-interleaved raster: value(x, y, c) = data[(y * width + x) * channels + c].
struct Frame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = kFrameChannels;
  std::vector<float> data;

  Frame() = default;
  Frame(std::uint32_t w, std::uint32_t h, std::uint32_t c = kFrameChannels)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  float* pixel(std::size_t index) { return data.data() + index * channels; }
  const float* pixel(std::size_t index) const { return data.data() + index * channels; }

  bool operator==(const Frame&) const = default;
};

// Coordinate channels 3 and 4 hold the pixel grid.
inline void fill_coordinate_channels(Frame& f) {
  require(f.channels >= 5, "fill_coordinate_channels: frame has fewer than 5 channels");
  const double sx = f.width > 1 ? f.width - 1.0 : 1.0;
  const double sy = f.height > 1 ? f.height - 1.0 : 1.0;
  for (std::uint32_t y = 0; y < f.height; ++y) {
    for (std::uint32_t x = 0; x < f.width; ++x) {
      float* p = f.pixel(static_cast<std::size_t>(y) * f.width + x);
      p[3] = static_cast<float>(x / sx);
      p[4] = static_cast<float>(y / sy);
    }
  }
}

// Mirrors image content left-right; the coordinate channels stay the pixel grid.
inline Frame horizontal_flip(const Frame& f) {
  Frame out = f;
  const std::uint32_t content = std::min<std::uint32_t>(f.channels, 3);
  for (std::uint32_t y = 0; y < f.height; ++y) {
    for (std::uint32_t x = 0; x < f.width; ++x) {
      const float* src = f.pixel(static_cast<std::size_t>(y) * f.width + x);
      float* dst = out.pixel(static_cast<std::size_t>(y) * f.width + (f.width - 1 - x));
      for (std::uint32_t c = 0; c < content; ++c) dst[c] = src[c];
    }
  }
  return out;
}

struct FeatureMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // (y * width + x) * dim + k

  std::span<const double> at(std::size_t pixel) const { return {data.data() + pixel * dim, dim}; }
};

// k x k convolution (zero padding, odd k) followed by ReLU.
struct BackboneParams {
  Matrix weight;  // feature_dim x (kernel * kernel * channels), row-major over (dy, dx, channel)
  Vector bias;    // feature_dim
  std::size_t kernel = 3;

  std::size_t feature_dim() const { return weight.rows(); }
  std::size_t channels() const { return weight.cols() / (kernel * kernel); }

  static BackboneParams zeros(std::size_t feature_dim, std::size_t kernel = 3, std::size_t channels = kFrameChannels) {
    require(kernel % 2 == 1, "BackboneParams: kernel size must be odd");
    return {Matrix(feature_dim, kernel * kernel * channels), Vector(feature_dim, 0.0), kernel};
  }
  static BackboneParams random(std::size_t feature_dim, Rng& rng, std::size_t kernel = 3,
                               std::size_t channels = kFrameChannels) {
    BackboneParams p = zeros(feature_dim, kernel, channels);
    fill_uniform(p.weight.data(), 1.0 / static_cast<double>(kernel), rng);
    fill_uniform(p.bias, 0.5, rng);
    return p;
  }

  void collect(std::vector<ParamRef>& out, const std::string& prefix) {
    refseg::collect(out, prefix + ".weight", weight);
    refseg::collect(out, prefix + ".bias", bias);
  }
};

// Receptive field of pixel p, zero outside the frame.
inline void gather_patch(const Frame& frame, std::uint32_t p, std::size_t kernel, double* out) {
  const int half = static_cast<int>(kernel / 2);
  const int x = static_cast<int>(p % frame.width);
  const int y = static_cast<int>(p / frame.width);
  const std::size_t ch = frame.channels;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const int xx = x + dx, yy = y + dy;
      if (xx < 0 || yy < 0 || xx >= static_cast<int>(frame.width) || yy >= static_cast<int>(frame.height)) {
        std::fill_n(out, ch, 0.0);
      } else {
        const float* src = frame.pixel(static_cast<std::size_t>(yy) * frame.width + static_cast<std::size_t>(xx));
        for (std::size_t c = 0; c < ch; ++c) out[c] = src[c];
      }
      out += ch;
    }
  }
}

inline void backbone_pixel(const BackboneParams& params, std::span<const double> patch, double* out) {
  const std::size_t dim = params.weight.rows();
  const std::size_t n = patch.size();
  const double* w = params.weight.data().data();
  for (std::size_t k = 0; k < dim; ++k) {
    double z = params.bias[k];
    for (std::size_t c = 0; c < n; ++c) z += w[k * n + c] * patch[c];
    out[k] = relu(z);
  }
}

inline FeatureMap backbone_features(const Frame& frame, const BackboneParams& params) {
  require(params.channels() == frame.channels, "backbone_features: channel count mismatch");
  FeatureMap fm{frame.width, frame.height, params.feature_dim(), {}};
  fm.data.resize(frame.pixels() * fm.dim);
  Vector patch(params.weight.cols());
  for (std::size_t p = 0; p < frame.pixels(); ++p) {
    gather_patch(frame, static_cast<std::uint32_t>(p), params.kernel, patch.data());
    backbone_pixel(params, patch, fm.data.data() + p * fm.dim);
  }
  return fm;
}

// Channel-wise max over the mask plus the first argmax pixel of each channel.
struct PooledFeatures {
  Vector values;
  std::vector<std::uint32_t> argmax;
};

inline PooledFeatures masked_max(const FeatureMap& fm, const BinaryMask& mask) {
  require(mask.width() == fm.width && mask.height() == fm.height, "masked_max: size mismatch");
  if (mask.empty()) throw Error("masked_max: empty mask");
  PooledFeatures out{Vector(fm.dim, -1.0), std::vector<std::uint32_t>(fm.dim, 0)};
  mask.for_each_pixel([&](std::uint32_t p) {
    const auto f = fm.at(p);
    for (std::size_t k = 0; k < fm.dim; ++k) {
      if (f[k] > out.values[k]) {
        out.values[k] = f[k];
        out.argmax[k] = p;
      }
    }
  });
  return out;
}

// Same result as masked_max(backbone_features(frame), mask) but only evaluates
// the backbone on mask pixels.
inline PooledFeatures masked_max_from_frame(const Frame& frame, const BinaryMask& mask,
                                            const BackboneParams& params) {
  require(mask.width() == frame.width && mask.height() == frame.height, "masked_max: size mismatch");
  require(params.channels() == frame.channels, "masked_max: channel count mismatch");
  if (mask.empty()) throw Error("masked_max: empty mask");
  const std::size_t dim = params.feature_dim();
  PooledFeatures out{Vector(dim, -1.0), std::vector<std::uint32_t>(dim, 0)};
  Vector f(dim);
  Vector patch(params.weight.cols());
  mask.for_each_pixel([&](std::uint32_t p) {
    gather_patch(frame, p, params.kernel, patch.data());
    backbone_pixel(params, patch, f.data());
    for (std::size_t k = 0; k < dim; ++k) {
      if (f[k] > out.values[k]) {
        out.values[k] = f[k];
        out.argmax[k] = p;
      }
    }
  });
  return out;
}

// Routes dL/d(pooled) to the receptive field of each channel's argmax pixel.
inline void masked_max_backward(const Frame& frame, const PooledFeatures& pooled,
                                std::span<const double> upstream, BackboneParams& grads) {
  Vector patch(grads.weight.cols());
  std::uint32_t loaded = std::numeric_limits<std::uint32_t>::max();
  for (std::size_t k = 0; k < pooled.values.size(); ++k) {
    if (upstream[k] == 0.0 || pooled.values[k] <= 0.0) continue;  // ReLU inactive
    if (pooled.argmax[k] != loaded) {
      gather_patch(frame, pooled.argmax[k], grads.kernel, patch.data());
      loaded = pooled.argmax[k];
    }
    add_into(grads.weight.row(k), patch, upstream[k]);
    grads.bias[k] += upstream[k];
  }
}

// One frame-level candidate and its embeddings in pipeline order:
// individual (v), position-enhanced, relation-enhanced.
struct ObjectCandidate {
  BinaryMask mask;
  PositionalDescriptor descriptor;
  Vector individual;
  Vector spatial;
  Vector relational;
};

struct EmbedTape {
  PooledFeatures pooled;
  MlpTape mlp;
};

// v = MLP(Max(F_v * o))
inline Vector masked_maxpool_embed(const FeatureMap& fm, const BinaryMask& mask, const Mlp& mlp,
                                   EmbedTape* tape = nullptr) {
  PooledFeatures pooled = masked_max(fm, mask);
  Vector v = mlp_forward(mlp, pooled.values, tape ? &tape->mlp : nullptr);
  if (tape) tape->pooled = std::move(pooled);
  return v;
}

// V = v + W_p p
inline Vector apply_prm(std::span<const double> v, const PositionalDescriptor& p, const Matrix& w_p) {
  require(w_p.cols() == PositionalDescriptor::kDim && w_p.rows() == v.size(), "apply_prm: dimension mismatch");
  Vector out = matvec(w_p, p.values);
  add_into(out, v);
  return out;
}

inline void apply_prm_backward(const PositionalDescriptor& p, std::span<const double> upstream, Matrix& grad_w_p) {
  add_outer(grad_w_p, upstream, p.values);
}

// ---------------------------------------------------------------------------
// Text-guided relation attention over the objects of one frame.

struct TsrmParams {
  AttentionPool text_pool;  // produces f_t from the word hidden states
  Matrix w_o;               // embed x (embed + text_dim)
  Matrix w_q;               // key_dim x embed
  Matrix w_k;               // key_dim x embed
  Matrix w_v;               // embed x embed

  std::size_t key_dim() const { return w_q.rows(); }

  static TsrmParams zeros(std::size_t hidden_dim, std::size_t embed, std::size_t text_dim, std::size_t key_dim) {
    TsrmParams p;
    p.text_pool = AttentionPool::zeros(hidden_dim, {embed, text_dim});
    p.w_o = Matrix(embed, embed + text_dim);
    p.w_q = Matrix(key_dim, embed);
    p.w_k = Matrix(key_dim, embed);
    p.w_v = Matrix(embed, embed);
    return p;
  }

  static TsrmParams random(std::size_t hidden_dim, std::size_t embed, std::size_t text_dim, std::size_t key_dim,
                           Rng& rng) {
    TsrmParams p = zeros(hidden_dim, embed, text_dim, key_dim);
    p.text_pool = AttentionPool::random(hidden_dim, {embed, text_dim}, rng);
    fill_uniform(p.w_o.data(), std::sqrt(3.0 / static_cast<double>(p.w_o.cols())), rng);
    fill_uniform(p.w_q.data(), std::sqrt(3.0 / static_cast<double>(embed)), rng);
    fill_uniform(p.w_k.data(), std::sqrt(3.0 / static_cast<double>(embed)), rng);
    fill_uniform(p.w_v.data(), std::sqrt(3.0 / static_cast<double>(embed)), rng);
    return p;
  }

  void collect(std::vector<ParamRef>& out, const std::string& prefix) {
    text_pool.collect(out, prefix + ".text_pool");
    refseg::collect(out, prefix + ".w_o", w_o);
    refseg::collect(out, prefix + ".w_q", w_q);
    refseg::collect(out, prefix + ".w_k", w_k);
    refseg::collect(out, prefix + ".w_v", w_v);
  }
};

struct TsrmTape {
  std::vector<Vector> objects;   // f_V rows
  Vector text;                   // f_t
  std::vector<Vector> fused;     // f_o rows
  std::vector<Vector> queries;
  std::vector<Vector> keys;
  std::vector<Vector> values;
  std::vector<Vector> attention;  // row-stochastic
};

// F_o = f_V + softmax(f_q f_k^T / sqrt(d_k)) f_v with f_o = W_o [f_V ; f_t].
inline std::vector<Vector> tsrm_with_text(const std::vector<Vector>& objects, std::span<const double> text,
                                          const TsrmParams& params, TsrmTape* tape = nullptr) {
  require(!objects.empty(), "tsrm: no objects");
  const std::size_t n = objects.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.key_dim()));
  std::vector<Vector> fused(n), q(n), k(n), v(n), attn(n);
  for (std::size_t i = 0; i < n; ++i) {
    fused[i] = matvec(params.w_o, concat(objects[i], text));
    q[i] = matvec(params.w_q, objects[i]);
    k[i] = matvec(params.w_k, fused[i]);
    v[i] = matvec(params.w_v, fused[i]);
  }
  std::vector<Vector> out(n);
  Vector logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = dot(q[i], k[j]) * scale;
    attn[i] = softmax(logits);
    out[i] = objects[i];
    for (std::size_t j = 0; j < n; ++j) add_into(out[i], v[j], attn[i][j]);
    check_finite(out[i], "tsrm");
  }
  if (tape) {
    tape->objects = objects;
    tape->text.assign(text.begin(), text.end());
    tape->fused = std::move(fused);
    tape->queries = std::move(q);
    tape->keys = std::move(k);
    tape->values = std::move(v);
    tape->attention = std::move(attn);
  }
  return out;
}

struct TsrmInputGradients {
  std::vector<Vector> objects;
  Vector text;
};

inline TsrmInputGradients tsrm_backward(const TsrmParams& params, const TsrmTape& tape,
                                        const std::vector<Vector>& upstream, TsrmParams& grads) {
  const std::size_t n = tape.objects.size();
  const std::size_t embed = params.w_v.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.key_dim()));
  TsrmInputGradients g;
  g.objects = upstream;  // residual path
  g.text.assign(tape.text.size(), 0.0);

  std::vector<Vector> d_values(n, Vector(embed, 0.0));
  std::vector<Vector> d_keys(n, Vector(params.key_dim(), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    Vector d_attn(n);
    for (std::size_t j = 0; j < n; ++j) {
      d_attn[j] = dot(upstream[i], tape.values[j]);
      add_into(d_values[j], upstream[i], tape.attention[i][j]);
    }
    Vector d_logits = softmax_backward(tape.attention[i], d_attn);
    Vector d_query(params.key_dim(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      add_into(d_query, tape.keys[j], d_logits[j] * scale);
      add_into(d_keys[j], tape.queries[i], d_logits[j] * scale);
    }
    add_outer(grads.w_q, d_query, tape.objects[i]);
    add_into(g.objects[i], matvec_transposed(params.w_q, d_query));
  }
  for (std::size_t j = 0; j < n; ++j) {
    add_outer(grads.w_k, d_keys[j], tape.fused[j]);
    add_outer(grads.w_v, d_values[j], tape.fused[j]);
    Vector d_fused = matvec_transposed(params.w_k, d_keys[j]);
    add_into(d_fused, matvec_transposed(params.w_v, d_values[j]));
    const Vector input = concat(tape.objects[j], tape.text);
    add_outer(grads.w_o, d_fused, input);
    const Vector d_input = matvec_transposed(params.w_o, d_fused);
    for (std::size_t c = 0; c < embed; ++c) g.objects[j][c] += d_input[c];
    for (std::size_t c = 0; c < g.text.size(); ++c) g.text[c] += d_input[embed + c];
  }
  return g;
}

// Convenience form that also runs the dedicated text pooling over `hiddens`.
inline std::vector<Vector> tsrm(const std::vector<Vector>& objects, const std::vector<Vector>& hiddens,
                                const TsrmParams& params) {
  const Vector text = self_guided_pool(params.text_pool, hiddens);
  return tsrm_with_text(objects, text, params);
}

inline double match_score(std::span<const double> object, std::span<const double> language) {
  return cosine_similarity(object, language);
}

}  // namespace refseg

#endif  // REFSEG_OBJECT_EMBEDDING_HPP_
