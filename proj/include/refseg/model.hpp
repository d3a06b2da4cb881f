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

#ifndef REFSEG_MODEL_HPP_
#define REFSEG_MODEL_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "refseg/language.hpp"
#include "refseg/masks.hpp"
#include "refseg/numerics.hpp"
#include "refseg/object_embedding.hpp"

namespace refseg {

struct ModelConfig {
  std::size_t vocab_size = 2;
  std::size_t word_dim = 32;
  std::size_t hidden_dim = 32;  // per direction
  std::size_t feature_dim = 32;
  std::size_t kernel = 3;
  std::size_t embed_dim = 32;
  std::size_t text_dim = 32;
  std::size_t mlp_layers = 2;
  bool use_prm = true;
  bool use_tsrm = true;
  double tau = 0.1;

  // {in, embed, ..., embed} with `mlp_layers` layers.
  std::vector<std::size_t> mlp_dims(std::size_t in) const {
    require(mlp_layers >= 1, "ModelConfig: mlp_layers must be >= 1");
    std::vector<std::size_t> dims{in};
    for (std::size_t i = 0; i < mlp_layers; ++i) dims.push_back(embed_dim);
    return dims;
  }
};

// Every trainable tensor of the model. A zero-initialized instance of the same
// shape doubles as the gradient accumulator.
struct ModelParams {
  BackboneParams backbone;
  Mlp object_mlp;
  Matrix w_p;  // embed x 10
  EncoderParams encoder;
  AttentionPool language_pool;
  TsrmParams tsrm;

  static ModelParams zeros(const ModelConfig& cfg) {
    ModelParams p;
    p.backbone = BackboneParams::zeros(cfg.feature_dim, cfg.kernel);
    p.object_mlp = Mlp::zeros(cfg.mlp_dims(cfg.feature_dim));
    p.w_p = Matrix(cfg.embed_dim, PositionalDescriptor::kDim);
    p.encoder = EncoderParams::zeros(cfg.vocab_size, cfg.word_dim, cfg.hidden_dim);
    auto pool_dims = cfg.mlp_dims(0);
    pool_dims.erase(pool_dims.begin());
    p.language_pool = AttentionPool::zeros(2 * cfg.hidden_dim, pool_dims);
    p.tsrm = TsrmParams::zeros(2 * cfg.hidden_dim, cfg.embed_dim, cfg.text_dim, cfg.embed_dim);
    return p;
  }

  static ModelParams random(const ModelConfig& cfg, Rng& rng) {
    ModelParams p;
    p.backbone = BackboneParams::random(cfg.feature_dim, rng, cfg.kernel);
    p.object_mlp = Mlp::random(cfg.mlp_dims(cfg.feature_dim), rng);
    p.w_p = Matrix(cfg.embed_dim, PositionalDescriptor::kDim);
    fill_uniform(p.w_p.data(), std::sqrt(3.0 / PositionalDescriptor::kDim), rng);
    p.encoder = EncoderParams::random(cfg.vocab_size, cfg.word_dim, cfg.hidden_dim, rng);
    auto pool_dims = cfg.mlp_dims(0);
    pool_dims.erase(pool_dims.begin());
    p.language_pool = AttentionPool::random(2 * cfg.hidden_dim, pool_dims, rng);
    p.tsrm = TsrmParams::random(2 * cfg.hidden_dim, cfg.embed_dim, cfg.text_dim, cfg.embed_dim, rng);
    return p;
  }

  std::vector<ParamRef> refs() {
    std::vector<ParamRef> out;
    backbone.collect(out, "backbone");
    collect(out, "object_mlp", object_mlp);
    collect(out, "w_p", w_p);
    encoder.collect(out, "encoder");
    language_pool.collect(out, "language_pool");
    tsrm.collect(out, "tsrm");
    return out;
  }

  std::size_t count() {
    std::size_t n = 0;
    for (const auto& r : refs()) n += r.values.size();
    return n;
  }
};

inline void zero(ModelParams& p) {
  for (auto& r : p.refs()) std::fill(r.values.begin(), r.values.end(), 0.0);
}

// acc += scale * g, tensor by tensor.
inline void accumulate(ModelParams& acc, ModelParams& g, double scale = 1.0) {
  auto a = acc.refs();
  auto b = g.refs();
  require(a.size() == b.size(), "accumulate: parameter layout mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) add_into(a[i].values, b[i].values, scale);
}

// ---------------------------------------------------------------------------
// Forward/backward over one query.

struct LanguageTape {
  EncoderTape encoder;
  PoolTape language_pool;
  PoolTape text_pool;
  Vector language_raw;
};

struct LanguageOutput {
  Vector language;  // L2-normalized linguistic embedding
  Vector text;      // relation-aware text feature, empty without the relation module
  std::vector<Vector> hiddens;
};

inline LanguageOutput encode_language(const ModelParams& params, const ModelConfig& cfg, const TokenSequence& tokens,
                                      LanguageTape* tape = nullptr) {
  LanguageOutput out;
  out.hiddens = encode_sequence(params.encoder, tokens, tape ? &tape->encoder : nullptr);
  Vector raw = self_guided_pool(params.language_pool, out.hiddens, tape ? &tape->language_pool : nullptr);
  out.language = l2_normalize_or_zero(raw);
  if (tape) tape->language_raw = std::move(raw);
  if (cfg.use_tsrm) out.text = self_guided_pool(params.tsrm.text_pool, out.hiddens, tape ? &tape->text_pool : nullptr);
  return out;
}

struct FrameTape {
  std::vector<PooledFeatures> pooled;
  std::vector<MlpTape> mlp;
  std::vector<PositionalDescriptor> descriptors;
  TsrmTape tsrm;
  std::vector<Vector> relational_raw;
};

struct FrameOutput {
  std::vector<ObjectCandidate> candidates;
  std::vector<Vector> normalized;  // L2-normalized relational embeddings
};

inline FrameOutput embed_frame(const ModelParams& params, const ModelConfig& cfg, const Frame& frame,
                               const std::vector<BinaryMask>& masks, std::span<const double> text,
                               FrameTape* tape = nullptr) {
  require(!masks.empty(), "embed_frame: no candidates");
  const std::size_t n = masks.size();
  FrameOutput out;
  out.candidates.resize(n);
  const auto descriptors = positional_descriptors(masks);
  std::vector<Vector> spatial(n);
  if (tape) {
    tape->pooled.resize(n);
    tape->mlp.resize(n);
    tape->descriptors = descriptors;
  }
  for (std::size_t i = 0; i < n; ++i) {
    PooledFeatures pooled = masked_max_from_frame(frame, masks[i], params.backbone);
    Vector v = mlp_forward(params.object_mlp, pooled.values, tape ? &tape->mlp[i] : nullptr);
    spatial[i] = cfg.use_prm ? apply_prm(v, descriptors[i], params.w_p) : v;
    out.candidates[i].mask = masks[i];
    out.candidates[i].descriptor = descriptors[i];
    out.candidates[i].individual = std::move(v);
    out.candidates[i].spatial = spatial[i];
    if (tape) tape->pooled[i] = std::move(pooled);
  }
  std::vector<Vector> relational =
      cfg.use_tsrm ? tsrm_with_text(spatial, text, params.tsrm, tape ? &tape->tsrm : nullptr) : spatial;
  out.normalized.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.normalized[i] = l2_normalize_or_zero(relational[i]);
    out.candidates[i].relational = relational[i];
  }
  if (tape) tape->relational_raw = std::move(relational);
  return out;
}

// Gradients w.r.t. the frame's inputs that live outside the frame.
struct FrameBackwardResult {
  Vector text;
};

inline FrameBackwardResult embed_frame_backward(const ModelParams& params, const ModelConfig& cfg, const Frame& frame,
                                                const FrameTape& tape, const std::vector<Vector>& d_normalized,
                                                ModelParams& grads) {
  const std::size_t n = tape.relational_raw.size();
  std::vector<Vector> d_relational(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_relational[i] = l2_normalize_or_zero_backward(tape.relational_raw[i], d_normalized[i]);
  }
  FrameBackwardResult result;
  std::vector<Vector> d_spatial;
  if (cfg.use_tsrm) {
    TsrmInputGradients g = tsrm_backward(params.tsrm, tape.tsrm, d_relational, grads.tsrm);
    d_spatial = std::move(g.objects);
    result.text = std::move(g.text);
  } else {
    d_spatial = std::move(d_relational);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.use_prm) apply_prm_backward(tape.descriptors[i], d_spatial[i], grads.w_p);
    const Vector d_pooled = mlp_backward(params.object_mlp, tape.mlp[i], d_spatial[i], grads.object_mlp);
    masked_max_backward(frame, tape.pooled[i], d_pooled, grads.backbone);
  }
  return result;
}

inline void encode_language_backward(const ModelParams& params, const ModelConfig& cfg, const LanguageTape& tape,
                                     std::span<const double> d_language, std::span<const double> d_text,
                                     ModelParams& grads) {
  const Vector d_raw = l2_normalize_or_zero_backward(tape.language_raw, d_language);
  std::vector<Vector> d_hidden =
      self_guided_pool_backward(params.language_pool, tape.language_pool, d_raw, grads.language_pool);
  if (cfg.use_tsrm && !d_text.empty()) {
    const auto d_hidden_text = self_guided_pool_backward(params.tsrm.text_pool, tape.text_pool, d_text,
                                                         grads.tsrm.text_pool);
    for (std::size_t i = 0; i < d_hidden.size(); ++i) add_into(d_hidden[i], d_hidden_text[i]);
  }
  encode_sequence_backward(params.encoder, tape.encoder, d_hidden, grads.encoder);
}

}  // namespace refseg

#endif  // REFSEG_MODEL_HPP_
