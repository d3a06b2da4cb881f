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

#ifndef REFSEG_LANGUAGE_HPP_
#define REFSEG_LANGUAGE_HPP_

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refseg/numerics.hpp"

namespace refseg {

inline constexpr std::size_t kMaxTokens = 20;

class Vocabulary {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} { reindex(); }

  // Reserved entries first, then `words` in the given order (duplicates skipped).
  explicit Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) add(w);
  }

  std::uint32_t add(const std::string& word) {
    if (auto it = index_.find(word); it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(tokens_.size());
    tokens_.push_back(word);
    index_.emplace(word, id);
    return id;
  }

  std::uint32_t id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

  const std::string& token(std::uint32_t id) const {
    require(id < tokens_.size(), "Vocabulary: id out of range");
    return tokens_[id];
  }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Rebuild from a serialized token list (including the reserved entries).
  static Vocabulary from_tokens(std::vector<std::string> tokens) {
    require(tokens.size() >= 2 && tokens[0] == "<pad>" && tokens[1] == "<unk>",
            "Vocabulary: serialized token list lacks reserved entries");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.reindex();
    require(v.index_.size() == v.tokens_.size(), "Vocabulary: duplicate tokens");
    return v;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void reindex() {
    index_.clear();
    for (std::uint32_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  std::vector<std::string> tokens_;
  std::map<std::string, std::uint32_t> index_;
};

// Fixed-length token ids; positions >= length hold kPad.
struct TokenSequence {
  std::vector<std::uint32_t> ids = std::vector<std::uint32_t>(kMaxTokens, Vocabulary::kPad);
  std::size_t length = 0;

  std::span<const std::uint32_t> active() const { return {ids.data(), length}; }
  bool operator==(const TokenSequence&) const = default;
};

// Lowercased words split on whitespace and punctuation.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  const auto words = split_words(text);
  if (words.empty()) throw Error("tokenize: empty text");
  TokenSequence seq;
  seq.length = std::min(words.size(), kMaxTokens);
  for (std::size_t i = 0; i < seq.length; ++i) seq.ids[i] = vocab.id(words[i]);
  return seq;
}

using SwapTable = std::vector<std::pair<std::string, std::string>>;

inline SwapTable default_swap_table() { return {{"left", "right"}}; }

inline TokenSequence swap_direction_tokens(const TokenSequence& seq, const Vocabulary& vocab,
                                           const SwapTable& table = default_swap_table()) {
  TokenSequence out = seq;
  for (const auto& [a, b] : table) {
    if (!vocab.contains(a) || !vocab.contains(b)) continue;
    const auto ia = vocab.id(a);
    const auto ib = vocab.id(b);
    for (std::size_t i = 0; i < out.length; ++i) {
      if (seq.ids[i] == ia) {
        out.ids[i] = ib;
      } else if (seq.ids[i] == ib) {
        out.ids[i] = ia;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bidirectional Elman encoder.

struct RnnCell {
  Matrix w_in;   // hidden x word_dim
  Matrix w_rec;  // hidden x hidden
  Vector bias;   // hidden
};

struct EncoderParams {
  Matrix embedding;  // vocab x word_dim
  RnnCell forward;
  RnnCell backward;

  std::size_t hidden_dim() const { return forward.w_rec.rows(); }
  std::size_t output_dim() const { return 2 * hidden_dim(); }

  static EncoderParams zeros(std::size_t vocab, std::size_t word_dim, std::size_t hidden) {
    EncoderParams p;
    p.embedding = Matrix(vocab, word_dim);
    for (RnnCell* c : {&p.forward, &p.backward}) {
      c->w_in = Matrix(hidden, word_dim);
      c->w_rec = Matrix(hidden, hidden);
      c->bias = Vector(hidden, 0.0);
    }
    return p;
  }

  static EncoderParams random(std::size_t vocab, std::size_t word_dim, std::size_t hidden, Rng& rng) {
    EncoderParams p = zeros(vocab, word_dim, hidden);
    fill_uniform(p.embedding.data(), 0.1, rng);
    for (RnnCell* c : {&p.forward, &p.backward}) {
      fill_uniform(c->w_in.data(), 1.0 / std::sqrt(static_cast<double>(word_dim)), rng);
      fill_uniform(c->w_rec.data(), 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    }
    return p;
  }

  void collect(std::vector<ParamRef>& out, const std::string& prefix) {
    refseg::collect(out, prefix + ".embedding", embedding);
    refseg::collect(out, prefix + ".forward.w_in", forward.w_in);
    refseg::collect(out, prefix + ".forward.w_rec", forward.w_rec);
    refseg::collect(out, prefix + ".forward.bias", forward.bias);
    refseg::collect(out, prefix + ".backward.w_in", backward.w_in);
    refseg::collect(out, prefix + ".backward.w_rec", backward.w_rec);
    refseg::collect(out, prefix + ".backward.bias", backward.bias);
  }
};

struct EncoderTape {
  std::vector<std::uint32_t> ids;
  std::vector<Vector> forward_states;
  std::vector<Vector> backward_states;
};

// h_i = [forward_i ; backward_i] for the first `length` tokens only.
inline std::vector<Vector> encode_sequence(const EncoderParams& params, const TokenSequence& seq,
                                           EncoderTape* tape = nullptr) {
  const std::size_t n = seq.length;
  require(n >= 1 && n <= kMaxTokens, "encode_sequence: invalid sequence length");
  const std::size_t hid = params.hidden_dim();
  for (std::size_t i = 0; i < n; ++i) {
    require(seq.ids[i] < params.embedding.rows(), "encode_sequence: token id outside vocabulary");
  }
  auto step = [&](const RnnCell& cell, std::uint32_t id, const Vector& prev) {
    Vector z = matvec(cell.w_in, params.embedding.row(id));
    add_into(z, matvec(cell.w_rec, prev));
    add_into(z, cell.bias);
    for (double& v : z) v = std::tanh(v);
    return z;
  };

  std::vector<Vector> fwd(n), bwd(n);
  Vector state(hid, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    state = step(params.forward, seq.ids[t], state);
    fwd[t] = state;
  }
  state.assign(hid, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    state = step(params.backward, seq.ids[t], state);
    bwd[t] = state;
  }
  std::vector<Vector> hiddens(n);
  for (std::size_t t = 0; t < n; ++t) hiddens[t] = concat(fwd[t], bwd[t]);
  if (tape) {
    tape->ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(n));
    tape->forward_states = std::move(fwd);
    tape->backward_states = std::move(bwd);
  }
  return hiddens;
}

// Backpropagation through time; accumulates into `grads`.
inline void encode_sequence_backward(const EncoderParams& params, const EncoderTape& tape,
                                     const std::vector<Vector>& upstream, EncoderParams& grads) {
  const std::size_t n = tape.ids.size();
  const std::size_t hid = params.hidden_dim();
  require(upstream.size() == n && tape.forward_states.size() == n, "encode_sequence_backward: tape mismatch");

  auto cell_step = [&](const RnnCell& cell, RnnCell& g, std::size_t t, const Vector& state,
                       const Vector* prev, const Vector& grad_state) {
    Vector dz(hid);
    for (std::size_t i = 0; i < hid; ++i) dz[i] = grad_state[i] * (1.0 - state[i] * state[i]);
    const auto id = tape.ids[t];
    add_outer(g.w_in, dz, params.embedding.row(id));
    if (prev) add_outer(g.w_rec, dz, *prev);
    add_into(g.bias, dz);
    add_into(grads.embedding.row(id), matvec_transposed(cell.w_in, dz));
    return matvec_transposed(cell.w_rec, dz);
  };

  Vector carry(hid, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    Vector g(upstream[t].begin(), upstream[t].begin() + static_cast<std::ptrdiff_t>(hid));
    add_into(g, carry);
    const Vector* prev = t > 0 ? &tape.forward_states[t - 1] : nullptr;
    carry = cell_step(params.forward, grads.forward, t, tape.forward_states[t], prev, g);
  }
  carry.assign(hid, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    Vector g(upstream[t].begin() + static_cast<std::ptrdiff_t>(hid), upstream[t].end());
    add_into(g, carry);
    const Vector* prev = t + 1 < n ? &tape.backward_states[t + 1] : nullptr;
    carry = cell_step(params.backward, grads.backward, t, tape.backward_states[t], prev, g);
  }
}

// ---------------------------------------------------------------------------
// Self-guided attention pooling: alpha = softmax(fc(h_i)), out = MLP(sum alpha_i h_i).

struct AttentionPool {
  Vector scorer;                  // fc weight over a hidden state
  Vector scorer_bias = Vector(1, 0.0);
  Mlp mlp;

  static AttentionPool zeros(std::size_t in_dim, const std::vector<std::size_t>& mlp_dims) {
    AttentionPool p;
    p.scorer = Vector(in_dim, 0.0);
    std::vector<std::size_t> dims{in_dim};
    dims.insert(dims.end(), mlp_dims.begin(), mlp_dims.end());
    p.mlp = Mlp::zeros(dims);
    return p;
  }

  static AttentionPool random(std::size_t in_dim, const std::vector<std::size_t>& mlp_dims, Rng& rng) {
    AttentionPool p = zeros(in_dim, mlp_dims);
    fill_uniform(p.scorer, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
    std::vector<std::size_t> dims{in_dim};
    dims.insert(dims.end(), mlp_dims.begin(), mlp_dims.end());
    p.mlp = Mlp::random(dims, rng);
    return p;
  }

  void collect(std::vector<ParamRef>& out, const std::string& prefix) {
    refseg::collect(out, prefix + ".scorer", scorer);
    refseg::collect(out, prefix + ".scorer_bias", scorer_bias);
    refseg::collect(out, prefix + ".mlp", mlp);
  }
};

struct PoolTape {
  std::vector<Vector> hiddens;
  Vector weights;  // alpha
  MlpTape mlp;
};

inline Vector self_guided_pool(const AttentionPool& pool, const std::vector<Vector>& hiddens,
                               PoolTape* tape = nullptr) {
  require(!hiddens.empty(), "self_guided_pool: no hidden states");
  Vector scores(hiddens.size());
  for (std::size_t i = 0; i < hiddens.size(); ++i) {
    scores[i] = dot(pool.scorer, hiddens[i]) + pool.scorer_bias[0];
  }
  Vector alpha = softmax(scores);
  Vector pooled(hiddens[0].size(), 0.0);
  for (std::size_t i = 0; i < hiddens.size(); ++i) add_into(pooled, hiddens[i], alpha[i]);
  Vector out = mlp_forward(pool.mlp, pooled, tape ? &tape->mlp : nullptr);
  if (tape) {
    tape->hiddens = hiddens;
    tape->weights = std::move(alpha);
  }
  return out;
}

// Returns dL/dh_i and accumulates parameter gradients into `grads`.
inline std::vector<Vector> self_guided_pool_backward(const AttentionPool& pool, const PoolTape& tape,
                                                     std::span<const double> upstream, AttentionPool& grads) {
  const std::size_t n = tape.hiddens.size();
  const Vector d_pooled = mlp_backward(pool.mlp, tape.mlp, upstream, grads.mlp);
  std::vector<Vector> d_hidden(n);
  Vector d_alpha(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_alpha[i] = dot(d_pooled, tape.hiddens[i]);
    d_hidden[i] = d_pooled;
    for (double& v : d_hidden[i]) v *= tape.weights[i];
  }
  const Vector d_scores = softmax_backward(tape.weights, d_alpha);
  for (std::size_t i = 0; i < n; ++i) {
    add_into(grads.scorer, tape.hiddens[i], d_scores[i]);
    grads.scorer_bias[0] += d_scores[i];
    add_into(d_hidden[i], pool.scorer, d_scores[i]);
  }
  return d_hidden;
}

}  // namespace refseg

#endif  // REFSEG_LANGUAGE_HPP_
