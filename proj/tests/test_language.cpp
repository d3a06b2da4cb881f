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

#include <cmath>

#include "gradcheck.hpp"
#include "refseg/language.hpp"

namespace refseg {
namespace {

const Vocabulary& vocab() {
  static const Vocabulary v({"a", "red", "ball", "the", "left", "right", "dog", "runs", "of", "box"});
  return v;
}

std::vector<std::uint32_t> ids(const TokenSequence& s) { return {s.ids.begin(), s.ids.begin() + s.length}; }

TEST(Tokenize, Basic) {
  const TokenSequence s = tokenize("A red ball.", vocab());
  EXPECT_EQ(s.length, 3u);
  EXPECT_EQ(ids(s), (std::vector<std::uint32_t>{vocab().id("a"), vocab().id("red"), vocab().id("ball")}));
  EXPECT_EQ(s.ids.size(), kMaxTokens);
  for (std::size_t i = 3; i < kMaxTokens; ++i) EXPECT_EQ(s.ids[i], Vocabulary::kPad);
}

TEST(Tokenize, Truncates) {
  std::string text;
  for (int i = 0; i < 25; ++i) text += (i % 2 ? "red " : "ball ");
  const TokenSequence s = tokenize(text, vocab());
  EXPECT_EQ(s.length, 20u);
  EXPECT_EQ(s.ids[19], vocab().id("red"));
}

TEST(Tokenize, UnknownWord) {
  const TokenSequence s = tokenize("the purple ball", vocab());
  EXPECT_EQ(s.ids[1], Vocabulary::kUnk);
}

TEST(Tokenize, EmptyThrows) {
  EXPECT_THROW(tokenize("", vocab()), Error);
  EXPECT_THROW(tokenize("  \t ", vocab()), Error);
}

TEST(Vocabulary, SerializedRoundTrip) {
  const Vocabulary v = Vocabulary::from_tokens(vocab().tokens());
  EXPECT_EQ(v, vocab());
  EXPECT_EQ(v.id("dog"), vocab().id("dog"));
  EXPECT_THROW(Vocabulary::from_tokens({"x"}), Error);
}

TEST(SwapDirection, Examples) {
  const auto swap = [](const std::string& text) { return swap_direction_tokens(tokenize(text, vocab()), vocab()); };
  EXPECT_EQ(swap("the left dog"), tokenize("the right dog", vocab()));
  EXPECT_EQ(swap("the dog runs"), tokenize("the dog runs", vocab()));
  EXPECT_EQ(swap("left of the right box"), tokenize("right of the left box", vocab()));
  const TokenSequence s = tokenize("left of the right box", vocab());
  EXPECT_EQ(swap_direction_tokens(swap_direction_tokens(s, vocab()), vocab()), s);
}

EncoderParams fixed_encoder() {
  EncoderParams p = EncoderParams::zeros(4, 2, 2);
  p.embedding = Matrix(4, 2, {0.0, 0.0, 0.1, -0.1, 0.3, 0.2, -0.4, 0.5});
  p.forward.w_in = Matrix(2, 2, {0.6, -0.2, 0.1, 0.9});
  p.forward.w_rec = Matrix(2, 2, {0.3, 0.1, -0.5, 0.2});
  p.forward.bias = {0.05, -0.05};
  p.backward.w_in = Matrix(2, 2, {-0.3, 0.7, 0.4, 0.4});
  p.backward.w_rec = Matrix(2, 2, {0.2, -0.6, 0.1, 0.3});
  p.backward.bias = {0.0, 0.1};
  return p;
}

TokenSequence sequence(std::initializer_list<std::uint32_t> list) {
  TokenSequence s;
  for (auto id : list) s.ids[s.length++] = id;
  return s;
}

TEST(EncodeSequence, SingleToken) {
  const EncoderParams p = fixed_encoder();
  const auto h = encode_sequence(p, sequence({2}));
  ASSERT_EQ(h.size(), 1u);
  ASSERT_EQ(h[0].size(), 4u);
  const double e0 = 0.3, e1 = 0.2;
  EXPECT_NEAR(h[0][0], std::tanh(0.6 * e0 - 0.2 * e1 + 0.05), 1e-15);
  EXPECT_NEAR(h[0][1], std::tanh(0.1 * e0 + 0.9 * e1 - 0.05), 1e-15);
  EXPECT_NEAR(h[0][2], std::tanh(-0.3 * e0 + 0.7 * e1), 1e-15);
  EXPECT_NEAR(h[0][3], std::tanh(0.4 * e0 + 0.4 * e1 + 0.1), 1e-15);
}

TEST(EncodeSequence, ZeroRecurrence) {
  EncoderParams p = fixed_encoder();
  p.forward.w_rec = Matrix(2, 2);
  p.backward.w_rec = Matrix(2, 2);
  const auto h = encode_sequence(p, sequence({2, 3, 2}));
  EXPECT_EQ(h[0], h[2]);
  EXPECT_EQ(h[0], encode_sequence(p, sequence({2}))[0]);
}

TEST(EncodeSequence, ThreeTokens) {
  const auto h = encode_sequence(fixed_encoder(), sequence({2, 3, 1}));
  const double expected[] = {0.1877462058682854,   0.15864850429749894, 0.029159303219731335, 0.36681164387920684,
                             -0.2144309705548107,  0.2893498834666417,  0.37158918051938694,  0.15858377381244523,
                             0.09432445617351509,  0.035071072442616105, -0.0996679946249558, 0.09966799462495582};
  ASSERT_EQ(h.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(h[t][k], expected[t * 4 + k], 1e-15);
}

TEST(EncodeSequence, IgnoresPadContent) {
  TokenSequence a = sequence({2, 3});
  TokenSequence b = a;
  b.ids[5] = 3;
  EXPECT_EQ(encode_sequence(fixed_encoder(), a), encode_sequence(fixed_encoder(), b));
}

TEST(SelfGuidedPool, SingleHidden) {
  Rng rng(1);
  const AttentionPool pool = AttentionPool::random(3, {4, 2}, rng);
  const Vector h{0.2, -0.4, 0.9};
  PoolTape tape;
  const Vector out = self_guided_pool(pool, {h}, &tape);
  EXPECT_EQ(tape.weights, (Vector{1.0}));
  EXPECT_EQ(out, mlp_forward(pool.mlp, h));
}

TEST(SelfGuidedPool, ZeroScorerIsMean) {
  Rng rng(2);
  AttentionPool pool = AttentionPool::random(2, {3}, rng);
  std::fill(pool.scorer.begin(), pool.scorer.end(), 0.0);
  const std::vector<Vector> h{{1.0, 0.0}, {0.0, 2.0}, {2.0, 1.0}};
  PoolTape tape;
  const Vector out = self_guided_pool(pool, h, &tape);
  for (double a : tape.weights) EXPECT_NEAR(a, 1.0 / 3.0, 1e-15);
  const Vector expected = mlp_forward(pool.mlp, Vector{1.0, 1.0});
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-15);
}

TEST(SelfGuidedPool, FourHiddens) {
  AttentionPool pool = AttentionPool::zeros(3, {2});
  pool.scorer = {0.5, -1.0, 0.25};
  pool.scorer_bias = {0.1};
  const std::vector<Vector> h{{0.2, -0.1, 0.5}, {0.7, 0.3, -0.4}, {-0.6, 0.8, 0.1}, {0.0, 0.4, 0.9}};
  PoolTape tape;
  self_guided_pool(pool, h, &tape);
  const double expected[] = {0.39363617799797984, 0.2705419248822663, 0.09706948639187958, 0.23875241072787431};
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(tape.weights[i], expected[i], 1e-15);
    total += tape.weights[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

// Loss = <c, pool(encode(seq))>: gradients for every encoder and pool tensor.
TEST(LanguageGradients, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EncoderParams enc = EncoderParams::random(6, 3, 4, rng);
    fill_uniform(enc.forward.bias, 0.3, rng);
    fill_uniform(enc.backward.bias, 0.3, rng);
    AttentionPool pool = AttentionPool::random(8, {5, 3}, rng);
    Vector c(3);
    fill_uniform(c, 1.0, rng);
    const TokenSequence seq = sequence({2, 5, 3, 2});
    auto loss = [&] { return dot(c, self_guided_pool(pool, encode_sequence(enc, seq))); };

    EncoderParams g_enc = EncoderParams::zeros(6, 3, 4);
    AttentionPool g_pool = AttentionPool::zeros(8, {5, 3});
    EncoderTape et;
    PoolTape pt;
    self_guided_pool(pool, encode_sequence(enc, seq, &et), &pt);
    encode_sequence_backward(enc, et, self_guided_pool_backward(pool, pt, c, g_pool), g_enc);

    std::vector<ParamRef> params, grads;
    enc.collect(params, "encoder");
    pool.collect(params, "pool");
    g_enc.collect(grads, "encoder");
    g_pool.collect(grads, "pool");
    const auto r = testing::check_gradients(params, grads, loss, 0, rng);
    EXPECT_EQ(r.passed, r.probed) << "seed " << seed << " worst " << r.worst << " at " << r.worst_name;
  }
}

}  // namespace
}  // namespace refseg
