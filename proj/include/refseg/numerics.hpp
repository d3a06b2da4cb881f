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

#ifndef REFSEG_NUMERICS_HPP_
#define REFSEG_NUMERICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace refseg {

// All library errors derive from this so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

inline void check_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(std::string(where) + ": non-finite value");
  }
}

// Row-major dense matrix. Shape is fixed at construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "Matrix: data size does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// y = M x
inline Vector matvec(const Matrix& m, std::span<const double> x) {
  require(m.cols() == x.size(), "matvec: dimension mismatch");
  Vector y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* w = m.data().data() + r * m.cols();
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += w[c] * x[c];
    y[r] = s;
  }
  return y;
}

// y = M^T x
inline Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
  require(m.rows() == x.size(), "matvec_transposed: dimension mismatch");
  Vector y(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* w = m.data().data() + r * m.cols();
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += w[c] * xr;
  }
  return y;
}

// m += a b^T
inline void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
  require(m.rows() == a.size() && m.cols() == b.size(), "add_outer: dimension mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* w = m.data().data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) w[c] += ar * b[c];
  }
}

inline void add_into(std::span<double> acc, std::span<const double> x, double scale = 1.0) {
  require(acc.size() == x.size(), "add_into: length mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * x[i];
}

inline Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Max-subtracted softmax.
inline Vector softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty input");
  check_finite(logits, "softmax");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

// Given y = softmax(x) and dL/dy, returns dL/dx.
inline Vector softmax_backward(std::span<const double> probs, std::span<const double> upstream) {
  require(probs.size() == upstream.size(), "softmax_backward: length mismatch");
  const double inner = dot(probs, upstream);
  Vector out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (upstream[i] - inner);
  return out;
}

inline Vector l2_normalize(std::span<const double> v) {
  check_finite(v, "l2_normalize");
  const double n = norm(v);
  if (!(n > 0.0)) throw Error("l2_normalize: zero vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

// Given y = x / |x| and dL/dy, returns dL/dx.
inline Vector l2_normalize_backward(std::span<const double> x, std::span<const double> upstream) {
  const double n = norm(x);
  require(n > 0.0, "l2_normalize_backward: zero vector");
  const double inner = dot(x, upstream) / (n * n);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (upstream[i] - x[i] * inner) / n;
  return out;
}

// Like l2_normalize, but maps the zero vector to itself.
inline Vector l2_normalize_or_zero(std::span<const double> v) {
  if (norm(v) == 0.0) return Vector(v.size(), 0.0);
  return l2_normalize(v);
}

// Zero gradient where the forward output was the zero vector.
inline Vector l2_normalize_or_zero_backward(std::span<const double> x, std::span<const double> upstream) {
  if (norm(x) == 0.0) return Vector(x.size(), 0.0);
  return l2_normalize_backward(x, upstream);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine_similarity: length mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw Error("cosine_similarity: zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// 0 when either side is the zero vector.
inline double cosine_or_zero(std::span<const double> a, std::span<const double> b) {
  if (norm(a) == 0.0 || norm(b) == 0.0) {
    require(a.size() == b.size(), "cosine_or_zero: length mismatch");
    return 0.0;
  }
  return cosine_similarity(a, b);
}

inline void fill_uniform(std::span<double> values, double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : values) v = dist(rng);
}

// ---------------------------------------------------------------------------
// Multi-layer perceptron: ReLU between layers, identity on the output.

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  // dims = {in, hidden..., out}
  static Mlp zeros(const std::vector<std::size_t>& dims) {
    require(dims.size() >= 2, "Mlp: need at least input and output dims");
    Mlp mlp;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      mlp.layers.push_back({Matrix(dims[i + 1], dims[i]), Vector(dims[i + 1], 0.0)});
    }
    return mlp;
  }

  // Uniform(+-sqrt(6/fan_in)) weights, zero bias.
  static Mlp random(const std::vector<std::size_t>& dims, Rng& rng) {
    Mlp mlp = zeros(dims);
    for (auto& layer : mlp.layers) {
      fill_uniform(layer.weight.data(), std::sqrt(6.0 / static_cast<double>(layer.weight.cols())), rng);
    }
    return mlp;
  }

  std::size_t input_dim() const { return layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.back().weight.rows(); }

  void validate() const {
    require(!layers.empty(), "Mlp: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      require(layers[i].bias.size() == layers[i].weight.rows(), "Mlp: bias/weight mismatch");
      if (i + 1 < layers.size()) {
        require(layers[i].weight.rows() == layers[i + 1].weight.cols(), "Mlp: layer dims do not chain");
      }
    }
  }

  bool operator==(const Mlp&) const = default;
};

// Forward cache: the input of every layer and its pre-activation.
struct MlpTape {
  std::vector<Vector> inputs;
  std::vector<Vector> pre_activations;
};

inline Vector mlp_forward(const Mlp& mlp, std::span<const double> x, MlpTape* tape = nullptr) {
  require(!mlp.layers.empty() && x.size() == mlp.input_dim(), "mlp_forward: dimension mismatch");
  if (tape) {
    tape->inputs.clear();
    tape->pre_activations.clear();
  }
  Vector h(x.begin(), x.end());
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const DenseLayer& layer = mlp.layers[l];
    Vector z = matvec(layer.weight, h);
    add_into(z, layer.bias);
    if (tape) {
      tape->inputs.push_back(h);
      tape->pre_activations.push_back(z);
    }
    if (l + 1 < mlp.layers.size()) {
      for (double& v : z) v = relu(v);
    }
    h = std::move(z);
  }
  check_finite(h, "mlp_forward");
  return h;
}

// Accumulates parameter gradients into `grads` (same shape as `mlp`) and
// returns the gradient with respect to the input.
inline Vector mlp_backward(const Mlp& mlp, const MlpTape& tape, std::span<const double> upstream,
                           Mlp& grads) {
  const std::size_t n = mlp.layers.size();
  require(tape.inputs.size() == n && tape.pre_activations.size() == n,
          "mlp_backward: tape does not match network depth");
  require(grads.layers.size() == n, "mlp_backward: gradient shape mismatch");
  for (std::size_t l = 0; l < n; ++l) {
    require(tape.inputs[l].size() == mlp.layers[l].weight.cols() &&
                tape.pre_activations[l].size() == mlp.layers[l].weight.rows(),
            "mlp_backward: stale or mismatched tape");
  }
  require(upstream.size() == mlp.output_dim(), "mlp_backward: upstream dimension mismatch");

  Vector delta(upstream.begin(), upstream.end());
  for (std::size_t l = n; l-- > 0;) {
    if (l + 1 < n) {
      const Vector& z = tape.pre_activations[l];
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (z[i] <= 0.0) delta[i] = 0.0;
      }
    }
    add_outer(grads.layers[l].weight, delta, tape.inputs[l]);
    add_into(grads.layers[l].bias, delta);
    delta = matvec_transposed(mlp.layers[l].weight, delta);
  }
  return delta;
}

struct MlpGradients {
  Mlp params;
  Vector input;
};

inline MlpGradients mlp_backward(const Mlp& mlp, const MlpTape& tape, std::span<const double> upstream) {
  MlpGradients out;
  out.params = mlp;
  for (auto& layer : out.params.layers) {
    std::fill(layer.weight.data().begin(), layer.weight.data().end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  out.input = mlp_backward(mlp, tape, upstream, out.params);
  return out;
}

// ---------------------------------------------------------------------------
// Flat views over parameter tensors, used by the optimizer, checkpointing and
// gradient checks.

struct ParamRef {
  std::string name;
  std::span<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

inline void collect(std::vector<ParamRef>& out, const std::string& name, Matrix& m) {
  out.push_back({name, m.data(), m.rows(), m.cols()});
}

inline void collect(std::vector<ParamRef>& out, const std::string& name, Vector& v) {
  out.push_back({name, v, v.size(), 1});
}

inline void collect(std::vector<ParamRef>& out, const std::string& name, Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    collect(out, name + ".layer" + std::to_string(l) + ".weight", mlp.layers[l].weight);
    collect(out, name + ".layer" + std::to_string(l) + ".bias", mlp.layers[l].bias);
  }
}

}  // namespace refseg

#endif  // REFSEG_NUMERICS_HPP_
