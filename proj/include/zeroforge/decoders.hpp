// Copyright 2026 The zeroforge Authors
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

#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zeroforge/constellation.hpp"
#include "zeroforge/errors.hpp"
#include "zeroforge/poly.hpp"
#include "zeroforge/random.hpp"

namespace zeroforge {

// ---------------------------------------------------------------------------
// Direct zero testing

// Continuous decision variable for zero pair k:
//   |Y(R e^{j theta_k})| - R^{L_t - 1} |Y(R^{-1} e^{j theta_k})|.
// Negative values favour the outer zero (bit 1).
inline double dizet_tau(const ComplexPoly& y, const Constellation& c, int k,
                        int lt) {
  if (k < 0 || k >= c.k()) {
    throw InvalidArgument("dizet_tau: zero index " + std::to_string(k) +
                          " out of range");
  }
  if (lt != y.degree() + 1) {
    throw InvalidArgument("dizet_tau: L_t must equal deg(y) + 1");
  }
  const double r = c.radius();
  return std::abs(eval_poly(y, c.outer_zero(k))) -
         std::pow(r, lt - 1) * std::abs(eval_poly(y, c.inner_zero(k)));
}

inline BitMessage dizet_decode(const ComplexPoly& y, const Constellation& c,
                               int lt) {
  BitMessage b(c.k());
  for (int k = 0; k < c.k(); ++k) b[k] = dizet_tau(y, c, k, lt) < 0.0 ? 1 : 0;
  return b;
}

inline BitMessage dizet_decode(const ComplexPoly& y, const Constellation& c) {
  return dizet_decode(y, c, y.degree() + 1);
}

// ---------------------------------------------------------------------------
// Root features

// [Re z0, Im z0, Re z1, Im z1, ...] in the order given.
inline std::vector<double> real_bijection(std::span<const cplx> zeros) {
  std::vector<double> out(2 * zeros.size());
  for (std::size_t i = 0; i < zeros.size(); ++i) {
    out[2 * i] = zeros[i].real();
    out[2 * i + 1] = zeros[i].imag();
  }
  return out;
}

inline ZeroPattern real_bijection_inverse(std::span<const double> x) {
  if (x.size() % 2 != 0) {
    throw InvalidArgument("real_bijection_inverse: odd input length");
  }
  ZeroPattern z(x.size() / 2);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = {x[2 * i], x[2 * i + 1]};
  return z;
}

// ---------------------------------------------------------------------------
// MLP decoder: dense(2K -> L) + LeakyReLU + dropout, dense(L -> L) + LeakyReLU
// + dropout, dense(L -> K).

template <typename Scalar>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix w;  // out x in
  Vector b;

  bool operator==(const DenseLayer& o) const {
    return w.rows() == o.w.rows() && w.cols() == o.w.cols() &&
           b.size() == o.b.size() && w == o.w && b == o.b;
  }
};

inline constexpr double kDefaultLeakySlope = 0.01;
inline constexpr double kDefaultDropout = 0.25;

template <typename Scalar>
struct BasicMlpParams {
  using Layer = DenseLayer<Scalar>;

  int k = 0;
  int l_hidden = 0;
  double slope = kDefaultLeakySlope;
  double dropout = kDefaultDropout;
  bool training_mode = false;
  std::array<Layer, 3> layers;

  static BasicMlpParams zeros(int k, int l_hidden) {
    BasicMlpParams p;
    p.k = k;
    p.l_hidden = l_hidden;
    const std::array<std::pair<int, int>, 3> shapes{
        {{l_hidden, 2 * k}, {l_hidden, l_hidden}, {k, l_hidden}}};
    for (int i = 0; i < 3; ++i) {
      p.layers[i].w = Layer::Matrix::Zero(shapes[i].first, shapes[i].second);
      p.layers[i].b = Layer::Vector::Zero(shapes[i].first);
    }
    return p;
  }

  // Weights and biases uniform in +-1/sqrt(fan_in).
  static BasicMlpParams random(int k, int l_hidden, Stream& rng) {
    BasicMlpParams p = zeros(k, l_hidden);
    for (Layer& layer : p.layers) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.w.cols()));
      for (Eigen::Index j = 0; j < layer.w.cols(); ++j) {
        for (Eigen::Index i = 0; i < layer.w.rows(); ++i) {
          layer.w(i, j) = static_cast<Scalar>(bound * (2.0 * rng.uniform() - 1.0));
        }
      }
      for (Eigen::Index i = 0; i < layer.b.size(); ++i) {
        layer.b(i) = static_cast<Scalar>(bound * (2.0 * rng.uniform() - 1.0));
      }
    }
    return p;
  }

  void validate() const {
    if (k < 1 || l_hidden < 1) {
      throw InvalidArgument("MlpParams: K and l_hidden must be positive");
    }
    const std::array<std::pair<int, int>, 3> shapes{
        {{l_hidden, 2 * k}, {l_hidden, l_hidden}, {k, l_hidden}}};
    for (int i = 0; i < 3; ++i) {
      if (layers[i].w.rows() != shapes[i].first ||
          layers[i].w.cols() != shapes[i].second ||
          layers[i].b.size() != shapes[i].first) {
        throw InvalidArgument("MlpParams: layer " + std::to_string(i) +
                              " has inconsistent dimensions");
      }
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw InvalidArgument("MlpParams: dropout must be in [0, 1)");
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.w.size() + l.b.size();
    return n;
  }

  template <typename Other>
  BasicMlpParams<Other> cast() const {
    BasicMlpParams<Other> o;
    o.k = k;
    o.l_hidden = l_hidden;
    o.slope = slope;
    o.dropout = dropout;
    o.training_mode = training_mode;
    for (int i = 0; i < 3; ++i) {
      o.layers[i].w = layers[i].w.template cast<Other>();
      o.layers[i].b = layers[i].b.template cast<Other>();
    }
    return o;
  }

  bool operator==(const BasicMlpParams&) const = default;
};

using MlpParams = BasicMlpParams<float>;
using MlpParamsD = BasicMlpParams<double>;

using LogitVector = std::vector<double>;

// Activations of one batched forward pass (one sample per column), kept for
// backpropagation.
template <typename Scalar>
struct MlpCache {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix input;   // 2K x B
  Matrix pre1;    // L x B, before activation
  Matrix mask1;   // L x B, dropout keep/scale (empty when inference)
  Matrix out1;    // L x B, after activation and dropout
  Matrix pre2;
  Matrix mask2;
  Matrix out2;
  Matrix logits;  // K x B
};

namespace detail {

template <typename Derived>
void leaky_relu_inplace(Eigen::MatrixBase<Derived>& m, double slope) {
  using S = typename Derived::Scalar;
  const S a = static_cast<S>(slope);
  m = m.unaryExpr([a](S v) { return v > S(0) ? v : a * v; });
}

}  // namespace detail

// Inverted-dropout mask: entries are 0 (dropped) or 1/(1-rate).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> draw_dropout_mask(
    Eigen::Index rows, Eigen::Index cols, double rate, Stream& rng) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = rng.uniform() < rate ? Scalar(0) : keep;
    }
  }
  return m;
}

// Batched forward pass. Masks are used only if params.training_mode is set;
// pass empty matrices to draw nothing (inference).
template <typename Scalar>
void mlp_forward_batch(const BasicMlpParams<Scalar>& params,
                       MlpCache<Scalar>& cache) {
  const bool drop = params.training_mode && cache.mask1.size() > 0;
  cache.pre1.noalias() = params.layers[0].w * cache.input;
  cache.pre1.colwise() += params.layers[0].b;
  cache.out1 = cache.pre1;
  detail::leaky_relu_inplace(cache.out1, params.slope);
  if (drop) cache.out1.array() *= cache.mask1.array();

  cache.pre2.noalias() = params.layers[1].w * cache.out1;
  cache.pre2.colwise() += params.layers[1].b;
  cache.out2 = cache.pre2;
  detail::leaky_relu_inplace(cache.out2, params.slope);
  if (drop) cache.out2.array() *= cache.mask2.array();

  cache.logits.noalias() = params.layers[2].w * cache.out2;
  cache.logits.colwise() += params.layers[2].b;
}

// Single-sample forward pass. In training mode dropout masks come from rng,
// which must then be provided.
template <typename Scalar>
LogitVector mlp_forward(std::span<const double> x,
                        const BasicMlpParams<Scalar>& params,
                        Stream* rng = nullptr) {
  if (static_cast<int>(x.size()) != 2 * params.k) {
    throw InvalidArgument("mlp_forward: input length " + std::to_string(x.size()) +
                          " != 2K = " + std::to_string(2 * params.k));
  }
  MlpCache<Scalar> cache;
  cache.input.resize(2 * params.k, 1);
  for (int i = 0; i < 2 * params.k; ++i) cache.input(i, 0) = static_cast<Scalar>(x[i]);
  if (params.training_mode) {
    if (rng == nullptr) {
      throw InvalidArgument("mlp_forward: training mode needs a random source");
    }
    cache.mask1 = draw_dropout_mask<Scalar>(params.l_hidden, 1, params.dropout, *rng);
    cache.mask2 = draw_dropout_mask<Scalar>(params.l_hidden, 1, params.dropout, *rng);
  }
  mlp_forward_batch(params, cache);
  LogitVector p(params.k);
  for (int i = 0; i < params.k; ++i) p[i] = static_cast<double>(cache.logits(i, 0));
  return p;
}

inline BitMessage hard_decision(std::span<const double> logits) {
  BitMessage b(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) b[i] = logits[i] > 0.0 ? 1 : 0;
  return b;
}

template <typename Scalar>
BitMessage nn_decode(const ComplexPoly& y, const BasicMlpParams<Scalar>& params,
                     int k) {
  if (y.degree() != k || params.k != k) {
    throw InvalidArgument("nn_decode: degree/K mismatch");
  }
  const BasicMlpParams<Scalar>* p = &params;
  std::optional<BasicMlpParams<Scalar>> inference;
  if (params.training_mode) {
    inference = params;
    inference->training_mode = false;
    p = &*inference;
  }
  const ZeroPattern z = roots(y);
  return hard_decision(mlp_forward(real_bijection(z), *p));
}

// Decodes many received blocks with one batched forward pass. Blocks whose
// root finding fails are flagged and decoded as all zeros.
struct BatchDecode {
  std::vector<BitMessage> bits;
  std::vector<std::uint8_t> failed;
};

template <typename Scalar>
BatchDecode nn_decode_batch(std::span<const ComplexPoly> ys,
                            const BasicMlpParams<Scalar>& params) {
  const int k = params.k;
  const Eigen::Index n = static_cast<Eigen::Index>(ys.size());
  BatchDecode out;
  out.bits.assign(ys.size(), BitMessage(k, 0));
  out.failed.assign(ys.size(), 0);
  if (n == 0) return out;
  MlpCache<Scalar> cache;
  cache.input.setZero(2 * k, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (ys[j].degree() != k) throw InvalidArgument("nn_decode_batch: degree != K");
    try {
      const ZeroPattern z = roots(ys[j]);
      for (int i = 0; i < k; ++i) {
        cache.input(2 * i, j) = static_cast<Scalar>(z[i].real());
        cache.input(2 * i + 1, j) = static_cast<Scalar>(z[i].imag());
      }
    } catch (const ConvergenceError&) {
      out.failed[j] = 1;
    } catch (const DegeneratePolynomial&) {
      out.failed[j] = 1;
    }
  }
  if (params.training_mode) {
    BasicMlpParams<Scalar> inference = params;
    inference.training_mode = false;
    mlp_forward_batch(inference, cache);
  } else {
    mlp_forward_batch(params, cache);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (out.failed[j]) continue;
    for (int i = 0; i < k; ++i) out.bits[j][i] = cache.logits(i, j) > Scalar(0) ? 1 : 0;
  }
  return out;
}

}  // namespace zeroforge
