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
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "zeroforge/channel.hpp"
#include "zeroforge/constellation.hpp"
#include "zeroforge/decoders.hpp"
#include "zeroforge/errors.hpp"
#include "zeroforge/poly.hpp"
#include "zeroforge/random.hpp"

namespace zeroforge {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  int k = 7;
  int batch_size = 256;
  int n_epoch = 30000;
  double ebn0_db = 10.0;          // DiZeT training / NN stage 1
  double ebn0_db_stage2 = 5.0;    // NN stage 2
  double margin = 1.0;            // hinge margin t
  double lr_initial = 1e-2;
  double lr_final = 1e-4;
  int l_hidden = 0;               // NN only
  double init_lambda = 0.5;       // initial R = dizet_radius(K, init_lambda)
  bool literal_hinge_label = false;  // use b~ = 2b - 1 against tau as defined
  std::uint64_t seed = 0;

  void validate(bool needs_hidden = false) const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw InvalidArgument("TrainConfig." + field + ": " + why);
    };
    if (k < 1) fail("K", "must be >= 1");
    if (batch_size < 1) fail("B", "must be >= 1");
    if (n_epoch < 1) fail("n_epoch", "must be >= 1");
    if (!(margin > 0.0)) fail("margin", "must be > 0");
    if (!(lr_final > 0.0)) fail("lr_final", "must be > 0");
    if (!(lr_initial >= lr_final)) fail("lr_initial", "must be >= lr_final");
    if (!(init_lambda > 0.0)) fail("init_lambda", "must be > 0");
    if (needs_hidden && l_hidden < 1) fail("l_hidden", "must be >= 1");
  }
};

// beta_i (beta_f / beta_i)^(epoch / n_epoch)
inline double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch <= 0) return cfg.lr_initial;
  if (epoch >= cfg.n_epoch) return cfg.lr_final;
  const double frac = static_cast<double>(epoch) / cfg.n_epoch;
  return cfg.lr_initial * std::pow(cfg.lr_final / cfg.lr_initial, frac);
}

// ---------------------------------------------------------------------------
// Losses

// max(0, t - label * tau) for label in {-1, +1}.
inline double hinge_loss_signed(double tau, double label, double t) {
  return std::max(0.0, t - label * tau);
}

// Label that multiplies tau. A negative tau decodes to bit 1, so the
// consistent label is 1 - 2b; `literal` selects 2b - 1 instead.
inline double hinge_label(int bit, bool literal = false) {
  return literal ? 2.0 * bit - 1.0 : 1.0 - 2.0 * bit;
}

inline double hinge_loss(double tau, int bit, double t, bool literal = false) {
  return hinge_loss_signed(tau, hinge_label(bit, literal), t);
}

// d/dtau of hinge_loss_signed (zero on the flat side, including the kink).
inline double hinge_loss_grad(double tau, double label, double t) {
  return t - label * tau > 0.0 ? -label : 0.0;
}

// -b ln sigmoid(p) - (1-b) ln(1 - sigmoid(p)) in log-sum-exp form.
inline double bce_loss(double p, int bit) {
  return std::max(p, 0.0) - bit * p + std::log1p(std::exp(-std::abs(p)));
}

inline double sigmoid(double p) {
  if (p >= 0.0) return 1.0 / (1.0 + std::exp(-p));
  const double e = std::exp(p);
  return e / (1.0 + e);
}

// d bce / dp
inline double bce_loss_grad(double p, int bit) { return sigmoid(p) - bit; }

// ---------------------------------------------------------------------------
// ADAM

template <typename Scalar>
struct ParamSlot {
  Scalar* value;
  const Scalar* grad;
  Eigen::Index size;
};

template <typename Scalar>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>> m;
  std::vector<Eigen::Array<Scalar, Eigen::Dynamic, 1>> v;
};

// One bias-corrected ADAM update over all slots. Moment buffers are created
// on the first call and must keep their shapes afterwards.
template <typename Scalar>
void adam_step(AdamState<Scalar>& st, std::span<const ParamSlot<Scalar>> slots,
               double lr) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  if (st.m.empty()) {
    for (const auto& s : slots) {
      st.m.push_back(Array::Zero(s.size));
      st.v.push_back(Array::Zero(s.size));
    }
  }
  if (st.m.size() != slots.size()) {
    throw InvalidArgument("adam_step: parameter block count changed");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (st.m[i].size() != slots[i].size) {
      throw InvalidArgument("adam_step: parameter block shape changed");
    }
    Eigen::Map<const Array> g(slots[i].grad, slots[i].size);
    if (!g.allFinite()) {
      throw TrainingAborted("adam_step: non-finite gradient in block " +
                            std::to_string(i) + " at step " +
                            std::to_string(st.step + 1));
    }
  }
  ++st.step;
  const Scalar b1 = static_cast<Scalar>(st.beta1);
  const Scalar b2 = static_cast<Scalar>(st.beta2);
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const Scalar step_size = static_cast<Scalar>(lr / bc1);
  const Scalar inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
  const Scalar eps = static_cast<Scalar>(st.eps);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Eigen::Map<const Array> g(slots[i].grad, slots[i].size);
    Eigen::Map<Array> p(slots[i].value, slots[i].size);
    st.m[i] = b1 * st.m[i] + (Scalar(1) - b1) * g;
    st.v[i] = b2 * st.v[i] + (Scalar(1) - b2) * g.square();
    p -= step_size * st.m[i] / (st.v[i].sqrt() * inv_sqrt_bc2 + eps);
  }
}

// ---------------------------------------------------------------------------
// Learnable constellation

struct ConstellationParams {
  double rho = 0.0;
  std::vector<double> theta;

  static ConstellationParams from(const Constellation& c) {
    return {rho_from_radius(c.radius()), c.phases()};
  }
  static ConstellationParams initial(const TrainConfig& cfg) {
    return from(Constellation::canonical(cfg.k, cfg.init_lambda));
  }
  double radius() const { return radius_from_rho(rho); }
  Constellation constellation() const { return Constellation(radius(), theta); }
};

struct ConstellationGrad {
  double rho = 0.0;
  std::vector<double> theta;

  explicit ConstellationGrad(int k = 0) : theta(k, 0.0) {}
  // dL/dR is accumulated here and converted to dL/drho by finish().
  double radius = 0.0;

  void finish(const ConstellationParams& p) {
    rho += radius * radius_rho_derivative(p.rho);
    radius = 0.0;
  }
};

// Intermediate values of encode() kept for the backward pass.
struct EncodeTrace {
  ZeroPattern zeros;
  ComplexPoly monic;
  double monic_energy = 0.0;
  double scale = 0.0;
  ComplexPoly x;
};

inline EncodeTrace encode_traced(std::span<const std::uint8_t> bits,
                                 const ConstellationParams& p) {
  const int k = static_cast<int>(p.theta.size());
  const double r = p.radius();
  EncodeTrace t;
  t.zeros.resize(k);
  for (int i = 0; i < k; ++i) t.zeros[i] = std::polar(bits[i] ? r : 1.0 / r, p.theta[i]);
  t.monic = poly_from_zeros(t.zeros, 1.0);
  t.monic_energy = energy(t.monic);
  t.scale = std::sqrt((k + 1.0) / t.monic_energy);
  t.x = scaled(t.monic, t.scale);
  return t;
}

// Adjoint of encode(). grad_x holds dL/dRe(x_k) + j dL/dIm(x_k); the result
// is accumulated into dL/dR (g.radius) and dL/dtheta.
inline void encode_backward(std::span<const std::uint8_t> bits,
                            const ConstellationParams& p, const EncodeTrace& t,
                            std::span<const cplx> grad_x, ConstellationGrad& g) {
  const int k = static_cast<int>(p.theta.size());
  const double r = p.radius();
  // x = s c, s = sqrt(E / |c|^2)
  double d_scale = 0.0;
  for (int j = 0; j <= k; ++j) d_scale += (std::conj(grad_x[j]) * t.monic.coeffs[j]).real();
  std::vector<cplx> grad_c(k + 1);
  for (int j = 0; j <= k; ++j) {
    grad_c[j] = t.scale * grad_x[j] -
                d_scale * t.scale / t.monic_energy * t.monic.coeffs[j];
  }
  // c = prod (z - a_m): dc_j / da_m = -q_m[j], q_m the product without a_m
  std::vector<cplx> others(k > 1 ? k - 1 : 0);
  for (int m = 0; m < k; ++m) {
    std::vector<cplx> q;
    if (k == 1) {
      q = {1.0};
    } else {
      for (int i = 0, o = 0; i < k; ++i) {
        if (i != m) others[o++] = t.zeros[i];
      }
      q = poly_from_zeros(others, 1.0).coeffs;
    }
    cplx grad_a = 0.0;
    for (int j = 0; j < k; ++j) grad_a += std::conj(-q[j]) * grad_c[j];
    const cplx a = t.zeros[m];
    const cplx dir = std::polar(1.0, p.theta[m]);
    g.theta[m] += (std::conj(grad_a) * cplx(0.0, 1.0) * a).real();
    const double d_mag = (std::conj(grad_a) * dir).real();
    g.radius += bits[m] ? d_mag : -d_mag / (r * r);
  }
}

// ---------------------------------------------------------------------------
// Training data

struct Batch {
  int k = 0;
  std::vector<BitMessage> bits;
  std::vector<std::vector<cplx>> noise;  // K+1 per sample
  std::vector<ComplexPoly> received;
};

// Uniform messages, encoded with `c`, plus CN(0, noise_var) per coefficient.
inline Batch gen_batch(int k, int batch_size, const Constellation& c,
                       double noise_var, Stream& rng) {
  if (c.k() != k) throw InvalidArgument("gen_batch: constellation K mismatch");
  Batch b;
  b.k = k;
  b.bits.resize(batch_size);
  b.noise.resize(batch_size);
  b.received.resize(batch_size);
  for (int j = 0; j < batch_size; ++j) {
    BitMessage& m = b.bits[j];
    m.resize(k);
    for (int i = 0; i < k; ++i) m[i] = static_cast<std::uint8_t>(rng() >> 63);
    std::vector<cplx>& w = b.noise[j];
    w.resize(k + 1);
    for (cplx& v : w) v = noise_var > 0.0 ? rng.complex_normal(noise_var) : cplx(0.0);
    ComplexPoly y = encode(m, c);
    for (int i = 0; i <= k; ++i) y.coeffs[i] += w[i];
    b.received[j] = std::move(y);
  }
  return b;
}

inline Batch gen_batch(const TrainConfig& cfg, const Constellation& c, Stream& rng) {
  return gen_batch(cfg.k, cfg.batch_size, c, ebn0_to_noise_var(cfg.ebn0_db, cfg.k), rng);
}

// ---------------------------------------------------------------------------
// DiZeT objective

// Mean hinge loss over all (sample, bit) pairs. When grad is non-null the
// gradient with respect to (rho, theta) is written there.
inline double dizet_batch_loss(const ConstellationParams& p, const Batch& batch,
                               double margin, bool literal_label,
                               ConstellationGrad* grad) {
  const int k = static_cast<int>(p.theta.size());
  const int nb = static_cast<int>(batch.bits.size());
  const double r = p.radius();
  const double rk = std::pow(r, k);
  const double norm = 1.0 / (static_cast<double>(nb) * k);
  if (grad != nullptr) *grad = ConstellationGrad(k);

  std::vector<cplx> outer(k), inner(k), dir(k);
  for (int i = 0; i < k; ++i) {
    dir[i] = std::polar(1.0, p.theta[i]);
    outer[i] = r * dir[i];
    inner[i] = dir[i] / r;
  }

  double total = 0.0;
  std::vector<cplx> grad_y(k + 1);
  for (int j = 0; j < nb; ++j) {
    const EncodeTrace tr = encode_traced(batch.bits[j], p);
    ComplexPoly y = tr.x;
    for (int i = 0; i <= k; ++i) y.coeffs[i] += batch.noise[j][i];
    std::fill(grad_y.begin(), grad_y.end(), cplx(0.0));
    for (int i = 0; i < k; ++i) {
      const auto [yu, dyu] = eval_poly_with_derivative(y, outer[i]);
      const auto [yv, dyv] = eval_poly_with_derivative(y, inner[i]);
      const double au = std::abs(yu);
      const double av = std::abs(yv);
      const double tau = au - rk * av;
      const double label = hinge_label(batch.bits[j][i], literal_label);
      total += hinge_loss_signed(tau, label, margin);
      if (grad == nullptr) continue;
      const double a_tau = hinge_loss_grad(tau, label, margin) * norm;
      if (a_tau == 0.0) continue;
      const cplx g_yu = au > 0.0 ? a_tau * yu / au : cplx(0.0);
      const cplx g_yv = av > 0.0 ? -a_tau * rk * yv / av : cplx(0.0);
      cplx pu = 1.0, pv = 1.0;
      for (int m = 0; m <= k; ++m) {
        grad_y[m] += std::conj(pu) * g_yu + std::conj(pv) * g_yv;
        pu *= outer[i];
        pv *= inner[i];
      }
      const cplx g_u = std::conj(dyu) * g_yu;
      const cplx g_v = std::conj(dyv) * g_yv;
      grad->radius += (std::conj(g_u) * dir[i]).real();
      grad->radius += (std::conj(g_v) * (-dir[i] / (r * r))).real();
      grad->radius += a_tau * (-k * std::pow(r, k - 1) * av);
      grad->theta[i] += (std::conj(g_u) * cplx(0.0, 1.0) * outer[i]).real();
      grad->theta[i] += (std::conj(g_v) * cplx(0.0, 1.0) * inner[i]).real();
    }
    if (grad != nullptr) encode_backward(batch.bits[j], p, tr, grad_y, *grad);
  }
  if (grad != nullptr) grad->finish(p);
  return total * norm;
}

// ---------------------------------------------------------------------------
// MLP backpropagation

template <typename Scalar>
struct MlpGrad {
  BasicMlpParams<Scalar> layers;  // same shapes as the network
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> input;  // 2K x B
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> leaky_relu_derivative(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& pre, double slope) {
  const Scalar a = static_cast<Scalar>(slope);
  return pre.unaryExpr([a](Scalar v) { return v > Scalar(0) ? Scalar(1) : a; });
}

}  // namespace detail

// Reverse pass through the network given dL/dlogits (K x B).
template <typename Scalar>
void mlp_backward_batch(
    const BasicMlpParams<Scalar>& params, const MlpCache<Scalar>& cache,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& d_logits,
    MlpGrad<Scalar>& g, bool need_input_grad) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const bool drop = params.training_mode && cache.mask1.size() > 0;
  if (g.layers.k != params.k || g.layers.l_hidden != params.l_hidden) {
    g.layers = BasicMlpParams<Scalar>::zeros(params.k, params.l_hidden);
  }
  g.layers.layers[2].w.noalias() = d_logits * cache.out2.transpose();
  g.layers.layers[2].b = d_logits.rowwise().sum();

  Matrix d = params.layers[2].w.transpose() * d_logits;
  if (drop) d.array() *= cache.mask2.array();
  d.array() *= detail::leaky_relu_derivative(cache.pre2, params.slope).array();
  g.layers.layers[1].w.noalias() = d * cache.out1.transpose();
  g.layers.layers[1].b = d.rowwise().sum();

  Matrix d1 = params.layers[1].w.transpose() * d;
  if (drop) d1.array() *= cache.mask1.array();
  d1.array() *= detail::leaky_relu_derivative(cache.pre1, params.slope).array();
  g.layers.layers[0].w.noalias() = d1 * cache.input.transpose();
  g.layers.layers[0].b = d1.rowwise().sum();

  if (need_input_grad) g.input.noalias() = params.layers[0].w.transpose() * d1;
}

template <typename Scalar>
std::vector<ParamSlot<Scalar>> mlp_slots(BasicMlpParams<Scalar>& p,
                                         const BasicMlpParams<Scalar>& g) {
  std::vector<ParamSlot<Scalar>> s;
  for (int i = 0; i < 3; ++i) {
    s.push_back({p.layers[i].w.data(), g.layers[i].w.data(), p.layers[i].w.size()});
    s.push_back({p.layers[i].b.data(), g.layers[i].b.data(), p.layers[i].b.size()});
  }
  return s;
}

// ---------------------------------------------------------------------------
// NN objective

// Dropout masks for both hidden layers, one column per batch sample.
template <typename Scalar>
struct DropoutMasks {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> first;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> second;

  static DropoutMasks draw(int l_hidden, int batch, double rate, Stream& rng) {
    return {draw_dropout_mask<Scalar>(l_hidden, batch, rate, rng),
            draw_dropout_mask<Scalar>(l_hidden, batch, rate, rng)};
  }
};

template <typename Scalar>
struct NnLossResult {
  double loss = 0.0;
  int used = 0;     // samples in the mean
  int skipped = 0;  // degenerate spectrum or root failure
};

// Mean BCE over the batch. The constellation gradient (through the
// eigenvalue Jacobian) is produced only if cgrad is non-null; mgrad receives
// the network gradient if non-null.
template <typename Scalar>
NnLossResult<Scalar> nn_batch_loss(const ConstellationParams& cp,
                                   const BasicMlpParams<Scalar>& mlp,
                                   const Batch& batch,
                                   const DropoutMasks<Scalar>* masks,
                                   ConstellationGrad* cgrad,
                                   MlpGrad<Scalar>* mgrad) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int k = static_cast<int>(cp.theta.size());
  const int nb = static_cast<int>(batch.bits.size());
  if (mlp.k != k) throw InvalidArgument("nn_batch_loss: MLP K mismatch");
  NnLossResult<Scalar> res;

  std::vector<int> used;
  std::vector<EncodeTrace> traces;
  std::vector<EigenJacobian> jac;
  std::vector<ZeroPattern> zs;
  used.reserve(nb);
  for (int j = 0; j < nb; ++j) {
    EncodeTrace tr = encode_traced(batch.bits[j], cp);
    ComplexPoly y = tr.x;
    for (int i = 0; i <= k; ++i) y.coeffs[i] += batch.noise[j][i];
    try {
      if (cgrad != nullptr) {
        EigenJacobian ej = eigenvalue_jacobian(y);
        zs.push_back(ej.eigenvalues);
        jac.push_back(std::move(ej));
        traces.push_back(std::move(tr));
      } else {
        zs.push_back(roots(y));
      }
      used.push_back(j);
    } catch (const DegenerateSpectrum&) {
      ++res.skipped;
    } catch (const ConvergenceError&) {
      ++res.skipped;
    } catch (const DegeneratePolynomial&) {
      ++res.skipped;
    }
  }
  res.used = static_cast<int>(used.size());
  if (cgrad != nullptr) *cgrad = ConstellationGrad(k);
  if (res.used == 0) return res;

  MlpCache<Scalar> cache;
  cache.input.resize(2 * k, res.used);
  for (int c = 0; c < res.used; ++c) {
    for (int i = 0; i < k; ++i) {
      cache.input(2 * i, c) = static_cast<Scalar>(zs[c][i].real());
      cache.input(2 * i + 1, c) = static_cast<Scalar>(zs[c][i].imag());
    }
  }
  if (mlp.training_mode && masks != nullptr) {
    cache.mask1.resize(mlp.l_hidden, res.used);
    cache.mask2.resize(mlp.l_hidden, res.used);
    for (int c = 0; c < res.used; ++c) {
      cache.mask1.col(c) = masks->first.col(used[c]);
      cache.mask2.col(c) = masks->second.col(used[c]);
    }
  }
  mlp_forward_batch(mlp, cache);

  const double norm = 1.0 / (static_cast<double>(res.used) * k);
  Matrix d_logits(k, res.used);
  double total = 0.0;
  for (int c = 0; c < res.used; ++c) {
    for (int i = 0; i < k; ++i) {
      const double p = static_cast<double>(cache.logits(i, c));
      const int bit = batch.bits[used[c]][i];
      total += bce_loss(p, bit);
      d_logits(i, c) = static_cast<Scalar>(bce_loss_grad(p, bit) * norm);
    }
  }
  res.loss = total * norm;
  if (!std::isfinite(res.loss)) return res;
  if (mgrad == nullptr && cgrad == nullptr) return res;

  MlpGrad<Scalar> local;
  MlpGrad<Scalar>& g = mgrad != nullptr ? *mgrad : local;
  mlp_backward_batch(mlp, cache, d_logits, g, cgrad != nullptr);

  if (cgrad != nullptr) {
    std::vector<cplx> grad_y(k + 1);
    for (int c = 0; c < res.used; ++c) {
      std::fill(grad_y.begin(), grad_y.end(), cplx(0.0));
      for (int i = 0; i < k; ++i) {
        const cplx g_lambda(static_cast<double>(g.input(2 * i, c)),
                            static_cast<double>(g.input(2 * i + 1, c)));
        for (int m = 0; m <= k; ++m) {
          grad_y[m] += std::conj(jac[c].d_eig_d_coeff(i, m)) * g_lambda;
        }
      }
      encode_backward(batch.bits[used[c]], cp, traces[c], grad_y, *cgrad);
    }
    cgrad->finish(cp);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Training loops

struct TracePoint {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

// Called once per epoch with the stage number (1 for DiZeT and NN stage 1).
using ProgressFn = std::function<void(int stage, const TracePoint&)>;

struct DizetTrainResult {
  Constellation constellation;
  std::vector<TracePoint> trace;
};

inline void check_finite_loss(double loss, int stage, int epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingAborted("non-finite loss at stage " + std::to_string(stage) +
                          ", epoch " + std::to_string(epoch));
  }
}

inline DizetTrainResult train_dizet(const TrainConfig& cfg,
                                    const ProgressFn& progress = {}) {
  cfg.validate();
  ConstellationParams p = ConstellationParams::initial(cfg);
  const double noise_var = ebn0_to_noise_var(cfg.ebn0_db, cfg.k);
  AdamState<double> adam;
  std::vector<TracePoint> trace;
  trace.reserve(cfg.n_epoch);
  for (int e = 0; e < cfg.n_epoch; ++e) {
    Stream rng = make_stream(cfg.seed, 1, static_cast<std::uint64_t>(e));
    const Batch batch = gen_batch(cfg.k, cfg.batch_size, p.constellation(), noise_var, rng);
    ConstellationGrad g(cfg.k);
    const double loss = dizet_batch_loss(p, batch, cfg.margin, cfg.literal_hinge_label, &g);
    check_finite_loss(loss, 1, e);
    const double lr = lr_schedule(e, cfg);
    const std::vector<ParamSlot<double>> slots{
        {&p.rho, &g.rho, 1},
        {p.theta.data(), g.theta.data(), static_cast<Eigen::Index>(p.theta.size())}};
    adam_step<double>(adam, slots, lr);
    trace.push_back({e, lr, loss});
    if (progress) progress(1, trace.back());
  }
  return {p.constellation(), std::move(trace)};
}

template <typename Scalar>
struct NnTrainResult {
  Constellation constellation;
  BasicMlpParams<Scalar> mlp;
  std::vector<TracePoint> stage1;
  std::vector<TracePoint> stage2;
  long skipped = 0;
};

// Stage 1 learns the constellation and network jointly at cfg.ebn0_db;
// stage 2 freezes the constellation and trains the network alone at
// cfg.ebn0_db_stage2. Each stage runs n_epoch batches with a fresh optimizer
// and a restarted learning-rate schedule.
template <typename Scalar = float>
NnTrainResult<Scalar> train_nn(const TrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate(true);
  ConstellationParams cp = ConstellationParams::initial(cfg);
  Stream init_rng = make_stream(cfg.seed, 7);
  BasicMlpParams<Scalar> mlp = BasicMlpParams<Scalar>::random(cfg.k, cfg.l_hidden, init_rng);
  mlp.training_mode = true;
  long skipped = 0;

  auto run_stage = [&](int stage, double ebn0_db, bool learn_constellation) {
    const double noise_var = ebn0_to_noise_var(ebn0_db, cfg.k);
    AdamState<double> adam_c;
    AdamState<Scalar> adam_m;
    MlpGrad<Scalar> mg;
    std::vector<TracePoint> trace;
    trace.reserve(cfg.n_epoch);
    for (int e = 0; e < cfg.n_epoch; ++e) {
      Stream rng = make_stream(cfg.seed, 1 + stage, static_cast<std::uint64_t>(e));
      const Batch batch = gen_batch(cfg.k, cfg.batch_size, cp.constellation(), noise_var, rng);
      const auto masks = DropoutMasks<Scalar>::draw(cfg.l_hidden, cfg.batch_size, mlp.dropout, rng);
      ConstellationGrad cg(cfg.k);
      const NnLossResult<Scalar> r = nn_batch_loss<Scalar>(
          cp, mlp, batch, &masks, learn_constellation ? &cg : nullptr, &mg);
      skipped += r.skipped;
      if (r.used == 0) continue;
      check_finite_loss(r.loss, stage, e);
      const double lr = lr_schedule(e, cfg);
      if (learn_constellation) {
        const std::vector<ParamSlot<double>> slots{
            {&cp.rho, &cg.rho, 1},
            {cp.theta.data(), cg.theta.data(), static_cast<Eigen::Index>(cp.theta.size())}};
        adam_step<double>(adam_c, slots, lr);
      }
      const auto mslots = mlp_slots(mlp, mg.layers);
      adam_step<Scalar>(adam_m, mslots, lr);
      trace.push_back({e, lr, r.loss});
      if (progress) progress(stage, trace.back());
    }
    return trace;
  };

  std::vector<TracePoint> s1 = run_stage(1, cfg.ebn0_db, true);
  std::vector<TracePoint> s2 = run_stage(2, cfg.ebn0_db_stage2, false);
  mlp.training_mode = false;
  return {cp.constellation(), std::move(mlp), std::move(s1), std::move(s2), skipped};
}

}  // namespace zeroforge
