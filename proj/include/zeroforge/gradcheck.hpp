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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zeroforge/training.hpp"

namespace zeroforge {

// Comparison of analytic derivatives with central finite differences.
// An entry's error is |analytic - fd| / max(|fd|, |analytic|, floor) where
// floor = 1e-3 * (largest |fd| in the check), so entries that are tiny
// relative to the gradient are judged on an absolute scale.
struct GradCheckResult {
  std::string name;
  int entries = 0;
  double max_rel_error = 0.0;

  bool pass(double tol) const { return entries > 0 && max_rel_error <= tol; }
};

namespace detail {

inline double grad_errors(const std::vector<double>& analytic,
                          const std::vector<double>& fd) {
  double scale = 0.0;
  for (double v : fd) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double den = std::max({std::abs(fd[i]), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / den);
  }
  return worst;
}

inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double fp = f();
  x = saved - h;
  const double fm = f();
  x = saved;
  return (fp - fm) / (2.0 * h);
}

inline ConstellationParams perturbed_params(int k, Stream& rng) {
  ConstellationParams p = ConstellationParams::from(Constellation::canonical(k, 0.5));
  p.rho += 0.2 * (rng.uniform() - 0.5);
  for (double& t : p.theta) t += 0.05 * (rng.uniform() - 0.5);
  return p;
}

}  // namespace detail

// Hinge-loss path: d(mean hinge)/d(rho, theta).
inline GradCheckResult check_dizet_gradient(int k, int batch_size, double ebn0_db,
                                            std::uint64_t seed, double h = 1e-6) {
  Stream rng = make_stream(seed, 101);
  ConstellationParams p = detail::perturbed_params(k, rng);
  const Batch b = gen_batch(k, batch_size, p.constellation(),
                            std::isinf(ebn0_db) ? 0.0 : ebn0_to_noise_var(ebn0_db, k), rng);
  ConstellationGrad g(k);
  dizet_batch_loss(p, b, 1.0, false, &g);
  auto f = [&] { return dizet_batch_loss(p, b, 1.0, false, nullptr); };
  std::vector<double> an{g.rho}, fd{detail::central_difference(f, p.rho, h)};
  for (int i = 0; i < k; ++i) {
    an.push_back(g.theta[i]);
    fd.push_back(detail::central_difference(f, p.theta[i], h));
  }
  return {"dizet hinge loss wrt (rho, theta)", static_cast<int>(an.size()),
          detail::grad_errors(an, fd)};
}

// BCE path through the network, eigenvalue Jacobian and encoder, in double
// precision with fixed dropout masks. All constellation parameters and every
// network parameter are checked.
inline GradCheckResult check_nn_gradient(int k, int l_hidden, int batch_size,
                                         double ebn0_db, std::uint64_t seed,
                                         double h = 1e-6) {
  Stream rng = make_stream(seed, 102);
  ConstellationParams p = detail::perturbed_params(k, rng);
  MlpParamsD mlp = MlpParamsD::random(k, l_hidden, rng);
  mlp.training_mode = true;
  const Batch b = gen_batch(k, batch_size, p.constellation(), ebn0_to_noise_var(ebn0_db, k), rng);
  const auto masks = DropoutMasks<double>::draw(l_hidden, batch_size, mlp.dropout, rng);
  ConstellationGrad cg(k);
  MlpGrad<double> mg;
  nn_batch_loss<double>(p, mlp, b, &masks, &cg, &mg);
  auto f = [&] { return nn_batch_loss<double>(p, mlp, b, &masks, nullptr, nullptr).loss; };

  std::vector<double> an{cg.rho}, fd{detail::central_difference(f, p.rho, h)};
  for (int i = 0; i < k; ++i) {
    an.push_back(cg.theta[i]);
    fd.push_back(detail::central_difference(f, p.theta[i], h));
  }
  for (int l = 0; l < 3; ++l) {
    auto& w = mlp.layers[l].w;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      an.push_back(mg.layers.layers[l].w.data()[i]);
      fd.push_back(detail::central_difference(f, w.data()[i], h));
    }
    auto& bias = mlp.layers[l].b;
    for (Eigen::Index i = 0; i < bias.size(); ++i) {
      an.push_back(mg.layers.layers[l].b(i));
      fd.push_back(detail::central_difference(f, bias(i), h));
    }
  }
  return {"nn bce loss wrt (rho, theta, network)", static_cast<int>(an.size()),
          detail::grad_errors(an, fd)};
}

// Network alone: d(sum of weighted logits)/d(parameters, inputs).
inline GradCheckResult check_mlp_backprop(int k, int l_hidden, int batch_size,
                                          std::uint64_t seed, double h = 1e-6) {
  using Matrix = Eigen::MatrixXd;
  Stream rng = make_stream(seed, 103);
  MlpParamsD mlp = MlpParamsD::random(k, l_hidden, rng);
  mlp.training_mode = true;
  MlpCache<double> cache;
  cache.input.resize(2 * k, batch_size);
  for (Eigen::Index i = 0; i < cache.input.size(); ++i) cache.input.data()[i] = rng.normal();
  cache.mask1 = draw_dropout_mask<double>(l_hidden, batch_size, mlp.dropout, rng);
  cache.mask2 = draw_dropout_mask<double>(l_hidden, batch_size, mlp.dropout, rng);
  Matrix weights(k, batch_size);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.normal();

  auto f = [&] {
    MlpCache<double> c = cache;
    mlp_forward_batch(mlp, c);
    return (c.logits.array() * weights.array()).sum();
  };
  mlp_forward_batch(mlp, cache);
  MlpGrad<double> g;
  mlp_backward_batch(mlp, cache, weights, g, true);

  std::vector<double> an, fd;
  for (int l = 0; l < 3; ++l) {
    for (Eigen::Index i = 0; i < mlp.layers[l].w.size(); ++i) {
      an.push_back(g.layers.layers[l].w.data()[i]);
      fd.push_back(detail::central_difference(f, mlp.layers[l].w.data()[i], h));
    }
    for (Eigen::Index i = 0; i < mlp.layers[l].b.size(); ++i) {
      an.push_back(g.layers.layers[l].b(i));
      fd.push_back(detail::central_difference(f, mlp.layers[l].b(i), h));
    }
  }
  for (Eigen::Index i = 0; i < cache.input.size(); ++i) {
    an.push_back(g.input.data()[i]);
    fd.push_back(detail::central_difference(f, cache.input.data()[i], h));
  }
  return {"mlp backprop wrt (parameters, inputs)", static_cast<int>(an.size()),
          detail::grad_errors(an, fd)};
}

// Eigenvalue Jacobian of a noisy BMOCZ polynomial against differences of
// roots(), matching perturbed roots to the unperturbed ones. Real and
// imaginary coefficient steps are both checked (holomorphy).
inline GradCheckResult check_eigen_jacobian(int k, std::uint64_t seed, double h = 1e-6) {
  Stream rng = make_stream(seed, 104);
  const Constellation c = Constellation::canonical(k, 0.5);
  BitMessage bits(k);
  for (auto& v : bits) v = static_cast<std::uint8_t>(rng() >> 63);
  ComplexPoly p = encode(bits, c);
  for (cplx& v : p.coeffs) v += rng.complex_normal(0.05);
  const EigenJacobian ej = eigenvalue_jacobian(p);
  auto match = [](const ZeroPattern& zs, cplx z) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < zs.size(); ++i) {
      if (std::abs(zs[i] - z) < std::abs(zs[best] - z)) best = i;
    }
    return zs[best];
  };
  std::vector<double> an, fd;
  for (int m = 0; m <= k; ++m) {
    for (const cplx step : {cplx(h, 0.0), cplx(0.0, h)}) {
      ComplexPoly plus = p, minus = p;
      plus.coeffs[m] += step;
      minus.coeffs[m] -= step;
      const ZeroPattern zp = roots(plus), zm = roots(minus);
      for (int i = 0; i < k; ++i) {
        const cplx lam = ej.eigenvalues[i];
        const cplx d = (match(zp, lam) - match(zm, lam)) / (2.0 * h);
        const cplx a = ej.d_eig_d_coeff(i, m) * (step / h);
        an.push_back(a.real());
        an.push_back(a.imag());
        fd.push_back(d.real());
        fd.push_back(d.imag());
      }
    }
  }
  return {"eigenvalue jacobian wrt coefficients", static_cast<int>(an.size()),
          detail::grad_errors(an, fd)};
}

// Scalar losses against their closed-form derivatives.
inline GradCheckResult check_loss_derivatives(std::uint64_t seed, double h = 1e-6) {
  Stream rng = make_stream(seed, 105);
  std::vector<double> an, fd;
  for (int t = 0; t < 20; ++t) {
    double p = 8.0 * (rng.uniform() - 0.5);
    const int bit = static_cast<int>(rng() >> 63);
    an.push_back(bce_loss_grad(p, bit));
    fd.push_back(detail::central_difference([&] { return bce_loss(p, bit); }, p, h));
    double tau = 4.0 * (rng.uniform() - 0.5);
    if (std::abs(1.0 - std::abs(tau)) < 1e-3) tau += 0.01;  // away from the kink
    const double label = hinge_label(bit);
    an.push_back(hinge_loss_grad(tau, label, 1.0));
    fd.push_back(detail::central_difference(
        [&] { return hinge_loss_signed(tau, label, 1.0); }, tau, h));
  }
  return {"bce and hinge derivatives", static_cast<int>(an.size()),
          detail::grad_errors(an, fd)};
}

// Every check on `instances` random small problems (K from 2 to 6); one
// result per check holding the worst error across instances.
inline std::vector<GradCheckResult> run_gradient_suite(int instances, std::uint64_t seed) {
  if (instances < 1) throw InvalidArgument("run_gradient_suite: instances must be >= 1");
  std::vector<GradCheckResult> out;
  auto fold = [&out](const GradCheckResult& r) {
    for (GradCheckResult& o : out) {
      if (o.name == r.name) {
        o.entries += r.entries;
        o.max_rel_error = std::max(o.max_rel_error, r.max_rel_error);
        return;
      }
    }
    out.push_back(r);
  };
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const int k = 2 + i % 5;
    fold(check_dizet_gradient(k, 8, 10.0, s));
    fold(check_nn_gradient(k, 8, 4, 10.0, s));
    fold(check_mlp_backprop(k, 6, 3, s));
    fold(check_eigen_jacobian(k + 1, s));
    fold(check_loss_derivatives(s));
  }
  return out;
}

}  // namespace zeroforge
