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
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zeroforge/errors.hpp"

namespace zeroforge {

using cplx = std::complex<double>;

// Unordered multiset of polynomial zeros.
using ZeroPattern = std::vector<cplx>;

// Leading coefficients at or below this magnitude make a polynomial degenerate.
inline constexpr double kLeadingTolerance = 1e-12;

// Degree-K polynomial stored as K+1 coefficients in ascending powers.
struct ComplexPoly {
  std::vector<cplx> coeffs;

  ComplexPoly() = default;
  explicit ComplexPoly(std::vector<cplx> c) : coeffs(std::move(c)) {
    if (coeffs.size() < 2) {
      throw InvalidArgument("ComplexPoly needs at least two coefficients");
    }
  }

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  const cplx& leading() const { return coeffs.back(); }

  bool operator==(const ComplexPoly&) const = default;
};

inline double energy(const ComplexPoly& p) {
  double e = 0.0;
  for (const cplx& c : p.coeffs) e += std::norm(c);
  return e;
}

inline ComplexPoly scaled(const ComplexPoly& p, cplx factor) {
  ComplexPoly out = p;
  for (cplx& c : out.coeffs) c *= factor;
  return out;
}

// Expands leading * prod_k (z - zeros[k]).
inline ComplexPoly poly_from_zeros(std::span<const cplx> zeros,
                                   cplx leading = 1.0) {
  if (zeros.empty()) throw InvalidArgument("poly_from_zeros: no zeros given");
  if (leading == cplx(0.0)) {
    throw InvalidArgument("poly_from_zeros: leading coefficient is zero");
  }
  std::vector<cplx> c(zeros.size() + 1, cplx(0.0));
  c[0] = 1.0;
  int deg = 0;
  for (const cplx& a : zeros) {
    // multiply by (z - a), highest power first so c[j-1] is still old
    c[deg + 1] = c[deg];
    for (int j = deg; j >= 1; --j) c[j] = c[j - 1] - a * c[j];
    c[0] = -a * c[0];
    ++deg;
  }
  for (cplx& v : c) v *= leading;
  return ComplexPoly(std::move(c));
}

// Rescales by a positive real so that the squared coefficient norm equals
// target_energy. Zeros are unchanged.
inline ComplexPoly normalize_energy(const ComplexPoly& p, double target_energy) {
  if (!(target_energy > 0.0)) {
    throw InvalidArgument("normalize_energy: target energy must be positive");
  }
  const double e = energy(p);
  if (e == 0.0) throw InvalidArgument("normalize_energy: all-zero polynomial");
  return scaled(p, std::sqrt(target_energy / e));
}

// Horner evaluation.
inline cplx eval_poly(const ComplexPoly& p, cplx z) {
  cplx acc = p.coeffs.back();
  for (int k = p.degree() - 1; k >= 0; --k) acc = acc * z + p.coeffs[k];
  return acc;
}

// Value and first derivative in one Horner pass.
inline std::pair<cplx, cplx> eval_poly_with_derivative(const ComplexPoly& p,
                                                       cplx z) {
  cplx val = p.coeffs.back();
  cplx der = 0.0;
  for (int k = p.degree() - 1; k >= 0; --k) {
    der = der * z + val;
    val = val * z + p.coeffs[k];
  }
  return {val, der};
}

// Frobenius companion matrix: ones on the subdiagonal, last column
// -y_k / y_K for k = 0..K-1.
inline Eigen::MatrixXcd companion_matrix(const ComplexPoly& p) {
  const int n = p.degree();
  if (std::abs(p.leading()) <= kLeadingTolerance) {
    throw DegeneratePolynomial("companion_matrix: leading coefficient ~ 0");
  }
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;
  for (int k = 0; k < n; ++k) c(k, n - 1) = -p.coeffs[k] / p.leading();
  return c;
}

namespace detail {

// Diagonal similarity by powers of two (Parlett-Reinsch) that equalizes row
// and column off-diagonal 1-norms. Keeps Hessenberg structure intact.
inline void balance(Eigen::MatrixXcd& a) {
  const int n = static_cast<int>(a.rows());
  constexpr double kGamma = 0.95;
  bool changed = true;
  for (int sweep = 0; changed && sweep < 100; ++sweep) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      double row = 0.0, col = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        row += std::abs(a(i, j));
        col += std::abs(a(j, i));
      }
      if (row == 0.0 || col == 0.0) continue;
      int exponent = 0;
      std::frexp(row / col, &exponent);
      exponent /= 2;
      if (exponent == 0) continue;
      const double new_col = std::ldexp(col, exponent);
      const double new_row = std::ldexp(row, -exponent);
      if (new_col + new_row < kGamma * (col + row)) {
        const double f = std::ldexp(1.0, exponent);
        a.row(i) /= f;
        a.col(i) *= f;
        changed = true;
      }
    }
  }
}

// Complex plane rotation G = [c s; -conj(s) c] with G * [f; g] = [r; 0].
struct Givens {
  double c = 1.0;
  cplx s = 0.0;
  cplx r = 0.0;
};

inline Givens make_givens(cplx f, cplx g) {
  if (g == cplx(0.0)) return {1.0, 0.0, f};
  if (f == cplx(0.0)) return {0.0, std::conj(g) / std::abs(g), std::abs(g)};
  const double nf = std::abs(f);
  const double norm = std::hypot(nf, std::abs(g));
  const cplx phase = f / nf;
  return {nf / norm, phase * std::conj(g) / norm, phase * norm};
}

// Eigenvalue of the trailing 2x2 block closest to its last diagonal entry.
inline cplx wilkinson_shift(cplx a, cplx b, cplx c, cplx d) {
  const cplx half_diff = 0.5 * (a - d);
  const cplx disc = std::sqrt(half_diff * half_diff + b * c);
  const cplx mid = 0.5 * (a + d);
  const cplx mu1 = mid + disc;
  const cplx mu2 = mid - disc;
  return std::abs(mu1 - d) <= std::abs(mu2 - d) ? mu1 : mu2;
}

}  // namespace detail

// Eigenvalues of an upper Hessenberg matrix by Wilkinson-shifted implicit QR
// with Givens rotations. A subdiagonal entry is deflated once it falls below
// 1e-12 times the Frobenius norm of the matrix.
inline std::vector<cplx> hessenberg_eigenvalues(Eigen::MatrixXcd h,
                                                int max_iterations) {
  const int n = static_cast<int>(h.rows());
  std::vector<cplx> eig(n);
  if (n == 0) return eig;
  const double norm = h.norm();
  const double tiny = std::max(1e-12 * norm, std::numeric_limits<double>::min());
  auto negligible = [&](int i) { return std::abs(h(i, i - 1)) < tiny; };

  int iu = n - 1;
  int iter = 0;
  int total = 0;
  while (iu > 0) {
    if (negligible(iu)) {
      h(iu, iu - 1) = 0.0;
      eig[iu] = h(iu, iu);
      --iu;
      iter = 0;
      continue;
    }
    if (++total > max_iterations) {
      throw ConvergenceError("shifted QR did not converge in " +
                             std::to_string(max_iterations) + " iterations");
    }
    ++iter;
    int il = iu - 1;
    while (il > 0 && !negligible(il)) --il;

    cplx shift;
    if (iter % 10 == 0) {
      // exceptional shift to break cycles
      shift = std::abs(h(iu, iu - 1).real()) +
              (iu >= 2 ? std::abs(h(iu - 1, iu - 2).real()) : 0.0);
      shift += h(iu, iu);
    } else {
      shift = detail::wilkinson_shift(h(iu - 1, iu - 1), h(iu - 1, iu),
                                      h(iu, iu - 1), h(iu, iu));
    }

    for (int i = il; i < iu; ++i) {
      detail::Givens g;
      if (i == il) {
        g = detail::make_givens(h(il, il) - shift, h(il + 1, il));
      } else {
        g = detail::make_givens(h(i, i - 1), h(i + 1, i - 1));
        h(i, i - 1) = g.r;
        h(i + 1, i - 1) = 0.0;
      }
      for (int j = i; j < n; ++j) {
        const cplx x = h(i, j);
        const cplx y = h(i + 1, j);
        h(i, j) = g.c * x + g.s * y;
        h(i + 1, j) = -std::conj(g.s) * x + g.c * y;
      }
      const int last_row = std::min(i + 2, iu);
      for (int r = 0; r <= last_row; ++r) {
        const cplx x = h(r, i);
        const cplx y = h(r, i + 1);
        h(r, i) = x * g.c + y * std::conj(g.s);
        h(r, i + 1) = -x * g.s + y * g.c;
      }
    }
  }
  eig[0] = h(0, 0);
  return eig;
}

struct RootOptions {
  int max_iterations_per_degree = 100;
  bool balance = true;
};

// All K roots of p as eigenvalues of its companion matrix. No ordering is
// guaranteed.
inline ZeroPattern roots(const ComplexPoly& p, const RootOptions& opt = {}) {
  Eigen::MatrixXcd c = companion_matrix(p);
  if (opt.balance) detail::balance(c);
  return hessenberg_eigenvalues(std::move(c),
                                opt.max_iterations_per_degree * p.degree());
}

inline double min_pairwise_gap(std::span<const cplx> z) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      gap = std::min(gap, std::abs(z[i] - z[j]));
    }
  }
  return gap;
}

// Eigenvalues below this separation are treated as repeated.
inline constexpr double kSimpleEigenvalueGap = 1e-8;
// Eigenvalues whose condition number exceeds 1 / kMinEigenvalueConditioning
// are treated as repeated too.
inline constexpr double kMinEigenvalueConditioning = 1e-6;

namespace detail {

// Right and left null vectors of (H - lambda I) for an unreduced upper
// Hessenberg H. The right vector is fixed by u[n-1] = 1 and solved upward
// through the subdiagonal; the left vector is fixed by w[0] = 1 and solved
// forward column by column.
inline std::pair<Eigen::VectorXcd, Eigen::VectorXcd> hessenberg_null_vectors(
    const Eigen::MatrixXcd& h, cplx lambda) {
  const int n = static_cast<int>(h.rows());
  Eigen::VectorXcd u = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(n);
  u(n - 1) = 1.0;
  for (int i = n - 1; i >= 1; --i) {
    cplx acc = 0.0;
    for (int j = i; j < n; ++j) {
      acc += (h(i, j) - (i == j ? lambda : cplx(0.0))) * u(j);
    }
    u(i - 1) = -acc / h(i, i - 1);
  }
  w(0) = 1.0;
  for (int j = 0; j + 1 < n; ++j) {
    cplx acc = 0.0;
    for (int i = 0; i <= j; ++i) {
      acc += w(i) * (h(i, j) - (i == j ? lambda : cplx(0.0)));
    }
    w(j + 1) = -acc / h(j + 1, j);
  }
  return {u, w};
}

}  // namespace detail

// Roots of p together with d(root_i)/d(coeff_k). Roots are holomorphic in the
// coefficients, so the Jacobian is a complex K x (K+1) matrix; row order
// matches the returned eigenvalues.
struct EigenJacobian {
  ZeroPattern eigenvalues;
  Eigen::MatrixXcd d_eig_d_coeff;
};

inline EigenJacobian eigenvalue_jacobian(const ComplexPoly& p,
                                         const RootOptions& opt = {}) {
  const int n = p.degree();
  EigenJacobian out;
  out.eigenvalues = roots(p, opt);
  if (min_pairwise_gap(out.eigenvalues) < kSimpleEigenvalueGap) {
    throw DegenerateSpectrum("eigenvalue_jacobian: repeated eigenvalue");
  }
  const Eigen::MatrixXcd c = companion_matrix(p);
  const cplx lead = p.leading();
  out.d_eig_d_coeff.resize(n, n + 1);
  for (int i = 0; i < n; ++i) {
    const auto [u, w] = detail::hessenberg_null_vectors(c, out.eigenvalues[i]);
    // d lambda = w^T dC u / (w^T u); only the last column of C moves.
    const cplx denom = (w.transpose() * u)(0);
    // 1 / condition number of the eigenvalue; a numerically double root splits
    // into a close pair whose gap alone can exceed the threshold
    if (std::abs(denom) < kMinEigenvalueConditioning * u.norm() * w.norm()) {
      throw DegenerateSpectrum("eigenvalue_jacobian: ill-conditioned eigenvalue");
    }
    const cplx scale = u(n - 1) / denom;
    cplx d_lead = 0.0;
    for (int k = 0; k < n; ++k) {
      // C(k, n-1) = -y_k / y_K
      out.d_eig_d_coeff(i, k) = -w(k) * scale / lead;
      d_lead += w(k) * scale * p.coeffs[k] / (lead * lead);
    }
    out.d_eig_d_coeff(i, n) = d_lead;
  }
  return out;
}

}  // namespace zeroforge
