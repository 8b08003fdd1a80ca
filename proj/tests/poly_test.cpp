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

#include "zeroforge/poly.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "zeroforge/constellation.hpp"

namespace zeroforge {
namespace {

using testing::multiset_distance;
using testing::nearest;
using testing::relative_error;

TEST(PolyFromZeros, Linear) {
  const std::vector<cplx> z{2.0};
  const ComplexPoly p = poly_from_zeros(z);
  ASSERT_EQ(p.degree(), 1);
  EXPECT_EQ(p.coeffs[0], cplx(-2.0));
  EXPECT_EQ(p.coeffs[1], cplx(1.0));
}

TEST(PolyFromZeros, DifferenceOfSquares) {
  const std::vector<cplx> z{1.0, -1.0};
  const ComplexPoly p = poly_from_zeros(z);
  EXPECT_EQ(p.coeffs, (std::vector<cplx>{-1.0, 0.0, 1.0}));
}

TEST(PolyFromZeros, LeadingCoefficientKept) {
  const std::vector<cplx> z{cplx(0.3, 1.0), -2.0, cplx(0.0, -0.5)};
  const cplx lead(2.0, -1.0);
  const ComplexPoly p = poly_from_zeros(z, lead);
  EXPECT_EQ(p.leading(), lead);
  double cmax = 0.0;
  for (const cplx& c : p.coeffs) cmax = std::max(cmax, std::abs(c));
  for (const cplx& a : z) EXPECT_LT(std::abs(eval_poly(p, a)), 1e-9 * cmax);
}

TEST(PolyFromZeros, Errors) {
  EXPECT_THROW(poly_from_zeros(std::vector<cplx>{}), InvalidArgument);
  EXPECT_THROW(poly_from_zeros(std::vector<cplx>{1.0}, 0.0), InvalidArgument);
}

// Huffman property: the autocorrelation of the coefficient sequence has zeros
// at every interior lag, whichever message is sent.
TEST(PolyFromZeros, HuffmanAutocorrelation) {
  Stream rng = make_stream(11);
  for (int k : {4, 7, 10}) {
    for (double r : {1.1974, 1.3, 1.6}) {
      const Constellation c(r, uniform_phases(k));
      for (int trial = 0; trial < 20; ++trial) {
        const BitMessage b = trial == 0 ? BitMessage(k, 1) : testing::random_message(k, rng);
        const ComplexPoly p = poly_from_zeros(bits_to_zeros(b, c));
        const auto& x = p.coeffs;
        auto acf = [&](int lag) {
          cplx a = 0.0;
          for (int i = 0; i + lag <= k; ++i) a += x[i + lag] * std::conj(x[i]);
          return a;
        };
        const double a0 = std::abs(acf(0));
        for (int lag = 1; lag < k; ++lag) {
          EXPECT_LT(std::abs(acf(lag)), 1e-9 * a0) << "K=" << k << " lag=" << lag;
        }
        EXPECT_GT(std::abs(acf(k)), 1e-3 * a0);
      }
    }
  }
}

TEST(NormalizeEnergy, Examples) {
  const ComplexPoly p({-1.0, 0.0, 1.0});
  const ComplexPoly q = normalize_energy(p, 3.0);
  EXPECT_NEAR(q.coeffs[0].real(), -std::sqrt(1.5), 1e-15);
  EXPECT_EQ(q.coeffs[1], cplx(0.0));
  EXPECT_NEAR(q.coeffs[2].real(), std::sqrt(1.5), 1e-15);

  const ComplexPoly again = normalize_energy(q, 3.0);
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(again.coeffs[i] - q.coeffs[i]), 1e-12);

  Stream rng = make_stream(3);
  for (int t = 0; t < 50; ++t) {
    const ComplexPoly r = normalize_energy(testing::random_poly(7, rng), 8.0);
    EXPECT_NEAR(energy(r), 8.0, 8e-12);
  }
}

TEST(NormalizeEnergy, Errors) {
  EXPECT_THROW(normalize_energy(ComplexPoly({0.0, 0.0}), 1.0), InvalidArgument);
  EXPECT_THROW(normalize_energy(ComplexPoly({1.0, 1.0}), 0.0), InvalidArgument);
}

TEST(EvalPoly, Examples) {
  EXPECT_EQ(eval_poly(ComplexPoly({-1.0, 0.0, 1.0}), 2.0), cplx(3.0));
  EXPECT_EQ(eval_poly(ComplexPoly({-2.0, 1.0}), 2.0), cplx(0.0));
}

TEST(EvalPoly, MatchesNaivePowerSum) {
  Stream rng = make_stream(5);
  for (int t = 0; t < 500; ++t) {
    const int deg = 1 + static_cast<int>(rng() % 10);
    const ComplexPoly p = testing::random_poly(deg, rng);
    const cplx z = rng.complex_normal(2.0);
    cplx naive = 0.0;
    double scale = 0.0;
    for (int k = 0; k <= deg; ++k) {
      naive += p.coeffs[k] * std::pow(z, k);
      scale += std::abs(p.coeffs[k]) * std::pow(std::abs(z), k);
    }
    // relative to the magnitude of the summands to stay meaningful near roots
    EXPECT_LT(std::abs(eval_poly(p, z) - naive), 1e-12 * scale);
  }
}

TEST(EvalPoly, DerivativeMatchesFiniteDifference) {
  Stream rng = make_stream(6);
  for (int t = 0; t < 50; ++t) {
    const ComplexPoly p = testing::random_poly(6, rng);
    const cplx z = rng.complex_normal(1.0);
    const double h = 1e-6;
    const cplx fd = (eval_poly(p, z + h) - eval_poly(p, z - h)) / (2.0 * h);
    EXPECT_LT(relative_error(eval_poly_with_derivative(p, z).second, fd), 1e-7);
    EXPECT_EQ(eval_poly_with_derivative(p, z).first, eval_poly(p, z));
  }
}

TEST(CompanionMatrix, Layout) {
  Eigen::MatrixXcd a = companion_matrix(ComplexPoly({-1.0, 0.0, 1.0}));
  Eigen::MatrixXcd want(2, 2);
  want << 0.0, 1.0, 1.0, 0.0;
  EXPECT_EQ(a, want);

  Eigen::MatrixXcd b = companion_matrix(ComplexPoly({1.0, 0.0, 1.0}));
  want << 0.0, -1.0, 1.0, 0.0;
  EXPECT_EQ(b, want);
}

TEST(CompanionMatrix, CubicEigenvalues) {
  const ComplexPoly p({-6.0, 11.0, -6.0, 1.0});
  const Eigen::MatrixXcd c = companion_matrix(p);
  EXPECT_EQ(c(0, 2), cplx(6.0));
  EXPECT_EQ(c(1, 2), cplx(-11.0));
  EXPECT_EQ(c(2, 2), cplx(6.0));
  // independent eigensolver
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(c);
  const std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + 3);
  const std::vector<cplx> want{1.0, 2.0, 3.0};
  EXPECT_LT(multiset_distance(ev, want), 1e-12);
  EXPECT_LT(multiset_distance(roots(p), want), 1e-12);
}

TEST(CompanionMatrix, DegenerateLeading) {
  EXPECT_THROW(companion_matrix(ComplexPoly({1.0, 2.0, 1e-13})), DegeneratePolynomial);
  EXPECT_THROW(roots(ComplexPoly({1.0, 2.0, 0.0})), DegeneratePolynomial);
}

TEST(Roots, SmallExamples) {
  EXPECT_LT(multiset_distance(roots(ComplexPoly({-1.0, 0.0, 1.0})),
                              std::vector<cplx>{1.0, -1.0}),
            1e-14);
  EXPECT_LT(multiset_distance(roots(ComplexPoly({1.0, 0.0, 1.0})),
                              std::vector<cplx>{cplx(0, 1), cplx(0, -1)}),
            1e-14);
  EXPECT_LT(multiset_distance(roots(ComplexPoly({-2.0, 1.0})), std::vector<cplx>{2.0}),
            1e-15);
}

TEST(Roots, RepeatedRootDoesNotThrow) {
  // (z - 1)^2 (z + 2)
  const ComplexPoly p = poly_from_zeros(std::vector<cplx>{1.0, 1.0, -2.0});
  const ZeroPattern z = roots(p);
  EXPECT_LT(multiset_distance(z, std::vector<cplx>{1.0, 1.0, -2.0}), 1e-6);
}

TEST(Roots, ConvergenceBudget) {
  const ComplexPoly p = poly_from_zeros(std::vector<cplx>{0.5, cplx(0, 2), -1.5, 3.0});
  EXPECT_THROW(roots(p, RootOptions{.max_iterations_per_degree = 0}), ConvergenceError);
}

TEST(Roots, BmoczRoundTrip) {
  Stream rng = make_stream(2024);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng() % 9);
    const double r = 1.0 + 1e-3 + 0.6 * rng.uniform() * (1.0 - 1e-3 / 0.6);
    const Constellation c(std::min(r, 1.6), uniform_phases(k));
    const ZeroPattern z = bits_to_zeros(testing::random_message(k, rng), c);
    worst = std::max(worst, multiset_distance(roots(poly_from_zeros(z)), z));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Roots, ScaleInvariant) {
  Stream rng = make_stream(77);
  for (int t = 0; t < 200; ++t) {
    const ComplexPoly p = testing::random_poly(1 + static_cast<int>(rng() % 10), rng);
    cplx s = rng.complex_normal(10.0);
    if (std::abs(s) < 1e-3) s = 1.0;
    EXPECT_LT(multiset_distance(roots(scaled(p, s)), roots(p)), 1e-10);
  }
}

TEST(Roots, AgreesWithReferenceEigensolver) {
  Stream rng = make_stream(31);
  for (int t = 0; t < 200; ++t) {
    const ComplexPoly p = testing::random_poly(2 + static_cast<int>(rng() % 20), rng);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(companion_matrix(p), false);
    const Eigen::VectorXcd ev = es.eigenvalues();
    const std::vector<cplx> ref(ev.data(), ev.data() + ev.size());
    EXPECT_LT(multiset_distance(roots(p), ref), 1e-7);
  }
}

// Central differences of roots(), matched to the unperturbed roots.
Eigen::MatrixXcd root_jacobian_fd(const ComplexPoly& p, const ZeroPattern& base,
                                  double h) {
  const int n = p.degree();
  Eigen::MatrixXcd j(n, n + 1);
  for (int k = 0; k <= n; ++k) {
    ComplexPoly plus = p, minus = p;
    plus.coeffs[k] += h;
    minus.coeffs[k] -= h;
    const ZeroPattern zp = roots(plus);
    const ZeroPattern zm = roots(minus);
    for (int i = 0; i < n; ++i) {
      j(i, k) = (zp[nearest(zp, base[i])] - zm[nearest(zm, base[i])]) / (2.0 * h);
    }
  }
  return j;
}

TEST(EigenvalueJacobian, Linear) {
  const cplx a(0.7, -0.2);
  const EigenJacobian ej = eigenvalue_jacobian(ComplexPoly({-a, 1.0}));
  ASSERT_EQ(ej.eigenvalues.size(), 1U);
  EXPECT_LT(std::abs(ej.eigenvalues[0] - a), 1e-15);
  // lambda = -c0 / c1
  EXPECT_LT(std::abs(ej.d_eig_d_coeff(0, 0) - cplx(-1.0)), 1e-10);
  EXPECT_LT(std::abs(ej.d_eig_d_coeff(0, 1) - (-a)), 1e-10);
}

TEST(EigenvalueJacobian, QuadraticAgainstFiniteDifferences) {
  const ComplexPoly p({-1.0, 0.0, 1.0});
  const EigenJacobian ej = eigenvalue_jacobian(p);
  const Eigen::MatrixXcd fd = root_jacobian_fd(p, ej.eigenvalues, 1e-6);
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_LT(relative_error(ej.d_eig_d_coeff(i, k), fd(i, k), 1e-8), 1e-6)
          << i << "," << k;
    }
  }
}

// Second route: implicit differentiation of p(lambda) = 0 gives
// d lambda / d y_k = -lambda^k / p'(lambda).
TEST(EigenvalueJacobian, MatchesImplicitDifferentiation) {
  Stream rng = make_stream(8);
  for (int t = 0; t < 100; ++t) {
    const ComplexPoly p = testing::random_poly(2 + static_cast<int>(rng() % 9), rng);
    const EigenJacobian ej = eigenvalue_jacobian(p);
    for (int i = 0; i < p.degree(); ++i) {
      const cplx lam = ej.eigenvalues[i];
      const cplx dp = eval_poly_with_derivative(p, lam).second;
      double scale = 0.0;
      for (int k = 0; k <= p.degree(); ++k) scale = std::max(scale, std::abs(std::pow(lam, k) / dp));
      for (int k = 0; k <= p.degree(); ++k) {
        EXPECT_LT(std::abs(ej.d_eig_d_coeff(i, k) + std::pow(lam, k) / dp), 1e-8 * scale);
      }
    }
  }
}

TEST(EigenvalueJacobian, RandomBmoczAgainstFiniteDifferences) {
  Stream rng = make_stream(99);
  const Constellation c = Constellation::canonical(7, 0.5);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    ComplexPoly p = encode(testing::random_message(7, rng), c);
    for (cplx& v : p.coeffs) v += rng.complex_normal(0.05);
    const EigenJacobian ej = eigenvalue_jacobian(p);
    if (min_pairwise_gap(ej.eigenvalues) < 1e-2) continue;
    const Eigen::MatrixXcd fd = root_jacobian_fd(p, ej.eigenvalues, 1e-6);
    const double scale = fd.cwiseAbs().maxCoeff();
    for (int i = 0; i < 7; ++i) {
      for (int k = 0; k <= 7; ++k) {
        EXPECT_LT(std::abs(ej.d_eig_d_coeff(i, k) - fd(i, k)),
                  1e-4 * std::max(std::abs(fd(i, k)), 1e-3 * scale));
      }
    }
    ++checked;
  }
  EXPECT_GT(checked, 80);
}

TEST(EigenvalueJacobian, RefusesRepeatedEigenvalues) {
  const ComplexPoly p = poly_from_zeros(std::vector<cplx>{1.0, 1.0, -2.0});
  EXPECT_THROW(eigenvalue_jacobian(p), DegenerateSpectrum);
}

}  // namespace
}  // namespace zeroforge
