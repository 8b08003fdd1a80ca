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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "zeroforge/errors.hpp"
#include "zeroforge/poly.hpp"

namespace zeroforge {

// K bits, each 0 or 1. Bit k selects the magnitude of zero k.
using BitMessage = std::vector<std::uint8_t>;

// Bits of `index` with b_k = (index >> k) & 1.
inline BitMessage message_from_index(std::uint64_t index, int k) {
  BitMessage b(k);
  for (int i = 0; i < k; ++i) b[i] = static_cast<std::uint8_t>((index >> i) & 1U);
  return b;
}

inline std::uint64_t message_index(std::span<const std::uint8_t> bits) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) v |= (std::uint64_t{1} << i);
  }
  return v;
}

inline double wrap_phase(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta, two_pi);
  if (t < 0.0) t += two_pi;
  if (t >= two_pi) t = 0.0;
  return t;
}

// Radius that trades radial against angular zero separation, weighted by
// lambda: sqrt(1 + 2 lambda sin(pi / K)).
inline double dizet_radius(int k, double lambda) {
  if (k < 2) throw InvalidArgument("dizet_radius: K must be at least 2");
  if (!(lambda > 0.0)) throw InvalidArgument("dizet_radius: lambda must be > 0");
  return std::sqrt(1.0 + 2.0 * lambda * std::sin(std::numbers::pi / k));
}

inline std::vector<double> uniform_phases(int k) {
  std::vector<double> th(k);
  for (int i = 0; i < k; ++i) th[i] = 2.0 * std::numbers::pi * i / k;
  return th;
}

// Zero constellation {R, theta}: zero k sits at R e^{j theta_k} for a one bit
// and at R^{-1} e^{j theta_k} for a zero bit.
class Constellation {
 public:
  Constellation(double radius, std::vector<double> phases)
      : radius_(radius), phases_(std::move(phases)) {
    if (phases_.empty()) throw InvalidArgument("Constellation: K must be >= 1");
    if (!(radius_ > 1.0) || !std::isfinite(radius_)) {
      throw InvalidArgument("Constellation: radius must be finite and > 1");
    }
    for (double& t : phases_) {
      if (!std::isfinite(t)) throw InvalidArgument("Constellation: phase not finite");
      t = wrap_phase(t);
    }
    if (min_phase_gap() <= 1e-6) {
      throw InvalidArgument("Constellation: phases must be distinct mod 2pi");
    }
  }

  static Constellation canonical(int k, double lambda) {
    if (k == 1) return Constellation(std::sqrt(1.0 + 2.0 * lambda), {0.0});
    return Constellation(dizet_radius(k, lambda), uniform_phases(k));
  }

  int k() const { return static_cast<int>(phases_.size()); }
  double radius() const { return radius_; }
  const std::vector<double>& phases() const { return phases_; }

  cplx outer_zero(int i) const { return std::polar(radius_, phases_[i]); }
  cplx inner_zero(int i) const { return std::polar(1.0 / radius_, phases_[i]); }

  // Smallest circular distance between any two phases.
  double min_phase_gap() const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double gap = two_pi;
    for (std::size_t i = 0; i < phases_.size(); ++i) {
      for (std::size_t j = i + 1; j < phases_.size(); ++j) {
        double d = std::abs(phases_[i] - phases_[j]);
        d = std::min(d, two_pi - d);
        gap = std::min(gap, d);
      }
    }
    return gap;
  }

  bool operator==(const Constellation&) const = default;

 private:
  double radius_;
  std::vector<double> phases_;
};

inline ZeroPattern bits_to_zeros(std::span<const std::uint8_t> bits,
                                 const Constellation& c) {
  if (static_cast<int>(bits.size()) != c.k()) {
    throw InvalidArgument("bits_to_zeros: message length " +
                          std::to_string(bits.size()) + " != K " +
                          std::to_string(c.k()));
  }
  ZeroPattern z(bits.size());
  for (int i = 0; i < c.k(); ++i) {
    z[i] = bits[i] ? c.outer_zero(i) : c.inner_zero(i);
  }
  return z;
}

// Monic polynomial through the message's zeros, scaled to energy K+1.
inline ComplexPoly encode(std::span<const std::uint8_t> bits,
                          const Constellation& c) {
  const ZeroPattern z = bits_to_zeros(bits, c);
  return normalize_energy(poly_from_zeros(z, 1.0), c.k() + 1.0);
}

// Learnable radius parameterization R = sqrt(1 + softplus(rho)), R > 1 for
// every finite rho.
inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double radius_from_rho(double rho) { return std::sqrt(1.0 + softplus(rho)); }

// dR/drho
inline double radius_rho_derivative(double rho) {
  const double sig = 1.0 / (1.0 + std::exp(-rho));
  return sig / (2.0 * radius_from_rho(rho));
}

inline double rho_from_radius(double radius) {
  if (!(radius > 1.0)) throw InvalidArgument("rho_from_radius: radius must be > 1");
  const double sp = radius * radius - 1.0;
  // inverse softplus
  return sp > 30.0 ? sp : std::log(std::expm1(sp));
}

}  // namespace zeroforge
