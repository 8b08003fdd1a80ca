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
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "zeroforge/constellation.hpp"
#include "zeroforge/poly.hpp"
#include "zeroforge/random.hpp"

namespace zeroforge::testing {

// Greedy nearest-neighbour matching of two multisets. Returns the largest
// matched distance (infinity on size mismatch).
inline double multiset_distance(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> taken(b.size(), false);
  double worst = 0.0;
  for (const cplx& x : a) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (taken[j]) continue;
      const double d = std::abs(x - b[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    taken[best_j] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

// Index of the element of `pool` closest to z.
inline std::size_t nearest(std::span<const cplx> pool, cplx z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (std::abs(pool[i] - z) < std::abs(pool[best] - z)) best = i;
  }
  return best;
}

inline BitMessage random_message(int k, Stream& rng) {
  BitMessage b(k);
  for (int i = 0; i < k; ++i) b[i] = static_cast<std::uint8_t>(rng() & 1U);
  return b;
}

inline ComplexPoly random_poly(int degree, Stream& rng) {
  std::vector<cplx> c(degree + 1);
  for (cplx& v : c) v = rng.complex_normal(2.0);
  if (std::abs(c.back()) < 0.1) c.back() += 1.0;
  return ComplexPoly(std::move(c));
}

inline double relative_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double relative_error(cplx a, cplx b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace zeroforge::testing
