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
#include "zeroforge/random.hpp"

namespace zeroforge {

enum class ChannelKind { kAwgn, kFlatFading };

inline std::string to_string(ChannelKind k) {
  return k == ChannelKind::kAwgn ? "awgn" : "flat_fading";
}

inline ChannelKind channel_kind_from_string(const std::string& s) {
  if (s == "awgn") return ChannelKind::kAwgn;
  if (s == "flat_fading" || s == "fading") return ChannelKind::kFlatFading;
  throw InvalidArgument("unknown channel kind '" + s + "'");
}

struct ChannelConfig {
  ChannelKind kind = ChannelKind::kAwgn;
  double ebn0_db = 10.0;
  int k = 7;
  int idft_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw InvalidArgument("ChannelConfig: K must be >= 1");
    if (idft_size < k + 1) {
      throw InvalidArgument("ChannelConfig: idft_size must be >= K+1");
    }
  }
};

// Per-coefficient complex noise variance for a block of energy K+1 carrying
// K bits: sigma^2 = (K+1) / (K * 10^(EbN0/10)).
inline double ebn0_to_noise_var(double ebn0_db, int k) {
  if (k < 1) throw InvalidArgument("ebn0_to_noise_var: K must be >= 1");
  return (k + 1.0) / (k * std::pow(10.0, ebn0_db / 10.0));
}

inline ComplexPoly apply_awgn(const ComplexPoly& x, double noise_var, Stream& rng) {
  if (noise_var < 0.0) throw InvalidArgument("apply_awgn: negative variance");
  ComplexPoly y = x;
  if (noise_var == 0.0) return y;
  for (cplx& c : y.coeffs) c += rng.complex_normal(noise_var);
  return y;
}

struct FadedBlock {
  ComplexPoly y;
  cplx h;
};

// y = h x + w with one h ~ CN(0, 1) per block.
inline FadedBlock apply_flat_fading_with_gain(const ComplexPoly& x,
                                              double noise_var, Stream& rng) {
  if (noise_var < 0.0) throw InvalidArgument("apply_flat_fading: negative variance");
  const cplx h = rng.complex_normal(1.0);
  ComplexPoly y = scaled(x, h);
  if (noise_var > 0.0) {
    for (cplx& c : y.coeffs) c += rng.complex_normal(noise_var);
  }
  return {std::move(y), h};
}

inline ComplexPoly apply_flat_fading(const ComplexPoly& x, double noise_var,
                                     Stream& rng) {
  return apply_flat_fading_with_gain(x, noise_var, rng).y;
}

// Unitary DFT of size N restricted to the first `active` bins.
class SubcarrierMap {
 public:
  SubcarrierMap(int n, int active) : n_(n), active_(active), twiddle_(n) {
    if (active > n) throw InvalidArgument("SubcarrierMap: too many active bins");
    for (int i = 0; i < n; ++i) {
      twiddle_[i] = std::polar(1.0, 2.0 * std::numbers::pi * i / n);
    }
  }

  int size() const { return n_; }
  int active() const { return active_; }

  // Active bins -> N time samples.
  std::vector<cplx> to_time(std::span<const cplx> bins) const {
    const double s = 1.0 / std::sqrt(static_cast<double>(n_));
    std::vector<cplx> t(n_, cplx(0.0));
    for (int m = 0; m < n_; ++m) {
      cplx acc = 0.0;
      for (int k = 0; k < active_; ++k) acc += bins[k] * twiddle_[(k * m) % n_];
      t[m] = s * acc;
    }
    return t;
  }

  // N time samples -> active bins.
  std::vector<cplx> to_bins(std::span<const cplx> time) const {
    const double s = 1.0 / std::sqrt(static_cast<double>(n_));
    std::vector<cplx> b(active_, cplx(0.0));
    for (int k = 0; k < active_; ++k) {
      cplx acc = 0.0;
      for (int m = 0; m < n_; ++m) acc += time[m] * std::conj(twiddle_[(k * m) % n_]);
      b[k] = s * acc;
    }
    return b;
  }

 private:
  int n_;
  int active_;
  std::vector<cplx> twiddle_;
};

// Frequency-mapped transmission: coefficients occupy the first K+1 bins of a
// unitary IDFT, the time-domain block passes the channel (block gain h for
// flat fading, CN(0, sigma^2) per sample), and the receiver demaps the same
// bins. With a unitary transform the demapped noise per coefficient is
// CN(0, sigma^2).
inline ComplexPoly ofdm_transmit(const ComplexPoly& x, ChannelKind kind,
                                 double noise_var, const SubcarrierMap& map,
                                 Stream& rng) {
  if (map.active() != x.degree() + 1) {
    throw InvalidArgument("ofdm_transmit: map must have K+1 active bins");
  }
  if (noise_var < 0.0) throw InvalidArgument("ofdm_transmit: negative variance");
  std::vector<cplx> t = map.to_time(x.coeffs);
  if (kind == ChannelKind::kFlatFading) {
    const cplx h = rng.complex_normal(1.0);
    for (cplx& v : t) v *= h;
  }
  if (noise_var > 0.0) {
    for (cplx& v : t) v += rng.complex_normal(noise_var);
  }
  return ComplexPoly(map.to_bins(t));
}

inline ComplexPoly ofdm_path(const ComplexPoly& x, const ChannelConfig& cfg,
                             Stream& rng) {
  if (cfg.idft_size < x.degree() + 1) {
    throw InvalidArgument("ofdm_path: idft_size must be >= K+1");
  }
  const SubcarrierMap map(cfg.idft_size, x.degree() + 1);
  return ofdm_transmit(x, cfg.kind, ebn0_to_noise_var(cfg.ebn0_db, x.degree()),
                       map, rng);
}

// Same channel without the frequency map, with an explicit noise variance
// (noise_var = 0 gives the noiseless channel).
inline ComplexPoly coefficient_channel(const ComplexPoly& x, ChannelKind kind,
                                       double noise_var, Stream& rng) {
  return kind == ChannelKind::kAwgn ? apply_awgn(x, noise_var, rng)
                                    : apply_flat_fading(x, noise_var, rng);
}

}  // namespace zeroforge
