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
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeroforge/channel.hpp"
#include "zeroforge/constellation.hpp"
#include "zeroforge/csv.hpp"
#include "zeroforge/decoders.hpp"
#include "zeroforge/errors.hpp"
#include "zeroforge/poly.hpp"
#include "zeroforge/random.hpp"

namespace zeroforge {

// A constellation plus its decoder: DiZeT, or the NN when mlp is set.
struct Scheme {
  std::string name;
  Constellation constellation;
  std::optional<MlpParams> mlp;

  int k() const { return constellation.k(); }
  std::string decoder_kind() const { return mlp ? "nn" : "dizet"; }

  void validate() const {
    if (mlp) {
      mlp->validate();
      if (mlp->k != constellation.k()) {
        throw InvalidArgument("scheme '" + name + "': MLP K " + std::to_string(mlp->k) +
                              " != constellation K " + std::to_string(constellation.k()));
      }
    }
  }
};

struct StopRule {
  long min_block_errors = 200;
  long max_trials = 2'000'000;
  // The stop condition is checked between chunks, so results do not depend
  // on the thread count.
  long chunk = 4096;

  void validate() const {
    if (min_block_errors < 1) throw InvalidArgument("StopRule.min_block_errors: must be >= 1");
    if (max_trials < 1) throw InvalidArgument("StopRule.max_trials: must be >= 1");
    if (chunk < 1) throw InvalidArgument("StopRule.chunk: must be >= 1");
  }
};

struct SweepOptions {
  ChannelKind channel = ChannelKind::kAwgn;
  bool ofdm = false;
  int idft_size = 32;
  StopRule stop;
  int threads = 1;
  std::uint64_t seed = 0;
  // Stop the grid after the first point whose BLER falls below this.
  double bler_floor = 0.0;
  // Applied to every received block before decoding.
  cplx rx_scale{1.0, 0.0};
};

struct SweepPoint {
  double ebn0_db = 0.0;
  long trials = 0;
  long bit_errors = 0;
  long block_errors = 0;
  long decoder_failures = 0;
  double ber = 0.0;
  double bler = 0.0;
  double ci_ber = 0.0;   // 95% half-widths
  double ci_bler = 0.0;
};

struct SweepResult {
  std::string scheme;
  std::string decoder;
  int k = 0;
  ChannelKind channel = ChannelKind::kAwgn;
  std::uint64_t seed = 0;
  std::vector<SweepPoint> points;
};

// Half-width of the Wilson score interval at 95% confidence.
inline double wilson_half_width(long successes, long n) {
  if (n <= 0) return 0.0;
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  return z / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
}

namespace detail {

struct Tally {
  long bit_errors = 0;
  long block_errors = 0;
  long failures = 0;
};

inline std::vector<ComplexPoly> codebook(const Constellation& c) {
  const int k = c.k();
  if (k > 16) return {};
  std::vector<ComplexPoly> book;
  book.reserve(std::size_t{1} << k);
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << k); ++m) {
    book.push_back(encode(message_from_index(m, k), c));
  }
  return book;
}

inline BitMessage draw_message(int k, Stream& rng) {
  BitMessage b(k);
  for (int i = 0; i < k; ++i) b[i] = rng.uniform() < 0.5 ? 1 : 0;
  return b;
}

// Simulates trials [begin, end) of one grid point; trial t uses its own
// stream keyed by (seed, point, t).
inline Tally run_trials(const Scheme& s, const std::vector<ComplexPoly>& book,
                        const SweepOptions& opt, std::size_t point, double noise_var,
                        long begin, long end) {
  const int k = s.k();
  const std::optional<SubcarrierMap> map =
      opt.ofdm ? std::optional<SubcarrierMap>(SubcarrierMap(opt.idft_size, k + 1))
               : std::nullopt;
  Tally tally;
  std::vector<BitMessage> sent;
  std::vector<ComplexPoly> received;
  sent.reserve(end - begin);
  received.reserve(end - begin);
  for (long t = begin; t < end; ++t) {
    Stream rng = make_stream(opt.seed, 3, point, static_cast<std::uint64_t>(t));
    BitMessage bits = draw_message(k, rng);
    const ComplexPoly x = book.empty() ? encode(bits, s.constellation)
                                       : book[message_index(bits)];
    ComplexPoly y = map ? ofdm_transmit(x, opt.channel, noise_var, *map, rng)
                        : coefficient_channel(x, opt.channel, noise_var, rng);
    if (opt.rx_scale != cplx(1.0, 0.0)) y = scaled(y, opt.rx_scale);
    sent.push_back(std::move(bits));
    received.push_back(std::move(y));
  }
  auto score = [&](const BitMessage& want, const BitMessage& got) {
    int errs = 0;
    for (int i = 0; i < k; ++i) errs += want[i] != got[i];
    tally.bit_errors += errs;
    tally.block_errors += errs > 0;
  };
  if (s.mlp) {
    constexpr std::size_t kBatch = 512;
    for (std::size_t i = 0; i < received.size(); i += kBatch) {
      const std::size_t n = std::min(kBatch, received.size() - i);
      const BatchDecode d =
          nn_decode_batch<float>(std::span(received).subspan(i, n), *s.mlp);
      for (std::size_t j = 0; j < n; ++j) {
        if (d.failed[j]) {
          ++tally.failures;
          ++tally.block_errors;
          for (int b = 0; b < k; ++b) tally.bit_errors += sent[i + j][b] != 0;
        } else {
          score(sent[i + j], d.bits[j]);
        }
      }
    }
  } else {
    for (std::size_t i = 0; i < received.size(); ++i) {
      score(sent[i], dizet_decode(received[i], s.constellation));
    }
  }
  return tally;
}

inline Tally run_chunk(const Scheme& s, const std::vector<ComplexPoly>& book,
                       const SweepOptions& opt, std::size_t point, double noise_var,
                       long begin, long end) {
  const int threads = std::max(1, opt.threads);
  if (threads == 1 || end - begin < 2 * threads) {
    return run_trials(s, book, opt, point, noise_var, begin, end);
  }
  std::vector<Tally> parts(threads);
  std::vector<std::thread> pool;
  const long span = end - begin;
  for (int i = 0; i < threads; ++i) {
    const long b = begin + span * i / threads;
    const long e = begin + span * (i + 1) / threads;
    pool.emplace_back([&, i, b, e] { parts[i] = run_trials(s, book, opt, point, noise_var, b, e); });
  }
  for (std::thread& t : pool) t.join();
  Tally sum;
  for (const Tally& p : parts) {
    sum.bit_errors += p.bit_errors;
    sum.block_errors += p.block_errors;
    sum.failures += p.failures;
  }
  return sum;
}

}  // namespace detail

inline SweepPoint make_point(double ebn0_db, int k, long trials, long bit_errors,
                             long block_errors, long failures) {
  SweepPoint p;
  p.ebn0_db = ebn0_db;
  p.trials = trials;
  p.bit_errors = bit_errors;
  p.block_errors = block_errors;
  p.decoder_failures = failures;
  if (trials > 0) {
    p.ber = static_cast<double>(bit_errors) / (static_cast<double>(trials) * k);
    p.bler = static_cast<double>(block_errors) / static_cast<double>(trials);
    p.ci_ber = wilson_half_width(bit_errors, trials * k);
    p.ci_bler = wilson_half_width(block_errors, trials);
  }
  return p;
}

// Simulates each Eb/N0 point (infinity means noiseless) until
// stop.min_block_errors block errors or stop.max_trials trials.
inline SweepResult run_sweep(const Scheme& scheme, const std::vector<double>& ebn0_grid,
                             const SweepOptions& opt) {
  scheme.validate();
  opt.stop.validate();
  if (ebn0_grid.empty()) throw InvalidArgument("run_sweep: empty Eb/N0 grid");
  if (opt.ofdm && opt.idft_size < scheme.k() + 1) {
    throw InvalidArgument("run_sweep: idft_size must be >= K+1");
  }
  if (opt.rx_scale == cplx(0.0, 0.0)) throw InvalidArgument("run_sweep: rx_scale is zero");
  const int k = scheme.k();
  const std::vector<ComplexPoly> book = detail::codebook(scheme.constellation);
  SweepResult res{scheme.name, scheme.decoder_kind(), k, opt.channel, opt.seed, {}};
  for (std::size_t pi = 0; pi < ebn0_grid.size(); ++pi) {
    const double ebn0 = ebn0_grid[pi];
    const double noise_var = std::isinf(ebn0) && ebn0 > 0 ? 0.0 : ebn0_to_noise_var(ebn0, k);
    long trials = 0;
    detail::Tally total;
    while (trials < opt.stop.max_trials && total.block_errors < opt.stop.min_block_errors) {
      const long end = std::min(opt.stop.max_trials, trials + opt.stop.chunk);
      const detail::Tally t = detail::run_chunk(scheme, book, opt, pi, noise_var, trials, end);
      total.bit_errors += t.bit_errors;
      total.block_errors += t.block_errors;
      total.failures += t.failures;
      trials = end;
    }
    res.points.push_back(
        make_point(ebn0, k, trials, total.bit_errors, total.block_errors, total.failures));
    if (res.points.back().bler < opt.bler_floor) break;
  }
  return res;
}

inline std::string sweep_csv_header() {
  return "scheme,K,channel,ebn0_db,trials,bit_errors,block_errors,ber,bler,ci_ber,ci_bler\n";
}

inline std::string sweep_csv_rows(const SweepResult& r) {
  std::ostringstream os;
  for (const SweepPoint& p : r.points) {
    os << r.scheme << ',' << r.k << ',' << to_string(r.channel) << ',' << shortest(p.ebn0_db)
       << ',' << p.trials << ',' << p.bit_errors << ',' << p.block_errors << ','
       << shortest(p.ber) << ',' << shortest(p.bler) << ',' << shortest(p.ci_ber) << ','
       << shortest(p.ci_bler) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Relative gain

struct GainEntry {
  std::string scheme;
  double ebn0_at_target = 0.0;
  double gain_db = 0.0;
};

struct GainReport {
  double target_bler = 0.0;
  std::string baseline;
  std::vector<GainEntry> entries;

  const GainEntry& at(const std::string& scheme) const {
    for (const GainEntry& e : entries) {
      if (e.scheme == scheme) return e;
    }
    throw InvalidArgument("GainReport: no scheme '" + scheme + "'");
  }
};

// Eb/N0 where the BLER curve first crosses target, interpolated linearly in
// dB against log10(BLER).
inline double ebn0_at_bler(const SweepResult& r, double target) {
  if (!(target > 0.0 && target < 1.0)) {
    throw InvalidArgument("ebn0_at_bler: target must be in (0, 1)");
  }
  const auto& pts = r.points;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const SweepPoint& a = pts[i];
    const SweepPoint& b = pts[i + 1];
    if (a.bler >= target && b.bler <= target && a.bler > 0.0 && b.bler > 0.0) {
      if (a.bler == b.bler) return a.ebn0_db;
      const double la = std::log10(a.bler);
      const double lb = std::log10(b.bler);
      const double f = (std::log10(target) - la) / (lb - la);
      return a.ebn0_db + f * (b.ebn0_db - a.ebn0_db);
    }
  }
  throw NotBracketed("scheme '" + r.scheme + "': BLER curve does not cross " +
                     std::to_string(target));
}

inline GainReport measure_gain(const std::vector<SweepResult>& results, double target_bler,
                               const std::string& baseline) {
  const SweepResult* base = nullptr;
  for (const SweepResult& r : results) {
    if (r.scheme == baseline) base = &r;
  }
  if (base == nullptr) throw InvalidArgument("measure_gain: no baseline '" + baseline + "'");
  GainReport rep{target_bler, baseline, {}};
  const double base_db = ebn0_at_bler(*base, target_bler);
  for (const SweepResult& r : results) {
    const double db = &r == base ? base_db : ebn0_at_bler(r, target_bler);
    rep.entries.push_back({r.scheme, db, base_db - db});
  }
  return rep;
}

inline nlohmann::json to_json(const GainReport& g) {
  nlohmann::json entries = nlohmann::json::array();
  for (const GainEntry& e : g.entries) {
    entries.push_back(
        {{"scheme", e.scheme}, {"ebn0_db_at_target", e.ebn0_at_target}, {"gain_db", e.gain_db}});
  }
  return {{"target_bler", g.target_bler}, {"baseline", g.baseline}, {"schemes", entries}};
}

// ---------------------------------------------------------------------------
// Decoded-message histogram

struct ClassHistogram {
  int k = 0;
  std::vector<long> transmitted;  // indexed by message_index; class = index + 1
  std::vector<long> decoded;
  long failures = 0;

  double share(std::uint64_t index) const {
    long n = 0;
    for (long c : decoded) n += c;
    return n > 0 ? static_cast<double>(decoded[index]) / n : 0.0;
  }
};

inline constexpr int kMaxHistogramK = 8;

// Decodes n uniformly drawn messages at one Eb/N0 (infinity means noiseless).
inline ClassHistogram class_histogram(const Scheme& scheme, ChannelKind channel,
                                      double ebn0_db, long n_decodes, std::uint64_t seed) {
  scheme.validate();
  const int k = scheme.k();
  if (k > kMaxHistogramK) {
    throw InvalidArgument("class_histogram: K = " + std::to_string(k) +
                          " exceeds the supported maximum of " +
                          std::to_string(kMaxHistogramK));
  }
  if (n_decodes < 0) throw InvalidArgument("class_histogram: negative count");
  const double noise_var =
      std::isinf(ebn0_db) && ebn0_db > 0 ? 0.0 : ebn0_to_noise_var(ebn0_db, k);
  const std::vector<ComplexPoly> book = detail::codebook(scheme.constellation);
  ClassHistogram h{k, std::vector<long>(book.size(), 0), std::vector<long>(book.size(), 0), 0};
  std::vector<ComplexPoly> received;
  received.reserve(n_decodes);
  for (long t = 0; t < n_decodes; ++t) {
    Stream rng = make_stream(seed, 4, static_cast<std::uint64_t>(t));
    const BitMessage bits = detail::draw_message(k, rng);
    ++h.transmitted[message_index(bits)];
    received.push_back(coefficient_channel(book[message_index(bits)], channel, noise_var, rng));
  }
  if (scheme.mlp) {
    constexpr std::size_t kBatch = 4096;
    for (std::size_t i = 0; i < received.size(); i += kBatch) {
      const std::size_t n = std::min(kBatch, received.size() - i);
      const BatchDecode d = nn_decode_batch<float>(std::span(received).subspan(i, n), *scheme.mlp);
      for (std::size_t j = 0; j < n; ++j) {
        h.failures += d.failed[j];
        ++h.decoded[message_index(d.bits[j])];
      }
    }
  } else {
    for (const ComplexPoly& y : received) {
      ++h.decoded[message_index(dizet_decode(y, scheme.constellation))];
    }
  }
  return h;
}

inline std::string histogram_csv(const std::vector<std::pair<std::string, ClassHistogram>>& hs) {
  std::ostringstream os;
  os << "decoder,class,bits,transmitted,decoded\n";
  for (const auto& [name, h] : hs) {
    for (std::size_t i = 0; i < h.decoded.size(); ++i) {
      std::string bits;
      for (int b = 0; b < h.k; ++b) bits += ((i >> b) & 1U) ? '1' : '0';
      os << name << ',' << i + 1 << ',' << bits << ',' << h.transmitted[i] << ','
         << h.decoded[i] << '\n';
    }
  }
  return os.str();
}

}  // namespace zeroforge
