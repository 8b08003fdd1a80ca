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

// zeroforge command-line interface: training, simulation, histograms and
// gradient checks. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zeroforge/gradcheck.hpp"
#include "zeroforge/io.hpp"
#include "zeroforge/montecarlo.hpp"
#include "zeroforge/training.hpp"

#ifndef ZEROFORGE_VERSION
#define ZEROFORGE_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace zeroforge {
namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int threads = 1;
  bool deterministic = false;

  int thread_count() const { return deterministic ? 1 : std::max(1, threads); }
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const CommonOptions& opt)
      : command_(std::move(command)), out_(opt.out), started_(utc_now()) {}

  void set_config(Json config, std::uint64_t seed) {
    config_ = std::move(config);
    seed_ = seed;
  }

  fs::path output(const std::string& name) {
    const fs::path p = out_ / name;
    outputs_.push_back(p.string());
    return p;
  }

  void write() const {
    for (const std::string& p : outputs_) {
      if (!fs::exists(p)) throw std::runtime_error("missing artifact " + p);
    }
    write_json_file(out_ / "manifest.json",
                    Json{{"command", command_},
                         {"config", config_},
                         {"seed", seed_},
                         {"code_version", ZEROFORGE_VERSION},
                         {"started", started_},
                         {"finished", utc_now()},
                         {"outputs", outputs_}});
  }

 private:
  std::string command_;
  fs::path out_;
  std::string started_;
  Json config_ = Json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::string> outputs_;
};

Json load_config(const CommonOptions& opt) {
  return opt.config.empty() ? Json::object() : read_json_file(opt.config);
}

fs::path resolve(const CommonOptions& opt, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || opt.config.empty()) return path;
  return fs::path(opt.config).parent_path() / path;
}

ProgressFn log_progress(int every) {
  return [every](int stage, const TracePoint& t) {
    if ((t.epoch + 1) % every == 0) {
      spdlog::debug("stage {} epoch {} lr {:.3g} loss {:.6g}", stage, t.epoch + 1, t.lr,
                    t.mean_loss);
    }
  };
}

// ---------------------------------------------------------------------------

int train_dizet_cmd(const CommonOptions& opt) {
  Json j = load_config(opt);
  if (opt.seed) j["seed"] = *opt.seed;
  const TrainConfig cfg = train_config_from_json(j, false);
  Manifest m("train-dizet", opt);
  m.set_config(to_json(cfg), cfg.seed);
  spdlog::info("train-dizet: K={} B={} epochs={} Eb/N0={} dB", cfg.k, cfg.batch_size,
               cfg.n_epoch, cfg.ebn0_db);
  const DizetTrainResult r = train_dizet(cfg, log_progress(1000));
  spdlog::info("learned radius {:.6f}", r.constellation.radius());
  save_constellation(m.output("constellation.json"), r.constellation);
  write_text_file(m.output("loss.csv"), trace_csv(r.trace));
  m.write();
  return 0;
}

int train_nn_cmd(const CommonOptions& opt) {
  Json j = load_config(opt);
  if (opt.seed) j["seed"] = *opt.seed;
  const TrainConfig cfg = train_config_from_json(j, true);
  Manifest m("train-nn", opt);
  m.set_config(to_json(cfg), cfg.seed);
  spdlog::info("train-nn: K={} L={} epochs per stage={}", cfg.k, cfg.l_hidden, cfg.n_epoch);
  spdlog::info("stage 1: joint training at {} dB", cfg.ebn0_db);
  int last_stage = 1;
  const ProgressFn inner = log_progress(1000);
  const NnTrainResult<float> r = train_nn<float>(cfg, [&](int stage, const TracePoint& t) {
    if (stage != last_stage) {
      spdlog::info("stage 2: decoder only at {} dB, constellation frozen", cfg.ebn0_db_stage2);
      last_stage = stage;
    }
    inner(stage, t);
  });
  spdlog::info("learned radius {:.6f}; {} degenerate samples skipped",
               r.constellation.radius(), r.skipped);
  save_constellation(m.output("constellation.json"), r.constellation);
  save_mlp(m.output("mlp.json"), r.mlp);
  write_text_file(m.output("loss_stage1.csv"), trace_csv(r.stage1));
  write_text_file(m.output("loss_stage2.csv"), trace_csv(r.stage2));
  m.write();
  return 0;
}

// A scheme entry is {"name", "lambda"} for a canonical constellation or
// {"name", "constellation"[, "mlp"]} for checkpoints.
Scheme load_scheme(const Json& s, int k, const CommonOptions& opt, const std::string& where) {
  detail::require_object(s, where);
  detail::reject_unknown(s, where, {"name", "lambda", "constellation", "mlp"});
  Scheme out{detail::get_field<std::string>(s, where, "name"),
             Constellation::canonical(std::max(k, 1), 0.5), std::nullopt};
  if (s.contains("lambda") == s.contains("constellation")) {
    throw InvalidArgument(where + ": give exactly one of lambda or constellation");
  }
  if (s.contains("lambda")) {
    if (s.contains("mlp")) throw InvalidArgument(where + ".mlp: needs a constellation");
    const double lambda = detail::get_field<double>(s, where, "lambda");
    if (!(lambda > 0.0)) throw InvalidArgument(where + ".lambda: must be > 0");
    out.constellation = Constellation::canonical(k, lambda);
  } else {
    out.constellation =
        load_constellation(resolve(opt, detail::get_field<std::string>(s, where, "constellation")));
    if (out.constellation.k() != k) {
      throw InvalidArgument(where + ".constellation: checkpoint K " +
                            std::to_string(out.constellation.k()) + " != config K " +
                            std::to_string(k));
    }
    if (s.contains("mlp")) {
      out.mlp = load_mlp(resolve(opt, detail::get_field<std::string>(s, where, "mlp")));
      if (out.mlp->k != k) {
        throw InvalidArgument(where + ".mlp: checkpoint K " + std::to_string(out.mlp->k) +
                              " != config K " + std::to_string(k));
      }
    }
  }
  return out;
}

std::vector<double> load_grid(const Json& j, const std::string& where) {
  if (j.is_array()) return j.get<std::vector<double>>();
  detail::require_object(j, where);
  const double a = detail::get_field<double>(j, where, "start");
  const double b = detail::get_field<double>(j, where, "stop");
  const double step = detail::get_field<double>(j, where, "step");
  if (!(step > 0.0) || b < a) throw InvalidArgument(where + ": need start <= stop and step > 0");
  std::vector<double> g;
  for (int i = 0; a + i * step <= b + 1e-9; ++i) g.push_back(a + i * step);
  return g;
}

int simulate_cmd(const CommonOptions& opt) {
  Json j = load_config(opt);
  const std::string w = "SimulateConfig";
  detail::require_object(j, w);
  detail::reject_unknown(j, w, {"K", "ebn0_db", "channels", "schemes", "baseline",
                                "target_bler", "min_block_errors", "max_trials", "chunk",
                                "bler_floor", "ofdm", "idft_size", "seed"});
  if (opt.seed) j["seed"] = *opt.seed;
  const int k = detail::get_field<int>(j, w, "K");
  if (k < 1) throw InvalidArgument(w + ".K: must be >= 1");
  const std::vector<double> grid =
      j.contains("ebn0_db") ? load_grid(j["ebn0_db"], w + ".ebn0_db")
                            : load_grid(Json{{"start", 0}, {"stop", 16}, {"step", 1}}, w);
  if (grid.empty()) throw InvalidArgument(w + ".ebn0_db: empty grid");
  std::vector<std::string> channel_names{"awgn"};
  detail::read_optional(j, w, "channels", channel_names);
  if (channel_names.empty()) throw InvalidArgument(w + ".channels: empty");
  std::vector<ChannelKind> channels;
  for (const std::string& c : channel_names) channels.push_back(channel_kind_from_string(c));

  if (!j.contains("schemes") || !j["schemes"].is_array() || j["schemes"].empty()) {
    throw InvalidArgument(w + ".schemes: at least one scheme is required");
  }
  std::vector<Scheme> schemes;
  for (std::size_t i = 0; i < j["schemes"].size(); ++i) {
    schemes.push_back(load_scheme(j["schemes"][i], k, opt, w + ".schemes[" + std::to_string(i) + "]"));
  }
  std::string baseline = "baseline";
  double target = 1e-3;
  SweepOptions so;
  so.threads = opt.thread_count();
  detail::read_optional(j, w, "baseline", baseline);
  detail::read_optional(j, w, "target_bler", target);
  detail::read_optional(j, w, "min_block_errors", so.stop.min_block_errors);
  detail::read_optional(j, w, "max_trials", so.stop.max_trials);
  detail::read_optional(j, w, "chunk", so.stop.chunk);
  detail::read_optional(j, w, "bler_floor", so.bler_floor);
  detail::read_optional(j, w, "ofdm", so.ofdm);
  detail::read_optional(j, w, "idft_size", so.idft_size);
  detail::read_optional(j, w, "seed", so.seed);
  so.stop.validate();
  if (!(target > 0.0 && target < 1.0)) throw InvalidArgument(w + ".target_bler: must be in (0, 1)");
  bool has_baseline = false;
  for (const Scheme& s : schemes) has_baseline |= s.name == baseline;
  if (!has_baseline) throw InvalidArgument(w + ".baseline: no scheme named '" + baseline + "'");

  Manifest m("simulate", opt);
  j["baseline"] = baseline;
  j["target_bler"] = target;
  m.set_config(j, so.seed);
  std::string csv = sweep_csv_header();
  Json gains = Json::object();
  std::vector<std::string> failures;
  for (ChannelKind ch : channels) {
    so.channel = ch;
    std::vector<SweepResult> results;
    for (const Scheme& s : schemes) {
      spdlog::info("sweep {} over {} ({} points)", s.name, to_string(ch), grid.size());
      results.push_back(run_sweep(s, grid, so));
      for (const SweepPoint& p : results.back().points) {
        spdlog::debug("  {} dB: trials {} BER {:.3e} BLER {:.3e} failures {}", p.ebn0_db,
                      p.trials, p.ber, p.bler, p.decoder_failures);
      }
      csv += sweep_csv_rows(results.back());
    }
    try {
      const GainReport g = measure_gain(results, target, baseline);
      for (const GainEntry& e : g.entries) {
        spdlog::info("{} {}: {:.3f} dB at BLER {} (gain {:+.3f} dB)", to_string(ch), e.scheme,
                     e.ebn0_at_target, target, e.gain_db);
      }
      gains[to_string(ch)] = to_json(g);
    } catch (const NotBracketed& e) {
      failures.push_back(e.what());
    }
  }
  write_text_file(m.output("sweep.csv"), csv);
  if (!failures.empty()) {
    for (const std::string& f : failures) spdlog::error("{}", f);
    m.write();
    return 2;
  }
  write_json_file(m.output("gain_report.json"), gains);
  m.write();
  return 0;
}

int histogram_cmd(const CommonOptions& opt) {
  Json j = load_config(opt);
  const std::string w = "HistogramConfig";
  detail::require_object(j, w);
  detail::reject_unknown(j, w, {"K", "ebn0_db", "n_decodes", "noiseless", "channel", "dizet",
                                "nn", "seed"});
  if (opt.seed) j["seed"] = *opt.seed;
  int k = 4;
  double ebn0 = -5.0;
  long n = 50000;
  bool noiseless = false;
  std::string channel = "awgn";
  std::uint64_t seed = 0;
  detail::read_optional(j, w, "K", k);
  detail::read_optional(j, w, "ebn0_db", ebn0);
  detail::read_optional(j, w, "n_decodes", n);
  detail::read_optional(j, w, "noiseless", noiseless);
  detail::read_optional(j, w, "channel", channel);
  detail::read_optional(j, w, "seed", seed);
  if (k < 1) throw InvalidArgument(w + ".K: must be >= 1");
  if (k > kMaxHistogramK) {
    throw InvalidArgument(w + ".K: unsupported size " + std::to_string(k) +
                          " (histograms need K <= " + std::to_string(kMaxHistogramK) + ")");
  }
  if (n < 1) throw InvalidArgument(w + ".n_decodes: must be >= 1");
  const ChannelKind kind = channel_kind_from_string(channel);

  Json dz = j.value("dizet", Json{{"lambda", 0.5}});
  dz["name"] = "dizet";
  if (dz.contains("mlp")) throw InvalidArgument(w + ".dizet.mlp: not allowed");
  std::vector<Scheme> schemes{load_scheme(dz, k, opt, w + ".dizet")};
  if (j.contains("nn")) {
    Json nn = j["nn"];
    nn["name"] = "nn";
    schemes.push_back(load_scheme(nn, k, opt, w + ".nn"));
    if (!schemes.back().mlp) throw InvalidArgument(w + ".nn.mlp: missing");
  }
  Manifest m("histogram", opt);
  m.set_config(j, seed);
  const double at = noiseless ? std::numeric_limits<double>::infinity() : ebn0;
  std::vector<std::pair<std::string, ClassHistogram>> hs;
  for (const Scheme& s : schemes) {
    hs.emplace_back(s.name, class_histogram(s, kind, at, n, seed));
    const ClassHistogram& h = hs.back().second;
    spdlog::info("{}: share of all-zeros/all-ones classes {:.4f}", s.name,
                 h.share(0) + h.share((1U << k) - 1));
  }
  write_text_file(m.output("histogram.csv"), histogram_csv(hs));
  m.write();
  return 0;
}

int grad_check_cmd(const CommonOptions& opt) {
  Json j = load_config(opt);
  const std::string w = "GradCheckConfig";
  detail::require_object(j, w);
  detail::reject_unknown(j, w, {"instances", "tolerance", "seed"});
  if (opt.seed) j["seed"] = *opt.seed;
  int instances = 100;
  double tol = 1e-3;
  std::uint64_t seed = 0;
  detail::read_optional(j, w, "instances", instances);
  detail::read_optional(j, w, "tolerance", tol);
  detail::read_optional(j, w, "seed", seed);
  if (instances < 1) throw InvalidArgument(w + ".instances: must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument(w + ".tolerance: must be > 0");
  Manifest m("grad-check", opt);
  m.set_config(j, seed);
  bool ok = true;
  Json results = Json::array();
  for (const GradCheckResult& r : run_gradient_suite(instances, seed)) {
    const bool pass = r.pass(tol);
    ok &= pass;
    spdlog::log(pass ? spdlog::level::info : spdlog::level::err,
                "{}: {} entries, max relative error {:.3e}", r.name, r.entries, r.max_rel_error);
    results.push_back({{"check", r.name},
                       {"entries", r.entries},
                       {"max_rel_error", r.max_rel_error},
                       {"pass", pass}});
  }
  write_json_file(m.output("grad_check.json"),
                  Json{{"tolerance", tol}, {"instances", instances}, {"results", results}});
  m.write();
  return ok ? 0 : 2;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("zeroforge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  const char* env = std::getenv("ZEROFORGE_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

}  // namespace
}  // namespace zeroforge

int main(int argc, char** argv) {
  using namespace zeroforge;
  setup_logging();
  CLI::App app{"BMOCZ constellation training and simulation"};
  app.set_version_flag("--version", ZEROFORGE_VERSION);
  app.require_subcommand(1);
  CommonOptions opt;
  std::uint64_t seed = 0;
  using Handler = int (*)(const CommonOptions&);
  Handler handler = nullptr;
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"train-dizet", "learn a DiZeT zero constellation", train_dizet_cmd},
      {"train-nn", "jointly learn a constellation and NN decoder", train_nn_cmd},
      {"simulate", "BER/BLER sweeps and relative-gain report", simulate_cmd},
      {"histogram", "decoded-message class histogram", histogram_cmd},
      {"grad-check", "finite-difference gradient suite", grad_check_cmd}};
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_flag("--deterministic", opt.deterministic, "single-threaded reductions");
    sub->callback([&, fn = fn, sub] {
      handler = fn;
      if (sub->count("--seed") > 0) opt.seed = seed;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return handler(opt);
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
