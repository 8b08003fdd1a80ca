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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeroforge/channel.hpp"
#include "zeroforge/constellation.hpp"
#include "zeroforge/csv.hpp"
#include "zeroforge/decoders.hpp"
#include "zeroforge/errors.hpp"
#include "zeroforge/training.hpp"

namespace zeroforge {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Field access with error messages that name the field

namespace detail {

template <typename T>
T get_field(const Json& j, const std::string& where, const std::string& key) {
  if (!j.contains(key)) throw InvalidArgument(where + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidArgument(where + "." + key + ": wrong type");
  }
}

template <typename T>
void read_optional(const Json& j, const std::string& where, const std::string& key,
                   T& out) {
  if (j.contains(key)) out = get_field<T>(j, where, key);
}

inline void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
}

inline void reject_unknown(const Json& j, const std::string& where,
                           const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) {
      throw InvalidArgument(where + "." + it.key() + ": unknown field");
    }
  }
}

inline void check_version(const Json& j, const std::string& where) {
  const int v = get_field<int>(j, where, "format_version");
  if (v != kFormatVersion) {
    throw InvalidArgument(where + ".format_version: unsupported version " +
                          std::to_string(v));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Checkpoints

inline Json to_json(const Constellation& c) {
  return Json{{"format_version", kFormatVersion},
              {"K", c.k()},
              {"radius", c.radius()},
              {"phases", c.phases()}};
}

inline Constellation constellation_from_json(const Json& j) {
  const std::string where = "constellation";
  detail::require_object(j, where);
  detail::check_version(j, where);
  const int k = detail::get_field<int>(j, where, "K");
  const auto phases = detail::get_field<std::vector<double>>(j, where, "phases");
  if (static_cast<int>(phases.size()) != k) {
    throw InvalidArgument(where + ".phases: length does not match K");
  }
  return Constellation(detail::get_field<double>(j, where, "radius"), phases);
}

template <typename Scalar>
Json to_json(const BasicMlpParams<Scalar>& p) {
  Json layers = Json::array();
  for (const auto& l : p.layers) {
    Json w = Json::array();
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
      std::vector<Scalar> row(l.w.cols());
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) row[c] = l.w(i, c);
      w.push_back(std::move(row));
    }
    layers.push_back(Json{{"w", std::move(w)},
                          {"b", std::vector<Scalar>(l.b.data(), l.b.data() + l.b.size())}});
  }
  return Json{{"format_version", kFormatVersion},
              {"K", p.k},
              {"l_hidden", p.l_hidden},
              {"slope", p.slope},
              {"dropout", p.dropout},
              {"training_mode", p.training_mode},
              {"layers", std::move(layers)}};
}

template <typename Scalar = float>
BasicMlpParams<Scalar> mlp_from_json(const Json& j) {
  const std::string where = "mlp";
  detail::require_object(j, where);
  detail::check_version(j, where);
  auto p = BasicMlpParams<Scalar>::zeros(detail::get_field<int>(j, where, "K"),
                                         detail::get_field<int>(j, where, "l_hidden"));
  p.slope = detail::get_field<double>(j, where, "slope");
  p.dropout = detail::get_field<double>(j, where, "dropout");
  detail::read_optional(j, where, "training_mode", p.training_mode);
  const Json& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != 3) {
    throw InvalidArgument(where + ".layers: expected 3 layers");
  }
  for (int n = 0; n < 3; ++n) {
    const std::string lw = where + ".layers[" + std::to_string(n) + "]";
    auto& layer = p.layers[n];
    const auto w = detail::get_field<std::vector<std::vector<Scalar>>>(layers[n], lw, "w");
    const auto b = detail::get_field<std::vector<Scalar>>(layers[n], lw, "b");
    if (static_cast<Eigen::Index>(w.size()) != layer.w.rows() ||
        static_cast<Eigen::Index>(b.size()) != layer.b.size()) {
      throw InvalidArgument(lw + ": dimensions do not match K and l_hidden");
    }
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i) {
      if (static_cast<Eigen::Index>(w[i].size()) != layer.w.cols()) {
        throw InvalidArgument(lw + ".w: ragged row " + std::to_string(i));
      }
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(i, c) = w[i][c];
      layer.b(i) = b[i];
    }
  }
  p.validate();
  return p;
}

inline void save_constellation(const std::filesystem::path& path, const Constellation& c) {
  write_json_file(path, to_json(c));
}

inline Constellation load_constellation(const std::filesystem::path& path) {
  return constellation_from_json(read_json_file(path));
}

template <typename Scalar>
void save_mlp(const std::filesystem::path& path, const BasicMlpParams<Scalar>& p) {
  // Compact: hidden layers hold up to a few million weights.
  write_text_file(path, to_json(p).dump() + "\n");
}

template <typename Scalar = float>
BasicMlpParams<Scalar> load_mlp(const std::filesystem::path& path) {
  return mlp_from_json<Scalar>(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Training configuration

// Hidden width used for K = 4, 7, 10; other K must set it explicitly.
inline int default_hidden_width(int k) {
  switch (k) {
    case 4: return 500;
    case 7: return 1000;
    case 10: return 1500;
    default: return 0;
  }
}

inline Json to_json(const TrainConfig& c) {
  return Json{{"K", c.k},
              {"B", c.batch_size},
              {"n_epoch", c.n_epoch},
              {"ebn0_db", c.ebn0_db},
              {"ebn0_db_stage2", c.ebn0_db_stage2},
              {"margin", c.margin},
              {"lr_initial", c.lr_initial},
              {"lr_final", c.lr_final},
              {"l_hidden", c.l_hidden},
              {"init_lambda", c.init_lambda},
              {"literal_hinge_label", c.literal_hinge_label},
              {"seed", c.seed}};
}

// Missing fields keep their defaults. For the NN, l_hidden defaults by K.
inline TrainConfig train_config_from_json(const Json& j, bool nn) {
  const std::string where = "TrainConfig";
  detail::require_object(j, where);
  detail::reject_unknown(j, where,
                         {"K", "B", "n_epoch", "ebn0_db", "ebn0_db_stage2", "margin",
                          "lr_initial", "lr_final", "l_hidden", "init_lambda",
                          "literal_hinge_label", "seed"});
  TrainConfig c;
  detail::read_optional(j, where, "K", c.k);
  detail::read_optional(j, where, "B", c.batch_size);
  detail::read_optional(j, where, "n_epoch", c.n_epoch);
  detail::read_optional(j, where, "ebn0_db", c.ebn0_db);
  detail::read_optional(j, where, "ebn0_db_stage2", c.ebn0_db_stage2);
  detail::read_optional(j, where, "margin", c.margin);
  detail::read_optional(j, where, "lr_initial", c.lr_initial);
  detail::read_optional(j, where, "lr_final", c.lr_final);
  detail::read_optional(j, where, "l_hidden", c.l_hidden);
  detail::read_optional(j, where, "init_lambda", c.init_lambda);
  detail::read_optional(j, where, "literal_hinge_label", c.literal_hinge_label);
  detail::read_optional(j, where, "seed", c.seed);
  if (nn) {
    if (c.l_hidden == 0) c.l_hidden = default_hidden_width(c.k);
    if (c.l_hidden == 0) {
      throw InvalidArgument("TrainConfig.l_hidden: required for K = " +
                            std::to_string(c.k));
    }
    // Stage length for the two-stage procedure.
    if (!j.contains("n_epoch")) c.n_epoch = 15000;
  }
  c.validate(nn);
  return c;
}

// ---------------------------------------------------------------------------
// Loss traces

inline std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::ostringstream os;
  os << "epoch,lr,mean_loss\n";
  for (const TracePoint& t : trace) {
    os << t.epoch << ',' << shortest(t.lr) << ',' << shortest(t.mean_loss) << '\n';
  }
  return os.str();
}

}  // namespace zeroforge
