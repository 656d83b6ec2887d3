// Copyright 2026 The DRMM Authors
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

// Versioned JSON model file. Numbers are written with 17 significant digits,
// so a save/load round trip reproduces every double exactly and a second save
// is byte-identical to the first.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "drmm/model.hpp"

namespace drmm {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline void put_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw NumericError("cannot serialize a non-finite parameter");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void put_array(std::string& out, std::span<const double> v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    put_number(out, v[i]);
  }
  out += ']';
}

inline void put_matrix(std::string& out, const std::vector<double>& table, int rows, int cols) {
  out += '[';
  for (int r = 0; r < rows; ++r) {
    if (r) out += ',';
    put_array(out, std::span<const double>(table.data() + static_cast<std::size_t>(r) * cols, cols));
  }
  out += ']';
}

inline std::vector<double> get_vector(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string("model file: '") + what + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw InputError(std::string("model file: '") + what + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<double> get_matrix(const nlohmann::json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw InputError(std::string("model file: '") + what + "' must have " + std::to_string(rows) + " rows");
  std::vector<double> out;
  for (const auto& row : j) {
    auto r = get_vector(row, what);
    if (static_cast<int>(r.size()) != cols)
      throw InputError(std::string("model file: '") + what + "' rows must have " + std::to_string(cols) + " entries");
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace detail

inline std::string model_to_json(const DrmmModel& model) {
  model.validate();
  std::string out = "{\"format_version\":1,\n\"specs\":[";
  for (std::size_t s = 0; s < model.input_specs.size(); ++s) {
    if (s) out += ',';
    out += "{\"kind\":\"";
    out += to_string(model.input_specs[s].kind);
    out += "\",\"dim\":" + std::to_string(model.input_specs[s].dim) + "}";
  }
  out += "],\n\"columns\":[";
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    if (c) out += ',';
    out += nlohmann::json(model.columns[c]).dump();
  }
  out += "],\n\"norm_stats\":{\"mean\":";
  detail::put_array(out, model.norm_stats.mean);
  out += ",\"std\":";
  detail::put_array(out, model.norm_stats.std);
  out += "},\n\"smoothing_eps\":";
  detail::put_number(out, model.smoothing_eps);
  out += ",\n\"layers\":[";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    out += l ? ",\n" : "\n";
    out += "{\"K\":" + std::to_string(layer.K) + ",\"weight_logits\":";
    detail::put_array(out, layer.weight_logits);
    out += ",\n \"real_streams\":[";
    bool first = true;
    for (const auto& s : layer.streams) {
      if (s.spec.kind != StreamKind::Real) continue;
      if (!first) out += ',';
      first = false;
      out += "{\"log_sigma\":";
      detail::put_number(out, s.log_sigma);
      out += ",\"means\":";
      detail::put_matrix(out, s.table, layer.K, s.spec.dim);
      out += '}';
    }
    out += "],\n \"cat_streams\":[";
    first = true;
    for (const auto& s : layer.streams) {
      if (s.spec.kind != StreamKind::Categorical) continue;
      if (!first) out += ',';
      first = false;
      out += "{\"prob_logits\":";
      detail::put_matrix(out, s.table, layer.K, s.spec.dim);
      out += '}';
    }
    out += "]}";
  }
  out += "\n]}\n";
  return out;
}

inline DrmmModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw InputError("unsupported model format_version " + j.at("format_version").dump());
    DrmmModel m;
    for (const auto& s : j.at("specs")) {
      auto kind = s.at("kind").get<std::string>();
      StreamSpec sp;
      if (kind == "real") sp.kind = StreamKind::Real;
      else if (kind == "categorical") sp.kind = StreamKind::Categorical;
      else throw InputError("model file: unknown stream kind '" + kind + "'");
      sp.dim = s.at("dim").get<int>();
      if (sp.dim < 1) throw InputError("model file: stream dim must be >= 1");
      m.input_specs.push_back(sp);
    }
    if (j.contains("columns"))
      for (const auto& c : j.at("columns")) m.columns.push_back(c.get<std::string>());
    m.norm_stats.mean = detail::get_vector(j.at("norm_stats").at("mean"), "norm_stats.mean");
    m.norm_stats.std = detail::get_vector(j.at("norm_stats").at("std"), "norm_stats.std");
    m.smoothing_eps = j.at("smoothing_eps").get<double>();
    std::vector<StreamSpec> cur = m.input_specs;
    for (const auto& jl : j.at("layers")) {
      int K = jl.at("K").get<int>();
      LayerParams layer(K, cur, m.input_specs.size());
      layer.weight_logits = detail::get_vector(jl.at("weight_logits"), "weight_logits");
      if (static_cast<int>(layer.weight_logits.size()) != K)
        throw InputError("model file: weight_logits length differs from K");
      const auto& jr = jl.at("real_streams");
      const auto& jc = jl.at("cat_streams");
      std::size_t ri = 0, ci = 0;
      for (auto& s : layer.streams) {
        if (s.spec.kind == StreamKind::Real) {
          if (ri >= jr.size()) throw InputError("model file: too few real_streams in a layer");
          s.log_sigma = jr[ri].at("log_sigma").get<double>();
          s.table = detail::get_matrix(jr[ri].at("means"), K, s.spec.dim, "means");
          ++ri;
        } else {
          if (ci >= jc.size()) throw InputError("model file: too few cat_streams in a layer");
          s.table = detail::get_matrix(jc[ci].at("prob_logits"), K, s.spec.dim, "prob_logits");
          ++ci;
        }
      }
      if (ri != jr.size() || ci != jc.size()) throw InputError("model file: stream count mismatch in a layer");
      m.layers.push_back(std::move(layer));
      cur.push_back({StreamKind::Categorical, K});
    }
    m.validate();
    m.refresh();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

/// Writes to a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot open '" + tmp.string() + "' for writing");
    f << content;
    if (!f) throw InputError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void save_model(const DrmmModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model));
}

inline DrmmModel load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

}  // namespace drmm
