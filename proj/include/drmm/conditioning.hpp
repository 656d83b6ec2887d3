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

// Priors and linear constraints over first-layer real variables, turned into
// per-component log-weight adjustments. Each weight is the integral of the
// prior (or constraint indicator) against a component's isotropic Gaussian.
// Conditions are shifted into residual space layer by layer, following the
// data through the network.

#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drmm/model.hpp"

namespace drmm {

struct GaussianPrior {
  std::vector<std::size_t> var_indices;
  std::vector<double> mean;
  std::vector<double> std;
};

/// a^T x + b > 0 with |a| = 1.
struct LinearIneq {
  std::vector<double> a;
  double b = 0.0;

  /// Normalizes a to unit length, rescaling b. Throws on a zero vector.
  static LinearIneq normalized(std::vector<double> a, double b) {
    double n = 0.0;
    for (double v : a) n += v * v;
    n = std::sqrt(n);
    if (n == 0.0) throw InputError("constraint has an all-zero coefficient vector");
    for (double& v : a) v /= n;
    return {std::move(a), b / n};
  }
  double eval(std::span<const double> x) const {
    double v = b;
    for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * x[i];
    return v;
  }
};

/// a^T x + b = 0 with |a| = 1.
struct LinearEq {
  std::vector<double> a;
  double b = 0.0;

  static LinearEq normalized(std::vector<double> a, double b) {
    auto n = LinearIneq::normalized(std::move(a), b);
    return {std::move(n.a), n.b};
  }
  double eval(std::span<const double> x) const {
    double v = b;
    for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * x[i];
    return v;
  }
};

struct BoxConstraint {
  std::size_t var_index = 0;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// Conditions in the model's (z-scored, residual) coordinates, reduced to the
/// unknown variables.
struct ConditionSet {
  std::vector<GaussianPrior> priors;
  std::vector<LinearIneq> ineqs;
  std::vector<LinearEq> eqs;
  std::vector<BoxConstraint> boxes;
  std::vector<std::string> warnings;

  bool empty() const { return priors.empty() && ineqs.empty() && eqs.empty() && boxes.empty(); }
};

/// Conditions as written by a user, in raw data coordinates. Inequality and
/// equality coefficients are not normalized yet.
struct ConditionSpec {
  struct Linear {
    std::vector<double> a;
    double b = 0.0;
  };
  struct Prior {
    std::size_t var = 0;
    double mean = 0.0;
    double std = 1.0;
  };
  std::vector<Linear> ineqs;
  std::vector<Linear> eqs;
  std::vector<BoxConstraint> boxes;
  std::vector<Prior> priors;

  bool empty() const { return ineqs.empty() && eqs.empty() && boxes.empty() && priors.empty(); }
};

// ---------------------------------------------------------------------------
// Textual syntax

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_fields(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline double parse_double(const std::string& tok, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw InputError("malformed number '" + tok + "' in " + std::string(what));
  return v;
}

inline std::size_t parse_index(const std::string& tok, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw InputError("malformed variable index '" + tok + "' in " + std::string(what));
  return v;
}

}  // namespace detail

/// "a1,...,aD,b" meaning sum a_i x_i + b (> 0 or = 0).
inline ConditionSpec::Linear parse_linear(std::string_view text) {
  auto f = detail::split_fields(text);
  if (f.size() < 2) throw InputError("linear constraint '" + std::string(text) + "' needs coefficients and an offset");
  ConditionSpec::Linear c;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) c.a.push_back(detail::parse_double(f[i], text));
  c.b = detail::parse_double(f.back(), text);
  return c;
}

/// "i,lower,upper" with an empty field meaning unbounded.
inline BoxConstraint parse_box(std::string_view text) {
  auto f = detail::split_fields(text);
  if (f.size() != 3) throw InputError("box constraint '" + std::string(text) + "' must be i,lower,upper");
  BoxConstraint b;
  b.var_index = detail::parse_index(f[0], text);
  if (!f[1].empty()) b.lower = detail::parse_double(f[1], text);
  if (!f[2].empty()) b.upper = detail::parse_double(f[2], text);
  if (b.lower && b.upper && !(*b.lower < *b.upper))
    throw InputError("box constraint '" + std::string(text) + "' needs lower < upper");
  return b;
}

/// "i,mean,std".
inline ConditionSpec::Prior parse_prior(std::string_view text) {
  auto f = detail::split_fields(text);
  if (f.size() != 3) throw InputError("prior '" + std::string(text) + "' must be i,mean,std");
  ConditionSpec::Prior p{detail::parse_index(f[0], text), detail::parse_double(f[1], text),
                         detail::parse_double(f[2], text)};
  if (!(p.std > 0.0)) throw InputError("prior '" + std::string(text) + "' needs std > 0");
  return p;
}

/// Adds one line of the form `ineq: ...`, `eq: ...`, `box: ...` or `prior: ...`.
inline void parse_condition_line(std::string_view line, ConditionSpec& spec) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos) throw InputError("condition '" + std::string(line) + "' lacks a kind prefix");
  auto kind = detail::trim(line.substr(0, colon));
  auto body = line.substr(colon + 1);
  if (kind == "ineq") spec.ineqs.push_back(parse_linear(body));
  else if (kind == "eq") spec.eqs.push_back(parse_linear(body));
  else if (kind == "box") spec.boxes.push_back(parse_box(body));
  else if (kind == "prior") spec.priors.push_back(parse_prior(body));
  else throw InputError("unknown condition kind '" + kind + "'");
}

/// Parses a multi-line condition file; blank lines and '#' comments skipped.
inline ConditionSpec parse_conditions(std::string_view text) {
  ConditionSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    parse_condition_line(t, spec);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Per-component weights

/// log of the component's Gaussian mass on the valid side of a^T x + b > 0.
inline double ineq_log_weight(std::span<const double> mu, double sigma, const LinearIneq& c) {
  return log_ndtr(c.eval(mu) / sigma);
}

/// log N(v | 0, sigma^2) for v = a^T mu + b.
inline double eq_log_weight(std::span<const double> mu, double sigma, const LinearEq& c) {
  return log_normal_pdf(c.eval(mu), 0.0, sigma * sigma);
}

/// Sum over the prior's variables of log N(mu_i | prior mean, sigma^2 + std_i^2).
inline double gaussian_prior_log_weight(std::span<const double> mu, double sigma, const GaussianPrior& p) {
  double acc = 0.0;
  for (std::size_t j = 0; j < p.var_indices.size(); ++j)
    acc += log_normal_pdf(mu[p.var_indices[j]], p.mean[j], sigma * sigma + p.std[j] * p.std[j]);
  return acc;
}

inline double box_log_weight(std::span<const double> mu, double sigma, const BoxConstraint& b) {
  const double inf = std::numeric_limits<double>::infinity();
  double m = mu[b.var_index];
  double lo = b.lower ? (*b.lower - m) / sigma : -inf;
  double hi = b.upper ? (*b.upper - m) / sigma : inf;
  if (!b.lower && !b.upper) return 0.0;
  return log_ndtr_diff(lo, hi);
}

/// Maps each first-layer real variable to its real stream.
struct RealVarMap {
  std::vector<std::size_t> stream_of;  // layer stream index per real var
  std::vector<std::size_t> offset_of;  // offset inside the flat point

  explicit RealVarMap(const std::vector<StreamSpec>& input_specs) {
    std::size_t off = 0;
    for (std::size_t s = 0; s < input_specs.size(); ++s) {
      for (int i = 0; i < input_specs[s].dim; ++i) {
        if (input_specs[s].kind == StreamKind::Real) {
          stream_of.push_back(s);
          offset_of.push_back(off + i);
        }
      }
      off += input_specs[s].dim;
    }
  }
  std::size_t size() const { return stream_of.size(); }
};

namespace detail {

inline std::size_t single_stream(const RealVarMap& map, std::span<const double> a) {
  std::optional<std::size_t> s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (s && *s != map.stream_of[i]) throw InputError("constraints spanning several real streams are not supported");
    s = map.stream_of[i];
  }
  return s.value_or(0);
}

inline std::size_t stream_of_linear(const RealVarMap& map, std::span<const double> a) { return single_stream(map, a); }

}  // namespace detail

/// Sum of all condition log-weights per component, using each component's
/// real means and the layer's sigma of the stream a condition lives in.
/// Conditions must already be expressed in this layer's residual space.
inline std::vector<double> condition_log_adjustments(const LayerParams& layer, const ConditionSet& set,
                                                     const RealVarMap& map) {
  std::vector<double> out(layer.K, 0.0);
  if (set.empty()) return out;
  std::vector<double> mu(map.size());
  for (int h = 0; h < layer.K; ++h) {
    for (std::size_t i = 0; i < map.size(); ++i) {
      std::size_t s = map.stream_of[i];
      mu[i] = layer.streams[s].table[h * layer.streams[s].spec.dim + (map.offset_of[i] - layer.layout.offsets[s])];
    }
    double acc = 0.0;
    for (const auto& c : set.ineqs) acc += ineq_log_weight(mu, layer.sigma(detail::stream_of_linear(map, c.a)), c);
    for (const auto& c : set.eqs) acc += eq_log_weight(mu, layer.sigma(detail::stream_of_linear(map, c.a)), c);
    for (const auto& b : set.boxes) acc += box_log_weight(mu, layer.sigma(map.stream_of[b.var_index]), b);
    for (const auto& p : set.priors) {
      for (std::size_t j = 0; j < p.var_indices.size(); ++j) {
        GaussianPrior one{{p.var_indices[j]}, {p.mean[j]}, {p.std[j]}};
        acc += gaussian_prior_log_weight(mu, layer.sigma(map.stream_of[p.var_indices[j]]), one);
      }
    }
    out[h] = acc;
  }
  return out;
}

/// Single-stream convenience overload.
inline std::vector<double> condition_log_adjustments(const LayerParams& layer, const ConditionSet& set) {
  std::vector<StreamSpec> inputs(layer.streams.size());
  for (std::size_t s = 0; s < layer.first_latent_stream; ++s) inputs[s] = layer.streams[s].spec;
  inputs.resize(layer.first_latent_stream);
  return condition_log_adjustments(layer, set, RealVarMap(inputs));
}

/// Re-expresses conditions on x as conditions on r = x - xhat, where xhat is
/// the reconstruction over first-layer real variables.
inline ConditionSet shift_to_residual(const ConditionSet& set, std::span<const double> xhat) {
  ConditionSet out = set;
  for (auto& c : out.ineqs)
    for (std::size_t i = 0; i < c.a.size(); ++i) c.b += c.a[i] * xhat[i];
  for (auto& c : out.eqs)
    for (std::size_t i = 0; i < c.a.size(); ++i) c.b += c.a[i] * xhat[i];
  for (auto& p : out.priors)
    for (std::size_t j = 0; j < p.var_indices.size(); ++j) p.mean[j] -= xhat[p.var_indices[j]];
  for (auto& b : out.boxes) {
    if (b.lower) *b.lower -= xhat[b.var_index];
    if (b.upper) *b.upper -= xhat[b.var_index];
  }
  return out;
}

/// Converts raw-coordinate conditions into the model's z-scored space and
/// folds known variables (given as z-scored values) into the offsets, leaving
/// conditions over unknown variables only. Conditions that become constant are
/// dropped; unsatisfiable ones leave a warning.
inline ConditionSet prepare_conditions(const ConditionSpec& spec, const NormStats& norm,
                                       const std::vector<std::optional<double>>& known_z,
                                       const std::vector<StreamSpec>& input_specs) {
  const std::size_t D = norm.size();
  RealVarMap map(input_specs);
  if (map.size() != D) throw InputError("norm_stats do not match the model's real variables");
  auto known = [&](std::size_t i) { return i < known_z.size() && known_z[i].has_value(); };
  auto check_var = [&](std::size_t i, const char* what) {
    if (i >= D)
      throw InputError(std::string(what) + " refers to variable " + std::to_string(i) + " but the model has " +
                       std::to_string(D));
  };
  ConditionSet out;

  auto reduce_linear = [&](const ConditionSpec::Linear& c, const char* what) -> std::optional<std::pair<std::vector<double>, double>> {
    if (c.a.size() != D)
      throw InputError(std::string(what) + " has " + std::to_string(c.a.size()) + " coefficients, expected " +
                       std::to_string(D));
    std::vector<double> a(D);
    double b = c.b;
    for (std::size_t i = 0; i < D; ++i) {
      a[i] = c.a[i] * norm.std[i];
      b += c.a[i] * norm.mean[i];
      if (known(i)) {
        b += a[i] * *known_z[i];
        a[i] = 0.0;
      }
    }
    double n = 0.0;
    for (double v : a) n += v * v;
    if (n == 0.0) return std::pair{std::vector<double>{}, b};
    detail::single_stream(map, a);
    return std::pair{a, b};
  };

  for (const auto& c : spec.ineqs) {
    auto r = reduce_linear(c, "inequality");
    if (r->first.empty()) {
      if (!(r->second > 0.0)) out.warnings.push_back("inequality is unsatisfiable given the known variables");
      continue;
    }
    out.ineqs.push_back(LinearIneq::normalized(r->first, r->second));
  }
  for (const auto& c : spec.eqs) {
    auto r = reduce_linear(c, "equality");
    if (r->first.empty()) {
      if (std::abs(r->second) > 1e-12) out.warnings.push_back("equality is unsatisfiable given the known variables");
      continue;
    }
    out.eqs.push_back(LinearEq::normalized(r->first, r->second));
  }
  for (const auto& b : spec.boxes) {
    check_var(b.var_index, "box constraint");
    BoxConstraint z{b.var_index, std::nullopt, std::nullopt};
    if (b.lower) z.lower = norm.apply(b.var_index, *b.lower);
    if (b.upper) z.upper = norm.apply(b.var_index, *b.upper);
    if (known(b.var_index)) {
      double v = *known_z[b.var_index];
      if ((z.lower && !(v > *z.lower)) || (z.upper && !(v < *z.upper)))
        out.warnings.push_back("box constraint on variable " + std::to_string(b.var_index) +
                               " is violated by its known value");
      continue;
    }
    out.boxes.push_back(z);
  }
  for (const auto& p : spec.priors) {
    check_var(p.var, "prior");
    if (known(p.var)) continue;  // constant across components
    out.priors.push_back({{p.var}, {norm.apply(p.var, p.mean)}, {p.std / norm.std[p.var]}});
  }
  return out;
}

}  // namespace drmm
