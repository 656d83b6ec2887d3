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

#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "drmm/conditioning.hpp"
#include "drmm/likelihood.hpp"
#include "drmm/model.hpp"

namespace drmm {

inline constexpr double kDefaultSampleTrunc = 0.05;

/// Known values and conditions are given in raw data coordinates.
struct SampleRequest {
  std::size_t n = 1;
  std::vector<std::optional<double>> known;  // per real variable
  std::vector<double> confidence;            // multiplier per known variable; empty = all 1
  ConditionSpec conditions;
  double trunc = kDefaultSampleTrunc;
  bool add_noise = false;
  std::uint64_t seed = 0;
  int score_samples = 0;  // > 0: replace single-path scores by estimates with this many paths

  void validate(std::size_t n_vars) const {
    if (n < 1) throw InputError("sample count must be >= 1");
    if (!(trunc >= 0.0 && trunc <= 1.0)) throw InputError("sampling truncation must lie in [0, 1]");
    if (known.size() > n_vars)
      throw InputError("known values given for " + std::to_string(known.size()) + " variables, model has " +
                       std::to_string(n_vars));
    if (!confidence.empty() && confidence.size() != known.size())
      throw InputError("confidence multipliers must match the known-value vector");
    for (double c : confidence)
      if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("confidence multipliers must be finite and >= 0");
  }
};

struct SampleResult {
  std::vector<std::vector<double>> values;  // n x D, raw coordinates
  std::vector<double> log_scores;
  std::vector<LatentPath> latents;
  std::vector<std::string> warnings;

  std::size_t size() const { return values.size(); }
};

namespace detail {

inline bool is_known(const SampleRequest& req, std::size_t i) { return i < req.known.size() && req.known[i]; }

}  // namespace detail

inline SampleResult sample(const DrmmModel& model, const SampleRequest& req) {
  model.validate();
  RealVarMap map(model.input_specs);
  const std::size_t D = map.size();
  req.validate(D);
  std::vector<std::optional<double>> known_z(D);
  for (std::size_t i = 0; i < D; ++i)
    if (detail::is_known(req, i)) {
      if (!std::isfinite(*req.known[i])) throw InputError("known value for variable " + std::to_string(i) + " is not finite");
      known_z[i] = model.norm_stats.apply(i, *req.known[i]);
    }
  ConditionSet cset = prepare_conditions(req.conditions, model.norm_stats, known_z, model.input_specs);

  const auto& first = model.layers.front();
  Point base(std::vector<double>(first.layout.total, 0.0), std::vector<double>(first.layout.total, 0.0));
  for (std::size_t i = 0; i < D; ++i) {
    if (!known_z[i]) continue;
    base.values[map.offset_of[i]] = *known_z[i];
    base.mask[map.offset_of[i]] = req.confidence.empty() ? 1.0 : req.confidence[i];
  }
  const auto& last = model.layers.back();

  SampleResult res;
  res.values.assign(req.n, std::vector<double>(D));
  res.log_scores.assign(req.n, 0.0);
  res.latents.resize(req.n);
  res.warnings = cset.warnings;
  parallel_for(req.n, [&](std::size_t s) {
    Rng rng(derive_seed(req.seed, s));
    ForwardResult fr = forward(model, base, cset, req.trunc, rng);
    std::vector<double> z = fr.reconstruction_sum;
    if (req.add_noise) {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (std::size_t i = 0; i < D; ++i) {
        double e = nd(rng);  // drawn for every variable so streams stay aligned
        if (!known_z[i]) z[i] += last.sigma(map.stream_of[i]) * e;
      }
    }
    auto& out = res.values[s];
    for (std::size_t i = 0; i < D; ++i) out[i] = known_z[i] ? *req.known[i] : model.norm_stats.invert(i, z[i]);
    double logq = 0.0;
    for (double q : fr.path.proposal_logq) logq += q;
    res.log_scores[s] = log_sum_exp(fr.last_scores) - logq;
    if (req.score_samples > 0) {
      Point p(std::vector<double>(first.layout.total, 0.0), std::vector<double>(first.layout.total, 0.0));
      for (std::size_t i = 0; i < D; ++i) {
        p.values[map.offset_of[i]] = known_z[i] ? *known_z[i] : z[i];
        p.mask[map.offset_of[i]] = 1.0;
      }
      res.log_scores[s] = estimate_loglik(model, p, req.score_samples, 0.0, rng);
    }
    res.latents[s] = std::move(fr.path);
  });
  return res;
}

/// Stable descending sort by score; returns the first top_k rows.
inline SampleResult rank_samples(const SampleResult& r, std::size_t top_k) {
  if (top_k > r.size()) throw InputError("top_k exceeds the number of samples");
  std::vector<std::size_t> idx(r.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r.log_scores[a] > r.log_scores[b]; });
  SampleResult out;
  out.warnings = r.warnings;
  for (std::size_t j = 0; j < top_k; ++j) {
    out.values.push_back(r.values[idx[j]]);
    out.log_scores.push_back(r.log_scores[idx[j]]);
    out.latents.push_back(r.latents[idx[j]]);
  }
  return out;
}

}  // namespace drmm
