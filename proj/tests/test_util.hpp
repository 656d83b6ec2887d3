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

#include <random>
#include <vector>

#include "drmm/drmm.hpp"

namespace drmm::testing {

/// Model with random parameters; sigma stays near `sigma`.
inline DrmmModel random_model(const std::vector<StreamSpec>& specs, const std::vector<int>& ks, std::uint64_t seed,
                              double spread = 1.0, double sigma = 0.7) {
  DrmmModel m = DrmmModel::zeros(specs, ks);
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& layer : m.layers) {
    for (double& w : layer.weight_logits) w = 0.5 * nd(rng);
    for (auto& s : layer.streams) {
      for (double& v : s.table) v = spread * nd(rng);
      if (s.spec.kind == StreamKind::Real) s.log_sigma = std::log(sigma) + 0.1 * nd(rng);
    }
    spread *= 0.5;
  }
  m.refresh();
  return m;
}

inline DrmmModel random_real_model(int dims, const std::vector<int>& ks, std::uint64_t seed, double spread = 1.0,
                                   double sigma = 0.7) {
  return random_model({{StreamKind::Real, dims}}, ks, seed, spread, sigma);
}

/// Random point: real entries normal, categorical entries log-probabilities.
inline Point random_point(const std::vector<StreamSpec>& specs, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Point p;
  for (const auto& s : specs) {
    std::vector<double> v(s.dim);
    for (double& x : v) x = scale * nd(rng);
    if (s.kind == StreamKind::Categorical) {
      double lse = log_sum_exp(v);
      for (double& x : v) x -= lse;
    }
    p.values.insert(p.values.end(), v.begin(), v.end());
  }
  p.mask.assign(p.values.size(), 1.0);
  return p;
}

/// Direct isotropic-Gaussian mixture log-density, written without the library.
inline double flat_gmm_logpdf(const std::vector<double>& x, const std::vector<std::vector<double>>& means,
                              const std::vector<double>& weights, double sigma) {
  double best = -1e300;
  std::vector<double> t;
  for (std::size_t j = 0; j < means.size(); ++j) {
    double acc = std::log(weights[j]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double d = x[i] - means[j][i];
      acc += -0.5 * std::log(2.0 * M_PI * sigma * sigma) - 0.5 * d * d / (sigma * sigma);
    }
    t.push_back(acc);
    best = std::max(best, acc);
  }
  double s = 0.0;
  for (double v : t) s += std::exp(v - best);
  return best + std::log(s);
}

}  // namespace drmm::testing
