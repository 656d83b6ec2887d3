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
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "drmm/data.hpp"
#include "drmm/likelihood.hpp"
#include "drmm/sampler.hpp"
#include "drmm/training.hpp"

namespace drmm {

using Rows = std::vector<std::vector<double>>;

struct PrMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int k = 3;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

inline double f1_score(double p, double r) { return 2.0 * p * r / (p + r + 1e-12); }

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Squared distance from each row to its k-th nearest other row.
inline std::vector<double> kth_neighbor_sq(const Rows& a, int k) {
  std::vector<double> out(a.size());
  parallel_for(a.size(), [&](std::size_t i) {
    std::vector<double> best(k, std::numeric_limits<double>::infinity());  // ascending
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j == i) continue;
      double d = sq_dist(a[i], a[j]);
      if (d >= best[k - 1]) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), d);
      best.insert(pos, d);
      best.pop_back();
    }
    out[i] = best[k - 1];
  });
  return out;
}

/// Fraction of queries lying in the union of balls around the reference rows.
inline double coverage(const Rows& ref, const std::vector<double>& radii_sq, const Rows& queries) {
  std::vector<char> inside(queries.size(), 0);
  parallel_for(queries.size(), [&](std::size_t q) {
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (sq_dist(queries[q], ref[j]) <= radii_sq[j]) {
        inside[q] = 1;
        break;
      }
  });
  std::size_t n = 0;
  for (char c : inside) n += c;
  return static_cast<double>(n) / static_cast<double>(queries.size());
}

inline void check_rows(const Rows& r, std::size_t dim, const char* what) {
  for (const auto& row : r)
    if (row.size() != dim) throw InputError(std::string(what) + " rows have inconsistent dimensions");
}

}  // namespace detail

/// k-NN manifold precision and recall with exact neighbor search.
inline PrMetrics knn_precision_recall(const Rows& real, const Rows& fake, int k = 3) {
  if (real.empty() || fake.empty()) throw InputError("precision/recall needs non-empty real and fake sets");
  if (k < 1 || static_cast<std::size_t>(k) >= std::min(real.size(), fake.size()))
    throw InputError("k=" + std::to_string(k) + " must be >= 1 and below the smaller set size");
  detail::check_rows(real, real[0].size(), "real");
  detail::check_rows(fake, real[0].size(), "fake");
  PrMetrics m;
  m.k = k;
  m.n_real = real.size();
  m.n_fake = fake.size();
  m.precision = detail::coverage(real, detail::kth_neighbor_sq(real, k), fake);
  m.recall = detail::coverage(fake, detail::kth_neighbor_sq(fake, k), real);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

namespace detail {

/// Seed for a row derived from its contents, so results do not depend on row order.
inline std::uint64_t row_seed(std::uint64_t seed, const std::vector<double>& row) {
  std::uint64_t h = mix_seed(seed ^ 0x6a09e667f3bcc909ULL);
  for (double v : row) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix_seed(h ^ bits);
  }
  return h;
}

}  // namespace detail

/// Mean estimated log-likelihood of raw rows, in raw coordinates.
inline double heldout_loglik(const DrmmModel& model, const Dataset& data, int n_samples = 32,
                             std::uint64_t seed = 0, double trunc = 0.0) {
  if (data.rows.empty()) throw InputError("held-out set is empty");
  RealVarMap map(model.input_specs);
  if (model.input_specs.size() != 1 || map.size() != data.n_cols())
    throw InputError("held-out data has " + std::to_string(data.n_cols()) + " columns, model expects " +
                     std::to_string(map.size()) + " real variables in one stream");
  double log_jac = 0.0;
  for (double s : model.norm_stats.std) log_jac -= std::log(s);
  std::vector<double> ll(data.rows.size());
  parallel_for(data.rows.size(), [&](std::size_t r) {
    const auto& row = data.rows[r];
    std::vector<double> z(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) z[i] = model.norm_stats.apply(i, row[i]);
    Rng rng(detail::row_seed(seed, row));
    ll[r] = estimate_loglik(model, Point(std::move(z)), n_samples, trunc, rng) + log_jac;
  });
  std::sort(ll.begin(), ll.end());  // summation order independent of row order
  double acc = 0.0;
  for (double v : ll) acc += v;
  return acc / static_cast<double>(ll.size());
}

inline Rows normalized_rows(const DrmmModel& model, const Rows& raw) {
  Rows out(raw.size());
  for (std::size_t r = 0; r < raw.size(); ++r) {
    out[r].resize(raw[r].size());
    for (std::size_t i = 0; i < raw[r].size(); ++i) out[r][i] = model.norm_stats.apply(i, raw[r][i]);
  }
  return out;
}

/// F1 protocol: up to n_eval model samples (with output noise) against as many
/// data rows, compared in the model's z-scored space.
inline PrMetrics model_f1(const DrmmModel& model, const Dataset& data, std::size_t n_eval = 20000,
                          std::uint64_t seed = 0, int k = 3) {
  const std::size_t n = std::min(n_eval, data.n_rows());
  Rows real(data.rows.begin(), data.rows.begin() + static_cast<std::ptrdiff_t>(n));
  SampleRequest req;
  req.n = n;
  req.add_noise = true;
  req.seed = seed;
  auto fake = sample(model, req).values;
  return knn_precision_recall(normalized_rows(model, real), normalized_rows(model, fake), k);
}

struct BenchConfig {
  int layers = 1;
  int components = 1;
};

struct BenchRow {
  int layers = 0;
  int components = 0;
  std::uint64_t params = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double loglik = 0.0;        // held-out
  double train_loglik = 0.0;  // on the training rows
};

using BenchProgressFn = std::function<void(const BenchRow&)>;

/// Trains every configuration and evaluates F1 and held-out log-likelihood.
/// Rows come back sorted by parameter count (stable in grid order).
inline std::vector<BenchRow> depth_benchmark(const Dataset& train_data, const Dataset& heldout,
                                             const std::vector<BenchConfig>& grid, const TrainConfig& cfg,
                                             std::size_t n_eval = 20000, std::uint64_t seed = 0,
                                             const BenchProgressFn& progress = {}) {
  if (grid.empty()) throw InputError("benchmark grid is empty");
  std::vector<BenchRow> rows;
  for (const auto& g : grid) {
    DrmmModel model = train(train_data, g.layers, g.components, cfg);
    BenchRow r;
    r.layers = g.layers;
    r.components = g.components;
    r.params = param_count(model).exact;
    auto pr = model_f1(model, train_data, n_eval, seed);
    r.precision = pr.precision;
    r.recall = pr.recall;
    r.f1 = pr.f1;
    r.loglik = heldout_loglik(model, heldout, 32, seed);
    Dataset sub = train_data;
    if (sub.rows.size() > n_eval) sub.rows.resize(n_eval);
    r.train_loglik = heldout_loglik(model, sub, 32, seed);
    if (progress) progress(r);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) { return a.params < b.params; });
  return rows;
}

inline std::string benchmark_to_csv(const std::vector<BenchRow>& rows) {
  std::string out = "layers,components,params,precision,recall,f1,loglik\n";
  for (const auto& r : rows) {
    out += std::to_string(r.layers) + "," + std::to_string(r.components) + "," + std::to_string(r.params) + "," +
           format_double(r.precision) + "," + format_double(r.recall) + "," + format_double(r.f1) + "," +
           format_double(r.loglik) + "\n";
  }
  return out;
}

}  // namespace drmm
