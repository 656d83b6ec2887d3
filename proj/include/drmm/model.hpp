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

// Model parameters and the single-layer building blocks: memberships,
// latent sampling, reconstruction, residuals and latent packing.
//
// A data point is stored flat: the vectors of all streams are concatenated in
// stream order, with a parallel array of multipliers. For a categorical stream
// every slot of the multiplier array holds the stream's single multiplier m_c.

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drmm/math.hpp"

namespace drmm {

using Rng = std::mt19937_64;

enum class StreamKind { Real, Categorical };

struct StreamSpec {
  StreamKind kind = StreamKind::Real;
  int dim = 1;  // number of classes for categorical streams

  friend bool operator==(const StreamSpec&, const StreamSpec&) = default;
};

inline const char* to_string(StreamKind k) { return k == StreamKind::Real ? "real" : "categorical"; }

/// Offsets of each stream inside a flat point vector.
struct StreamLayout {
  std::vector<StreamSpec> specs;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;

  StreamLayout() = default;
  explicit StreamLayout(std::vector<StreamSpec> s) : specs(std::move(s)) {
    offsets.reserve(specs.size());
    for (const auto& sp : specs) {
      if (sp.dim < 1) throw InputError("stream dim must be >= 1");
      offsets.push_back(total);
      total += static_cast<std::size_t>(sp.dim);
    }
  }
  std::size_t size() const { return specs.size(); }
};

/// One data point with its per-variable multipliers (mask).
struct Point {
  std::vector<double> values;
  std::vector<double> mask;

  Point() = default;
  explicit Point(std::vector<double> v) : values(std::move(v)), mask(values.size(), 1.0) {}
  Point(std::vector<double> v, std::vector<double> m) : values(std::move(v)), mask(std::move(m)) {}
};

/// Parameters of one stream inside a layer.
struct StreamParams {
  StreamSpec spec;
  std::vector<double> table;  // K x dim: means (real) or class logits (categorical)
  double log_sigma = 0.0;     // real streams only

  // Derived, filled by LayerParams::refresh(). Categorical streams only.
  std::vector<double> probs;         // softmax(table row)
  std::vector<double> log_smoothed;  // log(smooth(probs))
};

class LayerParams {
 public:
  int K = 0;
  std::vector<double> weight_logits;
  std::vector<StreamParams> streams;
  // Streams with index >= first_latent_stream are packed latents of earlier layers.
  std::size_t first_latent_stream = 0;

  // Derived, filled by refresh().
  std::vector<double> log_weights;
  StreamLayout layout;

  LayerParams() = default;

  /// Zero-initialized layer over the given streams.
  LayerParams(int k, const std::vector<StreamSpec>& specs, std::size_t n_input_streams)
      : K(k), weight_logits(static_cast<std::size_t>(k), 0.0), first_latent_stream(n_input_streams) {
    if (k < 1) throw InputError("component count K must be >= 1");
    for (const auto& sp : specs) {
      StreamParams s;
      s.spec = sp;
      s.table.assign(static_cast<std::size_t>(k) * sp.dim, 0.0);
      streams.push_back(std::move(s));
    }
  }

  std::vector<StreamSpec> specs() const {
    std::vector<StreamSpec> out;
    for (const auto& s : streams) out.push_back(s.spec);
    return out;
  }

  double sigma(std::size_t stream) const { return std::exp(streams[stream].log_sigma); }

  std::span<const double> mean(std::size_t stream, int h) const {
    const auto& s = streams[stream];
    return {s.table.data() + static_cast<std::size_t>(h) * s.spec.dim, static_cast<std::size_t>(s.spec.dim)};
  }
  std::span<const double> probs(std::size_t stream, int h) const {
    const auto& s = streams[stream];
    return {s.probs.data() + static_cast<std::size_t>(h) * s.spec.dim, static_cast<std::size_t>(s.spec.dim)};
  }
  std::span<const double> log_smoothed(std::size_t stream, int h) const {
    const auto& s = streams[stream];
    return {s.log_smoothed.data() + static_cast<std::size_t>(h) * s.spec.dim,
            static_cast<std::size_t>(s.spec.dim)};
  }

  /// Recomputes the cached weights and class probabilities. Must be called
  /// after any direct edit of the parameters.
  void refresh(double smoothing_eps) {
    layout = StreamLayout(specs());
    log_weights = weight_logits;
    double lse = log_sum_exp(log_weights);
    for (double& w : log_weights) w -= lse;
    for (auto& s : streams) {
      if (s.spec.kind != StreamKind::Categorical) continue;
      std::size_t d = static_cast<std::size_t>(s.spec.dim);
      s.probs = s.table;
      s.log_smoothed.resize(s.probs.size());
      double denom = std::log1p(static_cast<double>(d) * smoothing_eps);
      for (int h = 0; h < K; ++h) {
        std::span<double> row(s.probs.data() + h * d, d);
        softmax_inplace(row);
        for (std::size_t i = 0; i < d; ++i) s.log_smoothed[h * d + i] = std::log(row[i] + smoothing_eps) - denom;
      }
    }
  }
};

/// Per-variable z-scoring statistics over the first-layer real variables.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t size() const { return mean.size(); }
  double apply(std::size_t i, double x) const { return (x - mean[i]) / std[i]; }
  double invert(std::size_t i, double z) const { return z * std[i] + mean[i]; }
};

class DrmmModel {
 public:
  std::vector<StreamSpec> input_specs;
  std::vector<LayerParams> layers;
  NormStats norm_stats;
  double smoothing_eps = 1e-8;
  std::vector<std::string> columns;  // names of the real input variables; may be empty

  std::size_t num_layers() const { return layers.size(); }

  /// Number of first-layer real variables.
  std::size_t real_dims() const {
    std::size_t n = 0;
    for (const auto& s : input_specs)
      if (s.kind == StreamKind::Real) n += static_cast<std::size_t>(s.dim);
    return n;
  }

  void refresh() {
    for (auto& l : layers) l.refresh(smoothing_eps);
  }

  /// Builds an all-zero model whose layer l consumes the input streams plus the
  /// packed latents of layers 1..l-1.
  static DrmmModel zeros(std::vector<StreamSpec> specs, const std::vector<int>& components,
                         double smoothing_eps = 1e-8) {
    if (specs.empty()) throw InputError("a model needs at least one input stream");
    if (components.empty()) throw InputError("a model needs at least one layer");
    DrmmModel m;
    m.input_specs = specs;
    m.smoothing_eps = smoothing_eps;
    std::vector<StreamSpec> cur = specs;
    for (int k : components) {
      m.layers.emplace_back(k, cur, specs.size());
      cur.push_back({StreamKind::Categorical, k});
    }
    std::size_t d = m.real_dims();
    m.norm_stats.mean.assign(d, 0.0);
    m.norm_stats.std.assign(d, 1.0);
    m.refresh();
    return m;
  }

  /// Checks the structural invariants; throws InputError on violation.
  void validate() const {
    if (input_specs.empty()) throw InputError("model has no input streams");
    if (layers.empty()) throw InputError("model has no layers");
    std::vector<StreamSpec> cur = input_specs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      if (L.specs() != cur)
        throw InputError("layer " + std::to_string(l + 1) + " stream list does not match the packed-latent layout");
      if (L.weight_logits.size() != static_cast<std::size_t>(L.K))
        throw InputError("layer " + std::to_string(l + 1) + " weight_logits has wrong length");
      for (const auto& s : L.streams)
        if (s.table.size() != static_cast<std::size_t>(L.K) * s.spec.dim)
          throw InputError("layer " + std::to_string(l + 1) + " parameter table has wrong size");
      cur.push_back({StreamKind::Categorical, L.K});
    }
    if (norm_stats.mean.size() != real_dims() || norm_stats.std.size() != real_dims())
      throw InputError("norm_stats length does not match the number of real input variables");
    if (!columns.empty() && columns.size() != real_dims())
      throw InputError("column name count does not match the number of real input variables");
  }
};

/// Sampled component per layer and the log-probability it was drawn with.
struct LatentPath {
  std::vector<int> h;
  std::vector<double> proposal_logq;
};

struct LatentDraw {
  int h = 0;
  double log_q = 0.0;
};

namespace detail {

inline void check_point(const StreamLayout& layout, const Point& p) {
  if (p.values.size() != layout.total || p.mask.size() != layout.total) {
    // name the first stream that does not fit
    std::size_t have = p.values.size();
    for (std::size_t s = 0; s < layout.size(); ++s) {
      std::size_t end = layout.offsets[s] + layout.specs[s].dim;
      if (end > have)
        throw InputError("stream " + std::to_string(s) + " (" + to_string(layout.specs[s].kind) +
                         "): expected dim " + std::to_string(layout.specs[s].dim) + ", got " +
                         std::to_string(have > layout.offsets[s] ? have - layout.offsets[s] : 0));
    }
    throw InputError("point has " + std::to_string(p.values.size()) + " values / " +
                     std::to_string(p.mask.size()) + " multipliers, expected " + std::to_string(layout.total));
  }
}

/// Which terms enter the component scores. Training stages switch these.
struct ScoreTerms {
  bool weights = true;         // log w_h; when off, uniform log(1/K) is used
  bool latent_streams = true;  // categorical terms of packed-latent streams
};

/// Scores without validation. `scratch` must hold the largest categorical dim.
inline void layer_scores(const LayerParams& layer, std::span<const double> x, std::span<const double> m,
                         ScoreTerms terms, std::span<double> out, std::span<double> scratch) {
  const int K = layer.K;
  if (terms.weights) {
    for (int h = 0; h < K; ++h) out[h] = layer.log_weights[h];
  } else {
    double u = -std::log(static_cast<double>(K));
    for (int h = 0; h < K; ++h) out[h] = u;
  }
  for (std::size_t s = 0; s < layer.streams.size(); ++s) {
    const auto& sp = layer.streams[s];
    const std::size_t off = layer.layout.offsets[s];
    const std::size_t d = static_cast<std::size_t>(sp.spec.dim);
    if (sp.spec.kind == StreamKind::Real) {
      double msum = 0.0;
      for (std::size_t n = 0; n < d; ++n) msum += m[off + n];
      if (msum == 0.0) continue;
      const double inv2var = 0.5 * std::exp(-2.0 * sp.log_sigma);
      const double cst = msum * (sp.log_sigma + kHalfLog2Pi);
      for (int h = 0; h < K; ++h) {
        const double* mu = sp.table.data() + h * d;
        double acc = 0.0;
        for (std::size_t n = 0; n < d; ++n) {
          double diff = x[off + n] - mu[n];
          acc += m[off + n] * diff * diff;
        }
        out[h] -= acc * inv2var + cst;
      }
    } else {
      if (s >= layer.first_latent_stream && !terms.latent_streams) continue;
      const double mc = m[off];
      if (mc == 0.0) continue;
      std::span<double> y = scratch.first(d);
      std::copy_n(x.begin() + off, d, y.begin());
      softmax_inplace(y);
      for (int h = 0; h < K; ++h) {
        const double* lp = sp.log_smoothed.data() + h * d;
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += y[i] * lp[i];
        out[h] += mc * acc;
      }
    }
  }
}

inline std::size_t max_cat_dim(const LayerParams& layer) {
  std::size_t d = 1;
  for (const auto& s : layer.streams)
    if (s.spec.kind == StreamKind::Categorical) d = std::max<std::size_t>(d, s.spec.dim);
  return d;
}

}  // namespace detail

/// Which terms enter membership scores (used by the training curriculum).
using ScoreTerms = detail::ScoreTerms;

/// Per-component log-scores log w_h + sum of masked stream log-likelihoods.
inline std::vector<double> log_membership(const LayerParams& layer, const Point& point) {
  detail::check_point(layer.layout, point);
  std::vector<double> out(layer.K), scratch(detail::max_cat_dim(layer));
  detail::layer_scores(layer, point.values, point.mask, {}, out, scratch);
  return out;
}

/// log p(X | theta) of a single layer's mixture.
inline double layer_mixture_loglik(const LayerParams& layer, const Point& point) {
  return log_sum_exp(log_membership(layer, point));
}

/// Normalizes the scores, drops components below trunc * max probability,
/// renormalizes and draws one component.
inline LatentDraw sample_latent(std::span<const double> log_scores, double trunc, Rng& rng) {
  const std::size_t K = log_scores.size();
  double lse = log_sum_exp(log_scores);
  if (!std::isfinite(lse)) throw NumericError("sample_latent: non-finite log-scores");
  double max_s = *std::max_element(log_scores.begin(), log_scores.end());
  // probabilities relative to the max are enough for the threshold test
  const double log_thresh = trunc > 0.0 ? (max_s + std::log(trunc)) : kNegInf;
  std::vector<double> kept(K);
  for (std::size_t k = 0; k < K; ++k) kept[k] = log_scores[k] < log_thresh ? kNegInf : log_scores[k] - lse;
  double kept_lse = log_sum_exp(kept);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  std::size_t pick = K;
  std::size_t last_valid = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (kept[k] == kNegInf) continue;
    last_valid = k;
    cum += std::exp(kept[k] - kept_lse);
    if (u < cum) {
      pick = k;
      break;
    }
  }
  if (pick == K) pick = last_valid;  // rounding at the top end
  return {static_cast<int>(pick), kept[pick] - kept_lse};
}

/// Truncated, renormalized sampling distribution used by sample_latent.
inline std::vector<double> truncated_probs(std::span<const double> log_scores, double trunc) {
  double lse = log_sum_exp(log_scores);
  double max_s = *std::max_element(log_scores.begin(), log_scores.end());
  const double log_thresh = trunc > 0.0 ? (max_s + std::log(trunc)) : kNegInf;
  std::vector<double> q(log_scores.size());
  double tot = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = log_scores[k] < log_thresh ? 0.0 : std::exp(log_scores[k] - lse);
    tot += q[k];
  }
  for (double& v : q) v /= tot;
  return q;
}

/// Reconstruction X-hat for component h: means for real streams, class
/// probabilities for categorical streams.
inline std::vector<double> reconstruct(const LayerParams& layer, int h) {
  if (h < 0 || h >= layer.K)
    throw InputError("component index " + std::to_string(h) + " out of range [0, " + std::to_string(layer.K) + ")");
  std::vector<double> out(layer.layout.total);
  for (std::size_t s = 0; s < layer.streams.size(); ++s) {
    auto src = layer.streams[s].spec.kind == StreamKind::Real ? layer.mean(s, h) : layer.probs(s, h);
    std::copy(src.begin(), src.end(), out.begin() + layer.layout.offsets[s]);
  }
  return out;
}

/// R = X - X-hat. Real variables with multiplier 0 get residual 0; the mask is
/// carried over unchanged.
inline Point residual(const Point& x, std::span<const double> xhat, const StreamLayout& layout) {
  detail::check_point(layout, x);
  if (xhat.size() != layout.total) throw InputError("reconstruction length does not match the point");
  Point r;
  r.values.resize(layout.total);
  r.mask = x.mask;
  for (std::size_t s = 0; s < layout.size(); ++s) {
    const std::size_t off = layout.offsets[s], d = layout.specs[s].dim;
    const bool real = layout.specs[s].kind == StreamKind::Real;
    for (std::size_t i = off; i < off + d; ++i)
      r.values[i] = (real && x.mask[i] == 0.0) ? 0.0 : x.values[i] - xhat[i];
  }
  return r;
}

/// log(smooth(onehot(h))) with smooth(v) = (v + eps) / (1 + K eps).
inline std::vector<double> pack_latent(int h, int K, double smoothing_eps) {
  if (h < 0 || h >= K) throw InputError("pack_latent: h out of range");
  const double denom = std::log1p(K * smoothing_eps);
  std::vector<double> out(static_cast<std::size_t>(K), std::log(smoothing_eps) - denom);
  out[h] = std::log1p(smoothing_eps) - denom;
  return out;
}

/// The next layer's input: residual followed by the packed latent stream.
inline Point next_layer_input(const Point& residual_point, int h, int K, double smoothing_eps) {
  Point next = residual_point;
  auto packed = pack_latent(h, K, smoothing_eps);
  next.values.insert(next.values.end(), packed.begin(), packed.end());
  next.mask.insert(next.mask.end(), packed.size(), 1.0);
  return next;
}

}  // namespace drmm
