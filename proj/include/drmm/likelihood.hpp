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

// Deep-model passes: the stochastic forward pass, the importance-sampled and
// exactly enumerated likelihoods, the flat input-space mixture, and parameter
// accounting.

#pragma once

#include <cstdint>
#include <vector>

#include "drmm/conditioning.hpp"
#include "drmm/model.hpp"

namespace drmm {

inline constexpr std::uint64_t kDefaultEnumerationBudget = 1'000'000;

struct ForwardResult {
  LatentPath path;
  std::vector<double> reconstruction_sum;  // over first-layer real variables
  Point last_input;                        // X^(L), the input of the last layer
  std::vector<double> last_scores;         // layer-L membership scores, without conditions
};

namespace detail {

/// Real-variable slice of a layer reconstruction.
inline std::vector<double> real_slice(std::span<const double> xhat, const RealVarMap& map) {
  std::vector<double> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = xhat[map.offset_of[i]];
  return out;
}

inline void validate_input(const DrmmModel& model, const Point& point) {
  detail::check_point(model.layers.front().layout, point);
}

/// Samples latents for the first n_layers layers. last_input is the input of
/// layer n_layers + 1, or of layer L when all layers are sampled.
inline ForwardResult propagate(const DrmmModel& model, const Point& point, const ConditionSet& conditions,
                               double trunc, Rng& rng, std::size_t n_layers) {
  RealVarMap map(model.input_specs);
  ForwardResult out;
  out.reconstruction_sum.assign(map.size(), 0.0);
  Point x = point;
  ConditionSet cset = conditions;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = model.layers[l];
    std::vector<double> scores(layer.K), scratch(max_cat_dim(layer));
    layer_scores(layer, x.values, x.mask, {}, scores, scratch);
    if (l + 1 == model.num_layers()) out.last_scores = scores;
    if (!cset.empty()) {
      auto adj = condition_log_adjustments(layer, cset, map);
      for (int h = 0; h < layer.K; ++h) scores[h] += adj[h];
    }
    auto draw = sample_latent(scores, trunc, rng);
    out.path.h.push_back(draw.h);
    out.path.proposal_logq.push_back(draw.log_q);
    auto xhat = reconstruct(layer, draw.h);
    auto xr = real_slice(xhat, map);
    for (std::size_t i = 0; i < xr.size(); ++i) out.reconstruction_sum[i] += xr[i];
    if (l + 1 == model.num_layers()) {
      out.last_input = std::move(x);
      return out;
    }
    if (!cset.empty()) cset = shift_to_residual(cset, xr);
    x = next_layer_input(residual(x, xhat, layer.layout), draw.h, layer.K, model.smoothing_eps);
  }
  out.last_input = std::move(x);
  return out;
}

}  // namespace detail

/// Runs all layers: membership, condition weighting, truncated latent
/// sampling, reconstruction and residual, packing the latent for the next layer.
inline ForwardResult forward(const DrmmModel& model, const Point& point, const ConditionSet& conditions,
                             double trunc, Rng& rng) {
  detail::validate_input(model, point);
  return detail::propagate(model, point, conditions, trunc, rng, model.num_layers());
}

inline ForwardResult forward(const DrmmModel& model, const Point& point, double trunc, Rng& rng) {
  return forward(model, point, ConditionSet{}, trunc, rng);
}

/// Importance-sampled deep log-likelihood: each sampled path over layers
/// 1..L-1 contributes p_L(X^(L)) / prod q(h), averaged in log-domain.
inline double estimate_loglik(const DrmmModel& model, const Point& point, int n_samples, double trunc, Rng& rng) {
  if (n_samples < 1) throw InputError("estimate_loglik needs n_samples >= 1");
  detail::validate_input(model, point);
  const std::size_t L = model.num_layers();
  if (L == 1) return layer_mixture_loglik(model.layers[0], point);
  std::vector<double> terms(static_cast<std::size_t>(n_samples));
  for (auto& t : terms) {
    auto fr = detail::propagate(model, point, {}, trunc, rng, L - 1);
    double logq = 0.0;
    for (double q : fr.path.proposal_logq) logq += q;
    t = layer_mixture_loglik(model.layers[L - 1], fr.last_input) - logq;
  }
  return log_mean_exp(terms);
}

/// Exact deep log-likelihood by enumerating every latent path of layers
/// 1..L-1 and summing the last layer's mixture density over them.
inline double exact_loglik(const DrmmModel& model, const Point& point,
                           std::uint64_t budget = kDefaultEnumerationBudget) {
  detail::validate_input(model, point);
  const std::size_t L = model.num_layers();
  std::uint64_t paths = 1;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    paths *= static_cast<std::uint64_t>(model.layers[l].K);
    if (paths > budget)
      throw InputError("exact likelihood needs more than " + std::to_string(budget) +
                       " latent paths (enumeration budget exceeded)");
  }
  std::vector<double> terms;
  terms.reserve(paths);
  auto recurse = [&](auto&& self, const Point& x, std::size_t l) -> void {
    const auto& layer = model.layers[l];
    if (l + 1 == L) {
      terms.push_back(layer_mixture_loglik(layer, x));
      return;
    }
    for (int h = 0; h < layer.K; ++h) {
      auto xhat = reconstruct(layer, h);
      self(self, next_layer_input(residual(x, xhat, layer.layout), h, layer.K, model.smoothing_eps), l + 1);
    }
  };
  recurse(recurse, point, 0);
  return log_sum_exp(terms);
}

/// Number of latent paths exact_loglik would enumerate.
inline std::uint64_t exact_path_count(const DrmmModel& model) {
  std::uint64_t p = 1;
  for (std::size_t l = 0; l + 1 < model.num_layers(); ++l) p *= static_cast<std::uint64_t>(model.layers[l].K);
  return p;
}

/// The deep model written as a flat isotropic mixture over first-layer real
/// variables: one component per combination of layer latents.
struct InputSpaceGmm {
  struct Component {
    double gamma = 0.0;
    double log_gamma = kNegInf;  // log of the normalized gamma, kept to avoid underflow
    std::vector<double> mean;
  };
  std::vector<Component> components;
  double sigma = 1.0;
  double log_mass = 0.0;  // log of sum of unnormalized gammas

  /// log of sum_j exp(log_mass) gamma_j N(x | mean_j, sigma^2 I) over variables
  /// with nonzero multiplier; multipliers weight the per-variable terms.
  double log_density(std::span<const double> x, std::span<const double> mask = {}) const {
    std::vector<double> t(components.size());
    const double var = sigma * sigma;
    for (std::size_t j = 0; j < components.size(); ++j) {
      double acc = components[j].log_gamma;
      for (std::size_t i = 0; i < x.size(); ++i) {
        double m = mask.empty() ? 1.0 : mask[i];
        if (m == 0.0) continue;
        acc += m * log_normal_pdf(x[i], components[j].mean[i], var);
      }
      t[j] = acc;
    }
    return log_mass + log_sum_exp(t);
  }
};

inline InputSpaceGmm to_input_space_gmm(const DrmmModel& model, std::uint64_t budget = kDefaultEnumerationBudget) {
  if (model.input_specs.size() != 1 || model.input_specs[0].kind != StreamKind::Real)
    throw InputError("input-space mixture form requires a single real first-layer stream");
  const std::size_t L = model.num_layers();
  std::uint64_t total = 1;
  for (const auto& layer : model.layers) {
    total *= static_cast<std::uint64_t>(layer.K);
    if (total > budget) throw InputError("input-space mixture exceeds the enumeration budget");
  }
  const std::size_t D = static_cast<std::size_t>(model.input_specs[0].dim);
  const auto& last = model.layers.back();
  const double eps = model.smoothing_eps;

  InputSpaceGmm gmm;
  gmm.sigma = std::exp(last.streams[0].log_sigma);
  std::vector<double> log_gamma;
  std::vector<int> h(L, 0);
  for (std::uint64_t c = 0; c < total; ++c) {
    InputSpaceGmm::Component comp;
    comp.mean.assign(D, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      const auto& means = model.layers[l].streams[0].table;
      for (std::size_t i = 0; i < D; ++i) comp.mean[i] += means[h[l] * D + i];
    }
    double lg = last.log_weights[h[L - 1]];
    // latent stream j as seen by the last layer: packed h_j shifted by the
    // class probabilities of the layers between j and L
    for (std::size_t j = 0; j + 1 < L; ++j) {
      const int Kj = model.layers[j].K;
      std::vector<double> xs(Kj);
      const double denom = std::log1p(Kj * eps);
      for (int k = 0; k < Kj; ++k) xs[k] = (k == h[j] ? std::log1p(eps) : std::log(eps)) - denom;
      for (std::size_t l = j + 1; l + 1 < L; ++l) {
        const auto& sp = model.layers[l].streams[1 + j];
        for (int k = 0; k < Kj; ++k) xs[k] -= sp.probs[h[l] * Kj + k];
      }
      softmax_inplace(xs);
      const auto& lsm = last.streams[1 + j].log_smoothed;
      double dot = 0.0;
      for (int k = 0; k < Kj; ++k) dot += xs[k] * lsm[h[L - 1] * Kj + k];
      lg += dot;
    }
    log_gamma.push_back(lg);
    gmm.components.push_back(std::move(comp));
    for (std::size_t l = L; l-- > 0;) {  // odometer increment, last layer fastest
      if (++h[l] < model.layers[l].K) break;
      h[l] = 0;
    }
  }
  gmm.log_mass = log_sum_exp(log_gamma);
  for (std::size_t j = 0; j < gmm.components.size(); ++j) {
    gmm.components[j].log_gamma = log_gamma[j] - gmm.log_mass;
    gmm.components[j].gamma = std::exp(gmm.components[j].log_gamma);
  }
  return gmm;
}

struct ParamCount {
  std::uint64_t exact = 0;
  std::uint64_t formula_estimate = 0;
};

/// Trainable parameter count and the closed-form estimate
/// D1 L K + L (L - 1) K^2 / 2 (meaningful for uniform K).
inline ParamCount param_count(const DrmmModel& model) {
  ParamCount pc;
  for (const auto& layer : model.layers) {
    std::uint64_t D = 0, n_real = 0;
    for (const auto& s : layer.streams) {
      D += static_cast<std::uint64_t>(s.spec.dim);
      if (s.spec.kind == StreamKind::Real) ++n_real;
    }
    pc.exact += (D + 1) * static_cast<std::uint64_t>(layer.K) + n_real;
  }
  std::uint64_t D1 = 0;
  for (const auto& s : model.input_specs) D1 += static_cast<std::uint64_t>(s.dim);
  const std::uint64_t L = model.num_layers(), K = model.layers.empty() ? 0 : model.layers[0].K;
  pc.formula_estimate = D1 * L * K + L * (L - 1) * K * K / 2;
  return pc;
}

/// Flattens all trainable parameters: per layer, weight logits then each
/// stream's table followed by its log sigma (real streams).
inline std::vector<double> flatten_params(const DrmmModel& model) {
  std::vector<double> out;
  for (const auto& layer : model.layers) {
    out.insert(out.end(), layer.weight_logits.begin(), layer.weight_logits.end());
    for (const auto& s : layer.streams) {
      out.insert(out.end(), s.table.begin(), s.table.end());
      if (s.spec.kind == StreamKind::Real) out.push_back(s.log_sigma);
    }
  }
  return out;
}

/// Inverse of flatten_params; refreshes the derived caches.
inline void assign_params(DrmmModel& model, std::span<const double> flat) {
  std::size_t i = 0;
  auto take = [&](std::vector<double>& dst) {
    if (i + dst.size() > flat.size()) throw InputError("parameter vector too short");
    std::copy_n(flat.begin() + i, dst.size(), dst.begin());
    i += dst.size();
  };
  for (auto& layer : model.layers) {
    take(layer.weight_logits);
    for (auto& s : layer.streams) {
      take(s.table);
      if (s.spec.kind == StreamKind::Real) {
        if (i >= flat.size()) throw InputError("parameter vector too short");
        s.log_sigma = flat[i++];
      }
    }
  }
  if (i != flat.size()) throw InputError("parameter vector too long");
  model.refresh();
}

}  // namespace drmm
