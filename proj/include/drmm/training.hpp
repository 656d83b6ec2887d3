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

// Maximum-likelihood training with a three-stage curriculum:
//
//   stage 1  sum over layers of each layer's mixture log-likelihood, inputs of
//            every layer treated as constants, uniform component weights,
//            packed-latent stream terms left out, plus the orphan regularizer;
//   stage 2  as stage 1 with the packed-latent stream terms;
//   stage 3  gradients flow through the residual chain, weights included, and
//            the objective moves linearly from the layer sum to the last
//            layer's term while the learning rate decays from 0.1x to zero.
//
// Sampled latents are constants for differentiation. All gradients are
// analytic; tests compare them against central finite differences.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drmm/data.hpp"
#include "drmm/likelihood.hpp"
#include "drmm/model.hpp"

namespace drmm {

struct TrainConfig {
  int total_iters = 3000;
  int batch_size = 64;
  std::optional<double> lr;  // default: 0.005 for <= 3 input dims, else 0.002
  double reg_alpha = 0.1;
  double train_trunc = 0.5;
  std::uint64_t seed = 0;
  std::optional<std::array<int, 3>> stage_iters;  // default: equal thirds
  int log_every = 1000;

  std::array<int, 3> splits() const {
    if (stage_iters) {
      const auto& s = *stage_iters;
      if (s[0] < 0 || s[1] < 0 || s[2] < 1 || s[0] + s[1] + s[2] != total_iters)
        throw InputError("stage splits must be non-negative, end with a non-empty stage 3 and sum to total_iters");
      return s;
    }
    int third = total_iters / 3;
    return {third, third, total_iters - 2 * third};
  }
  void validate() const {
    if (total_iters < 3) throw InputError("total_iters must be >= 3");
    if (batch_size < 1) throw InputError("batch_size must be >= 1");
    if (lr && !(*lr > 0.0)) throw InputError("learning rate must be > 0");
    if (train_trunc < 0.0 || train_trunc > 1.0) throw InputError("train truncation must lie in [0, 1]");
    splits();
  }
};

inline double default_learning_rate(std::size_t input_dims) { return input_dims <= 3 ? 0.005 : 0.002; }

struct StageInfo {
  int stage = 1;
  double progress = 0.0;
};

/// Stage and linear within-stage progress for an iteration.
inline StageInfo stage_of(int iter, const TrainConfig& cfg) {
  auto s = cfg.splits();
  if (iter < 0 || iter >= cfg.total_iters) throw InputError("iteration out of range");
  if (iter < s[0]) return {1, static_cast<double>(iter) / s[0]};
  iter -= s[0];
  if (iter < s[1]) return {2, static_cast<double>(iter) / s[1]};
  iter -= s[1];
  return {3, static_cast<double>(iter) / s[2]};
}

inline double lr_schedule(int stage, double progress, double base_lr) {
  if (stage < 3) return base_lr;
  return 0.1 * base_lr * (1.0 - progress);
}

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, double lr) {
  if (params.size() != grads.size()) throw InputError("adam_step: parameter/gradient size mismatch");
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size()) throw InputError("adam_step: optimizer state size mismatch");
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
    params[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + st.eps);
  }
}

/// Offsets of every parameter block inside the flat parameter/gradient vector.
struct ParamLayout {
  struct Layer {
    std::size_t weights = 0;
    std::vector<std::size_t> table;      // per stream
    std::vector<std::size_t> log_sigma;  // per stream; unused for categorical
  };
  std::vector<Layer> layers;
  std::size_t total = 0;

  explicit ParamLayout(const DrmmModel& model) {
    for (const auto& layer : model.layers) {
      Layer L;
      L.weights = total;
      total += layer.K;
      for (const auto& s : layer.streams) {
        L.table.push_back(total);
        total += s.table.size();
        L.log_sigma.push_back(total);
        if (s.spec.kind == StreamKind::Real) ++total;
      }
      layers.push_back(std::move(L));
    }
  }

  /// Human-readable name of the block containing flat index i.
  std::string block_name(const DrmmModel& model, std::size_t i) const {
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& L = layers[l];
      if (i < L.weights) continue;
      std::string pre = "layer " + std::to_string(l + 1) + " ";
      for (std::size_t s = L.table.size(); s-- > 0;) {
        if (i >= L.table[s]) {
          bool real = model.layers[l].streams[s].spec.kind == StreamKind::Real;
          if (real && i == L.log_sigma[s]) return pre + "stream " + std::to_string(s) + " log_sigma";
          return pre + "stream " + std::to_string(s) + (real ? " means" : " prob_logits");
        }
      }
      return pre + "weight_logits";
    }
    return "unknown";
  }
};

using GradientVector = std::vector<double>;

struct ObjectiveResult {
  double loss = 0.0;
  GradientVector grad;
  double mean_last_loglik = 0.0;  // batch mean of the last layer's full mixture log-likelihood
  std::vector<LatentPath> paths;
};

namespace detail {

inline ScoreTerms stage_terms(int stage) {
  if (stage == 1) return {false, false};
  if (stage == 2) return {false, true};
  return {true, true};
}

/// Coefficient of layer l's log-likelihood in the (maximized) objective.
inline double layer_coeff(int stage, double progress, std::size_t l, std::size_t L) {
  if (stage < 3 || l + 1 == L) return 1.0;
  return 1.0 - progress;
}

/// Adds sum_h a_h * d score_h / d params to the layer's gradient block, and
/// sum_h a_h * d score_h / d x to dx when dx is non-empty.
inline void accumulate_score_grad(const LayerParams& layer, const ParamLayout::Layer& pl, std::span<const double> x,
                                  std::span<const double> m, ScoreTerms terms, std::span<const double> a,
                                  double smoothing_eps, std::span<double> grad, std::span<double> dx,
                                  std::span<double> scratch) {
  const int K = layer.K;
  double asum = 0.0;
  for (int h = 0; h < K; ++h) asum += a[h];
  if (terms.weights) {
    for (int j = 0; j < K; ++j) grad[pl.weights + j] += a[j] - asum * std::exp(layer.log_weights[j]);
  }
  for (std::size_t s = 0; s < layer.streams.size(); ++s) {
    const auto& sp = layer.streams[s];
    const std::size_t off = layer.layout.offsets[s];
    const std::size_t d = static_cast<std::size_t>(sp.spec.dim);
    double* gt = grad.data() + pl.table[s];
    if (sp.spec.kind == StreamKind::Real) {
      double msum = 0.0;
      for (std::size_t n = 0; n < d; ++n) msum += m[off + n];
      if (msum == 0.0) continue;
      const double inv_var = std::exp(-2.0 * sp.log_sigma);
      double gls = 0.0;
      for (int h = 0; h < K; ++h) {
        if (a[h] == 0.0) continue;
        const double* mu = sp.table.data() + h * d;
        double sq = 0.0;
        for (std::size_t n = 0; n < d; ++n) {
          const double mn = m[off + n];
          if (mn == 0.0) continue;
          const double diff = x[off + n] - mu[n];
          const double t = a[h] * mn * diff * inv_var;
          gt[h * d + n] += t;
          if (!dx.empty()) dx[off + n] -= t;
          sq += mn * diff * diff;
        }
        gls += a[h] * (sq * inv_var - msum);
      }
      grad[pl.log_sigma[s]] += gls;
    } else {
      if (s >= layer.first_latent_stream && !terms.latent_streams) continue;
      const double mc = m[off];
      if (mc == 0.0) continue;
      std::span<double> y = scratch.first(d);
      std::copy_n(x.begin() + off, d, y.begin());
      softmax_inplace(y);
      std::span<double> wlp = scratch.subspan(d, d);  // sum_h a_h log pi_h
      if (!dx.empty()) std::fill(wlp.begin(), wlp.end(), 0.0);
      double wt = 0.0;  // sum_h a_h t_h
      for (int h = 0; h < K; ++h) {
        if (a[h] == 0.0) continue;
        const double* p = sp.probs.data() + h * d;
        const double* lp = sp.log_smoothed.data() + h * d;
        double gsum = 0.0, t = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          gsum += y[i] * p[i] / (p[i] + smoothing_eps);
          t += y[i] * lp[i];
        }
        const double ah = a[h] * mc;
        for (std::size_t k = 0; k < d; ++k) gt[h * d + k] += ah * (y[k] * p[k] / (p[k] + smoothing_eps) - p[k] * gsum);
        if (!dx.empty()) {
          for (std::size_t k = 0; k < d; ++k) wlp[k] += a[h] * lp[k];
          wt += a[h] * t;
        }
      }
      if (!dx.empty())
        for (std::size_t k = 0; k < d; ++k) dx[off + k] += mc * y[k] * (wlp[k] - wt);
    }
  }
}

/// Gradient of a downstream quantity w.r.t. the reconstruction of component h:
/// X^(l+1) = X^(l) - Xhat_h on the shared streams, so d/dXhat = -G.
inline void accumulate_reconstruction_grad(const LayerParams& layer, const ParamLayout::Layer& pl, int h,
                                           std::span<const double> G, std::span<const double> m,
                                           std::span<double> grad) {
  for (std::size_t s = 0; s < layer.streams.size(); ++s) {
    const auto& sp = layer.streams[s];
    const std::size_t off = layer.layout.offsets[s];
    const std::size_t d = static_cast<std::size_t>(sp.spec.dim);
    double* gt = grad.data() + pl.table[s] + h * d;
    if (sp.spec.kind == StreamKind::Real) {
      for (std::size_t n = 0; n < d; ++n)
        if (m[off + n] != 0.0) gt[n] -= G[off + n];
    } else {
      const double* p = sp.probs.data() + h * d;
      double pg = 0.0;
      for (std::size_t k = 0; k < d; ++k) pg += p[k] * G[off + k];
      for (std::size_t k = 0; k < d; ++k) gt[k] -= p[k] * (G[off + k] - pg);
    }
  }
}

/// Per-row data needed after the forward pass.
struct RowTrace {
  std::vector<std::vector<double>> inputs;  // X^(l) values per layer
  std::vector<std::vector<double>> masks;   // multipliers per layer
  std::vector<std::vector<double>> comp;    // per-layer component log-densities (regularizer)
  std::vector<int> h;
  double value = 0.0;       // sum_l c_l * L_l
  double last_full = 0.0;   // full-term mixture log-likelihood of the last layer
};

struct ObjectiveSpec {
  int stage = 1;
  double progress = 0.0;
  double reg_alpha = 0.0;
  bool want_grad = true;
  bool want_report = false;
  // latent source: fixed paths, or sampling with (trunc, seed)
  const std::vector<LatentPath>* fixed_paths = nullptr;
  double trunc = 0.0;
  std::uint64_t seed = 0;
};

/// Forward (and optionally backward) pass for one row. chain_model produces
/// the residual chain; term_model supplies the per-layer terms. They differ only
/// in finite-difference checks of the gradient-stopped stages.
inline RowTrace run_row(const DrmmModel& chain_model, const DrmmModel& term_model, const ParamLayout& layout,
                        const Point& point, std::size_t row, const ObjectiveSpec& spec, std::span<double> grad) {
  const std::size_t L = term_model.num_layers();
  const ScoreTerms terms = stage_terms(spec.stage);
  const bool stops = spec.stage < 3;
  const bool need_comp = stops && spec.reg_alpha != 0.0;
  RowTrace tr;
  tr.inputs.resize(L);
  tr.masks.resize(L);
  if (need_comp) tr.comp.resize(L);
  tr.h.resize(L);
  Rng rng(derive_seed(spec.seed, row));
  std::size_t max_d = 1;
  for (const auto& layer : term_model.layers) max_d = std::max(max_d, max_cat_dim(layer));
  std::vector<double> scratch(2 * max_d);
  std::vector<std::vector<double>> gammas(L);

  std::vector<double> x = point.values, m = point.mask;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& tl = term_model.layers[l];
    const auto& cl = chain_model.layers[l];
    std::vector<double> s(tl.K);
    layer_scores(tl, x, m, terms, s, scratch);
    const double ll = log_sum_exp(s);
    tr.value += layer_coeff(spec.stage, spec.progress, l, L) * ll;
    if (need_comp) {
      tr.comp[l] = s;
      const double off = terms.weights ? 0.0 : std::log(static_cast<double>(tl.K));
      for (int h = 0; h < tl.K; ++h) tr.comp[l][h] += terms.weights ? -tl.log_weights[h] : off;
    }
    if (spec.want_report && l + 1 == L) {
      if (spec.stage == 3) {
        tr.last_full = ll;
      } else {
        std::vector<double> full(tl.K);
        layer_scores(tl, x, m, {}, full, scratch);
        tr.last_full = log_sum_exp(full);
      }
    }
    auto& g = gammas[l];
    g = s;
    softmax_inplace(g);
    int h;
    if (spec.fixed_paths) {
      h = (*spec.fixed_paths)[row].h.at(l);
      if (h < 0 || h >= tl.K) throw InputError("fixed latent path index out of range");
    } else {
      h = sample_latent(s, spec.trunc, rng).h;
    }
    tr.h[l] = h;
    tr.inputs[l] = x;
    tr.masks[l] = m;
    if (l + 1 == L) break;
    // residual with chain_model's reconstruction, then append the packed latent
    for (std::size_t st = 0; st < cl.streams.size(); ++st) {
      const auto& sp = cl.streams[st];
      const std::size_t off = cl.layout.offsets[st], d = sp.spec.dim;
      const double* src = sp.spec.kind == StreamKind::Real ? sp.table.data() + h * d : sp.probs.data() + h * d;
      const bool real = sp.spec.kind == StreamKind::Real;
      for (std::size_t i = 0; i < d; ++i) x[off + i] = (real && m[off + i] == 0.0) ? 0.0 : x[off + i] - src[i];
    }
    auto packed = pack_latent(h, cl.K, chain_model.smoothing_eps);
    x.insert(x.end(), packed.begin(), packed.end());
    m.insert(m.end(), packed.size(), 1.0);
  }

  if (!spec.want_grad) return tr;

  // backward: G holds d(objective)/d X^(l+1) while visiting layer l
  std::vector<double> G, dx, a;
  for (std::size_t l = L; l-- > 0;) {
    const auto& tl = term_model.layers[l];
    const auto& pl = layout.layers[l];
    const double c = layer_coeff(spec.stage, spec.progress, l, L);
    a.assign(tl.K, 0.0);
    for (int h = 0; h < tl.K; ++h) a[h] = c * gammas[l][h];
    dx.assign(stops ? 0 : tr.inputs[l].size(), 0.0);
    accumulate_score_grad(tl, pl, tr.inputs[l], tr.masks[l], terms, a, term_model.smoothing_eps, grad, dx, scratch);
    if (stops) continue;
    // G for X^(l): direct part plus what flows back from layer l+1
    for (std::size_t i = 0; i < dx.size() && i < G.size(); ++i) dx[i] += G[i];
    G.swap(dx);
    if (l > 0) {
      const auto& prev = term_model.layers[l - 1];
      std::span<const double> Gprev(G.data(), prev.layout.total);
      accumulate_reconstruction_grad(prev, layout.layers[l - 1], tr.h[l - 1], Gprev, tr.masks[l - 1], grad);
      G.resize(prev.layout.total);
    }
  }
  return tr;
}

inline ObjectiveResult run_objective(const DrmmModel& chain_model, const DrmmModel& term_model,
                                     std::span<const Point> batch, const ObjectiveSpec& spec) {
  if (batch.empty()) throw InputError("objective needs a non-empty batch");
  if (spec.fixed_paths && spec.fixed_paths->size() != batch.size())
    throw InputError("one fixed latent path per batch row is required");
  for (const auto& p : batch) check_point(term_model.layers.front().layout, p);
  const ParamLayout layout(term_model);
  const std::size_t B = batch.size();
  const std::size_t L = term_model.num_layers();
  constexpr std::size_t kChunk = 8;
  const std::size_t n_chunks = (B + kChunk - 1) / kChunk;
  std::vector<GradientVector> chunk_grads(n_chunks);
  std::vector<RowTrace> traces(B);
  parallel_for(n_chunks, [&](std::size_t c) {
    auto& g = chunk_grads[c];
    if (spec.want_grad) g.assign(layout.total, 0.0);
    for (std::size_t r = c * kChunk; r < std::min(B, (c + 1) * kChunk); ++r)
      traces[r] = run_row(chain_model, term_model, layout, batch[r], r, spec, g);
  });

  ObjectiveResult res;
  double sum = 0.0, last = 0.0;
  for (const auto& t : traces) {
    sum += t.value;
    last += t.last_full;
  }
  res.loss = -sum / static_cast<double>(B);
  res.mean_last_loglik = last / static_cast<double>(B);
  res.paths.resize(B);
  for (std::size_t r = 0; r < B; ++r) res.paths[r].h = traces[r].h;
  if (spec.want_grad) {
    res.grad.assign(layout.total, 0.0);
    for (const auto& g : chunk_grads)
      for (std::size_t i = 0; i < layout.total; ++i) res.grad[i] += g[i];
    for (double& v : res.grad) v *= -1.0 / static_cast<double>(B);
  }

  // orphan regularizer: -(alpha/K) sum_h max_i log p(X_i | h), stages 1-2
  if (spec.stage < 3 && spec.reg_alpha != 0.0) {
    const ScoreTerms terms = stage_terms(spec.stage);
    std::size_t max_d = 1;
    for (const auto& layer : term_model.layers) max_d = std::max(max_d, max_cat_dim(layer));
    std::vector<double> scratch(2 * max_d), a;
    for (std::size_t l = 0; l < L; ++l) {
      const auto& tl = term_model.layers[l];
      const double w = spec.reg_alpha / tl.K;
      for (int h = 0; h < tl.K; ++h) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < B; ++r)
          if (traces[r].comp[l][h] > traces[best].comp[l][h]) best = r;
        res.loss -= w * traces[best].comp[l][h];
        if (!spec.want_grad) continue;
        a.assign(tl.K, 0.0);
        a[h] = -w;
        ScoreTerms no_w = terms;
        no_w.weights = false;
        accumulate_score_grad(tl, layout.layers[l], traces[best].inputs[l], traces[best].masks[l], no_w, a,
                              term_model.smoothing_eps, res.grad, {}, scratch);
      }
    }
  }
  return res;
}

}  // namespace detail

/// Loss and gradient for fixed latent paths (one per batch row).
inline ObjectiveResult stage_objective(const DrmmModel& model, std::span<const Point> batch,
                                       const std::vector<LatentPath>& paths, int stage, double progress,
                                       double reg_alpha) {
  detail::ObjectiveSpec spec{stage, progress, reg_alpha, true, true, &paths};
  return detail::run_objective(model, model, batch, spec);
}

/// Loss and gradient with latents sampled from the stage's membership scores
/// (truncated at `trunc`); row r draws from a stream seeded by (seed, r).
inline ObjectiveResult stage_objective_sampled(const DrmmModel& model, std::span<const Point> batch, int stage,
                                               double progress, double reg_alpha, double trunc,
                                               std::uint64_t seed, bool want_report = true) {
  detail::ObjectiveSpec spec{stage, progress, reg_alpha, true, want_report, nullptr, trunc, seed};
  return detail::run_objective(model, model, batch, spec);
}

/// Loss only. With gradient stops (stages 1-2) the residual chain comes from
/// chain_model and the layer terms from term_model, so finite differences of
/// term_model see exactly what the stopped gradient sees.
inline double stage_objective_value(const DrmmModel& chain_model, const DrmmModel& term_model,
                                    std::span<const Point> batch, const std::vector<LatentPath>& paths, int stage,
                                    double progress, double reg_alpha) {
  detail::ObjectiveSpec spec{stage, progress, reg_alpha, false, false, &paths};
  return detail::run_objective(chain_model, term_model, batch, spec).loss;
}

/// The orphan regularizer term alone for one layer, given that layer's inputs.
inline double orphan_regularizer(const LayerParams& layer, std::span<const Point> layer_inputs, double alpha,
                                 ScoreTerms terms = {false, false}) {
  if (layer_inputs.empty()) throw InputError("orphan regularizer needs a non-empty batch");
  std::vector<double> best(layer.K, kNegInf), s(layer.K), scratch(2 * detail::max_cat_dim(layer));
  terms.weights = false;
  for (const auto& p : layer_inputs) {
    detail::check_point(layer.layout, p);
    detail::layer_scores(layer, p.values, p.mask, terms, s, scratch);
    for (int h = 0; h < layer.K; ++h) best[h] = std::max(best[h], s[h] + std::log(static_cast<double>(layer.K)));
  }
  double acc = 0.0;
  for (double b : best) acc += b;
  return -alpha / layer.K * acc;
}

struct TrainLogRecord {
  int iter = 0;
  int stage = 1;
  double lr = 0.0;
  double loss = 0.0;
  double loglik = 0.0;
};

inline std::string format_log_record(const TrainLogRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g", r.iter, r.stage, r.lr, r.loss, r.loglik);
  return buf;
}

namespace detail {

inline void check_finite(const DrmmModel& model, const ObjectiveResult& r, int iter) {
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss at iteration " + std::to_string(iter));
  for (std::size_t i = 0; i < r.grad.size(); ++i) {
    if (!std::isfinite(r.grad[i]))
      throw NumericError("non-finite gradient at iteration " + std::to_string(iter) + " in " +
                         ParamLayout(model).block_name(model, i));
  }
}

/// Means from distinct random rows pushed through the earlier layers; log sigma
/// from the pooled residual spread; logits zero.
inline void initialize(DrmmModel& model, const std::vector<Point>& points, std::uint64_t seed, double trunc) {
  Rng rng(derive_seed(seed, 0x1417));
  const std::size_t N = points.size();
  const std::size_t n_stat = std::min<std::size_t>(N, 2000);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    auto& layer = model.layers[l];
    if (N < static_cast<std::size_t>(layer.K))
      throw InputError("need at least K=" + std::to_string(layer.K) + " data rows, got " + std::to_string(N));
    // a random subset: the first K rows give the means, all n_stat the spread
    std::vector<std::size_t> idx(N);
    for (std::size_t i = 0; i < N; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n_stat; ++i) std::swap(idx[i], idx[i + rng() % (N - i)]);
    std::vector<Point> inputs;
    inputs.reserve(n_stat);
    for (std::size_t i = 0; i < n_stat; ++i) {
      Point x = points[idx[i]];
      for (std::size_t j = 0; j < l; ++j) {
        const auto& pl = model.layers[j];
        std::vector<double> s(pl.K), scratch(2 * max_cat_dim(pl));
        layer_scores(pl, x.values, x.mask, {}, s, scratch);
        int h = sample_latent(s, trunc, rng).h;
        x = next_layer_input(residual(x, reconstruct(pl, h), pl.layout), h, pl.K, model.smoothing_eps);
      }
      inputs.push_back(std::move(x));
    }
    for (std::size_t s = 0; s < layer.streams.size(); ++s) {
      auto& sp = layer.streams[s];
      if (sp.spec.kind != StreamKind::Real) continue;
      const std::size_t off = layer.layout.offsets[s], d = sp.spec.dim;
      for (int h = 0; h < layer.K; ++h)
        for (std::size_t i = 0; i < d; ++i) sp.table[h * d + i] = inputs[h].values[off + i];
      double ss = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double mean = 0.0;
        for (const auto& p : inputs) mean += p.values[off + i];
        mean /= static_cast<double>(inputs.size());
        for (const auto& p : inputs) ss += (p.values[off + i] - mean) * (p.values[off + i] - mean);
      }
      double sd = std::sqrt(ss / static_cast<double>(inputs.size() * d));
      sp.log_sigma = std::log(std::max(sd, 1e-6));
    }
    layer.refresh(model.smoothing_eps);
  }
}

}  // namespace detail

using TrainLogFn = std::function<void(const TrainLogRecord&)>;

/// Trains an L-layer, K-component model on z-scored copies of the given
/// points (already normalized; the caller stores norm stats in the model).
inline DrmmModel train_points(const std::vector<StreamSpec>& specs, const std::vector<Point>& points, int layers,
                              int components, const TrainConfig& cfg, const TrainLogFn& log = {}) {
  cfg.validate();
  if (layers < 1 || components < 1) throw InputError("layers and components must be >= 1");
  if (points.empty()) throw InputError("training data is empty");
  DrmmModel model = DrmmModel::zeros(specs, std::vector<int>(layers, components));
  for (const auto& p : points) detail::check_point(model.layers[0].layout, p);
  detail::initialize(model, points, cfg.seed, cfg.train_trunc);

  std::size_t n_real = model.real_dims();
  const double base_lr = cfg.lr.value_or(default_learning_rate(n_real));
  Rng batch_rng(derive_seed(cfg.seed, 0xba7c));
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  AdamState adam;
  std::vector<double> params = flatten_params(model);
  std::vector<Point> batch(cfg.batch_size);
  for (int it = 0; it < cfg.total_iters; ++it) {
    auto [stage, progress] = stage_of(it, cfg);
    const double lr = lr_schedule(stage, progress, base_lr);
    for (auto& b : batch) b = points[pick(batch_rng)];
    const bool report = log && (it % std::max(cfg.log_every, 1) == 0 || it + 1 == cfg.total_iters);
    auto res = stage_objective_sampled(model, batch, stage, progress, cfg.reg_alpha, cfg.train_trunc,
                                       derive_seed(cfg.seed, 0x5a3b, static_cast<std::uint64_t>(it)), report);
    detail::check_finite(model, res, it);
    if (report) log({it, stage, lr, res.loss, res.mean_last_loglik});
    adam_step(params, res.grad, adam, lr);
    assign_params(model, params);
  }
  return model;
}

/// Trains on a dataset of real columns: fits the normalizer, z-scores the
/// rows, trains, and stores the normalization stats in the model.
inline DrmmModel train(const Dataset& data, int layers, int components, const TrainConfig& cfg,
                       const TrainLogFn& log = {}) {
  if (data.n_cols() == 0) throw InputError("dataset has no columns");
  NormStats norm = fit_normalizer(data);
  std::vector<Point> points;
  points.reserve(data.n_rows());
  for (const auto& r : data.rows) {
    std::vector<double> z(r.size());
    for (std::size_t c = 0; c < r.size(); ++c) z[c] = norm.apply(c, r[c]);
    points.emplace_back(std::move(z));
  }
  std::vector<StreamSpec> specs{{StreamKind::Real, static_cast<int>(data.n_cols())}};
  DrmmModel model = train_points(specs, points, layers, components, cfg, log);
  model.norm_stats = norm;
  model.columns = data.columns;
  return model;
}

}  // namespace drmm
