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


#include <gtest/gtest.h>

#include <cmath>

#include "drmm/training.hpp"
#include "test_util.hpp"

namespace drmm {
namespace {

using testing::random_model;
using testing::random_point;

struct GradCase {
  DrmmModel model;
  std::vector<Point> batch;
  std::vector<LatentPath> paths;
};

GradCase make_case(const std::vector<StreamSpec>& specs, std::uint64_t seed, int n_rows = 6) {
  GradCase c{random_model(specs, {4, 4, 4}, seed), {}, {}};
  Rng rng(seed + 1);
  for (int r = 0; r < n_rows; ++r) {
    c.batch.push_back(random_point(specs, rng));
    LatentPath p;
    for (int l = 0; l < 3; ++l) p.h.push_back(static_cast<int>(rng() % 4));
    c.paths.push_back(p);
  }
  return c;
}

/// Central differences; stages 1-2 perturb only the term model, stage 3 both.
std::vector<double> numeric_grad(const GradCase& c, int stage, double progress, double alpha, double step = 1e-5) {
  std::vector<double> flat = flatten_params(c.model);
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto eval = [&](double delta) {
      DrmmModel term = c.model;
      auto f = flat;
      f[i] += delta;
      assign_params(term, f);
      const DrmmModel& chain = stage == 3 ? term : c.model;
      return stage_objective_value(chain, term, c.batch, c.paths, stage, progress, alpha);
    };
    out[i] = (eval(step) - eval(-step)) / (2.0 * step);
  }
  return out;
}

// Denominator floor: finite differences of an O(10) loss at step 1e-5 carry
// about 2e-10 of roundoff, so gradients below the floor compare absolutely.
constexpr double kGradFloor = 1e-5;

double max_rel_err(const std::vector<double>& a, const std::vector<double>& n, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - n[i]) / std::max({std::abs(a[i]), std::abs(n[i]), floor}));
  return worst;
}

class GradientCheck : public ::testing::TestWithParam<std::tuple<int, double, double>> {};

TEST_P(GradientCheck, RealStreamMatchesFiniteDifferences) {
  auto [stage, progress, alpha] = GetParam();
  auto c = make_case({{StreamKind::Real, 2}}, 11);
  auto analytic = stage_objective(c.model, c.batch, c.paths, stage, progress, alpha);
  EXPECT_NEAR(analytic.loss, stage_objective_value(c.model, c.model, c.batch, c.paths, stage, progress, alpha), 1e-12);
  auto numeric = numeric_grad(c, stage, progress, alpha);
  EXPECT_LE(max_rel_err(analytic.grad, numeric, kGradFloor), 1e-4);
}

TEST_P(GradientCheck, MixedStreamsMatchFiniteDifferences) {
  auto [stage, progress, alpha] = GetParam();
  auto c = make_case({{StreamKind::Real, 2}, {StreamKind::Categorical, 3}}, 23);
  auto analytic = stage_objective(c.model, c.batch, c.paths, stage, progress, alpha);
  auto numeric = numeric_grad(c, stage, progress, alpha);
  EXPECT_LE(max_rel_err(analytic.grad, numeric, kGradFloor), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Stages, GradientCheck,
                         ::testing::Values(std::tuple{1, 0.0, 0.0}, std::tuple{1, 0.3, 0.1}, std::tuple{2, 0.5, 0.1},
                                           std::tuple{3, 0.0, 0.0}, std::tuple{3, 0.4, 0.1},
                                           std::tuple{3, 1.0, 0.0}));

TEST(StageObjective, StageOneSingleLayerIsUniformWeightMixture) {
  DrmmModel m = testing::random_real_model(2, {3}, 5);
  Rng rng(6);
  std::vector<Point> batch;
  std::vector<LatentPath> paths;
  for (int i = 0; i < 5; ++i) {
    batch.push_back(random_point(m.input_specs, rng));
    paths.push_back({{0}, {}});
  }
  double expect = 0.0;
  for (const auto& p : batch) {
    std::vector<std::vector<double>> means;
    for (int h = 0; h < 3; ++h) {
      auto mu = m.layers[0].mean(0, h);
      means.emplace_back(mu.begin(), mu.end());
    }
    expect -= testing::flat_gmm_logpdf(p.values, means, {1.0 / 3, 1.0 / 3, 1.0 / 3}, m.layers[0].sigma(0));
  }
  expect /= 5.0;
  EXPECT_NEAR(stage_objective(m, batch, paths, 1, 0.0, 0.0).loss, expect, 1e-10);
}

TEST(StageObjective, StationaryAtComponentMean) {
  DrmmModel m = testing::random_real_model(2, {1}, 3);
  auto mu = m.layers[0].mean(0, 0);
  std::vector<Point> batch{Point(std::vector<double>(mu.begin(), mu.end()))};
  auto r = stage_objective(m, batch, {{{0}, {}}}, 1, 0.0, 0.0);
  EXPECT_EQ(r.grad[1], 0.0);
  EXPECT_EQ(r.grad[2], 0.0);
}

TEST(StageObjective, StageThreeEndpoints) {
  auto c = make_case({{StreamKind::Real, 2}}, 31);
  // progress 1: only the last layer's full term remains
  double v1 = stage_objective(c.model, c.batch, c.paths, 3, 1.0, 0.0).loss;
  double expect = 0.0;
  for (std::size_t r = 0; r < c.batch.size(); ++r) {
    Point x = c.batch[r];
    for (int l = 0; l < 2; ++l) {
      const auto& layer = c.model.layers[l];
      int h = c.paths[r].h[l];
      x = next_layer_input(residual(x, reconstruct(layer, h), layer.layout), h, layer.K, c.model.smoothing_eps);
    }
    expect -= layer_mixture_loglik(c.model.layers[2], x);
  }
  EXPECT_NEAR(v1, expect / c.batch.size(), 1e-10);
  // progress 0: the full-term layer sum
  double v0 = stage_objective(c.model, c.batch, c.paths, 3, 0.0, 0.0).loss;
  double sum = 0.0;
  for (std::size_t r = 0; r < c.batch.size(); ++r) {
    Point x = c.batch[r];
    for (int l = 0; l < 3; ++l) {
      const auto& layer = c.model.layers[l];
      sum -= layer_mixture_loglik(layer, x);
      int h = c.paths[r].h[l];
      if (l < 2)
        x = next_layer_input(residual(x, reconstruct(layer, h), layer.layout), h, layer.K, c.model.smoothing_eps);
    }
  }
  EXPECT_NEAR(v0, sum / c.batch.size(), 1e-10);
}

TEST(StageObjective, StopsKeepUpstreamGradientLayerLocal) {
  auto c = make_case({{StreamKind::Real, 2}}, 41);
  auto full = stage_objective(c.model, c.batch, c.paths, 1, 0.0, 0.0);
  DrmmModel first = c.model;
  first.layers.resize(1);
  std::vector<LatentPath> p1;
  for (const auto& p : c.paths) p1.push_back({{p.h[0]}, {}});
  auto one = stage_objective(first, c.batch, p1, 1, 0.0, 0.0);
  for (std::size_t i = 0; i < one.grad.size(); ++i) EXPECT_NEAR(full.grad[i], one.grad[i], 1e-14) << i;
}

TEST(StageObjective, ThreadCountDoesNotChangeResult) {
  auto c = make_case({{StreamKind::Real, 2}}, 51, 40);
  setenv("DRMM_THREADS", "1", 1);
  auto a = stage_objective(c.model, c.batch, c.paths, 3, 0.2, 0.0);
  setenv("DRMM_THREADS", "4", 1);
  auto b = stage_objective(c.model, c.batch, c.paths, 3, 0.2, 0.0);
  unsetenv("DRMM_THREADS");
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(OrphanRegularizer, CoincidentPointsGiveClosedForm) {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Real, 2}}, {2});
  m.layers[0].streams[0].table = {0.0, 0.0, 3.0, 3.0};
  m.refresh();
  std::vector<Point> pts{Point({0.0, 0.0}), Point({3.0, 3.0})};
  const double alpha = 0.1;
  EXPECT_NEAR(orphan_regularizer(m.layers[0], pts, alpha), -alpha * -std::log(2.0 * M_PI), 1e-12);
  EXPECT_EQ(orphan_regularizer(m.layers[0], pts, 0.0), 0.0);
}

TEST(OrphanRegularizer, MovingOrphanTowardDataLowersTerm) {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Real, 2}}, {2});
  std::vector<Point> pts{Point({0.0, 0.0}), Point({0.1, -0.1})};
  double prev = std::numeric_limits<double>::infinity();
  for (double x : {8.0, 6.0, 4.0, 2.0, 1.0}) {
    m.layers[0].streams[0].table = {0.0, 0.0, x, x};
    m.refresh();
    double v = orphan_regularizer(m.layers[0], pts, 0.1);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Schedule, StageOfSplitsIntoThirds) {
  TrainConfig cfg;
  cfg.total_iters = 300;
  EXPECT_EQ(stage_of(0, cfg).stage, 1);
  EXPECT_EQ(stage_of(0, cfg).progress, 0.0);
  EXPECT_EQ(stage_of(150, cfg).stage, 2);
  EXPECT_DOUBLE_EQ(stage_of(150, cfg).progress, 0.5);
  EXPECT_EQ(stage_of(299, cfg).stage, 3);
  EXPECT_NEAR(stage_of(299, cfg).progress, 0.99, 1e-12);
  EXPECT_THROW(stage_of(300, cfg), InputError);
}

TEST(Schedule, LearningRate) {
  EXPECT_EQ(lr_schedule(1, 0.7, 0.005), 0.005);
  EXPECT_EQ(lr_schedule(2, 0.2, 0.005), 0.005);
  EXPECT_NEAR(lr_schedule(3, 0.0, 0.005), 0.0005, 1e-18);
  EXPECT_EQ(lr_schedule(3, 1.0, 0.005), 0.0);
  EXPECT_EQ(default_learning_rate(2), 0.005);
  EXPECT_EQ(default_learning_rate(30), 0.002);
}

TEST(Adam, MatchesHandTrace) {
  // scalar trace computed by hand: g = 1.0, -2.0, 0.5 with lr = 0.1
  std::vector<double> p{1.0};
  AdamState st;
  double m = 0, v = 0, x = 1.0;
  const double grads[3] = {1.0, -2.0, 0.5};
  for (int t = 1; t <= 3; ++t) {
    double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    adam_step(p, std::vector<double>{g}, st, 0.1);
    EXPECT_DOUBLE_EQ(p[0], x);
  }
  // literal values of the same trace, computed independently
  EXPECT_NEAR(p[0], 0.9502794196738215, 1e-15);
}

TEST(Adam, FirstStepIsLearningRateAndZeroGradientIsNoop) {
  std::vector<double> p{0.0, 0.0, 5.0};
  AdamState st;
  adam_step(p, std::vector<double>{1e-3, -1e4, 0.0}, st, 0.01);
  EXPECT_NEAR(p[0], -0.01, 1e-7);
  EXPECT_NEAR(p[1], 0.01, 1e-7);
  EXPECT_EQ(p[2], 5.0);
}

TEST(Train, DeterministicAndFinite) {
  Dataset d = gen_toy(ToyKind::Grid9, 400, 3);
  TrainConfig cfg;
  cfg.total_iters = 30;
  cfg.batch_size = 16;
  cfg.seed = 9;
  std::vector<TrainLogRecord> logs;
  cfg.log_every = 10;
  auto a = train(d, 2, 4, cfg, [&](const TrainLogRecord& r) { logs.push_back(r); });
  auto b = train(d, 2, 4, cfg);
  EXPECT_EQ(model_to_json(a), model_to_json(b));
  ASSERT_FALSE(logs.empty());
  for (const auto& r : logs) EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_EQ(logs.back().iter, 29);
}

TEST(Train, RejectsTooFewRows) {
  Dataset d = gen_toy(ToyKind::Grid9, 3, 3);
  TrainConfig cfg;
  cfg.total_iters = 3;
  EXPECT_THROW(train(d, 1, 8, cfg), InputError);
}

}  // namespace
}  // namespace drmm
