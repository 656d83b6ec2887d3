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

#include "drmm/model.hpp"
#include "test_util.hpp"

namespace drmm {
namespace {

DrmmModel two_component_2d() {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Real, 2}}, {2});
  auto& l = m.layers[0];
  l.streams[0].table = {0.0, 0.0, 2.0, 1.0};
  l.streams[0].log_sigma = std::log(0.5);
  l.weight_logits = {std::log(0.25), std::log(0.75)};
  m.refresh();
  return m;
}

TEST(Membership, MatchesGaussianFormulaWithMask) {
  DrmmModel m = two_component_2d();
  Point p({0.5, -1.0});
  auto s = log_membership(m.layers[0], p);
  auto lg = [](double x, double mu) { return -0.5 * std::log(2 * M_PI * 0.25) - (x - mu) * (x - mu) / 0.5; };
  EXPECT_NEAR(s[0], std::log(0.25) + lg(0.5, 0.0) + lg(-1.0, 0.0), 1e-13);
  EXPECT_NEAR(s[1], std::log(0.75) + lg(0.5, 2.0) + lg(-1.0, 1.0), 1e-13);
  // the second variable marginalized
  Point q({0.5, 123.0}, {1.0, 0.0});
  auto t = log_membership(m.layers[0], q);
  EXPECT_NEAR(t[0], std::log(0.25) + lg(0.5, 0.0), 1e-13);
  EXPECT_NEAR(t[1], std::log(0.75) + lg(0.5, 2.0), 1e-13);
  // half confidence halves the per-variable term
  Point r({0.5, -1.0}, {1.0, 0.5});
  EXPECT_NEAR(log_membership(m.layers[0], r)[1], std::log(0.75) + lg(0.5, 2.0) + 0.5 * lg(-1.0, 1.0), 1e-13);
}

TEST(Membership, CategoricalTermIsExpectedLogProbability) {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Categorical, 3}}, {2});
  auto& l = m.layers[0];
  l.streams[0].table = {std::log(0.2), std::log(0.3), std::log(0.5), 0.0, 0.0, 0.0};
  m.refresh();
  std::vector<double> y{0.1, 0.6, 0.3};
  Point p({std::log(0.1), std::log(0.6), std::log(0.3)});
  auto s = log_membership(m.layers[0], p);
  const double eps = 1e-8;
  auto sm = [&](double v) { return std::log((v + eps) / (1 + 3 * eps)); };
  double expect0 = std::log(0.5) + 0.1 * sm(0.2) + 0.6 * sm(0.3) + 0.3 * sm(0.5);
  EXPECT_NEAR(s[0], expect0, 1e-12);
  EXPECT_NEAR(s[1], std::log(0.5) + sm(1.0 / 3.0), 1e-12);
}

TEST(Membership, RejectsWrongShapes) {
  DrmmModel m = two_component_2d();
  EXPECT_THROW(log_membership(m.layers[0], Point({1.0})), InputError);
  EXPECT_THROW(log_membership(m.layers[0], Point({1.0, 2.0}, {1.0})), InputError);
}

TEST(PackLatent, LaplaceSmoothedOneHot) {
  auto v = pack_latent(1, 3, 1e-8);
  EXPECT_NEAR(std::exp(v[1]), (1 + 1e-8) / (1 + 3e-8), 1e-15);
  EXPECT_NEAR(std::exp(v[0]), 1e-8 / (1 + 3e-8), 1e-22);
  EXPECT_NEAR(std::exp(log_sum_exp(v)), 1.0, 1e-15);
  EXPECT_THROW(pack_latent(3, 3, 1e-8), InputError);
}

TEST(Residual, RealAndCategoricalAndMasked) {
  std::vector<StreamSpec> specs{{StreamKind::Real, 2}, {StreamKind::Categorical, 2}};
  StreamLayout layout(specs);
  Point x({1.0, 5.0, std::log(0.5), std::log(0.5)}, {1.0, 0.0, 1.0, 1.0});
  std::vector<double> xhat{0.25, 1.0, 0.3, 0.7};
  Point r = residual(x, xhat, layout);
  EXPECT_EQ(r.values[0], 0.75);
  EXPECT_EQ(r.values[1], 0.0);  // masked real variable
  EXPECT_EQ(r.values[2], std::log(0.5) - 0.3);
  EXPECT_EQ(r.values[3], std::log(0.5) - 0.7);
  EXPECT_EQ(r.mask, x.mask);
  auto next = next_layer_input(r, 1, 3, 1e-8);
  EXPECT_EQ(next.values.size(), 7u);
  EXPECT_EQ(next.mask.back(), 1.0);
}

TEST(Reconstruct, MeansAndProbabilities) {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Real, 1}, {StreamKind::Categorical, 2}}, {2});
  auto& l = m.layers[0];
  l.streams[0].table = {3.0, -1.0};
  l.streams[1].table = {0.0, 0.0, std::log(3.0), 0.0};
  m.refresh();
  auto x = reconstruct(l, 1);
  EXPECT_EQ(x[0], -1.0);
  EXPECT_NEAR(x[1], 0.75, 1e-15);
  EXPECT_NEAR(x[2], 0.25, 1e-15);
  EXPECT_THROW(reconstruct(l, 2), InputError);
}

TEST(SampleLatent, TruncationOneAlwaysPicksArgmax) {
  std::vector<double> s{0.0, 2.0, 1.9};
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    auto d = sample_latent(s, 1.0, rng);
    EXPECT_EQ(d.h, 1);
    EXPECT_EQ(d.log_q, 0.0);
  }
}

TEST(SampleLatent, FrequenciesMatchTruncatedDistribution) {
  std::vector<double> s{std::log(0.05), std::log(0.35), std::log(0.6)};
  auto q = truncated_probs(s, 0.1);
  EXPECT_EQ(q[0], 0.0);
  EXPECT_NEAR(q[1], 0.35 / 0.95, 1e-15);
  Rng rng(2);
  std::vector<int> count(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto d = sample_latent(s, 0.1, rng);
    ++count[d.h];
    EXPECT_NEAR(d.log_q, std::log(q[d.h]), 1e-12);
  }
  EXPECT_EQ(count[0], 0);
  EXPECT_NEAR(count[1] / double(n), q[1], 0.006);
  auto untrunc = truncated_probs(s, 0.0);
  EXPECT_NEAR(untrunc[0], 0.05, 1e-15);
}

TEST(Model, ZerosLayoutAndValidation) {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Real, 3}}, {4, 5, 2});
  EXPECT_EQ(m.num_layers(), 3u);
  EXPECT_EQ(m.layers[2].layout.total, 3u + 4 + 5);
  EXPECT_EQ(m.layers[2].first_latent_stream, 1u);
  EXPECT_NO_THROW(m.validate());
  m.layers[1].weight_logits.pop_back();
  EXPECT_THROW(m.validate(), InputError);
  EXPECT_THROW(DrmmModel::zeros({}, {2}), InputError);
}

TEST(Model, UniformInitialMembershipAtZeroLogits) {
  DrmmModel m = DrmmModel::zeros({{StreamKind::Real, 1}}, {4});
  for (double lw : m.layers[0].log_weights) EXPECT_NEAR(lw, -std::log(4.0), 1e-15);
}

}  // namespace
}  // namespace drmm
