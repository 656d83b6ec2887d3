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
#include <filesystem>

#include "drmm/data.hpp"

namespace drmm {
namespace {

const double kH = std::sqrt(3.0) / 2.0;

// Level-k membership in the gasket after mapping the triangle onto the unit
// right triangle: the binary digits of u and v never share a 1.
bool in_gasket(double x, double y, int levels) {
  double v = y / kH, u = x - 0.5 * v;
  if (u < -1e-9 || v < -1e-9 || u + v > 1 + 1e-9) return false;
  for (int k = 1; k <= levels; ++k) {
    double s = std::ldexp(1.0, k);
    double fu = u * s, fv = v * s;
    // points within rounding of a cell boundary belong to both neighbours
    if (std::abs(fu - std::round(fu)) < 1e-6 || std::abs(fv - std::round(fv)) < 1e-6) continue;
    if ((static_cast<long>(fu) & static_cast<long>(fv)) != 0) return false;
  }
  return true;
}

TEST(Sierpinski, PointsLieOnTheGasket) {
  auto d = gen_sierpinski(5000, 1);
  ASSERT_EQ(d.n_rows(), 5000u);
  EXPECT_EQ(d.columns, (std::vector<std::string>{"x", "y"}));
  for (const auto& r : d.rows) EXPECT_TRUE(in_gasket(r[0], r[1], 12)) << r[0] << "," << r[1];
}

TEST(Sierpinski, OracleRejectsTheCentralHole) {
  EXPECT_FALSE(in_gasket(0.5, kH / 3, 12));
  EXPECT_TRUE(in_gasket(0.0, 0.0, 12));
}

TEST(Generators, DeterministicAndSeedSensitive) {
  EXPECT_EQ(gen_sierpinski(100, 7).rows, gen_sierpinski(100, 7).rows);
  EXPECT_NE(gen_sierpinski(100, 7).rows, gen_sierpinski(100, 8).rows);
  EXPECT_EQ(gen_toy(ToyKind::Grid9, 100, 3).rows, gen_toy(ToyKind::Grid9, 100, 3).rows);
  EXPECT_EQ(gen_ik_dataset(50, 2).rows, gen_ik_dataset(50, 2).rows);
  // per-row streams: a shorter request is a prefix of a longer one
  auto a = gen_sierpinski(10, 5), b = gen_sierpinski(30, 5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.rows[i], b.rows[i]);
}

TEST(Grid9, ClustersAtIntegerCentres) {
  auto d = gen_toy(ToyKind::Grid9, 9000, 4);
  std::vector<int> counts(9, 0);
  for (const auto& r : d.rows) {
    int cx = static_cast<int>(std::lround(r[0])), cy = static_cast<int>(std::lround(r[1]));
    ASSERT_TRUE(cx >= 0 && cx <= 2 && cy >= 0 && cy <= 2);
    EXPECT_LT(std::hypot(r[0] - cx, r[1] - cy), 0.05 * 6);
    ++counts[cy * 3 + cx];
  }
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
}

TEST(Spirals, RadiusGrowsWithParameter) {
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    double t = i / 100.0;
    for (int arm = 0; arm < 2; ++arm) {
      auto p = spiral_point(t, arm);
      EXPECT_NEAR(std::hypot(p[0], p[1]), t, 1e-15);
    }
    EXPECT_GT(t, prev);
    prev = t;
  }
  auto a = spiral_point(0.5, 0), b = spiral_point(0.5, 1);
  EXPECT_NEAR(a[0], -b[0], 1e-15);
  EXPECT_NEAR(a[1], -b[1], 1e-15);
  for (const auto& r : gen_toy(ToyKind::TwoSpirals, 2000, 6).rows) EXPECT_LT(std::hypot(r[0], r[1]), 1.15);
}

TEST(Skeleton, DefaultHasFifteenJointsAndThirtyFeatures) {
  auto s = default_skeleton();
  EXPECT_EQ(s.bones.size(), 15u);
  EXPECT_EQ(ik_columns(s).size(), IkLayout::kDims);
  EXPECT_EQ(ik_columns(s)[IkLayout::kHandL], "hand_l_x");
  EXPECT_EQ(ik_columns(s)[IkLayout::kCom + 1], "com_y");
}

TEST(Skeleton, ForwardKinematicsOfRestPose) {
  auto s = default_skeleton();
  std::vector<double> zeros(15, 0.0);
  auto f = forward_kinematics(s, {0.0, 1.0}, 0.0, zeros);
  ASSERT_EQ(f.size(), 30u);
  // spine straight up to 1.45; arms hang down; legs straight with feet forward
  EXPECT_NEAR(f[IkLayout::kHandL], 0.0, 1e-15);
  EXPECT_NEAR(f[IkLayout::kHandL + 1], 0.92, 1e-15);
  EXPECT_NEAR(f[IkLayout::kHandR + 1], 0.92, 1e-15);
  EXPECT_NEAR(f[IkLayout::kFootL], 0.2, 1e-15);
  EXPECT_NEAR(f[IkLayout::kFootL + 1], 0.16, 1e-15);
  EXPECT_NEAR(f[IkLayout::kHead], 0.0, 1e-15);
  EXPECT_NEAR(f[IkLayout::kHead + 1], 1.71, 1e-15);
  EXPECT_NEAR(f[IkLayout::kCom], 0.010389610389610391, 1e-15);
  EXPECT_NEAR(f[IkLayout::kCom + 1], 0.8458571428571428, 1e-15);
}

TEST(Skeleton, RootRotationRotatesEverything) {
  auto s = default_skeleton();
  std::vector<double> ang(15, 0.0);
  ang[5] = 0.7;
  ang[6] = 1.1;
  auto f0 = forward_kinematics(s, {0.0, 0.0}, 0.0, ang);
  auto f1 = forward_kinematics(s, {0.0, 0.0}, 0.3, ang);
  double c = std::cos(0.3), sn = std::sin(0.3);
  for (std::size_t k = IkLayout::kHandL; k < IkLayout::kDims; k += 2) {
    EXPECT_NEAR(f1[k], c * f0[k] - sn * f0[k + 1], 1e-14);
    EXPECT_NEAR(f1[k + 1], sn * f0[k] + c * f0[k + 1], 1e-14);
  }
}

TEST(Skeleton, LimitViolationsAreRejected) {
  auto s = default_skeleton();
  std::vector<double> ang(15, 0.0);
  ang[6] = -0.1;
  try {
    forward_kinematics(s, {0.0, 1.0}, 0.0, ang);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("forearm_l"), std::string::npos);
  }
  EXPECT_THROW(forward_kinematics(s, {0.0, 1.0}, 0.0, std::vector<double>(14, 0.0)), InputError);
}

TEST(Skeleton, IkRowsRespectLimitsAndRanges) {
  auto s = default_skeleton();
  for (const auto& r : gen_ik_dataset(500, 3).rows) {
    EXPECT_GE(r[0], s.root_x[0]);
    EXPECT_LE(r[0], s.root_x[1]);
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_GE(r[3 + j], s.bones[j].lo);
      EXPECT_LE(r[3 + j], s.bones[j].hi);
    }
  }
}

TEST(Skeleton, TextRoundTrip) {
  auto s = default_skeleton();
  auto back = parse_skeleton(skeleton_to_text(s));
  ASSERT_EQ(back.bones.size(), s.bones.size());
  for (std::size_t i = 0; i < s.bones.size(); ++i) {
    EXPECT_EQ(back.bones[i].name, s.bones[i].name);
    EXPECT_EQ(back.bones[i].parent, s.bones[i].parent);
    EXPECT_EQ(back.bones[i].length, s.bones[i].length);
    EXPECT_EQ(back.bones[i].rest_angle, s.bones[i].rest_angle);
    EXPECT_EQ(back.bones[i].lo, s.bones[i].lo);
    EXPECT_EQ(back.bones[i].hi, s.bones[i].hi);
  }
  EXPECT_EQ(back.root_rot, s.root_rot);
}

TEST(Skeleton, ParseErrors) {
  EXPECT_THROW(parse_skeleton("bone a missing 1.0\n"), InputError);
  EXPECT_THROW(parse_skeleton("bone a - 1.0\nbone a - 1.0\n"), InputError);
  EXPECT_THROW(parse_skeleton("bone a - -1.0\n"), InputError);
  EXPECT_THROW(parse_skeleton("bone a - 1.0\nlimit a 2 1\n"), InputError);
  EXPECT_THROW(parse_skeleton("joint a\n"), InputError);
}

TEST(Csv, RoundTripIsExact) {
  Dataset d{{"a", "b"}, {{0.1, -1e-300}, {1.0 / 3.0, 12345.678901234567}}, ""};
  auto back = dataset_from_csv(dataset_to_csv(d));
  EXPECT_EQ(back.columns, d.columns);
  EXPECT_EQ(back.rows, d.rows);
  auto path = std::filesystem::temp_directory_path() / "drmm_test_roundtrip.csv";
  save_csv(d, path);
  EXPECT_EQ(load_csv(path).rows, d.rows);
  std::filesystem::remove(path);
}

TEST(Csv, Errors) {
  EXPECT_THROW(dataset_from_csv(""), InputError);
  EXPECT_THROW(dataset_from_csv("1,2\n3,4\n"), InputError);
  EXPECT_THROW(dataset_from_csv("a,b\n1,2,3\n"), InputError);
  try {
    dataset_from_csv("a,b\n1,zz\n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), InputError);
  EXPECT_EQ(dataset_from_csv("x,y\r\n1,2\r\n\n").rows.size(), 1u);
}

TEST(Normalizer, ZScoresAndRoundTrip) {
  auto d = gen_toy(ToyKind::Grid9, 2000, 1);
  auto s = fit_normalizer(d);
  auto z = apply_normalizer(s, d);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0;
    for (const auto& r : z.rows) m += r[c];
    m /= z.n_rows();
    for (const auto& r : z.rows) v += (r[c] - m) * (r[c] - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / z.n_rows(), 1.0, 1e-12);
  }
  auto back = invert_normalizer(s, z);
  for (std::size_t i = 0; i < d.n_rows(); ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double scale = std::max(std::abs(d.rows[i][c]), std::abs(s.mean[c]));
      EXPECT_LE(std::abs(back.rows[i][c] - d.rows[i][c]), 2 * scale * std::numeric_limits<double>::epsilon());
    }
}

TEST(Normalizer, ConstantColumnUsesFloor) {
  Dataset d{{"a"}, {{2.0}, {2.0}, {2.0}}, ""};
  auto s = fit_normalizer(d);
  EXPECT_EQ(s.std[0], kStdFloor);
  EXPECT_EQ(s.apply(0, 2.0), 0.0);
}

TEST(Split, EveryNthRowIsHeldOut) {
  Dataset d{{"i"}, {}, ""};
  for (int i = 0; i < 10; ++i) d.rows.push_back({static_cast<double>(i)});
  auto [train, held] = split_holdout(d, 5);
  EXPECT_EQ(held.rows, (std::vector<std::vector<double>>{{4.0}, {9.0}}));
  EXPECT_EQ(train.n_rows(), 8u);
}

}  // namespace
}  // namespace drmm
