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

// Datasets: synthetic generators, the planar humanoid used for IK data, CSV
// files and z-score normalization. Every generator is a pure function of its
// arguments and seed; rows use independent per-row RNG streams.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drmm/conditioning.hpp"
#include "drmm/math.hpp"
#include "drmm/model.hpp"

namespace drmm {

struct Dataset {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string provenance;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return columns.size(); }
};

// ---------------------------------------------------------------------------
// 2D generators

/// Chaos game on the triangle (0,0), (1,0), (0.5, sqrt(3)/2). Each point starts
/// uniformly inside the triangle, takes 20 discarded steps and keeps the 21st.
inline Dataset gen_sierpinski(std::size_t n, std::uint64_t seed) {
  const std::array<std::array<double, 2>, 3> v{{{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}}};
  Dataset d{{"x", "y"}, {}, "sierpinski seed=" + std::to_string(seed)};
  d.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double a = U(rng), b = U(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    double x = a * v[1][0] + b * v[2][0], y = a * v[1][1] + b * v[2][1];
    std::uniform_int_distribution<int> pick(0, 2);
    for (int t = 0; t < 21; ++t) {
      const auto& p = v[pick(rng)];
      x = 0.5 * (x + p[0]);
      y = 0.5 * (y + p[1]);
    }
    d.rows.push_back({x, y});
  }
  return d;
}

enum class ToyKind { Grid9, TwoSpirals };

/// Noise-free point on spiral `arm` (0 or 1) at parameter t in [0, 1]:
/// angle 3 pi t (offset by pi for arm 1), radius t.
inline std::array<double, 2> spiral_point(double t, int arm) {
  double ang = 3.0 * std::numbers::pi * t + (arm ? std::numbers::pi : 0.0);
  return {t * std::cos(ang), t * std::sin(ang)};
}

/// grid9: nine isotropic Gaussians (sigma 0.05) centred on {0,1,2}^2.
/// two_spirals: two interleaved spirals with Gaussian noise 0.02.
inline Dataset gen_toy(ToyKind kind, std::size_t n, std::uint64_t seed) {
  Dataset d{{"x", "y"}, {}, std::string(kind == ToyKind::Grid9 ? "grid9" : "two_spirals") +
                                " seed=" + std::to_string(seed)};
  d.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    if (kind == ToyKind::Grid9) {
      int c = std::uniform_int_distribution<int>(0, 8)(rng);
      std::normal_distribution<double> N(0.0, 0.05);
      double x = (c % 3) + N(rng);
      double y = (c / 3) + N(rng);
      d.rows.push_back({x, y});
    } else {
      int arm = std::uniform_int_distribution<int>(0, 1)(rng);
      double t = std::sqrt(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
      auto p = spiral_point(t, arm);
      std::normal_distribution<double> N(0.0, 0.02);
      double nx = N(rng);
      double ny = N(rng);
      d.rows.push_back({p[0] + nx, p[1] + ny});
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Planar humanoid

/// A bone rotates about its start point; its world angle is the parent's world
/// angle (the root rotation for root children) plus rest_angle plus the joint
/// angle. Each bone owns exactly one joint angle.
struct Bone {
  std::string name;
  int parent = -1;  // -1: attached to the root (pelvis)
  double length = 0.0;
  double rest_angle = 0.0;
  double lo = -std::numbers::pi;
  double hi = std::numbers::pi;
};

struct Skeleton2D {
  std::vector<Bone> bones;
  std::array<double, 2> root_x{-0.5, 0.5};
  std::array<double, 2> root_y{0.8, 1.1};
  std::array<double, 2> root_rot{-0.4, 0.4};

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < bones.size(); ++i)
      if (bones[i].name == name) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    for (std::size_t i = 0; i < bones.size(); ++i) {
      const auto& b = bones[i];
      if (!(b.length > 0.0)) throw InputError("bone '" + b.name + "' must have positive length");
      // parents precede children, which rules out cycles
      if (b.parent >= static_cast<int>(i)) throw InputError("bone '" + b.name + "' must come after its parent");
      if (!(b.lo <= b.hi)) throw InputError("joint '" + b.name + "' has lo > hi");
    }
  }
};

/// Names of the 30 IK feature columns, in order.
inline std::vector<std::string> ik_columns(const Skeleton2D& skel) {
  std::vector<std::string> c{"root_x", "root_y", "root_rot"};
  for (const auto& b : skel.bones) c.push_back("angle_" + b.name);
  for (const char* e : {"hand_l", "hand_r", "foot_l", "foot_r", "head", "com"}) {
    c.push_back(std::string(e) + "_x");
    c.push_back(std::string(e) + "_y");
  }
  return c;
}

/// Column offsets of the world-coordinate features in the 30D layout.
struct IkLayout {
  static constexpr std::size_t kRoot = 0, kAngles = 3, kHandL = 18, kHandR = 20, kFootL = 22, kFootR = 24,
                               kHead = 26, kCom = 28, kDims = 30;
};

/// The documented humanoid: 3 spine bones, neck and head, two 2-bone arms and
/// two 3-bone legs, 15 joints in total. Facing +x; angles in radians.
inline Skeleton2D default_skeleton() {
  constexpr double pi = std::numbers::pi;
  Skeleton2D s;
  auto add = [&](const char* name, const char* parent, double len, double rest, double lo, double hi) {
    s.bones.push_back({name, parent ? s.find(parent) : -1, len, rest, lo, hi});
  };
  add("spine1", nullptr, 0.15, pi / 2, -0.3, 0.3);
  add("spine2", "spine1", 0.15, 0.0, -0.3, 0.3);
  add("spine3", "spine2", 0.15, 0.0, -0.3, 0.3);
  add("neck", "spine3", 0.08, 0.0, -0.5, 0.5);
  add("head", "neck", 0.18, 0.0, -0.5, 0.5);
  add("upper_arm_l", "spine3", 0.28, pi, -1.0, 3.0);
  add("forearm_l", "upper_arm_l", 0.25, 0.0, 0.0, 2.5);
  add("upper_arm_r", "spine3", 0.28, pi, -1.0, 3.0);
  add("forearm_r", "upper_arm_r", 0.25, 0.0, 0.0, 2.5);
  add("thigh_l", nullptr, 0.42, -pi / 2, -0.6, 2.0);
  add("shin_l", "thigh_l", 0.42, 0.0, -2.4, 0.0);
  add("foot_l", "shin_l", 0.2, pi / 2, -0.5, 0.6);
  add("thigh_r", nullptr, 0.42, -pi / 2, -0.6, 2.0);
  add("shin_r", "thigh_r", 0.42, 0.0, -2.4, 0.0);
  add("foot_r", "shin_r", 0.2, pi / 2, -0.5, 0.6);
  return s;
}

/// Parses `bone name parent length [rest]`, `limit joint lo hi` and
/// `root x|y|rot lo hi` lines. Parent "-" (or "root") attaches to the pelvis.
inline Skeleton2D parse_skeleton(const std::string& text) {
  Skeleton2D s;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string kw;
    ls >> kw;
    auto fail = [&](const std::string& why) {
      throw InputError("skeleton line " + std::to_string(lineno) + ": " + why);
    };
    if (kw == "bone") {
      Bone b;
      std::string parent;
      if (!(ls >> b.name >> parent >> b.length)) fail("expected 'bone name parent length [rest]'");
      if (!(ls >> b.rest_angle)) b.rest_angle = 0.0;
      if (parent == "-" || parent == "root") b.parent = -1;
      else if ((b.parent = s.find(parent)) < 0) fail("unknown parent '" + parent + "'");
      if (s.find(b.name) >= 0) fail("duplicate bone '" + b.name + "'");
      s.bones.push_back(b);
    } else if (kw == "limit") {
      std::string name;
      double lo, hi;
      if (!(ls >> name >> lo >> hi)) fail("expected 'limit joint lo hi'");
      int i = s.find(name);
      if (i < 0) fail("unknown joint '" + name + "'");
      s.bones[i].lo = lo;
      s.bones[i].hi = hi;
    } else if (kw == "root") {
      std::string which;
      double lo, hi;
      if (!(ls >> which >> lo >> hi)) fail("expected 'root x|y|rot lo hi'");
      if (which == "x") s.root_x = {lo, hi};
      else if (which == "y") s.root_y = {lo, hi};
      else if (which == "rot") s.root_rot = {lo, hi};
      else fail("unknown root range '" + which + "'");
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }
  s.validate();
  return s;
}

inline std::string skeleton_to_text(const Skeleton2D& s) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& b : s.bones)
    out << "bone " << b.name << ' ' << (b.parent < 0 ? std::string("-") : s.bones[b.parent].name) << ' ' << b.length
        << ' ' << b.rest_angle << '\n';
  for (const auto& b : s.bones) out << "limit " << b.name << ' ' << b.lo << ' ' << b.hi << '\n';
  out << "root x " << s.root_x[0] << ' ' << s.root_x[1] << '\n';
  out << "root y " << s.root_y[0] << ' ' << s.root_y[1] << '\n';
  out << "root rot " << s.root_rot[0] << ' ' << s.root_rot[1] << '\n';
  return out.str();
}

/// Start and end points of every bone.
struct BonePose {
  std::array<double, 2> start, end;
};

inline std::vector<BonePose> pose_bones(const Skeleton2D& skel, std::array<double, 2> root_pos, double root_rot,
                                        std::span<const double> angles) {
  std::vector<BonePose> out(skel.bones.size());
  std::vector<double> world(skel.bones.size());
  for (std::size_t i = 0; i < skel.bones.size(); ++i) {
    const auto& b = skel.bones[i];
    double parent_angle = b.parent < 0 ? root_rot : world[b.parent];
    auto start = b.parent < 0 ? root_pos : out[b.parent].end;
    world[i] = parent_angle + b.rest_angle + angles[i];
    out[i].start = start;
    out[i].end = {start[0] + b.length * std::cos(world[i]), start[1] + b.length * std::sin(world[i])};
  }
  return out;
}

/// Feature vector [root_pos(2), root_rot, angles(15), hands(4), feet(4),
/// head(2), center_of_mass(2)]. Centre of mass is the length-weighted mean of
/// bone midpoints.
inline std::vector<double> forward_kinematics(const Skeleton2D& skel, std::array<double, 2> root_pos,
                                              double root_rot, std::span<const double> angles) {
  if (angles.size() != skel.bones.size())
    throw InputError("expected " + std::to_string(skel.bones.size()) + " joint angles, got " +
                     std::to_string(angles.size()));
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const auto& b = skel.bones[i];
    if (angles[i] < b.lo || angles[i] > b.hi)
      throw InputError("joint '" + b.name + "' angle " + std::to_string(angles[i]) + " outside [" +
                       std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
  }
  auto poses = pose_bones(skel, root_pos, root_rot, angles);
  std::vector<double> f{root_pos[0], root_pos[1], root_rot};
  f.insert(f.end(), angles.begin(), angles.end());
  auto end_of = [&](const char* name) {
    int i = skel.find(name);
    if (i < 0) throw InputError(std::string("skeleton lacks bone '") + name + "'");
    return poses[i].end;
  };
  for (const char* e : {"forearm_l", "forearm_r", "foot_l", "foot_r", "head"}) {
    auto p = end_of(e);
    f.push_back(p[0]);
    f.push_back(p[1]);
  }
  double cx = 0.0, cy = 0.0, total = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    double w = skel.bones[i].length;
    cx += w * 0.5 * (poses[i].start[0] + poses[i].end[0]);
    cy += w * 0.5 * (poses[i].start[1] + poses[i].end[1]);
    total += w;
  }
  f.push_back(cx / total);
  f.push_back(cy / total);
  return f;
}

/// Uniformly random root poses and joint angles within the skeleton's ranges.
inline Dataset gen_ik_dataset(std::size_t n, std::uint64_t seed, const Skeleton2D& skel = default_skeleton()) {
  skel.validate();
  Dataset d{ik_columns(skel), {}, "ik seed=" + std::to_string(seed)};
  d.rows.reserve(n);
  std::vector<double> angles(skel.bones.size());
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    auto U = [&](std::array<double, 2> r) { return std::uniform_real_distribution<double>(r[0], r[1])(rng); };
    double rx = U(skel.root_x);
    double ry = U(skel.root_y);
    double rot = U(skel.root_rot);
    for (std::size_t j = 0; j < angles.size(); ++j) angles[j] = U({skel.bones[j].lo, skel.bones[j].hi});
    d.rows.push_back(forward_kinematics(skel, {rx, ry}, rot, angles));
  }
  return d;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string dataset_to_csv(const Dataset& d) {
  std::string out;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (c) out += ',';
    out += d.columns[c];
  }
  out += '\n';
  for (const auto& r : d.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out += ',';
      out += format_double(r[c]);
    }
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_csv(const std::string& text, const std::string& source = "<memory>") {
  Dataset d;
  d.provenance = source;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (!have_header) {
      bool numeric = true;
      for (const auto& f : fields) {
        double v;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || ec != std::errc() || p != f.data() + f.size()) numeric = false;
      }
      if (numeric) throw InputError(source + ": missing header row (line " + std::to_string(lineno) + " is numeric)");
      d.columns = fields;
      have_header = true;
      continue;
    }
    if (fields.size() != d.columns.size())
      throw InputError(source + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(d.columns.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      try {
        row.push_back(detail::parse_double(f, "CSV"));
      } catch (const InputError&) {
        throw InputError(source + ": line " + std::to_string(lineno) + ": non-numeric cell '" + f + "'");
      }
    }
    d.rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError(source + ": missing header row (empty file)");
  return d;
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return dataset_from_csv(ss.str(), path.string());
}

inline void save_csv(const Dataset& d, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot open '" + tmp.string() + "' for writing");
    f << dataset_to_csv(d);
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kStdFloor = 1e-8;

inline NormStats fit_normalizer(const Dataset& d) {
  const std::size_t D = d.n_cols();
  NormStats s;
  s.mean.assign(D, 0.0);
  s.std.assign(D, 0.0);
  if (d.rows.empty()) {
    s.std.assign(D, 1.0);
    return s;
  }
  for (const auto& r : d.rows)
    for (std::size_t c = 0; c < D; ++c) s.mean[c] += r[c];
  for (double& m : s.mean) m /= static_cast<double>(d.n_rows());
  for (const auto& r : d.rows)
    for (std::size_t c = 0; c < D; ++c) s.std[c] += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
  for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(d.n_rows())), kStdFloor);
  return s;
}

inline Dataset apply_normalizer(const NormStats& s, const Dataset& d) {
  Dataset out = d;
  for (auto& r : out.rows)
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = s.apply(c, r[c]);
  return out;
}

inline Dataset invert_normalizer(const NormStats& s, const Dataset& d) {
  Dataset out = d;
  for (auto& r : out.rows)
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = s.invert(c, r[c]);
  return out;
}

/// Splits off every `every`-th row as a held-out set.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& d, std::size_t every) {
  Dataset train{d.columns, {}, d.provenance}, held{d.columns, {}, d.provenance + " (held-out)"};
  for (std::size_t i = 0; i < d.n_rows(); ++i) (i % every == every - 1 ? held : train).rows.push_back(d.rows[i]);
  return {train, held};
}

}  // namespace drmm
