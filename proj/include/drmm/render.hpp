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

// Binary PPM (P6) rasterization of scatter plots, heatmaps and skeleton poses.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drmm/data.hpp"
#include "drmm/math.hpp"

namespace drmm {

using Rgb = std::array<std::uint8_t, 3>;

struct Bounds {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

  void validate() const {
    if (!(xmax > xmin) || !(ymax > ymin) || !std::isfinite(xmax - xmin) || !std::isfinite(ymax - ymin))
      throw InputError("plot bounds must have positive, finite area");
  }
};

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  Image(int w, int h, Rgb bg = {255, 255, 255}) : width(w), height(h) {
    if (w < 1 || h < 1) throw InputError("image size must be positive");
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(bg.begin(), bg.end(), rgb.begin() + i);
  }
  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }
  Rgb get(int x, int y) const {
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }

  std::string to_ppm() const {
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    return out;
  }
};

/// Pixel column/row of a data point; y grows upward in data space.
inline std::array<int, 2> to_pixel(const Bounds& b, int w, int h, double x, double y) {
  double fx = (x - b.xmin) / (b.xmax - b.xmin);
  double fy = (b.ymax - y) / (b.ymax - b.ymin);
  return {static_cast<int>(std::floor(fx * w)), static_cast<int>(std::floor(fy * h))};
}

/// Points as 3x3 squares.
inline Image render_scatter(const std::vector<std::array<double, 2>>& pts, const Bounds& b, int w = 512, int h = 512,
                            Rgb color = {20, 40, 160}) {
  b.validate();
  Image img(w, h);
  for (const auto& p : pts) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
    auto [px, py] = to_pixel(b, w, h, p[0], p[1]);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) img.set(px + dx, py + dy, color);
  }
  return img;
}

/// Fixed five-stop colormap (dark blue, purple, red, orange, pale yellow),
/// linear between stops, t clamped to [0, 1].
inline Rgb colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {13, 8, 135}, {126, 3, 168}, {204, 71, 120}, {248, 149, 64}, {240, 249, 33}}};
  if (!(t > 0.0)) t = 0.0;
  if (t > 1.0) t = 1.0;
  double pos = t * 4.0;
  int i = std::min(3, static_cast<int>(pos));
  double f = pos - i;
  Rgb c;
  for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  return c;
}

/// Grid of values (row 0 = lowest y) scaled from its finite min to max; every
/// cell becomes a block of `scale` x `scale` pixels.
inline Image render_heatmap(const std::vector<std::vector<double>>& grid, int scale = 4) {
  if (grid.empty() || grid[0].empty()) throw InputError("heatmap grid is empty");
  if (scale < 1) throw InputError("heatmap scale must be >= 1");
  const int rows = static_cast<int>(grid.size()), cols = static_cast<int>(grid[0].size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : grid) {
    if (static_cast<int>(r.size()) != cols) throw InputError("heatmap rows must have equal length");
    for (double v : r)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  Image img(cols * scale, rows * scale);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double v = grid[r][c];
      double t = !std::isfinite(v) ? (v > 0 ? 1.0 : 0.0) : (hi > lo ? (v - lo) / (hi - lo) : 0.5);
      Rgb col = colormap(t);
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) img.set(c * scale + dx, (rows - 1 - r) * scale + dy, col);
    }
  return img;
}

inline void draw_line(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
  int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (int guard = 0; guard < 1 << 16; ++guard) {
    img.set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

/// Draws poses given as IK rows (root x, y, rotation, then joint angles).
/// The first pose is drawn last, in black; goals are red squares.
inline Image render_skeletons(const Skeleton2D& skel, const std::vector<std::vector<double>>& poses,
                              const std::vector<std::array<double, 2>>& goals, const Bounds& b, int w = 512,
                              int h = 512) {
  b.validate();
  Image img(w, h);
  const std::size_t nb = skel.bones.size();
  for (std::size_t i = poses.size(); i-- > 0;) {
    const auto& row = poses[i];
    if (row.size() < 3 + nb) throw InputError("pose row is shorter than the skeleton's joint count");
    std::vector<double> angles(row.begin() + 3, row.begin() + 3 + static_cast<std::ptrdiff_t>(nb));
    Rgb col = i == 0 ? Rgb{0, 0, 0} : Rgb{150, 150, 150};
    for (const auto& bp : pose_bones(skel, {row[0], row[1]}, row[2], angles)) {
      auto a = to_pixel(b, w, h, bp.start[0], bp.start[1]);
      auto e = to_pixel(b, w, h, bp.end[0], bp.end[1]);
      draw_line(img, a[0], a[1], e[0], e[1], col);
    }
  }
  for (const auto& g : goals) {
    auto [px, py] = to_pixel(b, w, h, g[0], g[1]);
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) img.set(px + dx, py + dy, {220, 20, 20});
  }
  return img;
}

}  // namespace drmm
