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
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace drmm {

/// Thrown for malformed inputs: dimension mismatches, bad indices, bad syntax.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a computation produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)
inline constexpr double kHalfLog2Pi = 0.5 * kLog2Pi;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return kNegInf;
  double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log(mean(exp(v))).
inline double log_mean_exp(std::span<const double> v) {
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

/// In-place softmax; returns the log-normalizer.
inline double softmax_inplace(std::span<double> v) {
  double lse = log_sum_exp(v);
  for (double& x : v) x = std::exp(x - lse);
  return lse;
}

inline double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kHalfLog2Pi;
}

/// log of the standard normal CDF, accurate deep into the lower tail.
inline double log_ndtr(double z) {
  if (z > 6.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z > -20.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // asymptotic series of the Mills ratio
  double z2 = z * z;
  double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - kHalfLog2Pi + std::log(series);
}

/// log(Phi(hi) - Phi(lo)) for lo < hi; either bound may be infinite.
inline double log_ndtr_diff(double lo, double hi) {
  if (!(lo < hi)) return kNegInf;
  if (lo == -std::numeric_limits<double>::infinity()) return log_ndtr(hi);
  if (hi == std::numeric_limits<double>::infinity()) return log_ndtr(-lo);
  // work in whichever tail keeps the subtraction well conditioned
  if (lo > 0.0) {
    double a = log_ndtr(-lo), b = log_ndtr(-hi);
    return a + std::log1p(-std::exp(b - a));
  }
  double a = log_ndtr(hi), b = log_ndtr(lo);
  return a + std::log1p(-std::exp(b - a));
}

// splitmix64 finalizer; used to derive independent per-item RNG seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

/// Worker count: DRMM_THREADS if set (at most 256), else hardware concurrency.
inline unsigned thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DRMM_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return hw;
}

/// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs;
/// callers reduce results in index order so output is thread-count independent.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace drmm
