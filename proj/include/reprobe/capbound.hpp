// Copyright 2026 The reprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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
#include <numbers>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "reprobe/error.hpp"
#include "reprobe/rng.hpp"

namespace reprobe::capbound {

/// Binary entropy in bits.
inline double h2(double p) {
  require(p >= 0.0 && p <= 1.0, Errc::DomainError, "h2 needs p in [0, 1]");
  auto term = [](double x) { return x <= 0.0 ? 0.0 : -x * std::log2(x); };
  return term(p) + term(1.0 - p);
}

struct Bound {
  double raw = 0.5;
  double clamped = 0.5;
};

/// 0.5 + sqrt((ln 2 / 2) * P / N), also reported clamped to 1.
inline Bound acc_bound(double p_eff, double n) {
  require(p_eff >= 0.0, Errc::InvalidArgument, "capacity must be nonnegative");
  require(n >= 1.0, Errc::InvalidArgument, "dataset size must be at least 1");
  Bound b;
  b.raw = 0.5 + std::sqrt(std::numbers::ln2 / 2.0 * p_eff / n);
  b.clamped = std::min(1.0, b.raw);
  return b;
}

inline constexpr int kExactLimit = 24;

namespace detail {

inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// Binomial(n, 1/2) pmf in log space.
inline std::vector<double> log_pmf(int n) {
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) out[static_cast<std::size_t>(k)] = log_choose(n, k) - n * std::numbers::ln2;
  return out;
}

}  // namespace detail

/// Upper envelope on E[best agreement] over every family of 2^P predictors:
/// each label sequence takes its best predictor's agreement, and no family can
/// do better than assigning the 2^N largest entries of 2^P stacked agreement
/// profiles. Exact integer arithmetic.
inline double envelope_exact(int p, int n) {
  require(p >= 0 && n >= 1, Errc::InvalidArgument, "need P >= 0 and N >= 1");
  require(p + n <= kExactLimit, Errc::Infeasible,
          "exact mode needs P + N <= " + std::to_string(kExactLimit));
  const std::uint64_t copies = std::uint64_t{1} << p;
  std::uint64_t remaining = std::uint64_t{1} << n;
  std::uint64_t choose = 1;  // C(n, d)
  long double total = 0.0L;
  for (int d = 0; d <= n && remaining > 0; ++d) {
    const std::uint64_t take = std::min(remaining, copies * choose);
    total += static_cast<long double>(take) * static_cast<long double>(n - d);
    remaining -= take;
    choose = choose * static_cast<std::uint64_t>(n - d) / static_cast<std::uint64_t>(d + 1);
  }
  return static_cast<double>(total / (static_cast<long double>(n) * std::ldexp(1.0L, n)));
}

/// Same envelope for large sizes, evaluated with log-space binomial masses.
inline double envelope(double p, int n) {
  require(p >= 0.0 && n >= 1, Errc::InvalidArgument, "need P >= 0 and N >= 1");
  const auto lp = detail::log_pmf(n);
  double remaining = 1.0, total = 0.0;
  for (int d = 0; d <= n && remaining > 0.0; ++d) {
    const double mass = std::exp(std::min(0.0, p * std::numbers::ln2 + lp[static_cast<std::size_t>(d)]));
    const double take = std::min(remaining, mass);
    total += take * (n - d);
    remaining -= take;
  }
  return total / n;
}

struct McEstimate {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Best of 2^P independent uniformly random predictors against uniform labels.
/// The best agreement is the maximum of 2^P iid Binomial(N, 1/2) draws, sampled
/// by inverting its CDF F(k)^(2^P).
inline McEstimate monte_carlo(int p, int n, int trials, std::uint64_t seed) {
  require(p >= 0 && n >= 1 && trials >= 2, Errc::InvalidArgument, "need P >= 0, N >= 1, trials >= 2");
  const auto lp = detail::log_pmf(n);
  std::vector<double> log_cdf(static_cast<std::size_t>(n) + 1);
  double acc = -INFINITY;
  for (int k = 0; k <= n; ++k) {
    const double x = lp[static_cast<std::size_t>(k)];
    acc = acc == -INFINITY ? x : std::max(acc, x) + std::log1p(std::exp(-std::abs(acc - x)));
    log_cdf[static_cast<std::size_t>(k)] = std::min(0.0, acc);
  }
  const double copies = std::ldexp(1.0, p);
  std::vector<double> max_cdf(log_cdf.size());
  for (std::size_t k = 0; k < log_cdf.size(); ++k) max_cdf[k] = std::exp(copies * log_cdf[k]);
  max_cdf.back() = 1.0;
  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double u = rng.uniform();
    const auto k = static_cast<int>(std::upper_bound(max_cdf.begin(), max_cdf.end(), u) - max_cdf.begin());
    const double acc_t = static_cast<double>(std::min(k, n)) / n;
    sum += acc_t;
    sum_sq += acc_t * acc_t;
  }
  McEstimate e;
  e.mean = sum / trials;
  const double var = std::max(0.0, (sum_sq - trials * e.mean * e.mean) / (trials - 1));
  e.half_width = 1.96 * std::sqrt(var / trials);
  return e;
}

enum class Mode { Exact, MonteCarlo };

struct GridRow {
  int p = 0;
  int n = 1;
  Bound bound;
  double oracle = 0.0;
  Mode mode = Mode::Exact;
  double ci_half_width = 0.0;
  double envelope = 0.0;
  bool satisfied = false;
};

inline constexpr double kBoundTolerance = 1e-9;

inline GridRow evaluate(int p, int n, Mode mode, int trials = 10000, std::uint64_t seed = 0) {
  GridRow row;
  row.p = p;
  row.n = n;
  row.mode = mode;
  row.bound = acc_bound(p, n);
  if (mode == Mode::Exact) {
    row.oracle = envelope_exact(p, n);
    row.envelope = row.oracle;
    row.satisfied = row.oracle <= row.bound.clamped + kBoundTolerance;
  } else {
    const auto mc = monte_carlo(p, n, trials, mix_seed(seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(n)));
    row.oracle = mc.mean;
    row.ci_half_width = mc.half_width;
    row.envelope = envelope(p, n);
    row.satisfied = mc.mean + mc.half_width <= row.bound.clamped + kBoundTolerance;
  }
  return row;
}

inline nlohmann::json to_json(const GridRow& r) {
  return {{"P", r.p},
          {"N", r.n},
          {"bound_raw", r.bound.raw},
          {"bound_clamped", r.bound.clamped},
          {"oracle", r.oracle},
          {"mode", r.mode == Mode::Exact ? "exact" : "monte_carlo"},
          {"ci_halfwidth", r.ci_half_width},
          {"envelope", r.envelope},
          {"satisfied", r.satisfied}};
}

struct ProofCheck {
  double jensen_violation = 0.0;  // max of mean h2(e) - h2(mean e)
  double pinsker_violation = 0.0;  // max of rhs - lhs on the grid
};

/// Jensen step on each sampled error vector and the Pinsker-type inequality
/// 1 - h2(p) >= (2 / ln 2)(p - 1/2)^2 on p = 0.01..0.99.
inline ProofCheck verify_proof_steps(const std::vector<std::vector<double>>& error_vectors) {
  ProofCheck out;
  out.jensen_violation = -INFINITY;
  for (const auto& v : error_vectors) {
    require(!v.empty(), Errc::InvalidArgument, "empty error vector");
    double mean_h = 0.0, mean_e = 0.0;
    for (double e : v) {
      mean_h += h2(e);
      mean_e += e;
    }
    mean_h /= static_cast<double>(v.size());
    mean_e /= static_cast<double>(v.size());
    out.jensen_violation = std::max(out.jensen_violation, mean_h - h2(mean_e));
  }
  if (error_vectors.empty()) out.jensen_violation = 0.0;
  out.pinsker_violation = -INFINITY;
  for (int i = 1; i <= 99; ++i) {
    const double p = i / 100.0;
    const double lhs = 1.0 - h2(p);
    const double rhs = 2.0 / std::numbers::ln2 * (p - 0.5) * (p - 0.5);
    out.pinsker_violation = std::max(out.pinsker_violation, rhs - lhs);
  }
  return out;
}

}  // namespace reprobe::capbound
