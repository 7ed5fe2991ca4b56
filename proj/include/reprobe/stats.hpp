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

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "reprobe/error.hpp"

namespace reprobe::stats {

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> midranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

inline void check_pair(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), Errc::LengthMismatch, "inputs differ in length");
  require(xs.size() >= 2, Errc::DegenerateInput, "need at least two points");
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double centered_ss(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

}  // namespace detail

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::check_pair(xs, ys);
  const double mx = detail::mean(xs), my = detail::mean(ys);
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my);
  const double sxx = detail::centered_ss(xs, mx), syy = detail::centered_ss(ys, my);
  require(sxx > 0.0 && syy > 0.0, Errc::DegenerateInput, "correlation of a constant array");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::check_pair(xs, ys);
  return pearson(midranks(xs), midranks(ys));
}

struct LinReg {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double p = 1.0;
};

/// Least squares with a two-sided t-test on the slope (n - 2 dof).
inline LinReg linreg(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), Errc::LengthMismatch, "inputs differ in length");
  require(xs.size() >= 3, Errc::DegenerateInput, "regression p-value needs at least three points");
  const double n = static_cast<double>(xs.size());
  const double mx = detail::mean(xs), my = detail::mean(ys);
  const double sxx = detail::centered_ss(xs, mx), syy = detail::centered_ss(ys, my);
  require(sxx > 0.0, Errc::DegenerateInput, "regression on constant xs");
  LinReg out;
  if (syy == 0.0) {
    out.intercept = my;
    return out;
  }
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my);
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (out.intercept + out.slope * xs[i]);
    sse += e * e;
  }
  out.r2 = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  const double se = std::sqrt(sse / (n - 2.0) / sxx);
  if (se == 0.0) {
    out.p = 0.0;
    return out;
  }
  const double t = std::abs(out.slope / se);
  boost::math::students_t dist(n - 2.0);
  out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
  return out;
}

struct Sample {
  std::uint64_t id = 0;
  double p = 0.0;
  int delta = 0;
};

inline constexpr int kBuckets = 10;
inline constexpr std::size_t kMinBucketCount = 10;

struct Bucket {
  int index = 0;
  double lo = 0.0, hi = 0.1;
  std::size_t count = 0;
  double mean_delta = 0.0;
  bool excluded = true;
};

inline int bucket_of(double p) {
  int i = std::clamp(static_cast<int>(std::floor(p * kBuckets)), 0, kBuckets - 1);
  while (i < kBuckets - 1 && p >= (i + 1) / static_cast<double>(kBuckets)) ++i;
  while (i > 0 && p < i / static_cast<double>(kBuckets)) --i;
  return i;
}

inline std::vector<Bucket> bucketize(const std::vector<Sample>& samples) {
  require(!samples.empty(), Errc::EmptyInput, "no samples to bucket");
  std::vector<Bucket> out(kBuckets);
  std::vector<double> sums(kBuckets, 0.0);
  for (int i = 0; i < kBuckets; ++i) {
    out[static_cast<std::size_t>(i)].index = i;
    out[static_cast<std::size_t>(i)].lo = i / static_cast<double>(kBuckets);
    out[static_cast<std::size_t>(i)].hi = (i + 1) / static_cast<double>(kBuckets);
  }
  for (const auto& s : samples) {
    require(s.p >= 0.0 && s.p <= 1.0, Errc::DomainError, "probability outside [0, 1]");
    const auto b = static_cast<std::size_t>(bucket_of(s.p));
    ++out[b].count;
    sums[b] += s.delta;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].count) out[i].mean_delta = sums[i] / static_cast<double>(out[i].count);
    out[i].excluded = out[i].count < kMinBucketCount;
  }
  return out;
}

enum class Trend { Rising, Falling, Fluctuating };

inline std::string to_string(Trend t) {
  switch (t) {
    case Trend::Rising: return "rising";
    case Trend::Falling: return "falling";
    case Trend::Fluctuating: return "fluctuating";
  }
  return "?";
}

struct TrendReport {
  LinReg fit;
  Trend trend = Trend::Fluctuating;
  double rs = 0.0;
};

inline constexpr double kTrendAlpha = 0.1;

/// Slope test plus Spearman on an ordered series, e.g. accuracy across CoT stages.
inline TrendReport classify_series(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() >= 3, Errc::TooFewBuckets, "trend needs three points, have " + std::to_string(xs.size()));
  TrendReport r;
  r.fit = linreg(xs, ys);
  if (r.fit.p < kTrendAlpha && r.fit.slope > 0) r.trend = Trend::Rising;
  else if (r.fit.p < kTrendAlpha && r.fit.slope < 0) r.trend = Trend::Falling;
  const double m = detail::mean(ys);
  r.rs = detail::centered_ss(ys, m) > 0.0 ? spearman(xs, ys) : 0.0;
  return r;
}

/// Unweighted regression of bucket mean correctness on bucket center.
inline TrendReport classify_trend(const std::vector<Bucket>& buckets) {
  std::vector<double> xs, ys;
  for (const auto& b : buckets) {
    if (b.excluded) continue;
    xs.push_back((b.lo + b.hi) / 2.0);
    ys.push_back(b.mean_delta);
  }
  require(xs.size() >= 3, Errc::TooFewBuckets,
          "trend needs three included buckets, have " + std::to_string(xs.size()));
  return classify_series(xs, ys);
}

enum class Band { NS, One, Three };

inline std::string to_string(Band b) {
  switch (b) {
    case Band::NS: return "ns";
    case Band::One: return "*";
    case Band::Three: return "***";
  }
  return "?";
}

inline Band band(double p) {
  if (p > 5e-2) return Band::NS;
  if (p > 1e-10) return Band::One;
  return Band::Three;
}

enum class MwuMethod { Auto, Exact, Normal };

struct MwuResult {
  double u = 0.0;
  double p = 1.0;
  Band band = Band::NS;
  bool exact = false;
};

inline constexpr std::size_t kExactMwuLimit = 20;

/// U counts pairs (x in a, y in b) with x > y, ties counting one half.
inline MwuResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                MwuMethod method = MwuMethod::Auto) {
  require(!a.empty() && !b.empty(), Errc::EmptyGroup, "both groups must be nonempty");
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  const auto ranks = midranks(all);
  const std::size_t na = a.size(), nb = b.size(), n = all.size();
  // Ranks are multiples of 1/2, so doubled rank sums are exact integers.
  std::vector<long> r2(n);
  for (std::size_t i = 0; i < n; ++i) r2[i] = std::lround(2.0 * ranks[i]);
  long ra2 = 0;
  for (std::size_t i = 0; i < na; ++i) ra2 += r2[i];
  const long base2 = static_cast<long>(na * (na + 1));
  const long u2 = ra2 - base2;
  const long mu2 = static_cast<long>(na * nb);
  MwuResult out;
  out.u = static_cast<double>(u2) / 2.0;
  const bool exact = method == MwuMethod::Exact || (method == MwuMethod::Auto && n <= kExactMwuLimit);
  out.exact = exact;
  if (exact) {
    require(n <= 62, Errc::InvalidArgument, "exact test limited to small samples");
    const long max_sum = std::accumulate(r2.begin(), r2.end(), 0L);
    // ways[k][s]: subsets of size k with doubled rank sum s.
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = std::min(na, i + 1); k >= 1; --k) {
        auto& dst = ways[k];
        const auto& src = ways[k - 1];
        for (long s = max_sum; s >= r2[i]; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - r2[i])];
      }
    }
    const long dev = std::labs(u2 - mu2);
    double hit = 0.0, total = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      const double w = ways[na][static_cast<std::size_t>(s)];
      if (w == 0.0) continue;
      total += w;
      if (std::labs((s - base2) - mu2) >= dev) hit += w;
    }
    out.p = std::min(1.0, hit / total);
  } else {
    double ties = 0.0;
    std::vector<double> sorted(all);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      ties += t * t * t - t;
      i = j;
    }
    const double dn = static_cast<double>(n);
    const double var = static_cast<double>(na * nb) / 12.0 * ((dn + 1.0) - ties / (dn * (dn - 1.0)));
    if (var <= 0.0) {
      out.p = 1.0;
    } else {
      const double z = (std::abs(out.u - static_cast<double>(mu2) / 2.0) - 0.5) / std::sqrt(var);
      if (z <= 0.0) {
        out.p = 1.0;
      } else {
        boost::math::normal_distribution<double> unit;
        out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(unit, z)));
      }
    }
  }
  out.band = band(out.p);
  return out;
}

/// Probability that a random positive outscores a random negative, ties 1/2.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), Errc::LengthMismatch, "scores and labels differ in length");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0, pos = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      rank_sum += ranks[i];
      pos += 1.0;
    }
  }
  const double neg = static_cast<double>(labels.size()) - pos;
  require(pos > 0.0 && neg > 0.0, Errc::SingleClass, "ROC-AUC needs both classes");
  return std::clamp((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg), 0.0, 1.0);
}

struct Projection {
  Eigen::MatrixXd coords;      // n x 2
  Eigen::MatrixXd components;  // m x 2, columns are unit principal axes
  Eigen::Vector2d variance = Eigen::Vector2d::Zero();
};

/// Top two principal components of the centered data. Each axis is signed so
/// its largest-magnitude loading is positive.
inline Projection pca_project(const std::vector<std::vector<double>>& vectors) {
  require(vectors.size() >= 2, Errc::DegenerateInput, "projection needs at least two vectors");
  const std::size_t m = vectors.front().size();
  require(m >= 1, Errc::DegenerateInput, "vectors are empty");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    require(vectors[i].size() == m, Errc::DimensionMismatch, "vectors differ in length");
    for (std::size_t j = 0; j < m; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vectors[i][j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(vectors.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Projection out;
  out.components = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), 2);
  const auto dims = std::min<Eigen::Index>(2, static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < dims; ++k) {
    const Eigen::Index col = static_cast<Eigen::Index>(m) - 1 - k;  // eigenvalues ascend
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.col(k) = v;
    out.variance(k) = std::max(0.0, eig.eigenvalues()(col));
  }
  out.coords = x * out.components;
  return out;
}

struct StatsReport {
  TrendReport trend;
  double auc = 0.5;
  MwuResult mwu;
  std::size_t n = 0;
  std::vector<int> excluded_buckets;
  std::vector<Bucket> buckets;
  std::optional<double> rp;
  std::optional<double> r2;
};

/// Alignment between probing probability and generation correctness.
inline StatsReport alignment_report(const std::vector<Sample>& samples) {
  StatsReport r;
  r.n = samples.size();
  r.buckets = bucketize(samples);
  for (const auto& b : r.buckets)
    if (b.excluded) r.excluded_buckets.push_back(b.index);
  r.trend = classify_trend(r.buckets);
  std::vector<double> ps, correct, wrong;
  std::vector<int> labels;
  for (const auto& s : samples) {
    require(s.delta == 0 || s.delta == 1, Errc::DomainError, "delta must be 0 or 1");
    ps.push_back(s.p);
    labels.push_back(s.delta);
    (s.delta ? correct : wrong).push_back(s.p);
  }
  r.auc = roc_auc(ps, labels);
  r.mwu = mann_whitney_u(correct, wrong);
  return r;
}

inline nlohmann::json to_json(const StatsReport& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : r.buckets)
    buckets.push_back({{"index", b.index}, {"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                       {"mean_delta", b.mean_delta}, {"excluded", b.excluded}});
  nlohmann::json j = {{"trend",
                       {{"slope", r.trend.fit.slope},
                        {"intercept", r.trend.fit.intercept},
                        {"r2", r.trend.fit.r2},
                        {"p", r.trend.fit.p},
                        {"class", to_string(r.trend.trend)},
                        {"rs", r.trend.rs}}},
                      {"auc", r.auc},
                      {"U", r.mwu.u},
                      {"p_mwu", r.mwu.p},
                      {"band", to_string(r.mwu.band)},
                      {"n", r.n},
                      {"excluded_buckets", r.excluded_buckets},
                      {"buckets", std::move(buckets)}};
  if (r.rp) j["rp"] = *r.rp;
  if (r.r2) j["r2"] = *r.r2;
  return j;
}

}  // namespace reprobe::stats
