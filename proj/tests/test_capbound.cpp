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


#include <random>

#include "gtest/gtest.h"
#include "reprobe/capbound.hpp"

namespace reprobe {
namespace {

using namespace capbound;

// Best expected agreement over every family of 2^p distinct predictors on n bits.
double brute_best_family(int p, int n) {
  const int labels = 1 << n;
  const int family = 1 << p;
  if (family >= labels) return 1.0;
  double best = 0.0;
  std::vector<int> pick(static_cast<std::size_t>(family));
  for (int i = 0; i < family; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    double total = 0.0;
    for (int y = 0; y < labels; ++y) {
      int agree = 0;
      for (int f : pick) agree = std::max(agree, n - __builtin_popcount(static_cast<unsigned>(f ^ y)));
      total += agree;
    }
    best = std::max(best, total / (static_cast<double>(n) * labels));
    int i = family - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == labels - family + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < family; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// E[max of k iid Binomial(n, 1/2)] / n by the tail-sum identity.
double expected_max_fraction(int k, int n) {
  std::vector<long double> cdf(static_cast<std::size_t>(n) + 1);
  long double c = 1.0L, acc = 0.0L;
  for (int i = 0; i <= n; ++i) {
    acc += c / std::pow(2.0L, n);
    cdf[static_cast<std::size_t>(i)] = acc;
    c = c * (n - i) / (i + 1);
  }
  long double e = 0.0L;
  for (int i = 1; i <= n; ++i) e += 1.0L - std::pow(cdf[static_cast<std::size_t>(i - 1)], static_cast<long double>(k));
  return static_cast<double>(e / n);
}

TEST(Entropy, Values) {
  EXPECT_DOUBLE_EQ(h2(0.5), 1.0);
  EXPECT_EQ(h2(0.0), 0.0);
  EXPECT_EQ(h2(1.0), 0.0);
  const long double p = 0.11L;
  const long double ref = -p * std::log2(p) - (1 - p) * std::log2(1 - p);
  EXPECT_NEAR(h2(0.11), static_cast<double>(ref), 1e-14);
  EXPECT_NEAR(h2(0.11), 0.4999, 1e-4);
  try {
    h2(1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DomainError);
  }
  EXPECT_THROW(h2(-0.01), Error);
}

TEST(Entropy, Concavity) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ud;
  for (int i = 0; i < 10000; ++i) {
    const double p = ud(gen), q = ud(gen), l = ud(gen);
    EXPECT_GE(h2(l * p + (1 - l) * q), l * h2(p) + (1 - l) * h2(q) - 1e-12);
  }
}

TEST(Bound, Examples) {
  EXPECT_DOUBLE_EQ(acc_bound(0, 10).clamped, 0.5);
  const long double ln2 = std::log(2.0L);
  EXPECT_NEAR(acc_bound(1, 8).raw, static_cast<double>(0.5L + std::sqrt(ln2 / 2 * 0.125L)), 1e-14);
  EXPECT_NEAR(acc_bound(1, 8).raw, 0.7081, 1e-4);
  const auto full = acc_bound(50, 50);
  EXPECT_NEAR(full.raw, 1.0887, 1e-4);
  EXPECT_EQ(full.clamped, 1.0);
  EXPECT_NEAR(acc_bound(1, 2).raw, 0.9163, 1e-4);
  EXPECT_THROW(acc_bound(-1, 10), Error);
  EXPECT_THROW(acc_bound(1, 0), Error);
}

TEST(Bound, Monotone) {
  for (int n = 1; n < 200; n += 7) {
    double prev = 0.0;
    for (double p = 0; p < 300; p += 3.5) {
      const double b = acc_bound(p, n).raw;
      EXPECT_GE(b, prev);
      prev = b;
    }
  }
  for (double p = 0; p < 100; p += 9) {
    double prev = INFINITY;
    for (int n = 1; n < 500; n += 11) {
      const double b = acc_bound(p, n).raw;
      EXPECT_LE(b, prev);
      prev = b;
    }
  }
}

TEST(Oracle, Examples) {
  EXPECT_DOUBLE_EQ(envelope_exact(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(envelope_exact(1, 2), 0.75);
  EXPECT_DOUBLE_EQ(brute_best_family(1, 2), 0.75);
  for (int n = 1; n <= 8; ++n) EXPECT_DOUBLE_EQ(envelope_exact(n, n), 1.0);
  for (int n = 1; n <= 12; ++n) EXPECT_DOUBLE_EQ(envelope_exact(0, n), 0.5);
  try {
    envelope_exact(13, 12);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Infeasible);
  }
}

TEST(Oracle, EnvelopeDominatesEveryConcreteFamily) {
  for (int n = 1; n <= 4; ++n)
    for (int p = 0; p <= n; ++p) {
      if (n == 4 && p == 3) continue;
      const double brute = brute_best_family(p, n);
      EXPECT_LE(brute, envelope_exact(p, n) + 1e-12) << p << " " << n;
    }
  EXPECT_LE(brute_best_family(3, 4), envelope_exact(3, 4) + 1e-12);
}

TEST(Oracle, LogSpaceEnvelopeMatchesExact) {
  for (int p = 0; p <= 8; ++p)
    for (int n = 1; n <= 14; ++n) EXPECT_NEAR(envelope(p, n), envelope_exact(p, n), 1e-9) << p << " " << n;
}

TEST(Oracle, ExactGridUnderBound) {
  for (int p = 0; p <= 6; ++p)
    for (int n = 1; n <= 12; ++n) {
      const auto row = evaluate(p, n, Mode::Exact);
      EXPECT_TRUE(row.satisfied) << p << " " << n;
      EXPECT_LE(row.oracle, acc_bound(p, n).clamped + 1e-9);
    }
}

TEST(Oracle, MonteCarloMatchesClosedForm) {
  for (const auto& [p, n] : std::vector<std::pair<int, int>>{{0, 10}, {1, 10}, {3, 25}, {6, 100}}) {
    const auto mc = monte_carlo(p, n, 20000, 9);
    const double ref = expected_max_fraction(1 << p, n);
    EXPECT_NEAR(mc.mean, ref, 4 * mc.half_width + 1e-12) << p << " " << n;
  }
  const auto a = monte_carlo(4, 50, 1000, 3);
  const auto b = monte_carlo(4, 50, 1000, 3);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Oracle, MonteCarloGridUnderBound) {
  for (int p : {1, 4, 8, 16})
    for (int n : {10, 100, 1000, 10000}) {
      const auto row = evaluate(p, n, Mode::MonteCarlo, 10000, 5);
      EXPECT_TRUE(row.satisfied) << p << " " << n;
      EXPECT_LE(row.envelope, row.bound.clamped + 1e-9);
      const auto j = to_json(row);
      EXPECT_EQ(j["mode"], "monte_carlo");
      EXPECT_GT(j["ci_halfwidth"].get<double>(), -1.0);
    }
}

TEST(Proof, JensenAndPinsker) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> ud;
  std::vector<std::vector<double>> vecs;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + i % 40);
    for (auto& x : v) x = ud(gen);
    vecs.push_back(v);
  }
  const auto r = verify_proof_steps(vecs);
  EXPECT_LE(r.jensen_violation, 1e-12);
  EXPECT_LE(r.pinsker_violation, 1e-12);
  const auto flat = verify_proof_steps({{0.3, 0.3, 0.3}});
  EXPECT_NEAR(flat.jensen_violation, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(1.0 - h2(0.5), 0.0);
}

}  // namespace
}  // namespace reprobe
