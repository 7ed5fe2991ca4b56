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


#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "reprobe/pipeline.hpp"

namespace {

using namespace reprobe;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome zebra_soundness() {
  const auto t0 = Clock::now();
  std::size_t bad = 0, duplicates = 0, total = 0;
  for (Difficulty d : {Difficulty::Low, Difficulty::Med, Difficulty::High}) {
    const auto combos = zebra_combos(d);
    std::set<std::string> seen;
    for (std::uint64_t k = 0; k < 1000; ++k) {
      const auto [n, m] = combos[k % combos.size()];
      const auto p = zebra::generate(n, m, mix_seed(7, static_cast<std::uint64_t>(d), k));
      const auto sols = zebra::solve(p, 2);
      if (sols.size() != 1 || sols.front() != p.solution) ++bad;
      if (!seen.insert(zebra::render_problem(p)).second) ++duplicates;
      ++total;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && duplicates == 0 && secs < 300.0,
          std::to_string(total) + " puzzles, " + std::to_string(bad) + " without a unique solution, " +
              std::to_string(duplicates) + " duplicates, " + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------

using mused::Proposition;
using mused::PropType;

// Plain fixed point over all ordered pairs with its own copy of the chaining table.
std::set<Proposition> naive_closure(const std::vector<Proposition>& premises) {
  static const std::map<std::pair<PropType, PropType>, PropType> table = {
      {{PropType::A, PropType::A}, PropType::A},
      {{PropType::A, PropType::E}, PropType::E},
      {{PropType::I, PropType::A}, PropType::I},
      {{PropType::I, PropType::E}, PropType::O}};
  std::set<Proposition> facts(premises.begin(), premises.end());
  bool grew = true;
  while (grew) {
    grew = false;
    const std::vector<Proposition> snapshot(facts.begin(), facts.end());
    for (const auto& x : snapshot)
      for (const auto& y : snapshot) {
        if (x.predicate != y.subject || x.subject == y.predicate) continue;
        const auto it = table.find({x.type, y.type});
        if (it == table.end()) continue;
        grew |= facts.insert({it->second, x.subject, y.predicate}).second;
      }
  }
  return facts;
}

Outcome mused_soundness() {
  std::size_t failures = 0, chains = 0;
  for (Difficulty d : {Difficulty::Low, Difficulty::Med, Difficulty::High}) {
    for (std::uint64_t k = 0; k < 1000; ++k) {
      const int depth = mused::kMinDepth + static_cast<int>(k % (mused::kMaxDepth - mused::kMinDepth + 1));
      const auto c = mused::generate(depth, d, mix_seed(8, static_cast<std::uint64_t>(d), k), static_cast<PropType>(k % 4));
      const Proposition swapped{mused::contradictory(c.conclusion.type), c.conclusion.subject, c.conclusion.predicate};
      const auto closure = naive_closure(c.premises);
      const bool ok = mused::entails(c.premises, c.conclusion) && !mused::entails(c.premises, swapped) &&
                      mused::entails(c.necessary_premises(), c.conclusion) && closure.count(c.conclusion) &&
                      !closure.count(swapped);
      failures += !ok;
      ++chains;
    }
  }
  std::mt19937_64 gen(9);
  const std::vector<std::string> symbols = {"a", "b", "c", "d", "e"};
  std::size_t disagreements = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Proposition> premises;
    const std::size_t count = 1 + gen() % 8;
    while (premises.size() < count) {
      const auto s = symbols[gen() % symbols.size()], p = symbols[gen() % symbols.size()];
      if (s == p) continue;
      premises.push_back({static_cast<PropType>(gen() % 4), s, p});
    }
    disagreements += mused::derive_closure(premises) != naive_closure(premises);
  }
  return {failures == 0 && disagreements == 0,
          std::to_string(chains) + " chains, " + std::to_string(failures) + " unsound; closure disagreements " +
              std::to_string(disagreements) + "/200"};
}

// ---------------------------------------------------------------------------

Outcome random_backbone_control() {
  const auto t0 = Clock::now();
  const auto split = build_split(Task::Zebra, Difficulty::Low, Variant::TF, 2000, 500, 2024);
  ModelConfig mc;
  mc.seed = 2024;
  Backbone<float> bb(FrozenParams::random(mc));
  const auto train = initial_dataset(split.train, mc.max_seq_len);
  const auto test = initial_dataset(split.test, mc.max_seq_len);
  ProbeConfig pc;
  pc.epochs = 10;
  pc.seed = 2024;
  const auto r = train_vprobe(bb, train, pc);
  const auto e = eval_probe(bb, r.params, test);
  const double base = majority_baseline(split);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(e.accuracy - base) <= 0.05 && secs < 1800.0 && train.dropped == 0 && test.dropped == 0;
  return {ok, "accuracy " + fmt("%.3f", e.accuracy) + " vs majority " + fmt("%.3f", base) + ", dropped " +
                  std::to_string(train.dropped + test.dropped) + ", " + fmt("%.0f s", secs)};
}

// ---------------------------------------------------------------------------

ProbeDataset planted(std::size_t n, std::uint64_t seed, std::uint64_t first_id) {
  std::mt19937_64 gen(seed);
  ProbeDataset d;
  d.provenance = "planted";
  for (std::size_t i = 0; i < n; ++i) {
    std::string context;
    const int len = 4 + static_cast<int>(gen() % 13);
    for (int k = 0; k < len; ++k) context.push_back(static_cast<char>('a' + gen() % 26));
    const int label = static_cast<int>(gen() % 2);
    const std::vector<ProbeField> fields = {{"START", "Item"}, {"MID", label ? "Y" : "N"}, {"END", ""}};
    d.items.push_back({first_id + i, label, 0, compose_input(context, std::nullopt, fields)});
  }
  return d;
}

Outcome planted_signal() {
  const auto t0 = Clock::now();
  ModelConfig mc;
  mc.seed = 11;
  Backbone<float> bb(FrozenParams::random(mc));
  ProbeConfig pc;
  pc.epochs = 10;
  pc.seed = 11;
  const auto r = train_vprobe(bb, planted(10000, 1, 0), pc);
  const auto e = eval_probe(bb, r.params, planted(1000, 2, 1000000));
  return {e.accuracy >= 0.99, "test accuracy " + fmt("%.4f", e.accuracy) + " after 10 epochs, " +
                                  fmt("%.0f s", seconds_since(t0))};
}

// ---------------------------------------------------------------------------

// Cross-entropy of the probe head on c, differentiated through the delta and
// the head, against central differences in long double.
double probe_gradient_error(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::uint32_t heads = std::array<std::uint32_t, 3>{1, 2, 4}[seed % 3];
  ModelConfig mc;
  mc.d_model = heads * (2 + static_cast<std::uint32_t>(seed % 3) * 2);
  mc.n_layers = 1 + static_cast<std::uint32_t>(seed % 2);
  mc.n_heads = heads;
  mc.max_seq_len = 48;
  mc.seed = seed;
  const auto params = FrozenParams::random(mc);
  const int m = static_cast<int>(mc.d_model);
  const int classes = 2 + static_cast<int>(seed % 3);
  const int rank = 1 + static_cast<int>(seed % 4);

  std::string text;
  for (std::size_t i = 0, n = 1 + gen() % 10; i < n; ++i) text.push_back(static_cast<char>(32 + gen() % 95));
  std::optional<std::string> cot;
  if (seed % 2) cot = "step " + std::to_string(seed);
  const Tokens tokens = compose_input(text, cot, {{"START", "x"}, {"MID", "y"}, {"MID1", ""}, {"END", ""}});
  const int label = static_cast<int>(gen() % static_cast<std::uint64_t>(classes));

  std::normal_distribution<double> nd(0.0, 0.3);
  auto delta = EmbeddingDelta<double>::neutral(params, rank, 16.0);
  for (auto* mat : {&delta.e_sp, &delta.a, &delta.b})
    for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = nd(gen);
  Mat<double> head(m, classes);
  for (Eigen::Index i = 0; i < head.size(); ++i) head.data()[i] = nd(gen);
  std::vector<double> dropout;
  if (seed % 3 == 2)
    for (std::size_t i = 0; i < tokens.size(); ++i) dropout.push_back(gen() % 10 < 8 ? 1.25 : 0.0);

  Backbone<double> bb(params);
  Tape<double> tape;
  const Vec<double> c = bb.forward(tokens, &delta, &tape, {.last_only = true}, dropout).row(0).transpose();
  Vec<double> z = (c.transpose() * head).transpose();
  Vec<double> p = (z.array() - z.maxCoeff()).exp();
  p /= p.sum();
  Vec<double> dz = p;
  dz(label) -= 1.0;
  const Mat<double> g_head = c * dz.transpose();
  const auto g = bb.backward_to_embeddings(tape, head * dz);

  Backbone<long double> oracle(params);
  EmbeddingDelta<long double> wide;
  wide.e_sp = delta.e_sp.cast<long double>();
  wide.a = delta.a.cast<long double>();
  wide.b = delta.b.cast<long double>();
  wide.scale = delta.scale;
  Mat<long double> wide_head = head.cast<long double>();
  const std::vector<long double> wide_drop(dropout.begin(), dropout.end());
  auto loss = [&] {
    const Vec<long double> cw = oracle.forward(tokens, &wide, nullptr, {.last_only = true}, wide_drop).row(0).transpose();
    const Vec<long double> zw = (cw.transpose() * wide_head).transpose();
    const long double mx = zw.maxCoeff();
    long double sum = 0;
    for (Eigen::Index k = 0; k < zw.size(); ++k) sum += std::exp(zw(k) - mx);
    return -(zw(label) - mx - std::log(sum));
  };
  const long double h = 1e-6L;
  double worst = 0.0;
  auto check = [&](Mat<long double>& target, const Mat<double>& analytic) {
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const long double saved = target.data()[i];
      target.data()[i] = saved + h;
      const long double up = loss();
      target.data()[i] = saved - h;
      const long double down = loss();
      target.data()[i] = saved;
      const double fd = static_cast<double>((up - down) / (2 * h));
      const double an = analytic.data()[i];
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
  };
  check(wide.e_sp, g.e_sp);
  check(wide.a, g.a);
  check(wide.b, g.b);
  check(wide_head, g_head);
  return worst;
}

Outcome gradient_correctness() {
  double worst = 0.0;
  const int configs = 24;
  for (int s = 0; s < configs; ++s) worst = std::max(worst, probe_gradient_error(static_cast<std::uint64_t>(s)));
  return {worst < 1e-3, std::to_string(configs) + " configurations, max relative error " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------------------

Outcome capacity_bound() {
  const auto t0 = Clock::now();
  std::size_t exact_bad = 0, mc_bad = 0, rows = 0;
  double worst_gap = -1.0;
  for (int p = 0; p <= 6; ++p)
    for (int n = 1; n <= 12; ++n) {
      const auto r = capbound::evaluate(p, n, capbound::Mode::Exact);
      exact_bad += !(r.oracle <= r.bound.clamped + 1e-9);
      worst_gap = std::max(worst_gap, r.oracle - r.bound.clamped);
      ++rows;
    }
  for (int p : {1, 2, 4, 8, 12, 16})
    for (int n : {10, 100, 1000, 10000}) {
      const auto r = capbound::evaluate(p, n, capbound::Mode::MonteCarlo, 10000, 6);
      mc_bad += !(r.oracle + r.ci_half_width <= r.bound.clamped);
      ++rows;
    }
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> ud;
  std::vector<std::vector<double>> vectors;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(1 + gen() % 100);
    for (auto& x : v) x = ud(gen);
    vectors.push_back(v);
  }
  vectors.push_back(std::vector<double>(10, 0.3));
  const auto proof = capbound::verify_proof_steps(vectors);
  const double secs = seconds_since(t0);
  const bool ok = exact_bad == 0 && mc_bad == 0 && proof.jensen_violation <= 1e-12 &&
                  proof.pinsker_violation <= 1e-12 && secs < 600.0;
  return {ok, std::to_string(rows) + " grid points (" + std::to_string(exact_bad) + " exact and " +
                  std::to_string(mc_bad) + " Monte Carlo violations, closest exact gap " + fmt("%.3g", worst_gap) +
                  "), Jensen " + fmt("%.2g", proof.jensen_violation) + ", Pinsker " +
                  fmt("%.2g", proof.pinsker_violation) + ", " + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------

std::vector<long double> count_ranks(const std::vector<double>& v) {
  std::vector<long double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    long double less = 0, equal = 0;
    for (double x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

template <typename T>
double two_pass_pearson(const std::vector<T>& x, const std::vector<T>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

double pair_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

// Two-sided p by enumerating every relabelling of the pooled sample.
double permutation_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  const double mu = a.size() * b.size() / 2.0, obs = std::abs(pair_u(a, b) - mu);
  std::vector<int> pick(pool.size(), 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(a.size()), pick.end(), 1);
  double hit = 0, total = 0;
  do {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < pool.size(); ++i) (pick[i] ? x : y).push_back(pool[i]);
    total += 1;
    hit += std::abs(pair_u(x, y) - mu) >= obs - 1e-9;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return hit / total;
}

Outcome statistics_oracles() {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> small(0, 6);
  double sp = 0, pe = 0, au = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 3 + t % 40;
    std::vector<double> x(n), y(n);
    do {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = t % 2 ? small(gen) : nd(gen);
        y[i] = t % 2 ? small(gen) : x[i] * 0.5 + nd(gen);
      }
    } while (std::set<double>(x.begin(), x.end()).size() < 2 || std::set<double>(y.begin(), y.end()).size() < 2);
    sp = std::max(sp, std::abs(stats::spearman(x, y) - two_pass_pearson(count_ranks(x), count_ranks(y))));
    pe = std::max(pe, std::abs(stats::pearson(x, y) - two_pass_pearson(x, y)));
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(gen() % 2);
    labels[0] = 0;
    labels[1] = 1;
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(x[i]);
    au = std::max(au, std::abs(stats::roc_auc(x, labels) - pair_u(pos, neg) / (pos.size() * neg.size())));
  }
  double mw = 0, mwu_u = 0;
  std::size_t cases = 0;
  for (std::size_t na = 1; na < 10; ++na)
    for (std::size_t nb = 1; na + nb <= 10; ++nb)
      for (int t = 0; t < 12; ++t) {
        std::vector<double> a(na), b(nb);
        for (auto& v : a) v = t < 6 ? small(gen) : nd(gen);
        for (auto& v : b) v = t < 6 ? small(gen) + (t % 3) : nd(gen) + 0.5 * (t % 3);
        const auto r = stats::mann_whitney_u(a, b);
        mw = std::max(mw, std::abs(r.p - permutation_p(a, b)));
        mwu_u = std::max(mwu_u, std::abs(r.u - pair_u(a, b)));
        cases += r.exact;
      }
  using stats::Band;
  const bool bands = stats::band(5e-2) == Band::One && stats::band(std::nextafter(5e-2, 1.0)) == Band::NS &&
                     stats::band(5e-2 - 1e-15) == Band::One && stats::band(5e-2 + 1e-15) == Band::NS &&
                     stats::band(1e-10) == Band::Three && stats::band(std::nextafter(1e-10, 1.0)) == Band::One &&
                     stats::band(1e-10 - 1e-22) == Band::Three && stats::band(1e-10 + 1e-22) == Band::One;
  const bool ok = sp <= 1e-9 && pe <= 1e-9 && au <= 1e-9 && mw <= 1e-12 && mwu_u == 0.0 && cases == 45 * 12 && bands;
  return {ok, "max |diff| spearman " + fmt("%.2g", sp) + ", pearson " + fmt("%.2g", pe) + ", auc " + fmt("%.2g", au) +
                  ", MWU p " + fmt("%.2g", mw) + " over " + std::to_string(cases) + " exact cases; banding " +
                  (bands ? "ok" : "wrong")};
}

// ---------------------------------------------------------------------------

std::vector<genacc::ResponseRecord> scripted(const std::vector<TaskItem>& items) {
  std::vector<genacc::ResponseRecord> out;
  for (const auto& it : items) {
    std::string r;
    const std::size_t lines = 1 + it.id % 5;
    for (std::size_t j = 0; j + 1 < lines; ++j) r += "Consider clue " + std::to_string(j + 1) + " about house " + std::to_string(it.id % 3 + 1) + ".\n";
    r += "\\boxed{" + std::string(it.label ? "True" : "False") + "}";
    out.push_back({it.id, r, "scripted", 0.0, 1.0, 0});
  }
  return out;
}

Outcome progressive_counterfactual() {
  const auto dir = fs::temp_directory_path() / ("reprobe_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto split = build_split(Task::Zebra, Difficulty::Low, Variant::TF, 60, 30, 5);
  write_file(dir / "train.jsonl", write_task_jsonl(split.train));
  write_file(dir / "test.jsonl", write_task_jsonl(split.test));
  const auto train_r = scripted(split.train), test_r = scripted(split.test);
  write_file(dir / "train_responses.jsonl", genacc::write_responses_jsonl(train_r));
  write_file(dir / "test_responses.jsonl", genacc::write_responses_jsonl(test_r));
  auto none = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  const std::map<std::string, std::string> common = {
      {"seed", "5"},     {"d_model", "16"}, {"max_seq_len", "1600"}, {"epochs", "1"},
      {"train", (dir / "train.jsonl").string()}, {"test", (dir / "test.jsonl").string()},
      {"train_responses", (dir / "train_responses.jsonl").string()},
      {"test_responses", (dir / "test_responses.jsonl").string()}};
  auto with = [&](std::map<std::string, std::string> extra) {
    auto m = common;
    for (auto& [k, v] : extra) m[k] = v;
    return config::Config::resolve(m, {}, none);
  };
  std::vector<std::string> problems;
  const auto prog = pipeline::run("progressive", with({{"out", (dir / "prog").string()}}));
  const std::size_t stages = prog.at("total_stages").get<std::size_t>();
  if (prog.at("stages").size() != stages + 1) problems.push_back("stage count");
  for (std::size_t j = 0; j <= stages; ++j) {
    const auto path = dir / "prog" / ("eval_stage_" + std::to_string(j) + ".json");
    if (!fs::exists(path)) {
      problems.push_back("missing " + path.filename().string());
      continue;
    }
    const auto e = nlohmann::json::parse(read_file(path));
    if (e.at("n").get<std::size_t>() + e.at("dropped").get<std::size_t>() != split.test.size())
      problems.push_back("stage " + std::to_string(j) + " item count");
  }

  // Prefix property over every item and consecutive stage pair.
  std::size_t prefix_checks = 0, prefix_bad = 0;
  for (const auto* set : {&split.train, &split.test}) {
    const auto& rs = set == &split.train ? train_r : test_r;
    const auto ds = progressive_datasets(*set, genacc::responses_by_id(rs), 1600);
    for (std::size_t j = 0; j + 1 < ds.size(); ++j)
      for (std::size_t i = 0; i < ds[j].items.size(); ++i) {
        const auto& a = ds[j].items[i].tokens;
        const auto& b = ds[j + 1].items[i].tokens;
        const auto trig = tokenize_trigger((*set)[i].probe_fields).size();
        const std::size_t la = a.size() - trig;
        ++prefix_checks;
        prefix_bad += !(ds[j].items[i].id == ds[j + 1].items[i].id && b.size() - trig >= la &&
                        std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(la), b.begin()));
      }
  }

  // Counterfactual contexts keep the reference CoT length exactly.
  std::vector<std::optional<std::string>> cots;
  for (const auto& r : test_r) cots.emplace_back(r.response);
  const auto base = compose_dataset(split.test, cots, 1, "full", 1600);
  std::size_t length_checks = 0, length_bad = 0;
  for (auto kind : {counterfactual::Kind::Dots, counterfactual::Kind::Irrelevant}) {
    counterfactual::Spec spec;
    spec.kind = kind;
    spec.seed = 3;
    const auto cf = counterfactual::apply(base, spec, 1600);
    if (cf.items.size() != base.items.size()) problems.push_back("counterfactual dropped items");
    for (std::size_t i = 0; i < std::min(cf.items.size(), base.items.size()); ++i) {
      const auto a = counterfactual::split_composed(base.items[i].tokens);
      const auto b = counterfactual::split_composed(cf.items[i].tokens);
      ++length_checks;
      length_bad += !(a.cot && b.cot && a.cot->size() == b.cot->size() && a.problem == b.problem && a.trigger == b.trigger);
    }
  }
  bool repeat_guard = true;
  for (int times : {0, 6, 7}) {
    counterfactual::Spec spec;
    spec.kind = counterfactual::Kind::Repeat;
    spec.times = times;
    try {
      counterfactual::apply(base, spec, 1600);
      repeat_guard = false;
    } catch (const Error& e) {
      repeat_guard = repeat_guard && e.code() == Errc::TimesOutOfRange;
    }
  }
  counterfactual::Spec five;
  five.kind = counterfactual::Kind::Repeat;
  five.times = 5;
  counterfactual::apply(base, five, 100000);

  const auto cf = pipeline::run("counterfactual",
                                with({{"out", (dir / "cf").string()}, {"kind", "dots"},
                                      {"model", (dir / "prog" / "model.rbkb").string()},
                                      {"probe", (dir / "prog" / ("probe_stage_" + std::to_string(stages) + ".rprm")).string()}}));
  if (!fs::exists(dir / "cf" / "eval_counterfactual.json")) problems.push_back("counterfactual evaluation missing");
  fs::remove_all(dir);
  const bool ok = problems.empty() && prefix_bad == 0 && length_bad == 0 && repeat_guard && prefix_checks > 0;
  std::string detail = std::to_string(stages + 1) + " stage evaluations, prefix " + std::to_string(prefix_checks - prefix_bad) +
                       "/" + std::to_string(prefix_checks) + ", CoT lengths " + std::to_string(length_checks - length_bad) +
                       "/" + std::to_string(length_checks) + ", repeat guard " + (repeat_guard ? "ok" : "missing");
  for (const auto& p : problems) detail += "; " + p;
  return {ok, detail};
}

// ---------------------------------------------------------------------------

std::optional<std::string> brace_stack(const std::string& s) {
  const std::string tag = "\\boxed{";
  std::vector<std::pair<std::size_t, bool>> open;
  std::optional<std::string> last;
  std::size_t last_start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') {
      open.emplace_back(i + 1, i + 1 >= tag.size() && s.substr(i + 1 - tag.size(), tag.size()) == tag);
    } else if (s[i] == '}' && !open.empty()) {
      const auto [start, boxed] = open.back();
      open.pop_back();
      if (boxed && (!last || start > last_start)) {
        last = s.substr(start, i - start);
        last_start = start;
      }
    }
  }
  return last;
}

Outcome answer_extraction() {
  std::mt19937_64 gen(13);
  const std::vector<std::string> pieces = {"\\boxed{", "{", "}", "}", "a", "7", " ", "\\box", "ed{"};
  std::size_t agree = 0;
  for (int t = 0; t < 1000; ++t) {
    std::string s;
    for (std::size_t k = 0, n = gen() % 24; k < n; ++k) s += pieces[gen() % pieces.size()];
    agree += genacc::last_boxed(s) == brace_stack(s);
  }
  const auto j = nlohmann::json::parse(read_file(std::string(REPROBE_FIXTURE_DIR) + "/hand_labeled_responses.json"));
  std::vector<TaskItem> items;
  std::vector<genacc::ResponseRecord> records;
  std::size_t want_correct = 0, want_failures = 0, label_match = 0;
  for (const auto& e : j) {
    TaskItem t;
    t.id = e.at("id").get<std::uint64_t>();
    t.variant = parse_variant(e.at("variant").get<std::string>());
    t.num_classes = e.at("num_classes").get<int>();
    t.label = e.at("label").get<int>();
    if (!e.at("options").empty()) t.meta["options"] = e.at("options");
    items.push_back(t);
    records.push_back({t.id, e.at("response").get<std::string>(), "fixture", 0.0, 1.0, 0});
    want_correct += e.at("expect_delta").get<std::size_t>();
    const auto got = genacc::extract_answer(records.back().response, t);
    if (e.at("expect_label").is_null()) {
      ++want_failures;
      label_match += !got.has_value();
    } else {
      label_match += got == e.at("expect_label").get<int>();
    }
  }
  const auto score = genacc::score_generation(records, items);
  const bool fixture_ok = label_match == items.size() && score.failures == want_failures &&
                          score.acc_gen == static_cast<double>(want_correct) / static_cast<double>(items.size());
  return {agree == 1000 && fixture_ok, "brace oracle agreement " + std::to_string(agree) + "/1000; fixture labels " +
                                           std::to_string(label_match) + "/" + std::to_string(items.size()) + ", acc_gen " +
                                           fmt("%.2f", score.acc_gen) + ", failures " + std::to_string(score.failures)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"zebra generator soundness", zebra_soundness},
      {"syllogism generator soundness", mused_soundness},
      {"random backbone probes at majority level", random_backbone_control},
      {"planted signal is recovered", planted_signal},
      {"probe gradients match finite differences", gradient_correctness},
      {"capacity bound holds", capacity_bound},
      {"statistics match brute-force oracles", statistics_oracles},
      {"progressive and counterfactual pipeline", progressive_counterfactual},
      {"answer extraction", answer_extraction},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
