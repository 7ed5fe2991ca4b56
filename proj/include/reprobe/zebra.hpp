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
#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <tuple>
#include <vector>

#include "reprobe/error.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/task_item.hpp"

namespace reprobe::zebra {

/// A specific attribute value: `value` indexes puzzle.categories[category].values.
struct AttrRef {
  int category = 0;
  int value = 0;

  bool operator==(const AttrRef&) const = default;
};

enum class ConstraintKind { SameEntity, FixedPosition, DirectlyLeft, NextTo };

struct Constraint {
  ConstraintKind kind = ConstraintKind::SameEntity;
  AttrRef a;
  AttrRef b;      // unused for FixedPosition
  int house = 0;  // 1-based, FixedPosition only

  bool operator==(const Constraint&) const = default;
};

struct Category {
  std::string name;
  std::vector<std::string> values;  // listing order in the prompt

  bool operator==(const Category&) const = default;
};

/// solution[house][category] = value index, houses 0-based.
using Assignment = std::vector<std::vector<int>>;

struct Puzzle {
  int n = 0;  // houses
  int m = 0;  // attribute categories, including names
  std::vector<Category> categories;
  Assignment solution;
  std::vector<Constraint> constraints;
  std::uint64_t seed = 0;

  bool operator==(const Puzzle&) const = default;

  int house_of(AttrRef a) const {
    for (int h = 0; h < n; ++h)
      if (solution[h][a.category] == a.value) return h;
    return -1;
  }
};

// Value pools. Category 0 is always the resident's name.
struct PoolSpec {
  const char* name;
  std::array<const char*, 5> values;
};

inline constexpr std::array<PoolSpec, 5> kPools{{
    {"name", {"alice", "arnold", "bob", "carol", "david"}},
    {"cigar", {"blue master", "dunhill", "pall mall", "prince", "red eye"}},
    {"flower", {"carnations", "daffodils", "iris", "lilies", "orchid"}},
    {"lunch", {"grilled cheese", "pizza", "soup", "spaghetti", "stir fry"}},
    {"animal", {"bird", "cat", "dog", "fish", "horse"}},
}};

inline bool holds(const Constraint& c, int house_a, int house_b) {
  switch (c.kind) {
    case ConstraintKind::SameEntity: return house_a == house_b;
    case ConstraintKind::FixedPosition: return house_a == c.house - 1;
    case ConstraintKind::DirectlyLeft: return house_a + 1 == house_b;
    case ConstraintKind::NextTo: return std::abs(house_a - house_b) == 1;
  }
  return false;
}

namespace detail {

/// Backtracking over (category, value) -> house with forward checks on every
/// constraint whose endpoints are both placed.
class Solver {
 public:
  Solver(const Puzzle& p, std::size_t cap) : p_(p), cap_(cap) {
    const int vars = p.n * p.m;
    house_.assign(vars, -1);
    used_.assign(p.m, std::vector<bool>(p.n, false));
    fixed_.assign(vars, -1);
    touching_.resize(vars);
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      const auto& c = p.constraints[i];
      if (c.kind == ConstraintKind::FixedPosition) {
        const int v = var(c.a);
        if (fixed_[v] >= 0 && fixed_[v] != c.house - 1) contradiction_ = true;
        fixed_[v] = c.house - 1;
        continue;
      }
      touching_[var(c.a)].push_back(i);
      if (var(c.b) != var(c.a)) touching_[var(c.b)].push_back(i);
    }
    order_ = placement_order();
  }

  std::vector<Assignment> run() {
    if (!contradiction_) search(0);
    return std::move(found_);
  }

 private:
  int var(AttrRef a) const { return a.category * p_.n + a.value; }

  // Greedy static order: pinned variables first, then whichever variable has
  // the most constraints into the already-placed set, so checks fire early.
  std::vector<int> placement_order() const {
    const int vars = static_cast<int>(house_.size());
    std::vector<std::vector<int>> adj(vars);
    for (const auto& c : p_.constraints) {
      if (c.kind == ConstraintKind::FixedPosition) continue;
      adj[var(c.a)].push_back(var(c.b));
      adj[var(c.b)].push_back(var(c.a));
    }
    std::vector<int> order;
    std::vector<bool> placed(vars, false);
    std::vector<int> links(vars, 0);
    for (int step = 0; step < vars; ++step) {
      int best = -1;
      auto key = [&](int v) {
        return std::tuple(fixed_[v] >= 0, links[v], static_cast<int>(adj[v].size()), -v);
      };
      for (int v = 0; v < vars; ++v) {
        if (placed[v]) continue;
        if (best < 0 || key(v) > key(best)) best = v;
      }
      placed[best] = true;
      order.push_back(best);
      for (int u : adj[best]) ++links[u];
    }
    return order;
  }

  bool consistent(int v) const {
    for (std::size_t ci : touching_[v]) {
      const auto& c = p_.constraints[ci];
      const int ha = house_[var(c.a)];
      const int hb = house_[var(c.b)];
      if (ha < 0 || hb < 0) continue;
      if (!holds(c, ha, hb)) return false;
    }
    return true;
  }

  void search(std::size_t depth) {
    if (found_.size() >= cap_) return;
    if (depth == order_.size()) {
      Assignment a(p_.n, std::vector<int>(p_.m, -1));
      for (int c = 0; c < p_.m; ++c)
        for (int v = 0; v < p_.n; ++v) a[house_[c * p_.n + v]][c] = v;
      found_.push_back(std::move(a));
      return;
    }
    const int v = order_[depth];
    const int category = v / p_.n;
    for (int h = 0; h < p_.n; ++h) {
      if (used_[category][h]) continue;
      if (fixed_[v] >= 0 && fixed_[v] != h) continue;
      house_[v] = h;
      used_[category][h] = true;
      if (consistent(v)) search(depth + 1);
      used_[category][h] = false;
      house_[v] = -1;
      if (found_.size() >= cap_) return;
    }
  }

  const Puzzle& p_;
  std::size_t cap_;
  std::vector<int> house_;
  std::vector<std::vector<bool>> used_;
  std::vector<int> fixed_;
  std::vector<std::vector<std::size_t>> touching_;
  std::vector<int> order_;
  std::vector<Assignment> found_;
  bool contradiction_ = false;
};

}  // namespace detail

/// Returns up to `cap` satisfying assignments.
inline std::vector<Assignment> solve(const Puzzle& p, std::size_t cap) {
  return detail::Solver(p, cap).run();
}

/// min(cap, number of assignments satisfying all constraints).
inline std::size_t count_solutions(const Puzzle& p, std::size_t cap) {
  require(cap >= 2, Errc::InvalidArgument, "cap must be >= 2");
  return solve(p, cap).size();
}

/// Every constraint of the four kinds that is true under `p.solution`.
inline std::vector<Constraint> true_constraints(const Puzzle& p) {
  std::vector<Constraint> out;
  std::vector<AttrRef> attrs;
  for (int c = 0; c < p.m; ++c)
    for (int v = 0; v < p.n; ++v) attrs.push_back({c, v});
  for (const auto& a : attrs) out.push_back({ConstraintKind::FixedPosition, a, a, p.house_of(a) + 1});
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    for (std::size_t j = 0; j < attrs.size(); ++j) {
      if (i == j) continue;
      const auto& a = attrs[i];
      const auto& b = attrs[j];
      const int ha = p.house_of(a);
      const int hb = p.house_of(b);
      if (i < j && a.category != b.category && ha == hb)
        out.push_back({ConstraintKind::SameEntity, a, b, 0});
      if (ha + 1 == hb) out.push_back({ConstraintKind::DirectlyLeft, a, b, 0});
      if (i < j && std::abs(ha - hb) == 1) out.push_back({ConstraintKind::NextTo, a, b, 0});
    }
  }
  return out;
}

/// Samples a ground truth, then adds shuffled true constraints until the
/// solver reports a unique solution.
inline Puzzle generate(int n, int m, std::uint64_t seed) {
  require(n >= 2, Errc::DegenerateSize, "need at least two houses, got " + std::to_string(n));
  require(n <= 5, Errc::InvalidArgument, "at most five houses supported");
  require(m >= 1 && m <= 5, Errc::InvalidArgument, "attribute count must be in [1, 5]");
  Rng rng(seed);
  Puzzle p;
  p.n = n;
  p.m = m;
  p.seed = seed;

  std::vector<std::size_t> extra = {1, 2, 3, 4};
  rng.shuffle(extra);
  extra.resize(m - 1);
  std::sort(extra.begin(), extra.end());
  std::vector<std::size_t> pools = {0};
  pools.insert(pools.end(), extra.begin(), extra.end());

  for (std::size_t pool : pools) {
    Category cat;
    cat.name = kPools[pool].name;
    std::vector<std::string> values(kPools[pool].values.begin(), kPools[pool].values.end());
    rng.shuffle(values);
    values.resize(n);
    cat.values = std::move(values);
    p.categories.push_back(std::move(cat));
  }

  p.solution.assign(n, std::vector<int>(m, 0));
  for (int c = 0; c < m; ++c) {
    const auto perm = rng.permutation(n);
    for (int h = 0; h < n; ++h) p.solution[h][c] = static_cast<int>(perm[h]);
  }

  auto candidates = true_constraints(p);
  rng.shuffle(candidates);
  for (const auto& c : candidates) {
    p.constraints.push_back(c);
    if (count_solutions(p, 2) == 1) break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string title_case(std::string s) {
  bool start = true;
  for (char& ch : s) {
    if (start) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    start = ch == ' ';
  }
  return s;
}

inline std::string describe(const Puzzle& p, AttrRef a) {
  const auto& cat = p.categories[a.category];
  const std::string& v = cat.values[a.value];
  if (cat.name == "name") return capitalize(v);
  if (cat.name == "cigar") return "the person who smokes " + title_case(v);
  if (cat.name == "flower") return "the person who loves a bouquet of " + v;
  if (cat.name == "lunch") return "the person who loves " + v;
  if (cat.name == "animal") return "the " + v + " lover";
  return "the person with " + v;
}

inline std::string category_line(const Category& cat) {
  std::string head;
  if (cat.name == "name") head = "Each person has a unique name";
  else if (cat.name == "cigar") head = "Everyone has a different favorite cigar";
  else if (cat.name == "flower") head = "They all have a different favorite flower";
  else if (cat.name == "lunch") head = "Everyone has something different for lunch";
  else if (cat.name == "animal") head = "The people keep different animals";
  else head = "Each person has a different " + cat.name;
  std::string out = " - " + head + ": ";
  for (std::size_t i = 0; i < cat.values.size(); ++i) out += (i ? ", " : "") + cat.values[i];
  return out;
}

inline std::string ordinal(int house) {
  static constexpr std::array<const char*, 5> kOrd = {"first", "second", "third", "fourth", "fifth"};
  return kOrd.at(house - 1);
}

inline std::string render_constraint(const Puzzle& p, const Constraint& c) {
  const std::string a = capitalize(describe(p, c.a));
  switch (c.kind) {
    case ConstraintKind::SameEntity: return a + " is " + describe(p, c.b) + ".";
    case ConstraintKind::FixedPosition: return a + " is in the " + ordinal(c.house) + " house.";
    case ConstraintKind::DirectlyLeft: return a + " is directly left of " + describe(p, c.b) + ".";
    case ConstraintKind::NextTo: return a + " and " + describe(p, c.b) + " are next to each other.";
  }
  return {};
}

inline std::string render_problem(const Puzzle& p) {
  std::string out = "This is a logic puzzle. There are " + std::to_string(p.n) +
                    " houses (numbered 1 on the left, " + std::to_string(p.n) +
                    " on the right), from the perspective of someone standing across the street "
                    "from them. Each has a different person in them. They have different "
                    "characteristics:";
  for (const auto& cat : p.categories) out += "\n" + category_line(cat);
  out += "\n";
  for (std::size_t i = 0; i < p.constraints.size(); ++i)
    out += "\n" + std::to_string(i + 1) + ". " + render_constraint(p, p.constraints[i]);
  return out;
}

/// Puzzle names sorted alphabetically; MC class i is the i-th entry.
inline std::vector<std::string> sorted_names(const Puzzle& p) {
  auto names = p.categories.at(0).values;
  std::sort(names.begin(), names.end());
  return names;
}

/// TF: for each house a true item (label 1) followed by a false item with a
/// uniformly drawn wrong name (label 0). MC: one item per house.
inline std::vector<TaskItem> to_items(const Puzzle& p, Variant variant, std::uint64_t seed) {
  Rng rng(seed);
  const auto problem = render_problem(p);
  const auto options = sorted_names(p);
  std::vector<TaskItem> items;
  auto base = [&](int house) {
    TaskItem it;
    it.task = Task::Zebra;
    it.variant = variant;
    it.prompt = problem;
    it.meta = {{"n", p.n}, {"m", p.m}, {"house", house + 1}, {"puzzle_seed", p.seed}};
    return it;
  };
  for (int h = 0; h < p.n; ++h) {
    const std::string house = "House " + std::to_string(h + 1);
    const std::string truth = p.categories[0].values[p.solution[h][0]];
    if (variant == Variant::TF) {
      std::vector<std::string> wrong;
      for (const auto& name : options)
        if (name != truth) wrong.push_back(name);
      const std::string fake = wrong[rng.below(wrong.size())];
      for (const auto& [name, label] : {std::pair{truth, 1}, std::pair{fake, 0}}) {
        auto it = base(h);
        it.probe_fields = {{"START", house}, {"MID", name}, {"END", ""}};
        it.label = label;
        it.num_classes = 2;
        it.meta["question"] = "Decide whether " + name + " is the name of the person who lives in " + house + ".";
        items.push_back(std::move(it));
      }
    } else {
      auto it = base(h);
      it.probe_fields = {{"START", house}, {"END", ""}};
      it.label = static_cast<int>(std::find(options.begin(), options.end(), truth) - options.begin());
      it.num_classes = static_cast<int>(options.size());
      it.meta["question"] = "What is the name of the person who lives in " + house + "?";
      it.meta["options"] = options;
      items.push_back(std::move(it));
    }
  }
  return items;
}

}  // namespace reprobe::zebra
