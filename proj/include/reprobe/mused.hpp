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
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reprobe/error.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/task_item.hpp"

namespace reprobe::mused {

/// Aristotelian categorical forms; the enum order is the MC class index.
enum class PropType { A = 0, E = 1, I = 2, O = 3 };

inline constexpr PropType contradictory(PropType t) {
  switch (t) {
    case PropType::A: return PropType::O;
    case PropType::O: return PropType::A;
    case PropType::E: return PropType::I;
    case PropType::I: return PropType::E;
  }
  return t;
}

inline constexpr char type_letter(PropType t) { return "AEIO"[static_cast<int>(t)]; }

struct Proposition {
  PropType type = PropType::A;
  std::string subject;
  std::string predicate;

  auto operator<=>(const Proposition&) const = default;
  bool operator==(const Proposition&) const = default;
};

inline std::string sentence(const Proposition& p) {
  switch (p.type) {
    case PropType::A: return "All " + p.subject + " are " + p.predicate + ".";
    case PropType::E: return "All " + p.subject + " are not " + p.predicate + ".";
    case PropType::I: return "There exists one " + p.subject + " that is " + p.predicate + ".";
    case PropType::O: return "There exists one " + p.subject + " that is not " + p.predicate + ".";
  }
  return {};
}

/// Chains a first premise (S, M) with a second premise (M, P):
/// A+A->A, A+E->E, I+A->I, I+E->O. Nothing else is derivable.
inline std::optional<Proposition> chain(const Proposition& first, const Proposition& second) {
  if (first.predicate != second.subject || first.subject == second.predicate) return std::nullopt;
  std::optional<PropType> out;
  if (first.type == PropType::A && second.type == PropType::A) out = PropType::A;
  else if (first.type == PropType::A && second.type == PropType::E) out = PropType::E;
  else if (first.type == PropType::I && second.type == PropType::A) out = PropType::I;
  else if (first.type == PropType::I && second.type == PropType::E) out = PropType::O;
  if (!out) return std::nullopt;
  return Proposition{*out, first.subject, second.predicate};
}

/// Least fixed point of the premises under `chain`. Worklist form: each newly
/// derived fact is joined against facts indexed by its subject and predicate.
inline std::set<Proposition> derive_closure(const std::vector<Proposition>& premises) {
  std::set<Proposition> closure;
  std::map<std::string, std::vector<Proposition>> by_subject;
  std::map<std::string, std::vector<Proposition>> by_predicate;
  std::deque<Proposition> work;
  auto add = [&](const Proposition& p) {
    if (!closure.insert(p).second) return;
    by_subject[p.subject].push_back(p);
    by_predicate[p.predicate].push_back(p);
    work.push_back(p);
  };
  for (const auto& p : premises) add(p);
  while (!work.empty()) {
    const Proposition p = work.front();
    work.pop_front();
    // Copies: add() may grow the vectors being iterated.
    if (auto it = by_subject.find(p.predicate); it != by_subject.end()) {
      const auto seconds = it->second;
      for (const auto& q : seconds)
        if (auto r = chain(p, q)) add(*r);
    }
    if (auto it = by_predicate.find(p.subject); it != by_predicate.end()) {
      const auto firsts = it->second;
      for (const auto& q : firsts)
        if (auto r = chain(q, p)) add(*r);
    }
  }
  return closure;
}

inline bool entails(const std::vector<Proposition>& premises, const Proposition& goal) {
  return derive_closure(premises).count(goal) > 0;
}

struct Chain {
  int depth = 0;
  std::vector<Proposition> premises;
  Proposition conclusion;
  std::vector<std::size_t> noise_indices;
  Difficulty difficulty = Difficulty::Low;
  std::uint64_t seed = 0;

  bool operator==(const Chain&) const = default;

  std::vector<Proposition> necessary_premises() const {
    std::vector<Proposition> out;
    for (std::size_t i = 0; i < premises.size(); ++i)
      if (std::find(noise_indices.begin(), noise_indices.end(), i) == noise_indices.end())
        out.push_back(premises[i]);
    return out;
  }
};

inline constexpr std::array<const char*, 46> kSymbols = {
    "B",     "C",     "D",     "F",     "G",       "H",     "J",     "K",       "L",     "M",
    "N",     "P",     "Q",     "R",     "S",       "T",     "U",     "V",       "W",     "X",
    "Y",     "Z",     "Alpha", "Beta",  "Gamma",   "Delta", "Epsilon", "Zeta",  "Eta",   "Theta",
    "Iota",  "Kappa", "Lambda", "Mu",   "Nu",      "Xi",    "Omicron", "Pi",    "Rho",   "Sigma",
    "Tau",   "Upsilon", "Phi",  "Chi",  "Psi",     "Omega"};

inline constexpr int kMinDepth = 3;
inline constexpr int kMaxDepth = 25;

/// Number of distraction premises for `necessary` chain premises so that
/// they make up 20% of the final list (rounded, at least one).
inline std::size_t noise_count(std::size_t necessary) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(necessary / 4.0)));
}

/// A chain with `depth` rule applications (depth + 1 necessary premises) from
/// X0 to X_{depth+1}. The first premise is I for particular targets (else A),
/// the last is E for negative targets (else A), everything between is A.
/// Noise premises always take a fresh non-chain subject, so no derivation
/// starting from X0 can pass through them.
inline Chain generate(int depth, Difficulty difficulty, std::uint64_t seed,
                      std::optional<PropType> target = std::nullopt) {
  require(depth >= kMinDepth && depth <= kMaxDepth, Errc::DepthOutOfRange,
          "depth must be in [3, 25], got " + std::to_string(depth));
  Rng rng(seed);
  Chain c;
  c.depth = depth;
  c.difficulty = difficulty;
  c.seed = seed;
  const PropType type = target ? *target : static_cast<PropType>(rng.below(4));

  std::vector<std::string> symbols(kSymbols.begin(), kSymbols.end());
  rng.shuffle(symbols);
  const std::size_t chain_len = static_cast<std::size_t>(depth) + 2;
  std::vector<std::string> xs(symbols.begin(), symbols.begin() + chain_len);
  std::vector<std::string> fresh(symbols.begin() + chain_len, symbols.end());

  const bool particular = type == PropType::I || type == PropType::O;
  const bool negative = type == PropType::E || type == PropType::O;
  for (int i = 0; i <= depth; ++i) {
    PropType t = PropType::A;
    if (i == 0 && particular) t = PropType::I;
    if (i == depth && negative) t = PropType::E;
    c.premises.push_back({t, xs[i], xs[i + 1]});
  }
  c.conclusion = {type, xs.front(), xs.back()};

  if (difficulty == Difficulty::High) {
    const std::size_t q = noise_count(c.premises.size());
    std::size_t next_fresh = 0;
    std::set<Proposition> seen(c.premises.begin(), c.premises.end());
    while (c.premises.size() < static_cast<std::size_t>(depth) + 1 + q) {
      // Reuse earlier fresh subjects occasionally so noise can form its own small chains.
      std::string subject;
      if (next_fresh > 0 && rng.below(3) == 0) subject = fresh[rng.below(next_fresh)];
      else subject = fresh.at(next_fresh++);
      std::string predicate;
      if (rng.below(2) == 0) predicate = xs[rng.below(xs.size())];
      else {
        predicate = fresh.at(next_fresh + rng.below(fresh.size() - next_fresh));
      }
      if (predicate == subject) continue;
      Proposition noise{static_cast<PropType>(rng.below(4)), subject, predicate};
      if (!seen.insert(noise).second) continue;
      c.premises.push_back(noise);
    }
  }

  if (difficulty != Difficulty::Low) {
    const std::size_t necessary = static_cast<std::size_t>(depth) + 1;
    const auto perm = rng.permutation(c.premises.size());
    std::vector<Proposition> shuffled(c.premises.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled[i] = c.premises[perm[i]];
      if (perm[i] >= necessary) c.noise_indices.push_back(i);
    }
    c.premises = std::move(shuffled);
  }
  return c;
}

inline std::string render_problem(const Chain& c) {
  std::string out = "Given:";
  for (const auto& p : c.premises) out += "\n" + sentence(p);
  return out;
}

inline std::string mc_question(const std::string& s, const std::string& p) {
  return "Decide the relationship between " + s + " and " + p + ".\n\nType 1: " +
         sentence({PropType::A, s, p}) + "\nType 2: " + sentence({PropType::E, s, p}) +
         "\nType 3: " + sentence({PropType::I, s, p}) + "\nType 4: " +
         sentence({PropType::O, s, p}) +
         "\n\nChoose the single best option that describes the relationship between " + s +
         " and " + p + ".";
}

/// TF: the stated conclusion (label 1) followed by its contradictory (label 0).
/// MC: one item labelled with the conclusion type.
inline std::vector<TaskItem> to_items(const Chain& c, Variant variant, std::uint64_t /*seed*/) {
  const auto problem = render_problem(c);
  const auto& s = c.conclusion.subject;
  const auto& p = c.conclusion.predicate;
  auto base = [&] {
    TaskItem it;
    it.task = Task::MuseD;
    it.variant = variant;
    it.difficulty = c.difficulty;
    it.prompt = problem;
    it.meta = {{"d", c.depth}, {"conclusion_type", std::string(1, type_letter(c.conclusion.type))},
               {"chain_seed", c.seed}};
    return it;
  };
  std::vector<TaskItem> items;
  if (variant == Variant::TF) {
    for (const auto& [t, label] : {std::pair{c.conclusion.type, 1}, std::pair{contradictory(c.conclusion.type), 0}}) {
      auto it = base();
      it.probe_fields = {{"START", s}, {"MID1", p}, {"MID2", std::to_string(static_cast<int>(t) + 1)}, {"END", ""}};
      it.label = label;
      it.num_classes = 2;
      it.meta["stated_type"] = std::string(1, type_letter(t));
      it.meta["question"] = "Decide whether the statement is true or false: " + sentence({t, s, p});
      items.push_back(std::move(it));
    }
  } else {
    auto it = base();
    it.probe_fields = {{"START", s}, {"MID", p}, {"END", ""}};
    it.label = static_cast<int>(c.conclusion.type);
    it.num_classes = 4;
    it.meta["question"] = mc_question(s, p);
    it.meta["options"] = {"Type 1", "Type 2", "Type 3", "Type 4"};
    items.push_back(std::move(it));
  }
  return items;
}

}  // namespace reprobe::mused
