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

#include <cctype>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "reprobe/error.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/task_item.hpp"

namespace reprobe::external {

/// Exact value of a numeric answer plus the surface form it was written in.
struct Number {
  enum class Form { Integer, Rational, Decimal };
  Form form = Form::Integer;
  __int128 num = 0;
  __int128 den = 1;  // always > 0, reduced
  int decimals = 0;  // Decimal only

  bool same_value(const Number& o) const { return num == o.num && den == o.den; }
};

namespace detail {

inline __int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline Number normalized(Number n) {
  if (n.den < 0) {
    n.den = -n.den;
    n.num = -n.num;
  }
  const __int128 g = gcd128(n.num, n.den);
  if (g > 1) {
    n.num /= g;
    n.den /= g;
  }
  return n;
}

inline std::string to_decimal_string(__int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  std::string s;
  while (v != 0) {
    int digit = static_cast<int>(v % 10);
    if (digit < 0) digit = -digit;
    s.insert(s.begin(), static_cast<char>('0' + digit));
    v /= 10;
  }
  return neg ? "-" + s : s;
}

inline __int128 pow10(int k) {
  __int128 p = 1;
  for (int i = 0; i < k; ++i) p *= 10;
  return p;
}

inline bool all_digits(std::string_view s) {
  if (s.empty() || s.size() > 30) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

inline __int128 parse_digits(std::string_view s) {
  __int128 v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace detail

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Integers ("-12"), rationals ("3/4") and decimals ("0.25", ".5").
inline std::optional<Number> parse_number(std::string_view raw) {
  std::string s = trim(raw);
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.erase(0, 1);
  }
  Number n;
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const auto a = std::string_view(s).substr(0, slash);
    const auto b = std::string_view(s).substr(slash + 1);
    if (!detail::all_digits(a) || !detail::all_digits(b)) return std::nullopt;
    n.form = Number::Form::Rational;
    n.num = detail::parse_digits(a);
    n.den = detail::parse_digits(b);
    if (n.den == 0) return std::nullopt;
  } else if (const auto dot = s.find('.'); dot != std::string::npos) {
    const auto a = std::string_view(s).substr(0, dot);
    const auto b = std::string_view(s).substr(dot + 1);
    if ((a.empty() && b.empty()) || (!a.empty() && !detail::all_digits(a)) ||
        (!b.empty() && !detail::all_digits(b)))
      return std::nullopt;
    n.form = Number::Form::Decimal;
    n.decimals = static_cast<int>(b.size());
    n.den = detail::pow10(n.decimals);
    n.num = (a.empty() ? 0 : detail::parse_digits(a)) * n.den + (b.empty() ? 0 : detail::parse_digits(b));
  } else {
    if (!detail::all_digits(s)) return std::nullopt;
    n.num = detail::parse_digits(s);
  }
  if (neg) n.num = -n.num;
  return detail::normalized(n);
}

inline std::string format_number(const Number& n) {
  switch (n.form) {
    case Number::Form::Integer: return detail::to_decimal_string(n.num / n.den);
    case Number::Form::Rational:
      return n.den == 1 ? detail::to_decimal_string(n.num)
                        : detail::to_decimal_string(n.num) + "/" + detail::to_decimal_string(n.den);
    case Number::Form::Decimal: {
      // Scale to the stored number of decimals; values produced here are always representable.
      const __int128 scale = detail::pow10(n.decimals);
      const __int128 units = n.num * (scale / n.den);
      const bool neg = units < 0;
      const __int128 mag = neg ? -units : units;
      std::string s = detail::to_decimal_string(mag / scale);
      if (n.decimals > 0) {
        std::string frac = detail::to_decimal_string(mag % scale);
        s += "." + std::string(n.decimals - frac.size(), '0') + frac;
      }
      return neg ? "-" + s : s;
    }
  }
  return {};
}

/// Numeric equality after normalization; false if either side is non-numeric.
inline bool numerically_equal(std::string_view a, std::string_view b) {
  const auto x = parse_number(a);
  const auto y = parse_number(b);
  return x && y && x->same_value(*y);
}

namespace detail {

inline std::optional<Number> apply_rule(const Number& v, int rule) {
  Number out = v;
  // Step used by the +-1 and +-10% rules, in the value's own units.
  auto shift = [&](__int128 units_num, __int128 units_den) {
    out.num = v.num * units_den + units_num * v.den;
    out.den = v.den * units_den;
    return normalized(out);
  };
  switch (rule) {
    case 0: return shift(1, 1);
    case 1: return shift(-1, 1);
    case 2:
    case 3: {
      if (v.num == 0) return std::nullopt;
      const bool up = rule == 2;
      if (v.form == Number::Form::Rational) {
        out.num = v.num * (up ? 11 : 9);
        out.den = v.den * 10;
        return normalized(out);
      }
      // Integers and decimals move by 10% rounded to their precision, at least one unit.
      const __int128 scale = v.form == Number::Form::Decimal ? pow10(v.decimals) : 1;
      const __int128 units = v.num * (scale / v.den);
      __int128 mag = units < 0 ? -units : units;
      __int128 step = (mag + 5) / 10;
      if (step == 0) step = 1;
      return shift(up ? step : -step, scale);
    }
    case 4:
      if (v.num == 0) return std::nullopt;
      out.num = -v.num;
      return out;
    case 5: {
      // Swap the first adjacent pair of distinct digits of the written form.
      std::string s = format_number(v);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(s[i])) && std::isdigit(static_cast<unsigned char>(s[i + 1])) &&
            s[i] != s[i + 1]) {
          std::swap(s[i], s[i + 1]);
          auto parsed = parse_number(s);
          if (!parsed) return std::nullopt;
          parsed->form = v.form;
          parsed->decimals = v.decimals;
          return parsed;
        }
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Plausible wrong answer: one of {+1, -1, +10%, -10%, sign flip, digit swap},
/// starting from a seed-chosen rule and moving on while the result would not
/// differ from the gold value.
inline std::string perturb_numeric(std::string_view gold, std::uint64_t seed) {
  const auto value = parse_number(gold);
  require(value.has_value(), Errc::Unparseable, "not a number: '" + std::string(gold) + "'");
  Rng rng(seed);
  const int start = static_cast<int>(rng.below(6));
  for (int k = 0; k < 6; ++k) {
    const auto candidate = detail::apply_rule(*value, (start + k) % 6);
    if (candidate && !candidate->same_value(*value)) return format_number(*candidate);
  }
  // +1 always changes the value, so the loop above cannot fall through.
  fail(Errc::Unparseable, "no perturbation rule applies");
}

namespace detail {

inline std::vector<TaskItem> wrap_ordered(const std::string& question, const std::string& gold,
                                          const std::string& distractor, Variant variant,
                                          bool gold_first) {
  require(gold != distractor, Errc::IdenticalCandidates, "gold and distractor are identical");
  auto base = [&] {
    TaskItem it;
    it.task = Task::ExternalQA;
    it.variant = variant;
    it.prompt = question;
    it.meta = {{"gold", gold}, {"distractor", distractor}};
    return it;
  };
  std::vector<TaskItem> items;
  if (variant == Variant::TF) {
    for (const auto& [cand, label] : {std::pair{gold, 1}, std::pair{distractor, 0}}) {
      auto it = base();
      it.probe_fields = {{"ANS", cand}, {"END", ""}};
      it.label = label;
      it.num_classes = 2;
      it.meta["candidate"] = cand;
      it.meta["question"] =
          "I want you act as an answer judge. Given a question and a candidate answer, your "
          "objective is to determine if the provided answer is correct or not.\nQuestion: " +
          question + "\nCandidate answer: " + cand;
      items.push_back(std::move(it));
    }
  } else {
    const std::string& first = gold_first ? gold : distractor;
    const std::string& second = gold_first ? distractor : gold;
    auto it = base();
    it.probe_fields = {{"CA1", first}, {"CA2", second}, {"END", ""}};
    it.label = gold_first ? 0 : 1;
    it.num_classes = 2;
    it.meta["options"] = {first, second};
    it.meta["question"] = "A. " + first + "\nB. " + second + "\n\nWhich answer is correct?";
    items.push_back(std::move(it));
  }
  return items;
}

}  // namespace detail

/// TF: verification items for gold (1) and distractor (0). MC: both
/// candidates in seed-determined order, labelled with gold's position.
inline std::vector<TaskItem> wrap_external_qa(const std::string& question, const std::string& gold,
                                              const std::string& distractor, Variant variant,
                                              std::uint64_t seed) {
  Rng rng(seed);
  const bool gold_first = rng.below(2) == 0;
  return detail::wrap_ordered(question, gold, distractor, variant, gold_first);
}

}  // namespace reprobe::external
