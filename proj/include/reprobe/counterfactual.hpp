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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reprobe/error.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/tokenizer.hpp"
#include "reprobe/vprobe.hpp"

namespace reprobe::counterfactual {

enum class Kind { Dots, Repeat, Irrelevant, Swap };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::Dots: return "dots";
    case Kind::Repeat: return "repeat";
    case Kind::Irrelevant: return "irrelevant";
    case Kind::Swap: return "swap";
  }
  return "?";
}

inline Kind parse_kind(std::string_view s) {
  if (s == "dots") return Kind::Dots;
  if (s == "repeat") return Kind::Repeat;
  if (s == "irrelevant") return Kind::Irrelevant;
  if (s == "swap") return Kind::Swap;
  fail(Errc::InvalidArgument, "unknown context kind " + std::string(s));
}

inline constexpr int kMaxRepeats = 5;

/// Repeated " ." cut to exactly target_tokens byte tokens.
inline std::string dots_context(std::size_t target_tokens) {
  std::string out;
  out.reserve(target_tokens);
  for (std::size_t i = 0; i < target_tokens; ++i) out.push_back(i % 2 == 0 ? ' ' : '.');
  return out;
}

inline std::string repeat_prompt_context(std::string_view problem, std::string_view trigger, int times) {
  require(times >= 1 && times <= kMaxRepeats, Errc::TimesOutOfRange,
          "times must lie in [1, " + std::to_string(kMaxRepeats) + "], got " + std::to_string(times));
  std::string unit = std::string(trigger) + std::string(problem);
  std::string out;
  for (int i = 0; i < times; ++i) out += unit;
  return out;
}

/// Chain-of-thought from an unrelated cipher-decoding task.
inline const std::vector<std::string>& default_pool() {
  static const std::vector<std::string> pool = {
      "The ciphertext is \"KHOOR ZRUOG\". Each letter looks shifted by a constant amount.\n"
      "Try shift 3 backwards: K -> H, H -> E, O -> L, O -> L, R -> O.\n"
      "That gives HELLO for the first word.\n"
      "Apply the same shift to ZRUOG: Z -> W, R -> O, U -> R, O -> L, G -> D.\n"
      "The plaintext is HELLO WORLD.",
      "We are given the string \"URYYB\" and told it uses a rotation cipher.\n"
      "ROT13 is its own inverse, so rotate each letter by 13.\n"
      "U -> H, R -> E, Y -> L, Y -> L, B -> O.\n"
      "So the decoded word is HELLO.\n"
      "Check: rotating HELLO by 13 gives URYYB again, which matches.",
      "The message \"GSV JFRXP YILDM ULC\" might be an Atbash cipher.\n"
      "In Atbash, A maps to Z, B to Y, and so on.\n"
      "G -> T, S -> H, V -> E, so the first word is THE.\n"
      "J -> Q, F -> U, R -> I, X -> C, P -> K gives QUICK.\n"
      "Y -> B, I -> R, L -> O, D -> W, M -> N gives BROWN, and U -> F, L -> O, C -> X gives FOX.\n"
      "The plaintext reads THE QUICK BROWN FOX.",
      "Decode the numbers 8 5 12 12 15 using A = 1, B = 2, and so on.\n"
      "8 is H, 5 is E, 12 is L, 12 is L, 15 is O.\n"
      "The word is HELLO.\n"
      "No other mapping is needed since every number is between 1 and 26.",
      "The key is LEMON and the ciphertext is \"LXFOPV\". This is a Vigenere cipher.\n"
      "Subtract key letters: L - L = A, X - E = T, F - M = T.\n"
      "O - O = A, P - N = C, V - L = K.\n"
      "Reading the results gives ATTACK.\n"
      "The key repeats after five letters, which is consistent with the sixth letter using L again.",
      "The text \"OLSSV\" has letters that are all 7 positions after common letters.\n"
      "Shift back by 7: O -> H, L -> E, S -> L, S -> L, V -> O.\n"
      "The result HELLO is an English word, so the shift is correct.\n"
      "Other shifts such as 6 or 8 give strings that are not words.",
      "Binary groups: 01001000 01001001.\n"
      "01001000 is 72 in decimal, which is the ASCII code for H.\n"
      "01001001 is 73, which is I.\n"
      "The message is HI.\n"
      "Both groups have eight bits, so there is no padding to remove.",
      "The word \"TSDMQS\" reversed is \"SQMDST\", which does not help, so try a shift instead.\n"
      "A shift of 1 backwards gives SRCLPR, still not a word.\n"
      "Try pairing letters with a keyboard offset: T is right of R, S is right of A, D is right of S.\n"
      "Shifting each key one to the left gives R, A, S, N, W, A.\n"
      "That is not a word either, so return to shifts and try 25: T -> U, S -> T, D -> E, M -> N, Q -> R, S -> T.\n"
      "The plaintext candidate is UTENRT, which fails, so the cipher needs a longer key.",
  };
  return pool;
}

/// A seed-chosen pool entry cut to target_tokens. Entries that are too short
/// continue with the following entries, wrapping around the pool.
inline std::string irrelevant_context(const std::vector<std::string>& pool, std::size_t target_tokens,
                                      std::uint64_t seed) {
  require(!pool.empty(), Errc::EmptyPool, "irrelevant pool is empty");
  std::size_t total = 0;
  for (const auto& s : pool) total += s.size();
  require(total > 0 || target_tokens == 0, Errc::EmptyPool, "irrelevant pool has no text");
  Rng rng(seed);
  std::size_t idx = static_cast<std::size_t>(rng.below(pool.size()));
  std::string out;
  while (out.size() < target_tokens) {
    if (!out.empty()) out.push_back('\n');
    out += pool[idx];
    idx = (idx + 1) % pool.size();
  }
  out.resize(target_tokens);
  return out;
}

/// The three parts of a composed probe input.
struct ComposedParts {
  Tokens problem;
  std::optional<Tokens> cot;
  Tokens trigger;
};

inline ComposedParts split_composed(const Tokens& tokens) {
  ComposedParts parts;
  std::size_t i = 0;
  while (i < tokens.size() && !is_special(tokens[i])) ++i;
  parts.problem.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
  if (i < tokens.size() && tokens[i] == id_of(Special::Reasoning)) {
    std::size_t j = i + 1;
    while (j < tokens.size() && !is_special(tokens[j])) ++j;
    parts.cot = Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i + 1), tokens.begin() + static_cast<std::ptrdiff_t>(j));
    i = j;
  }
  parts.trigger.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.end());
  require(!parts.trigger.empty() && is_probe_special(parts.trigger.front()), Errc::SchemaError,
          "composed input has no probe trigger");
  return parts;
}

inline Tokens join_parts(const Tokens& problem, const std::string& cot, const Tokens& trigger) {
  Tokens out = problem;
  out.push_back(id_of(Special::Reasoning));
  const Tokens c = tokenize(cot);
  out.insert(out.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(std::min(c.size(), kCotTokenLimit)));
  out.insert(out.end(), trigger.begin(), trigger.end());
  return out;
}

struct Spec {
  Kind kind = Kind::Dots;
  int times = 1;
  std::vector<std::string> pool = default_pool();
  std::uint64_t seed = 0;
  std::map<std::uint64_t, std::string> source;  // swap: responses from another source
  std::string source_name = "other";
};

/// Replaces the CoT segment of every item. Items keep ids, labels and stages;
/// results longer than max_len are dropped and counted.
inline ProbeDataset apply(const ProbeDataset& base, const Spec& spec, std::size_t max_len) {
  if (spec.kind == Kind::Repeat) require(spec.times >= 1 && spec.times <= kMaxRepeats, Errc::TimesOutOfRange, "times must lie in [1, 5]");
  if (spec.kind == Kind::Irrelevant) require(!spec.pool.empty(), Errc::EmptyPool, "irrelevant pool is empty");
  ProbeDataset out;
  out.provenance = "counterfactual(" + to_string(spec.kind) + ")";
  out.dropped = base.dropped;
  for (const auto& item : base.items) {
    const auto parts = split_composed(item.tokens);
    const std::size_t ref_len = parts.cot ? parts.cot->size() : 0;
    std::string cot;
    switch (spec.kind) {
      case Kind::Dots:
        cot = dots_context(ref_len);
        break;
      case Kind::Repeat:
        cot = repeat_prompt_context(detokenize(parts.problem), detokenize(parts.trigger), spec.times);
        break;
      case Kind::Irrelevant:
        cot = irrelevant_context(spec.pool, ref_len, mix_seed(spec.seed, item.id));
        break;
      case Kind::Swap: {
        const auto it = spec.source.find(item.id);
        require(it != spec.source.end(), Errc::IdMismatch, "source has no response for item " + std::to_string(item.id));
        if (!parts.cot) {
          out.items.push_back(item);
          continue;
        }
        cot = cot_prefix(it->second, static_cast<std::size_t>(item.stage));
        break;
      }
    }
    Tokens tokens = join_parts(parts.problem, cot, parts.trigger);
    if (tokens.size() > max_len) {
      ++out.dropped;
      continue;
    }
    out.items.push_back({item.id, item.label, item.stage, std::move(tokens)});
  }
  if (spec.kind == Kind::Swap) out.provenance = "counterfactual(swap:" + spec.source_name + ")";
  return out;
}

/// Cross-source swap: each item's CoT becomes the same-stage prefix of the
/// other source's response to the same problem.
inline ProbeDataset swap_cot(const ProbeDataset& base, const std::map<std::uint64_t, std::string>& source,
                             std::size_t max_len, std::string source_name = "other") {
  Spec spec;
  spec.kind = Kind::Swap;
  spec.source = source;
  spec.source_name = std::move(source_name);
  return apply(base, spec, max_len);
}

}  // namespace reprobe::counterfactual
