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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reprobe/error.hpp"
#include "reprobe/task_item.hpp"

namespace reprobe {

using Tokens = std::vector<int>;

// Byte tokens occupy ids 0..255; special tokens follow in this order.
enum class Special : int {
  Start = 256,
  Mid,
  Mid1,
  Mid2,
  End,
  Ans,
  Ca1,
  Ca2,
  Reasoning,
  Bos,
  Eos,
};

inline constexpr int kByteTokens = 256;
inline constexpr int kFirstSpecial = 256;
inline constexpr int kVocabSize = 267;
/// Specials with trainable probe embeddings: the probe markers plus <|Reasoning|>.
inline constexpr int kProbeSpecials = 9;

inline constexpr std::array<std::string_view, 11> kSpecialNames = {
    "START", "MID", "MID1", "MID2", "END", "ANS", "CA1", "CA2", "Reasoning", "BOS", "EOS"};

inline constexpr int id_of(Special s) { return static_cast<int>(s); }
inline constexpr bool is_special(int id) { return id >= kFirstSpecial && id < kVocabSize; }
inline constexpr bool is_probe_special(int id) { return id >= kFirstSpecial && id < kFirstSpecial + kProbeSpecials; }

inline std::optional<Special> special_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kSpecialNames.size(); ++i)
    if (kSpecialNames[i] == name) return static_cast<Special>(kFirstSpecial + static_cast<int>(i));
  return std::nullopt;
}

inline std::string marker_text(Special s) {
  return "<|" + std::string(kSpecialNames[static_cast<int>(s) - kFirstSpecial]) + "|>";
}

/// Every marker that can appear inside probe-facing text.
inline std::vector<Special> probe_markers() {
  std::vector<Special> out;
  for (int i = 0; i < kProbeSpecials; ++i) out.push_back(static_cast<Special>(kFirstSpecial + i));
  return out;
}

enum class MarkerPolicy {
  /// A <|NAME|> whose NAME is not in the vocabulary is an error.
  Strict,
  /// Unrecognized marker-like text stays as bytes.
  Lenient,
};

namespace detail {

inline bool marker_name_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace detail

/// Byte-level encoding. Occurrences of <|NAME|> for NAME in `markers` become
/// the matching special id; with no markers the text is encoded verbatim.
inline Tokens tokenize(std::string_view text, std::span<const Special> markers = {},
                       MarkerPolicy policy = MarkerPolicy::Strict) {
  Tokens out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (!markers.empty() && text.compare(i, 2, "<|") == 0) {
      std::size_t j = i + 2;
      while (j < text.size() && detail::marker_name_char(text[j])) ++j;
      if (j > i + 2 && text.compare(j, 2, "|>") == 0) {
        const auto name = text.substr(i + 2, j - i - 2);
        const auto special = special_from_name(name);
        if (special) {
          bool allowed = false;
          for (auto m : markers) allowed |= m == *special;
          if (allowed) {
            out.push_back(id_of(*special));
            i = j + 2;
            continue;
          }
        } else if (policy == MarkerPolicy::Strict) {
          fail(Errc::UnknownMarker, "unknown marker <|" + std::string(name) + "|>");
        }
      }
    }
    out.push_back(static_cast<unsigned char>(text[i]));
    ++i;
  }
  return out;
}

inline std::string detokenize(std::span<const int> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t >= 0 && t < kByteTokens) out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
    else if (is_special(t)) out += marker_text(static_cast<Special>(t));
    else fail(Errc::InvalidArgument, "token id out of range: " + std::to_string(t));
  }
  return out;
}

/// Probe trigger tokens: one special id per field followed by the payload bytes.
inline Tokens tokenize_trigger(const std::vector<ProbeField>& fields) {
  Tokens out;
  for (const auto& f : fields) {
    const auto special = special_from_name(f.token);
    require(special.has_value(), Errc::UnknownMarker, "unknown probe token " + f.token);
    out.push_back(id_of(*special));
    const auto payload = tokenize(f.payload);
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

}  // namespace reprobe
