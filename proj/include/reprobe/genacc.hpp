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
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"
#include "reprobe/backbone.hpp"
#include "reprobe/error.hpp"
#include "reprobe/external_qa.hpp"
#include "reprobe/parallel.hpp"
#include "reprobe/task_item.hpp"
#include "reprobe/tokenizer.hpp"

namespace reprobe::genacc {

/// Content of the last \boxed{...} whose braces balance. An unbalanced final
/// group falls back to the latest balanced one before it.
inline std::optional<std::string> last_boxed(std::string_view text) {
  static constexpr std::string_view kOpen = "\\boxed{";
  std::optional<std::string> found;
  std::size_t pos = text.find(kOpen);
  while (pos != std::string_view::npos) {
    const std::size_t start = pos + kOpen.size();
    int depth = 1;
    std::size_t i = start;
    for (; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      else if (text[i] == '}' && --depth == 0) break;
    }
    if (depth == 0) found = std::string(text.substr(start, i - start));
    pos = text.find(kOpen, start);
  }
  return found;
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Strips whitespace, math delimiters, \text{} wrappers and trailing periods.
inline std::string clean(std::string_view raw) {
  std::string s = external::trim(raw);
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    for (std::string_view wrap : {"\\text{", "\\textbf{", "\\mathrm{", "\\textrm{"}) {
      if (s.size() > wrap.size() && s.compare(0, wrap.size(), wrap) == 0 && s.back() == '}') {
        s = external::trim(std::string_view(s).substr(wrap.size(), s.size() - wrap.size() - 1));
        changed = true;
      }
    }
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
      s = external::trim(std::string_view(s).substr(1, s.size() - 2));
      changed = true;
    }
    if (!s.empty() && s.back() == '.') {
      s.pop_back();
      s = external::trim(s);
      changed = true;
    }
  }
  return s;
}

inline std::optional<int> small_integer(std::string_view s) {
  if (s.empty() || s.size() > 6) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

inline std::optional<int> true_false(const std::string& content) {
  const std::string s = lower(content);
  static const std::set<std::string> yes = {"true", "yes", "1", "correct"};
  static const std::set<std::string> no = {"false", "no", "0", "incorrect"};
  if (yes.contains(s)) return 1;
  if (no.contains(s)) return 0;
  return std::nullopt;
}

inline std::optional<int> choice(const std::string& content, int num_classes, const std::vector<std::string>& options) {
  const std::string s = lower(content);
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (lower(options[i]) == s || lower(clean(options[i])) == s) return static_cast<int>(i);
  }
  for (std::size_t i = 0; i < options.size(); ++i)
    if (external::numerically_equal(options[i], content)) return static_cast<int>(i);
  std::string letter = s;
  if (letter.size() == 3 && letter.front() == '(' && letter.back() == ')') letter = letter.substr(1, 1);
  if (letter.size() == 1 && letter[0] >= 'a' && letter[0] < 'a' + num_classes) return letter[0] - 'a';
  for (std::string_view prefix : {"type ", "option "}) {
    if (s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0) {
      const auto k = small_integer(external::trim(std::string_view(s).substr(prefix.size())));
      if (k && *k >= 1 && *k <= num_classes) return *k - 1;
    }
  }
  if (const auto k = small_integer(s); k && *k >= 1 && *k <= num_classes) return *k - 1;
  return std::nullopt;
}

}  // namespace detail

/// Label named by the last balanced boxed group, or nothing.
inline std::optional<int> extract_answer(std::string_view text, Variant variant, int num_classes,
                                         const std::vector<std::string>& options = {}) {
  const auto boxed = last_boxed(text);
  if (!boxed) return std::nullopt;
  const std::string content = detail::clean(*boxed);
  if (content.empty()) return std::nullopt;
  if (variant == Variant::TF) return detail::true_false(content);
  return detail::choice(content, num_classes, options);
}

inline std::optional<int> extract_answer(std::string_view text, const TaskItem& item) {
  std::vector<std::string> options;
  if (item.meta.contains("options")) options = item.meta.at("options").get<std::vector<std::string>>();
  return extract_answer(text, item.variant, item.num_classes, options);
}

struct ResponseRecord {
  std::uint64_t id = 0;
  std::string response;
  std::string source = "toy";
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 0;

  bool operator==(const ResponseRecord&) const = default;
};

inline nlohmann::json to_json(const ResponseRecord& r) {
  return {{"id", r.id},
          {"response", r.response},
          {"source", r.source},
          {"temperature", r.temperature},
          {"top_p", r.top_p},
          {"max_tokens", r.max_tokens}};
}

inline ResponseRecord response_from_json(const nlohmann::json& j) {
  try {
    ResponseRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.response = j.at("response").get<std::string>();
    r.source = j.value("source", std::string("unknown"));
    r.temperature = j.value("temperature", 0.0);
    r.top_p = j.value("top_p", 1.0);
    r.max_tokens = j.value("max_tokens", 0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, std::string("malformed response record: ") + e.what());
  }
}

inline std::string write_responses_jsonl(const std::vector<ResponseRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<ResponseRecord> parse_responses_jsonl(std::string_view text) {
  std::vector<ResponseRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (external::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::SchemaError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(response_from_json(j));
  }
  return out;
}

inline std::map<std::uint64_t, std::string> responses_by_id(const std::vector<ResponseRecord>& records) {
  std::map<std::uint64_t, std::string> out;
  for (const auto& r : records) {
    require(out.emplace(r.id, r.response).second, Errc::IdMismatch, "duplicate response id " + std::to_string(r.id));
  }
  return out;
}

struct GenScore {
  double acc_gen = 0.0;
  std::size_t n = 0;
  std::size_t failures = 0;
  std::vector<std::pair<std::uint64_t, int>> delta;  // (id, correct) in item order
};

inline nlohmann::json to_json(const GenScore& s) {
  nlohmann::json delta = nlohmann::json::array();
  for (const auto& [id, d] : s.delta) delta.push_back({{"id", id}, {"delta", d}});
  return {{"acc_gen", s.acc_gen}, {"n", s.n}, {"failures", s.failures}, {"delta", std::move(delta)}};
}

/// Extraction failures score as incorrect.
inline GenScore score_generation(const std::vector<ResponseRecord>& records, const std::vector<TaskItem>& items) {
  const auto by_id = responses_by_id(records);
  require(by_id.size() == items.size(), Errc::IdMismatch, "responses and items differ in count");
  GenScore s;
  std::size_t correct = 0;
  for (const auto& item : items) {
    const auto it = by_id.find(item.id);
    require(it != by_id.end(), Errc::IdMismatch, "no response for item " + std::to_string(item.id));
    const auto label = extract_answer(it->second, item);
    if (!label) ++s.failures;
    const int d = label && *label == item.label ? 1 : 0;
    correct += static_cast<std::size_t>(d);
    s.delta.emplace_back(item.id, d);
  }
  s.n = items.size();
  s.acc_gen = s.n ? static_cast<double>(correct) / static_cast<double>(s.n) : 0.0;
  return s;
}

struct GenConfig {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_new = 256;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kBoxedInstruction =
    "Please reason step by step, and put your final answer within \\boxed{}.";

inline Tokens generation_prompt(const TaskItem& item) {
  Tokens out = {id_of(Special::Bos)};
  std::string text = item.prompt;
  const auto q = item.question();
  if (!q.empty()) text += "\n\n" + q;
  text += "\n";
  text += kBoxedInstruction;
  text += "\n";
  const auto body = tokenize(text);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

/// Printable ASCII, newline and EOS, so every response is plain text.
inline std::vector<bool> text_vocabulary() {
  std::vector<bool> allowed(kVocabSize, false);
  for (int c = 32; c < 127; ++c) allowed[static_cast<std::size_t>(c)] = true;
  allowed['\n'] = true;
  allowed[static_cast<std::size_t>(id_of(Special::Eos))] = true;
  return allowed;
}

inline std::vector<ResponseRecord> run_generation(const Backbone<float>& backbone, const std::vector<TaskItem>& items,
                                                  const GenConfig& config, int threads = default_threads()) {
  std::vector<ResponseRecord> out(items.size());
  const auto allowed = text_vocabulary();
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto& item = items[i];
    const auto g = backbone.generate(generation_prompt(item), config.temperature, config.top_p, config.max_new,
                                     mix_seed(config.seed, item.id), allowed);
    out[i] = {item.id, detokenize(g.tokens), "toy", config.temperature, config.top_p, config.max_new};
  });
  return out;
}

}  // namespace reprobe::genacc
