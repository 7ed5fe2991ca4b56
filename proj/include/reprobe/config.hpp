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

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reprobe/error.hpp"

namespace reprobe::config {

enum class Type { Str, Int, U64, Real, Path };

struct KeySpec {
  std::string name;
  Type type;
  std::optional<std::string> fallback;
  std::string help;
};

inline const std::vector<KeySpec>& keys() {
  static const std::vector<KeySpec> table = {
      {"seed", Type::U64, std::nullopt, "master seed (required)"},
      {"out", Type::Path, std::nullopt, "output directory"},
      {"task", Type::Str, "zebra", "zebra | mused | external"},
      {"difficulty", Type::Str, "low", "low | med | high"},
      {"variant", Type::Str, "tf", "tf | mc"},
      {"train_size", Type::Int, "2000", "training items"},
      {"test_size", Type::Int, "500", "test items"},
      {"qa_train", Type::Path, std::nullopt, "external QA records for training (JSONL)"},
      {"qa_test", Type::Path, std::nullopt, "external QA records for testing (JSONL)"},
      {"train", Type::Path, std::nullopt, "training task file (JSONL)"},
      {"test", Type::Path, std::nullopt, "test task file (JSONL)"},
      {"tasks", Type::Path, std::nullopt, "task file for generate/score/probe-eval (JSONL)"},
      {"model", Type::Path, std::nullopt, "backbone file; a random backbone is built when unset"},
      {"model_seed", Type::U64, std::nullopt, "seed of the random backbone (defaults to seed)"},
      {"d_model", Type::Int, "64", "random backbone width"},
      {"layers", Type::Int, "2", "random backbone depth"},
      {"heads", Type::Int, "4", "random backbone attention heads"},
      {"max_seq_len", Type::Int, "2048", "random backbone context window"},
      {"mode", Type::Str, "vprobe", "vprobe | linear"},
      {"probe", Type::Path, std::nullopt, "trained probe file"},
      {"rank", Type::Int, "4", "low-rank delta rank"},
      {"alpha", Type::Real, "16", "low-rank delta scale numerator"},
      {"dropout", Type::Real, "0.1", "delta dropout"},
      {"lr", Type::Real, "1e-4", "learning rate"},
      {"batch", Type::Int, "32", "batch size"},
      {"epochs", Type::Int, "-1", "epochs; negative picks 10, or 30 for small training sets"},
      {"train_repr", Type::Path, std::nullopt, "training representations (RREP)"},
      {"test_repr", Type::Path, std::nullopt, "test representations (RREP)"},
      {"train_responses", Type::Path, std::nullopt, "responses to the training items (JSONL)"},
      {"test_responses", Type::Path, std::nullopt, "responses to the test items (JSONL)"},
      {"responses", Type::Path, std::nullopt, "responses to score (JSONL)"},
      {"stages", Type::Str, "all", "progressive stages: all, or a comma list"},
      {"kind", Type::Str, "dots", "dots | repeat | irrelevant | swap"},
      {"times", Type::Int, "1", "prompt repetitions for the repeat counterfactual"},
      {"pool", Type::Path, std::nullopt, "irrelevant CoT pool, entries separated by blank lines"},
      {"swap_responses", Type::Path, std::nullopt, "responses from another source for the swap counterfactual"},
      {"swap_name", Type::Str, "other", "label of the swap source"},
      {"temperature", Type::Real, "0.6", "sampling temperature"},
      {"top_p", Type::Real, "0.95", "nucleus mass"},
      {"max_new_tokens", Type::Int, "256", "generation budget"},
      {"eval", Type::Path, std::nullopt, "probe evaluation file"},
      {"score", Type::Path, std::nullopt, "generation score file"},
      {"alignment", Type::Path, std::nullopt, "alignment samples (JSONL of id, p, delta)"},
      {"compare", Type::Path, std::nullopt, "second probe evaluation for r_p"},
      {"stats", Type::Path, std::nullopt, "stats report to plot"},
      {"representations", Type::Path, std::nullopt, "representations to project (RREP)"},
      {"bound_p", Type::Str, "0,1,2,3,4,5,6", "capacity grid in bits"},
      {"bound_n", Type::Str, "1,2,3,4,5,6,7,8,9,10,11,12", "dataset size grid"},
      {"bound_mode", Type::Str, "exact", "exact | monte_carlo"},
      {"bound_trials", Type::Int, "10000", "Monte Carlo trials"},
  };
  return table;
}

inline const KeySpec* find_key(std::string_view name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline std::string env_name(std::string_view key) {
  std::string out = "REPROBE_";
  for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) fail(Errc::ConfigError, "key " + key + ": cannot parse '" + value + "'");
  return out;
}

inline void check_type(const KeySpec& k, const std::string& value) {
  switch (k.type) {
    case Type::Int: parse_number<long long>(k.name, value); break;
    case Type::U64: parse_number<std::uint64_t>(k.name, value); break;
    case Type::Real: parse_number<double>(k.name, value); break;
    case Type::Str:
    case Type::Path:
      require(!value.empty(), Errc::ConfigError, "key " + k.name + " is empty");
      break;
  }
}

/// key = value lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_file(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    require(eq != std::string::npos, Errc::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    require(find_key(key) != nullptr, Errc::ConfigError, "line " + std::to_string(lineno) + ": unknown key " + key);
    require(out.emplace(key, value).second, Errc::ConfigError, "line " + std::to_string(lineno) + ": duplicate key " + key);
  }
  return out;
}

enum class Origin { Default, File, Flag, Env };

inline std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::Default: return "default";
    case Origin::File: return "file";
    case Origin::Flag: return "flag";
    case Origin::Env: return "env";
  }
  return "?";
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

class Config {
 public:
  /// Precedence: env > flag > file > default.
  static Config resolve(const std::map<std::string, std::string>& file, const std::map<std::string, std::string>& flags,
                        const EnvLookup& env) {
    Config c;
    for (const auto& k : keys()) {
      std::optional<std::string> v = k.fallback;
      Origin o = Origin::Default;
      if (auto it = file.find(k.name); it != file.end()) v = it->second, o = Origin::File;
      if (auto it = flags.find(k.name); it != flags.end()) v = it->second, o = Origin::Flag;
      if (env) {
        if (auto e = env(env_name(k.name))) v = *e, o = Origin::Env;
      }
      if (!v) continue;
      check_type(k, *v);
      c.values_[k.name] = *v;
      c.origin_[k.name] = o;
    }
    for (const auto& [name, value] : flags)
      require(find_key(name) != nullptr, Errc::ConfigError, "unknown key " + name);
    require(c.has("seed"), Errc::ConfigError, "a seed is required (--seed, config file or REPROBE_SEED)");
    return c;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    require(it != values_.end(), Errc::ConfigError, "missing required key " + key);
    return it->second;
  }
  long long integer(const std::string& key) const { return parse_number<long long>(key, str(key)); }
  std::uint64_t u64(const std::string& key) const { return parse_number<std::uint64_t>(key, str(key)); }
  double real(const std::string& key) const { return parse_number<double>(key, str(key)); }
  std::uint64_t seed() const { return u64("seed"); }

  Origin origin(const std::string& key) const { return origin_.at(key); }

  /// Resolved settings that determine results; the output directory is excluded.
  std::map<std::string, std::string> effective() const {
    auto out = values_;
    out.erase("out");
    return out;
  }

  std::string canonical(std::string_view verb) const {
    std::string s = "verb=" + std::string(verb) + "\n";
    for (const auto& [k, v] : effective()) s += k + "=" + v + "\n";
    return s;
  }

  /// First 16 hex digits of SHA-256 over the canonical settings.
  std::string hash(std::string_view verb) const {
    const auto text = canonical(verb);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    require(EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) == 1, Errc::IoError,
            "digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < 8; ++i) {
      out.push_back(hex[digest[i] >> 4]);
      out.push_back(hex[digest[i] & 15]);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, Origin> origin_;
};

}  // namespace reprobe::config
