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


#include <fstream>
#include <random>

#include "gtest/gtest.h"
#include "reprobe/binary_io.hpp"
#include "reprobe/genacc.hpp"

namespace reprobe {
namespace {

using namespace genacc;

// Stack matcher over the whole string: every '{' is pushed with a flag saying
// whether it opened a \boxed group; the answer is the boxed group with the
// latest opening position among those that close.
std::optional<std::string> stack_oracle(const std::string& s) {
  std::vector<std::pair<bool, std::size_t>> stack;
  std::optional<std::pair<std::size_t, std::string>> best;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') {
      const bool boxed = i >= 6 && s.compare(i - 6, 6, "\\boxed") == 0;
      stack.emplace_back(boxed, i + 1);
    } else if (s[i] == '}' && !stack.empty()) {
      const auto [boxed, start] = stack.back();
      stack.pop_back();
      if (boxed && (!best || start > best->first)) best = std::make_pair(start, s.substr(start, i - start));
    }
  }
  if (!best) return std::nullopt;
  return best->second;
}

TEST(Boxed, Basics) {
  EXPECT_EQ(last_boxed("x \\boxed{2^{3}} y"), "2^{3}");
  EXPECT_EQ(last_boxed("\\boxed{a} then \\boxed{b}"), "b");
  EXPECT_EQ(last_boxed("\\boxed{a} then \\boxed{b"), "a");
  EXPECT_EQ(last_boxed("nothing here"), std::nullopt);
  EXPECT_EQ(last_boxed("\\boxed{}"), "");
}

TEST(Boxed, AgreesWithStackOracle) {
  std::mt19937_64 gen(42);
  const std::vector<std::string> pieces = {"{", "}", "\\boxed{", "a", "1", " ", "\\boxed", "x{", "}}"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const int len = static_cast<int>(gen() % 25);
    for (int i = 0; i < len; ++i) s += pieces[gen() % pieces.size()];
    EXPECT_EQ(last_boxed(s), stack_oracle(s)) << s;
  }
}

TEST(Extract, TrueFalseSynonyms) {
  for (const char* t : {"True", "yes", "1", "CORRECT", "\\text{true}", "$yes$", "true."})
    EXPECT_EQ(extract_answer(std::string("\\boxed{") + t + "}", Variant::TF, 2), 1) << t;
  for (const char* f : {"false", "No", "0", "incorrect"})
    EXPECT_EQ(extract_answer(std::string("\\boxed{") + f + "}", Variant::TF, 2), 0) << f;
  EXPECT_EQ(extract_answer("\\boxed{maybe}", Variant::TF, 2), std::nullopt);
  EXPECT_EQ(extract_answer("no box", Variant::TF, 2), std::nullopt);
}

TEST(Extract, MultipleChoiceForms) {
  const std::vector<std::string> opts = {"Type 1", "Type 2", "Type 3", "Type 4"};
  EXPECT_EQ(extract_answer("\\boxed{C}", Variant::MC, 4, opts), 2);
  EXPECT_EQ(extract_answer("\\boxed{(d)}", Variant::MC, 4, opts), 3);
  EXPECT_EQ(extract_answer("\\boxed{Type 2}", Variant::MC, 4, opts), 1);
  EXPECT_EQ(extract_answer("\\boxed{Option 1}", Variant::MC, 4), 0);
  EXPECT_EQ(extract_answer("\\boxed{4}", Variant::MC, 4, opts), 3);
  EXPECT_EQ(extract_answer("\\boxed{5}", Variant::MC, 4, opts), std::nullopt);
  EXPECT_EQ(extract_answer("\\boxed{E}", Variant::MC, 4, opts), std::nullopt);
  const std::vector<std::string> numeric = {"13", "12"};
  EXPECT_EQ(extract_answer("\\boxed{12}", Variant::MC, 2, numeric), 1);
  EXPECT_EQ(extract_answer("\\boxed{24/2}", Variant::MC, 2, numeric), 1);
}

TEST(Extract, TotalOnArbitraryText) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const int len = static_cast<int>(gen() % 60);
    for (int i = 0; i < len; ++i) s.push_back(static_cast<char>(gen() % 256));
    if (trial % 3 == 0) s += "\\boxed{" + s;
    EXPECT_NO_THROW(extract_answer(s, Variant::MC, 4, {"1", "x", "", "{"}));
    EXPECT_NO_THROW(extract_answer(s, Variant::TF, 2));
  }
}

TEST(Extract, StableUnderUnrelatedPrefix) {
  const std::string tail = "so \\boxed{False}";
  for (const std::string prefix : {"", "lorem ipsum ", "{{{ ", "}} ", "text \\boxed{true} more "}) {
    EXPECT_EQ(extract_answer(prefix + tail, Variant::TF, 2), 0) << prefix;
  }
}

std::vector<TaskItem> fixture_items(const nlohmann::json& j) {
  std::vector<TaskItem> items;
  for (const auto& e : j) {
    TaskItem t;
    t.id = e.at("id").get<std::uint64_t>();
    t.variant = parse_variant(e.at("variant").get<std::string>());
    t.num_classes = e.at("num_classes").get<int>();
    t.label = e.at("label").get<int>();
    if (!e.at("options").empty()) t.meta["options"] = e.at("options");
    items.push_back(t);
  }
  return items;
}

TEST(Score, HandLabeledFixture) {
  const auto j = nlohmann::json::parse(read_file(std::string(REPROBE_FIXTURE_DIR) + "/hand_labeled_responses.json"));
  const auto items = fixture_items(j);
  std::vector<ResponseRecord> records;
  std::size_t expect_correct = 0, expect_failures = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    records.push_back({items[i].id, j[i].at("response").get<std::string>(), "fixture", 0.0, 1.0, 0});
    const auto& want = j[i].at("expect_label");
    const auto got = extract_answer(records.back().response, items[i]);
    if (want.is_null()) {
      EXPECT_EQ(got, std::nullopt) << items[i].id;
      ++expect_failures;
    } else {
      EXPECT_EQ(got, want.get<int>()) << items[i].id;
    }
    expect_correct += j[i].at("expect_delta").get<std::size_t>();
  }
  const auto score = score_generation(records, items);
  EXPECT_EQ(score.n, 10u);
  EXPECT_EQ(score.failures, expect_failures);
  EXPECT_DOUBLE_EQ(score.acc_gen, expect_correct / 10.0);
  EXPECT_DOUBLE_EQ(score.acc_gen, 0.6);
  double from_delta = 0;
  for (std::size_t i = 0; i < score.delta.size(); ++i) {
    EXPECT_EQ(score.delta[i].second, j[i].at("expect_delta").get<int>());
    from_delta += score.delta[i].second;
  }
  EXPECT_DOUBLE_EQ(from_delta / score.n, score.acc_gen);
}

TEST(Score, AllCorrectAndAllEmpty) {
  std::vector<TaskItem> items;
  std::vector<ResponseRecord> good, empty;
  for (std::uint64_t id = 1; id <= 6; ++id) {
    TaskItem t;
    t.id = id;
    t.label = static_cast<int>(id % 2);
    items.push_back(t);
    good.push_back({id, t.label ? "\\boxed{true}" : "\\boxed{false}"});
    empty.push_back({id, ""});
  }
  EXPECT_EQ(score_generation(good, items).acc_gen, 1.0);
  const auto s = score_generation(empty, items);
  EXPECT_EQ(s.acc_gen, 0.0);
  EXPECT_EQ(s.failures, 6u);
  good.pop_back();
  try {
    score_generation(good, items);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IdMismatch);
  }
}

TEST(Responses, JsonlRoundTrip) {
  std::vector<ResponseRecord> rs = {{1, "line one\nline \"two\" \\boxed{x}", "toy", 0.6, 0.95, 128},
                                    {5, "", "model-b", 0.0, 1.0, 0}};
  const auto text = write_responses_jsonl(rs);
  EXPECT_EQ(parse_responses_jsonl(text), rs);
  const auto j = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (const char* key : {"id", "response", "source", "temperature", "top_p", "max_tokens"}) EXPECT_TRUE(j.contains(key));
  EXPECT_THROW(parse_responses_jsonl("{not json}\n"), Error);
  EXPECT_THROW(parse_responses_jsonl("{\"response\": \"x\"}\n"), Error);
}

TEST(Generation, DeterministicBoundedAndLossless) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.max_seq_len = 96;
  c.seed = 3;
  Backbone<float> bb(FrozenParams::random(c));
  std::vector<TaskItem> items;
  for (std::uint64_t id = 1; id <= 3; ++id) {
    TaskItem t;
    t.id = id;
    t.prompt = "Problem " + std::to_string(id);
    t.meta["question"] = "Is it true?";
    items.push_back(t);
  }
  GenConfig g;
  g.temperature = 0.0;
  g.max_new = 20;
  const auto a = run_generation(bb, items, g, 1);
  const auto b = run_generation(bb, items, g, 2);
  EXPECT_EQ(a, b);
  g.temperature = 0.8;
  g.top_p = 0.9;
  g.seed = 4;
  const auto sampled = run_generation(bb, items, g);
  for (const auto& r : sampled) {
    EXPECT_LE(r.response.size(), 20u);
    for (char ch : r.response) EXPECT_TRUE(ch == '\n' || (ch >= 32 && ch < 127));
  }
  EXPECT_EQ(parse_responses_jsonl(write_responses_jsonl(sampled)), sampled);
  EXPECT_EQ(generation_prompt(items[0]).front(), id_of(Special::Bos));
}

}  // namespace
}  // namespace reprobe
