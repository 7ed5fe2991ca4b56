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
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reprobe/external_qa.hpp"
#include "reprobe/mused.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/task_item.hpp"
#include "reprobe/zebra.hpp"

namespace reprobe {

struct DatasetSplit {
  std::vector<TaskItem> train;
  std::vector<TaskItem> test;
  nlohmann::json balance_report;
};

/// (houses, attributes) combinations per difficulty, visited round-robin.
inline std::vector<std::pair<int, int>> zebra_combos(Difficulty d) {
  int lo = 2;
  if (d == Difficulty::Med) lo = 3;
  if (d == Difficulty::High) lo = 4;
  return {{lo, lo}, {lo, lo + 1}, {lo + 1, lo}, {lo + 1, lo + 1}};
}

inline std::map<int, std::size_t> label_counts(const std::vector<TaskItem>& items) {
  std::map<int, std::size_t> counts;
  for (const auto& it : items) ++counts[it.label];
  return counts;
}

namespace detail {

// Test instances come from a disjoint index range so the two pools never
// share an instance seed.
inline constexpr std::uint64_t kTestIndexBase = 1ull << 40;

/// Items contributed by instance `k` of a split; TF yields a (true, false) pair.
inline std::vector<TaskItem> instance_items(Task task, Difficulty difficulty, Variant variant,
                                            std::uint64_t split_seed, std::uint64_t k,
                                            std::uint64_t index_base) {
  const std::uint64_t seed = mix_seed(split_seed, index_base + k);
  Rng rng(mix_seed(seed, 0x5e1ec7));
  std::vector<TaskItem> out;
  if (task == Task::Zebra) {
    const auto combos = zebra_combos(difficulty);
    const auto [n, m] = combos[k % combos.size()];
    const auto puzzle = zebra::generate(n, m, seed);
    auto items = zebra::to_items(puzzle, variant, mix_seed(seed, 1));
    if (variant == Variant::TF) {
      const std::size_t house = rng.below(static_cast<std::uint64_t>(n));
      out = {items[2 * house], items[2 * house + 1]};
    } else {
      out = std::move(items);
    }
  } else if (task == Task::MuseD) {
    const int depth = mused::kMinDepth + static_cast<int>(rng.below(mused::kMaxDepth - mused::kMinDepth + 1));
    const auto type = static_cast<mused::PropType>(k % 4);
    const auto chain = mused::generate(depth, difficulty, seed, type);
    out = mused::to_items(chain, variant, mix_seed(seed, 1));
  } else {
    fail(Errc::InvalidArgument, "external QA splits are built from supplied records");
  }
  for (auto& it : out) {
    it.difficulty = difficulty;
    it.meta["difficulty"] = std::string(to_string(difficulty));
  }
  return out;
}

inline nlohmann::json balance_of(const std::vector<TaskItem>& items) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [label, count] : label_counts(items)) labels[std::to_string(label)] = count;
  std::map<std::string, std::size_t> groups;
  for (const auto& it : items) {
    if (it.task == Task::Zebra) {
      ++groups[std::to_string(it.meta.at("n").get<int>()) + "x" + std::to_string(it.meta.at("m").get<int>())];
    } else if (it.task == Task::MuseD) {
      ++groups[it.meta.at("conclusion_type").get<std::string>()];
    }
  }
  return {{"labels", labels}, {"groups", groups}, {"size", items.size()}};
}

}  // namespace detail

/// Train/test split of freshly generated instances. Zebra cycles its four
/// (n, m) combinations; MuseD cycles the four conclusion types and draws the
/// depth uniformly from [3, 25]. Ids run consecutively across train then test.
inline DatasetSplit build_split(Task task, Difficulty difficulty, Variant variant, std::size_t train_size,
                                std::size_t test_size, std::uint64_t seed) {
  require(train_size >= 1 && test_size >= 1, Errc::InvalidArgument, "split sizes must be >= 1");
  DatasetSplit split;
  std::uint64_t next_id = 0;
  auto fill = [&](std::vector<TaskItem>& dst, std::size_t size, std::uint64_t base) {
    for (std::uint64_t k = 0; dst.size() < size; ++k) {
      for (auto& it : detail::instance_items(task, difficulty, variant, seed, k, base)) {
        if (dst.size() == size) break;
        it.id = next_id++;
        dst.push_back(std::move(it));
      }
    }
  };
  fill(split.train, train_size, 0);
  fill(split.test, test_size, detail::kTestIndexBase);
  split.balance_report = {{"train", detail::balance_of(split.train)}, {"test", detail::balance_of(split.test)}};
  return split;
}

/// One record of an external question-answer source. An empty distractor is
/// filled in with perturb_numeric.
struct QaRecord {
  std::string question;
  std::string answer;
  std::string distractor;
};

inline std::vector<TaskItem> build_external_items(const std::vector<QaRecord>& records, Variant variant,
                                                  std::uint64_t seed, std::uint64_t first_id = 0) {
  std::vector<TaskItem> out;
  std::uint64_t id = first_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::uint64_t s = mix_seed(seed, i);
    const std::string distractor = r.distractor.empty() ? external::perturb_numeric(r.answer, s) : r.distractor;
    for (auto& it : external::wrap_external_qa(r.question, r.answer, distractor, variant, s)) {
      it.id = id++;
      out.push_back(std::move(it));
    }
  }
  return out;
}

/// Accuracy of always predicting the most frequent test label.
inline double majority_baseline(const DatasetSplit& split) {
  require(!split.test.empty(), Errc::EmptyDataset, "test split is empty");
  std::size_t best = 0;
  for (const auto& [label, count] : label_counts(split.test)) best = std::max(best, count);
  return static_cast<double>(best) / static_cast<double>(split.test.size());
}

}  // namespace reprobe
