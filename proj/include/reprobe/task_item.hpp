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

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reprobe/error.hpp"

namespace reprobe {

enum class Task { Zebra, MuseD, ExternalQA };
enum class Variant { TF, MC };
enum class Difficulty { Low, Med, High };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::Zebra: return "zebra";
    case Task::MuseD: return "mused";
    case Task::ExternalQA: return "external";
  }
  return "?";
}
inline std::string_view to_string(Variant v) { return v == Variant::TF ? "tf" : "mc"; }
inline std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Low: return "low";
    case Difficulty::Med: return "med";
    case Difficulty::High: return "high";
  }
  return "?";
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline Task parse_task(std::string_view s) {
  const auto v = lowercase(s);
  if (v == "zebra") return Task::Zebra;
  if (v == "mused") return Task::MuseD;
  if (v == "external" || v == "externalqa") return Task::ExternalQA;
  fail(Errc::InvalidArgument, "unknown task '" + std::string(s) + "'");
}
inline Variant parse_variant(std::string_view s) {
  const auto v = lowercase(s);
  if (v == "tf") return Variant::TF;
  if (v == "mc") return Variant::MC;
  fail(Errc::InvalidArgument, "unknown variant '" + std::string(s) + "'");
}
inline Difficulty parse_difficulty(std::string_view s) {
  const auto v = lowercase(s);
  if (v == "low") return Difficulty::Low;
  if (v == "med" || v == "medium") return Difficulty::Med;
  if (v == "high") return Difficulty::High;
  fail(Errc::InvalidArgument, "unknown difficulty '" + std::string(s) + "'");
}

/// One (special token, payload) pair of a probe trigger, e.g. {"START", "House 1"}.
struct ProbeField {
  std::string token;
  std::string payload;

  bool operator==(const ProbeField&) const = default;
};

/// Renders the trigger the way it appears in the composed input:
/// <|START|>House 1<|MID|>alice<|END|>
inline std::string trigger_text(const std::vector<ProbeField>& fields) {
  std::string out;
  for (const auto& f : fields) out += "<|" + f.token + "|>" + f.payload;
  return out;
}

struct TaskItem {
  std::uint64_t id = 0;
  Task task = Task::Zebra;
  std::optional<Difficulty> difficulty;
  Variant variant = Variant::TF;
  std::string prompt;  // problem description
  std::vector<ProbeField> probe_fields;
  int label = 0;
  int num_classes = 2;
  nlohmann::json meta = nlohmann::json::object();  // n, m, d, question, options, ...

  bool operator==(const TaskItem&) const = default;

  std::string question() const { return meta.value("question", std::string{}); }
};

inline void validate(const TaskItem& item) {
  require(item.num_classes >= 2, Errc::SchemaError, "num_classes must be >= 2");
  require(item.label >= 0 && item.label < item.num_classes, Errc::SchemaError,
          "label out of range for item " + std::to_string(item.id));
  require(item.variant != Variant::TF || item.num_classes == 2, Errc::SchemaError,
          "TF items must have two classes");
  require(!item.probe_fields.empty() && item.probe_fields.back().token == "END",
          Errc::SchemaError, "probe fields must end with END");
}

inline nlohmann::json to_json(const TaskItem& item) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : item.probe_fields) fields.push_back({{"token", f.token}, {"payload", f.payload}});
  return nlohmann::json{
      {"id", item.id},
      {"task", to_string(item.task)},
      {"difficulty", item.difficulty ? nlohmann::json(to_string(*item.difficulty)) : nlohmann::json(nullptr)},
      {"variant", to_string(item.variant)},
      {"prompt", item.prompt},
      {"probe_fields", fields},
      {"label", item.label},
      {"num_classes", item.num_classes},
      {"meta", item.meta},
  };
}

inline TaskItem task_item_from_json(const nlohmann::json& j) {
  try {
    TaskItem item;
    item.id = j.at("id").get<std::uint64_t>();
    item.task = parse_task(j.at("task").get<std::string>());
    if (!j.at("difficulty").is_null()) item.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
    item.variant = parse_variant(j.at("variant").get<std::string>());
    item.prompt = j.at("prompt").get<std::string>();
    for (const auto& f : j.at("probe_fields")) {
      item.probe_fields.push_back({f.at("token").get<std::string>(), f.at("payload").get<std::string>()});
    }
    item.label = j.at("label").get<int>();
    item.num_classes = j.at("num_classes").get<int>();
    item.meta = j.value("meta", nlohmann::json::object());
    validate(item);
    return item;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, std::string("malformed task item: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::SchemaError) throw;
    fail(Errc::SchemaError, e.what());
  }
}

/// JSON-lines, one item per line, LF endings; ids must be strictly increasing.
inline std::string write_task_jsonl(const std::vector<TaskItem>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(i == 0 || items[i].id > items[i - 1].id, Errc::SchemaError, "ids must be strictly increasing");
    out += to_json(items[i]).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<TaskItem> parse_task_jsonl(std::string_view text) {
  std::vector<TaskItem> items;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::SchemaError, std::string("invalid JSON line: ") + e.what());
    }
    items.push_back(task_item_from_json(j));
    require(items.size() == 1 || items.back().id > items[items.size() - 2].id, Errc::SchemaError,
            "ids must be strictly increasing");
  }
  return items;
}

}  // namespace reprobe
