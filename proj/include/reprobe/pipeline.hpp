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

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "reprobe/backbone.hpp"
#include "reprobe/binary_io.hpp"
#include "reprobe/capbound.hpp"
#include "reprobe/config.hpp"
#include "reprobe/counterfactual.hpp"
#include "reprobe/genacc.hpp"
#include "reprobe/parallel.hpp"
#include "reprobe/plot.hpp"
#include "reprobe/repr_io.hpp"
#include "reprobe/split.hpp"
#include "reprobe/stats.hpp"
#include "reprobe/vprobe.hpp"

namespace reprobe::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"gen-tasks", "probe-train",    "probe-eval", "progressive", "counterfactual",
                                             "generate",  "score",          "stats",      "bound",       "plot"};
  return v;
}

/// Collects a command's outputs, stamps provenance, and publishes them all at
/// once together with manifest.json.
class Publisher {
 public:
  Publisher(fs::path dir, std::string verb, const config::Config& cfg)
      : outputs_(std::move(dir)), verb_(std::move(verb)), hash_(cfg.hash(verb_)), seed_(cfg.seed()),
        settings_(cfg.effective()) {}

  json provenance() const { return {{"verb", verb_}, {"config_hash", hash_}, {"seed", seed_}}; }

  void add_json(const std::string& name, json j) {
    j["provenance"] = provenance();
    add_bytes(name, j.dump(2) + "\n");
  }

  void add_bytes(const std::string& name, const std::string& bytes) {
    files_[name] = {{"bytes", bytes.size()},
                    {"crc32", static_cast<std::uint32_t>(crc32(bytes))}};
    outputs_.add(name, bytes);
  }

  void commit() {
    json manifest = {{"verb", verb_}, {"config_hash", hash_}, {"seed", seed_}, {"config", settings_}, {"files", files_}};
    outputs_.add("manifest.json", manifest.dump(2) + "\n");
    outputs_.commit();
  }

 private:
  AtomicOutputs outputs_;
  std::string verb_;
  std::string hash_;
  std::uint64_t seed_;
  std::map<std::string, std::string> settings_;
  json files_ = json::object();
};

struct Context {
  const config::Config& cfg;
  Publisher& out;
  int threads = default_threads();
};

namespace detail {

inline json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
}

inline std::vector<TaskItem> tasks(const config::Config& cfg, const std::string& key) {
  auto items = parse_task_jsonl(read_file(cfg.str(key)));
  require(!items.empty(), Errc::SchemaError, cfg.str(key) + " holds no tasks");
  return items;
}

inline int num_classes(const std::vector<TaskItem>& items) {
  int s = 0;
  for (const auto& it : items) s = std::max(s, it.num_classes);
  return s;
}

inline std::vector<genacc::ResponseRecord> responses(const config::Config& cfg, const std::string& key) {
  return genacc::parse_responses_jsonl(read_file(cfg.str(key)));
}

inline Backbone<float> backbone(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.has("model")) return Backbone<float>(FrozenParams::load(cfg.str("model")));
  ModelConfig mc;
  mc.d_model = static_cast<std::uint32_t>(cfg.integer("d_model"));
  mc.n_layers = static_cast<std::uint32_t>(cfg.integer("layers"));
  mc.n_heads = static_cast<std::uint32_t>(cfg.integer("heads"));
  mc.max_seq_len = static_cast<std::uint32_t>(cfg.integer("max_seq_len"));
  mc.seed = cfg.has("model_seed") ? cfg.u64("model_seed") : cfg.seed();
  auto params = FrozenParams::random(mc);
  ctx.out.add_bytes("model.rbkb", params.serialize());
  return Backbone<float>(std::move(params));
}

inline std::size_t max_len(const Backbone<float>& bb) { return bb.params().config.max_seq_len; }

inline ProbeConfig probe_config(const config::Config& cfg, int classes) {
  ProbeConfig pc;
  pc.rank = static_cast<int>(cfg.integer("rank"));
  pc.alpha = cfg.real("alpha");
  pc.dropout = cfg.real("dropout");
  pc.lr = cfg.real("lr");
  pc.batch = static_cast<int>(cfg.integer("batch"));
  pc.epochs = static_cast<int>(cfg.integer("epochs"));
  pc.num_classes = classes;
  pc.seed = cfg.seed();
  pc.validate();
  return pc;
}

inline json eval_json(const ProbeEval& e, std::size_t dropped) {
  auto j = eval_to_json(e);
  j["dropped"] = dropped;
  std::map<int, std::size_t> counts;
  for (int l : e.labels) ++counts[l];
  std::size_t best = 0;
  for (const auto& [l, c] : counts) best = std::max(best, c);
  j["majority_baseline"] = e.labels.empty() ? 0.0 : static_cast<double>(best) / static_cast<double>(e.labels.size());
  return j;
}

inline std::vector<int> int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(static_cast<int>(config::parse_number<long long>(key, config::trim(part))));
  require(!out.empty(), Errc::ConfigError, "key " + key + " is empty");
  return out;
}

inline json linear_to_json(const LinearProbe& h) {
  json w = json::array();
  for (Eigen::Index i = 0; i < h.weights.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(h.weights.cols()));
    for (Eigen::Index k = 0; k < h.weights.cols(); ++k) row[static_cast<std::size_t>(k)] = h.weights(i, k);
    w.push_back(row);
  }
  return {{"weights", w}, {"bias", std::vector<double>(h.bias.data(), h.bias.data() + h.bias.size())}};
}

inline LinearProbe linear_from_json(const json& j) {
  try {
    LinearProbe h;
    const auto& w = j.at("weights");
    const auto bias = j.at("bias").get<std::vector<double>>();
    require(!w.empty() && !bias.empty(), Errc::SchemaError, "empty linear probe");
    h.weights = Mat<double>(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(bias.size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto row = w[i].get<std::vector<double>>();
      require(row.size() == bias.size(), Errc::SchemaError, "ragged linear probe weights");
      for (std::size_t k = 0; k < row.size(); ++k) h.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    h.bias = Eigen::Map<const Vec<double>>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    return h;
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("malformed linear probe: ") + e.what());
  }
}

inline std::map<std::uint64_t, double> p_correct_by_id(const json& eval) {
  std::map<std::uint64_t, double> out;
  try {
    for (const auto& s : eval.at("samples")) out[s.at("id").get<std::uint64_t>()] = s.at("p_correct").get<double>();
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("malformed evaluation: ") + e.what());
  }
  return out;
}

inline std::vector<stats::Sample> read_alignment(std::string_view text) {
  std::vector<stats::Sample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (config::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("id").get<std::uint64_t>(), j.at("p").get<double>(), j.at("delta").get<int>()});
    } catch (const json::exception& e) {
      fail(Errc::SchemaError, std::string("malformed alignment sample: ") + e.what());
    }
  }
  return out;
}

inline std::vector<std::string> read_pool(const fs::path& path) {
  std::vector<std::string> pool;
  std::string current;
  std::istringstream in(read_file(path));
  std::string line;
  auto flush = [&] {
    if (!current.empty()) pool.push_back(current);
    current.clear();
  };
  while (std::getline(in, line)) {
    if (config::trim(line).empty()) {
      flush();
      continue;
    }
    if (!current.empty()) current += "\n";
    current += line;
  }
  flush();
  return pool;
}

/// Problem, full response as CoT, trigger; stage is the response's line count.
inline ProbeDataset full_cot_dataset(const std::vector<TaskItem>& items, const std::map<std::uint64_t, std::string>& by_id,
                                     std::size_t max_len) {
  const auto cots = aligned_responses(items, by_id);
  ProbeDataset d;
  d.provenance = "full_cot";
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tokens t = compose_input(items[i].prompt, cots[i], items[i].probe_fields);
    if (t.size() > max_len) {
      ++d.dropped;
      continue;
    }
    d.items.push_back({items[i].id, items[i].label, static_cast<int>(split_lines(*cots[i]).size()), std::move(t)});
  }
  return d;
}

}  // namespace detail

inline json gen_tasks(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Task task = parse_task(cfg.str("task"));
  const Variant variant = parse_variant(cfg.str("variant"));
  DatasetSplit split;
  if (task == Task::ExternalQA) {
    auto records = [&](const std::string& key) {
      std::vector<QaRecord> out;
      std::istringstream in(read_file(cfg.str(key)));
      std::string line;
      while (std::getline(in, line)) {
        if (config::trim(line).empty()) continue;
        try {
          const auto j = json::parse(line);
          out.push_back({j.at("question").get<std::string>(), j.at("answer").get<std::string>(),
                         j.value("distractor", std::string{})});
        } catch (const json::exception& e) {
          fail(Errc::SchemaError, cfg.str(key) + ": " + e.what());
        }
      }
      return out;
    };
    split.train = build_external_items(records("qa_train"), variant, mix_seed(cfg.seed(), 1));
    split.test = build_external_items(records("qa_test"), variant, mix_seed(cfg.seed(), 2), split.train.size());
    split.balance_report = {{"train", reprobe::detail::balance_of(split.train)},
                            {"test", reprobe::detail::balance_of(split.test)}};
  } else {
    const auto train_size = cfg.integer("train_size"), test_size = cfg.integer("test_size");
    require(train_size >= 1 && test_size >= 1, Errc::ConfigError, "split sizes must be positive");
    split = build_split(task, parse_difficulty(cfg.str("difficulty")), variant, static_cast<std::size_t>(train_size),
                        static_cast<std::size_t>(test_size), cfg.seed());
  }
  ctx.out.add_bytes("train.jsonl", write_task_jsonl(split.train));
  ctx.out.add_bytes("test.jsonl", write_task_jsonl(split.test));
  json summary = {{"train", split.train.size()},
                  {"test", split.test.size()},
                  {"balance", split.balance_report},
                  {"majority_baseline", majority_baseline(split)}};
  ctx.out.add_json("tasks.json", summary);
  return summary;
}

inline json probe_train(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto mode = cfg.str("mode");
  if (mode == "vprobe") {
    const auto train = detail::tasks(cfg, "train");
    const auto bb = detail::backbone(ctx);
    const auto pc = detail::probe_config(cfg, detail::num_classes(train));
    const auto data = initial_dataset(train, detail::max_len(bb));
    auto result = train_vprobe(bb, data, pc, ctx.threads);
    result.report.dropped = data.dropped;
    ctx.out.add_bytes("probe.rprm", serialize_probe(result.params, pc));
    json summary = report_to_json(result.report);
    if (cfg.has("test")) {
      const auto test = initial_dataset(detail::tasks(cfg, "test"), detail::max_len(bb));
      const auto e = eval_probe(bb, result.params, test, ctx.threads);
      auto j = detail::eval_json(e, test.dropped);
      summary["test_accuracy"] = e.accuracy;
      summary["majority_baseline"] = j["majority_baseline"];
      ctx.out.add_json("eval.json", std::move(j));
    }
    ctx.out.add_json("train_report.json", summary);
    return summary;
  }
  require(mode == "linear", Errc::ConfigError, "mode must be vprobe or linear");
  std::vector<RepresentationRecord> train_r, test_r;
  int classes = 2;
  if (cfg.has("train_repr")) {
    train_r = read_representations(cfg.str("train_repr"));
    test_r = read_representations(cfg.str("test_repr"));
    for (const auto* set : {&train_r, &test_r})
      for (const auto& r : *set) classes = std::max(classes, r.label + 1);
  } else {
    const auto train = detail::tasks(cfg, "train");
    const auto test = detail::tasks(cfg, "test");
    const auto bb = detail::backbone(ctx);
    classes = std::max(detail::num_classes(train), detail::num_classes(test));
    train_r = extract_records(bb, initial_dataset(train, detail::max_len(bb)), nullptr, ctx.threads);
    test_r = extract_records(bb, initial_dataset(test, detail::max_len(bb)), nullptr, ctx.threads);
    ctx.out.add_bytes("train.rrep", encode_representations(train_r));
    ctx.out.add_bytes("test.rrep", encode_representations(test_r));
  }
  const auto pc = detail::probe_config(cfg, classes);
  const auto result = train_linear_probe(train_r, test_r, pc);
  ctx.out.add_json("linear_probe.json", detail::linear_to_json(result.probe));
  auto j = detail::eval_json(result.eval, 0);
  json summary = report_to_json(result.report);
  summary["test_accuracy"] = result.eval.accuracy;
  summary["majority_baseline"] = j["majority_baseline"];
  ctx.out.add_json("eval.json", std::move(j));
  ctx.out.add_json("train_report.json", summary);
  return summary;
}

inline json probe_eval(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  ProbeEval e;
  std::size_t dropped = 0;
  if (cfg.str("mode") == "linear") {
    const auto h = detail::linear_from_json(detail::read_json(cfg.str("probe")));
    e = eval_linear_probe(h, read_representations(cfg.str("test_repr")));
  } else {
    require(cfg.str("mode") == "vprobe", Errc::ConfigError, "mode must be vprobe or linear");
    const auto bb = detail::backbone(ctx);
    const auto [phi, pc] = deserialize_probe(read_file(cfg.str("probe")));
    const auto data = initial_dataset(detail::tasks(cfg, cfg.has("tasks") ? "tasks" : "test"), detail::max_len(bb));
    dropped = data.dropped;
    e = eval_probe(bb, phi, data, ctx.threads);
  }
  auto j = detail::eval_json(e, dropped);
  json summary = {{"accuracy", e.accuracy}, {"n", e.ids.size()}, {"majority_baseline", j["majority_baseline"]}};
  ctx.out.add_json("eval.json", std::move(j));
  return summary;
}

inline json progressive(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto train = detail::tasks(cfg, "train");
  const auto test = detail::tasks(cfg, "test");
  const auto train_cot = aligned_responses(train, genacc::responses_by_id(detail::responses(cfg, "train_responses")));
  const auto test_cot = aligned_responses(test, genacc::responses_by_id(detail::responses(cfg, "test_responses")));
  std::size_t total = 0;
  for (const auto* set : {&train_cot, &test_cot})
    for (const auto& r : *set) total = std::max(total, split_lines(*r).size());
  std::vector<int> stages;
  if (cfg.str("stages") == "all") {
    for (std::size_t j = 0; j <= total; ++j) stages.push_back(static_cast<int>(j));
  } else {
    stages = detail::int_list("stages", cfg.str("stages"));
    for (int j : stages)
      require(j >= 0 && static_cast<std::size_t>(j) <= total, Errc::ConfigError,
              "stage " + std::to_string(j) + " outside [0, " + std::to_string(total) + "]");
  }
  const auto bb = detail::backbone(ctx);
  const auto pc = detail::probe_config(cfg, detail::num_classes(train));
  const std::size_t limit = detail::max_len(bb);
  auto stage_data = [&](const std::vector<TaskItem>& items, const std::vector<std::optional<std::string>>& full, int j) {
    if (j == 0) return initial_dataset(items, limit);
    std::vector<std::optional<std::string>> cots;
    for (const auto& r : full) cots.emplace_back(cot_prefix(*r, static_cast<std::size_t>(j)));
    return compose_dataset(items, cots, j, "prefix(" + std::to_string(j) + ")", limit);
  };
  json rows = json::array();
  std::vector<double> xs, ys;
  for (int j : stages) {
    const auto tr = stage_data(train, train_cot, j);
    const auto te = stage_data(test, test_cot, j);
    const auto result = train_vprobe(bb, tr, pc, ctx.threads);
    const auto e = eval_probe(bb, result.params, te, ctx.threads);
    ctx.out.add_bytes("probe_stage_" + std::to_string(j) + ".rprm", serialize_probe(result.params, pc));
    ctx.out.add_json("eval_stage_" + std::to_string(j) + ".json", detail::eval_json(e, te.dropped));
    rows.push_back({{"stage", j},
                    {"provenance", tr.provenance},
                    {"train_n", tr.items.size()},
                    {"test_n", te.items.size()},
                    {"train_dropped", tr.dropped},
                    {"test_dropped", te.dropped},
                    {"final_train_acc", result.report.final_train_acc},
                    {"accuracy", e.accuracy}});
    xs.push_back(j);
    ys.push_back(e.accuracy);
  }
  json summary = {{"stages", rows}, {"total_stages", total}};
  if (xs.size() >= 3) {
    const auto t = stats::classify_series(xs, ys);
    summary["trend"] = {{"slope", t.fit.slope}, {"p", t.fit.p}, {"class", stats::to_string(t.trend)}, {"rs", t.rs}};
  }
  ctx.out.add_json("progressive.json", summary);
  return summary;
}

inline json counterfactual_cmd(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto test = detail::tasks(cfg, "test");
  const auto bb = detail::backbone(ctx);
  const auto [phi, pc] = deserialize_probe(read_file(cfg.str("probe")));
  const auto base = detail::full_cot_dataset(test, genacc::responses_by_id(detail::responses(cfg, "test_responses")),
                                             detail::max_len(bb));
  counterfactual::Spec spec;
  spec.kind = counterfactual::parse_kind(cfg.str("kind"));
  spec.times = static_cast<int>(cfg.integer("times"));
  spec.seed = cfg.seed();
  if (cfg.has("pool")) spec.pool = detail::read_pool(cfg.str("pool"));
  if (spec.kind == counterfactual::Kind::Swap) {
    spec.source = genacc::responses_by_id(detail::responses(cfg, "swap_responses"));
    spec.source_name = cfg.str("swap_name");
  }
  const auto cf = counterfactual::apply(base, spec, detail::max_len(bb));
  const auto e_base = eval_probe(bb, phi, base, ctx.threads);
  const auto e_cf = eval_probe(bb, phi, cf, ctx.threads);
  ctx.out.add_json("eval_base.json", detail::eval_json(e_base, base.dropped));
  ctx.out.add_json("eval_counterfactual.json", detail::eval_json(e_cf, cf.dropped));
  json summary = {{"kind", counterfactual::to_string(spec.kind)},
                  {"dataset", cf.provenance},
                  {"base", {{"accuracy", e_base.accuracy}, {"n", base.items.size()}, {"dropped", base.dropped}}},
                  {"counterfactual", {{"accuracy", e_cf.accuracy}, {"n", cf.items.size()}, {"dropped", cf.dropped}}}};
  ctx.out.add_json("counterfactual.json", summary);
  return summary;
}

inline json generate(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto items = detail::tasks(cfg, "tasks");
  const auto bb = detail::backbone(ctx);
  genacc::GenConfig gc;
  gc.temperature = cfg.real("temperature");
  gc.top_p = cfg.real("top_p");
  gc.max_new = static_cast<int>(cfg.integer("max_new_tokens"));
  gc.seed = cfg.seed();
  require(gc.temperature >= 0.0, Errc::ConfigError, "temperature must be nonnegative");
  require(gc.top_p > 0.0 && gc.top_p <= 1.0, Errc::ConfigError, "top_p must lie in (0, 1]");
  require(gc.max_new >= 1, Errc::ConfigError, "max_new_tokens must be positive");
  const auto records = genacc::run_generation(bb, items, gc, ctx.threads);
  ctx.out.add_bytes("responses.jsonl", genacc::write_responses_jsonl(records));
  std::size_t chars = 0;
  for (const auto& r : records) chars += r.response.size();
  json summary = {{"n", records.size()},
                  {"mean_chars", records.empty() ? 0.0 : static_cast<double>(chars) / static_cast<double>(records.size())},
                  {"temperature", gc.temperature},
                  {"top_p", gc.top_p},
                  {"max_new_tokens", gc.max_new}};
  ctx.out.add_json("generate.json", summary);
  return summary;
}

inline json score(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto s = genacc::score_generation(detail::responses(cfg, "responses"), detail::tasks(cfg, "tasks"));
  auto j = genacc::to_json(s);
  ctx.out.add_json("score.json", j);
  return {{"acc_gen", s.acc_gen}, {"n", s.n}, {"failures", s.failures}};
}

inline json stats_cmd(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<stats::Sample> samples;
  std::map<std::uint64_t, double> primary;
  if (cfg.has("alignment")) {
    samples = detail::read_alignment(read_file(cfg.str("alignment")));
    for (const auto& s : samples) primary[s.id] = s.p;
  } else {
    primary = detail::p_correct_by_id(detail::read_json(cfg.str("eval")));
    const auto sc = detail::read_json(cfg.str("score"));
    std::map<std::uint64_t, int> delta;
    try {
      for (const auto& d : sc.at("delta")) delta[d.at("id").get<std::uint64_t>()] = d.at("delta").get<int>();
    } catch (const json::exception& e) {
      fail(Errc::SchemaError, std::string("malformed score file: ") + e.what());
    }
    for (const auto& [id, p] : primary) {
      const auto it = delta.find(id);
      require(it != delta.end(), Errc::IdMismatch, "no generation outcome for item " + std::to_string(id));
      samples.push_back({id, p, it->second});
    }
  }
  require(!samples.empty(), Errc::SchemaError, "no alignment samples");
  auto report = stats::alignment_report(samples);
  if (cfg.has("compare")) {
    const auto other = detail::p_correct_by_id(detail::read_json(cfg.str("compare")));
    std::vector<double> a, b;
    for (const auto& [id, p] : primary) {
      const auto it = other.find(id);
      require(it != other.end(), Errc::IdMismatch, "comparison lacks item " + std::to_string(id));
      a.push_back(p);
      b.push_back(it->second);
    }
    report.rp = stats::pearson(a, b);
    report.r2 = *report.rp * *report.rp;
  }
  auto j = stats::to_json(report);
  ctx.out.add_json("stats.json", j);
  return {{"n", report.n}, {"auc", report.auc}, {"band", stats::to_string(report.mwu.band)},
          {"trend", stats::to_string(report.trend.trend)}};
}

inline json bound(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto ps = detail::int_list("bound_p", cfg.str("bound_p"));
  const auto ns = detail::int_list("bound_n", cfg.str("bound_n"));
  const auto mode_name = cfg.str("bound_mode");
  require(mode_name == "exact" || mode_name == "monte_carlo", Errc::ConfigError, "bound_mode must be exact or monte_carlo");
  const auto mode = mode_name == "exact" ? capbound::Mode::Exact : capbound::Mode::MonteCarlo;
  const int trials = static_cast<int>(cfg.integer("bound_trials"));
  json grid = json::array();
  std::string csv = "P,N,bound_raw,bound_clamped,oracle,mode,ci_halfwidth,envelope,satisfied\n";
  bool all = true;
  for (int p : ps)
    for (int n : ns) {
      const auto row = capbound::evaluate(p, n, mode, trials, cfg.seed());
      all = all && row.satisfied;
      grid.push_back(capbound::to_json(row));
      csv += std::to_string(p) + "," + std::to_string(n) + "," + plot::num(row.bound.raw) + "," +
             plot::num(row.bound.clamped) + "," + plot::num(row.oracle) + "," + mode_name + "," +
             plot::num(row.ci_half_width) + "," + plot::num(row.envelope) + "," + (row.satisfied ? "true" : "false") + "\n";
    }
  Rng rng(mix_seed(cfg.seed(), 0x50524f4f));
  std::vector<std::vector<double>> vectors(200);
  for (auto& v : vectors) {
    v.resize(1 + rng.below(64));
    for (auto& x : v) x = rng.uniform();
  }
  const auto proof = capbound::verify_proof_steps(vectors);
  json summary = {{"grid", grid},
                  {"all_satisfied", all},
                  {"proof", {{"jensen_violation", proof.jensen_violation}, {"pinsker_violation", proof.pinsker_violation}}}};
  ctx.out.add_json("bound.json", summary);
  ctx.out.add_bytes("bound.csv", csv);
  return {{"rows", grid.size()}, {"all_satisfied", all}};
}

inline json plot_cmd(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  require(cfg.has("stats") || cfg.has("representations"), Errc::ConfigError, "plot needs stats or representations");
  json summary = json::object();
  if (cfg.has("stats")) {
    const auto text = read_file(cfg.str("stats"));
    require(!config::trim(text).empty(), Errc::SchemaError, "stats input is empty");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(Errc::SchemaError, std::string("malformed stats input: ") + e.what());
    }
    require(j.is_object() && j.contains("buckets") && j["buckets"].is_array() && !j["buckets"].empty(),
            Errc::SchemaError, "stats input has no buckets");
    std::vector<plot::Bar> bars;
    std::string csv = "index,lo,hi,count,mean_delta,excluded\n";
    try {
      for (const auto& b : j["buckets"]) {
        bars.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(), b.at("mean_delta").get<double>(),
                        b.at("count").get<std::size_t>(), b.at("excluded").get<bool>()});
        csv += std::to_string(b.at("index").get<int>()) + "," + plot::num(bars.back().lo) + "," + plot::num(bars.back().hi) +
               "," + std::to_string(bars.back().count) + "," + plot::num(bars.back().value) + "," +
               (bars.back().muted ? "true" : "false") + "\n";
      }
    } catch (const json::exception& e) {
      fail(Errc::SchemaError, std::string("malformed bucket: ") + e.what());
    }
    std::string title = "Generation accuracy by probing probability";
    if (j.contains("trend") && j["trend"].contains("class")) title += " (" + j["trend"]["class"].get<std::string>() + ")";
    ctx.out.add_bytes("buckets.svg", plot::bucket_chart(bars, title));
    ctx.out.add_bytes("buckets.csv", csv);
    summary["buckets"] = bars.size();
  }
  if (cfg.has("representations")) {
    const auto records = read_representations(cfg.str("representations"));
    require(records.size() >= 2, Errc::SchemaError, "projection needs at least two representations");
    std::vector<std::vector<double>> vectors;
    for (const auto& r : records) vectors.emplace_back(r.values.begin(), r.values.end());
    const auto proj = stats::pca_project(vectors);
    std::string csv = "id,x,y,label,stage\n";
    std::vector<plot::Point> points;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const double x = proj.coords(static_cast<Eigen::Index>(i), 0), y = proj.coords(static_cast<Eigen::Index>(i), 1);
      points.push_back({x, y, records[i].label});
      csv += std::to_string(records[i].id) + "," + plot::num(x) + "," + plot::num(y) + "," +
             std::to_string(records[i].label) + "," + std::to_string(records[i].stage) + "\n";
    }
    ctx.out.add_bytes("projection.svg", plot::scatter(points, "Representations (first two principal components)"));
    ctx.out.add_bytes("projection.csv", csv);
    summary["points"] = points.size();
  }
  return summary;
}

/// Runs one verb and publishes its outputs; nothing is published on failure.
inline json run(const std::string& verb, const config::Config& cfg) {
  require(std::find(verbs().begin(), verbs().end(), verb) != verbs().end(), Errc::ConfigError, "unknown verb " + verb);
  Publisher pub(cfg.str("out"), verb, cfg);
  Context ctx{cfg, pub};
  json summary;
  if (verb == "gen-tasks") summary = gen_tasks(ctx);
  else if (verb == "probe-train") summary = probe_train(ctx);
  else if (verb == "probe-eval") summary = probe_eval(ctx);
  else if (verb == "progressive") summary = progressive(ctx);
  else if (verb == "counterfactual") summary = counterfactual_cmd(ctx);
  else if (verb == "generate") summary = generate(ctx);
  else if (verb == "score") summary = score(ctx);
  else if (verb == "stats") summary = stats_cmd(ctx);
  else if (verb == "bound") summary = bound(ctx);
  else summary = plot_cmd(ctx);
  pub.commit();
  return summary;
}

}  // namespace reprobe::pipeline
