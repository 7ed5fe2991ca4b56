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


#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "reprobe/pipeline.hpp"

namespace {

using reprobe::Errc;
using reprobe::config::Config;

int report_error(std::string_view code, std::string_view message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
  return 2;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("reprobe");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");
  const char* env = std::getenv("REPROBE_LOG");
  const std::string level = env ? env : "info";
  if (level == "off") spdlog::set_level(spdlog::level::off);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else reprobe::fail(Errc::ConfigError, "REPROBE_LOG must be off, info or debug");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representation probing toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Describe every verb");

  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;

  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  const std::vector<Flag> common = {{"--seed", "seed", "Master seed"}, {"--out", "out", "Output directory"}};
  const std::map<std::string, std::vector<Flag>> per_verb = {
      {"gen-tasks", {{"--task", "task", "zebra | mused | external"}, {"--difficulty", "difficulty", "low | med | high"},
                     {"--variant", "variant", "tf | mc"}}},
      {"probe-train", {{"--mode", "mode", "vprobe | linear"}, {"--epochs", "epochs", "Training epochs"}}},
      {"probe-eval", {{"--mode", "mode", "vprobe | linear"}}},
      {"progressive", {{"--epochs", "epochs", "Training epochs per stage"}}},
      {"counterfactual", {{"--kind", "kind", "dots | repeat | irrelevant | swap"}}},
      {"generate", {{"--temperature", "temperature", "Sampling temperature"}, {"--top-p", "top_p", "Nucleus mass"}}},
      {"score", {}},
      {"stats", {}},
      {"bound", {}},
      {"plot", {}},
  };

  const std::map<std::string, std::string> about = {
      {"gen-tasks", "Generate train and test task splits"},
      {"probe-train", "Train a probe on frozen backbone representations"},
      {"probe-eval", "Evaluate a trained probe on the test split"},
      {"progressive", "Train and evaluate one probe per CoT stage"},
      {"counterfactual", "Evaluate a probe on counterfactual CoT contexts"},
      {"generate", "Sample responses from the backbone"},
      {"score", "Extract answers from responses and score them"},
      {"stats", "Bucket probe confidence against generation correctness"},
      {"bound", "Check the capacity bound over a (P, N) grid"},
      {"plot", "Render bucket and projection charts"},
  };

  std::map<std::string, std::string> raw;
  for (const auto& verb : reprobe::pipeline::verbs()) {
    auto* sub = app.add_subcommand(verb, about.at(verb));
    sub->add_option("--config", config_path, "Flat key = value configuration file");
    sub->add_option("--set", sets, "Override any configuration key (key=value), repeatable");
    for (const auto& f : common) sub->add_option(f.name, raw[f.key], f.help);
    for (const auto& f : per_verb.at(verb)) sub->add_option(f.name, raw[f.key], f.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("ConfigError", e.what());
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    setup_logging();
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      reprobe::require(eq != std::string::npos, Errc::ConfigError, "--set expects key=value, got " + s);
      flags[reprobe::config::trim(s.substr(0, eq))] = reprobe::config::trim(s.substr(eq + 1));
    }
    auto* sub = app.get_subcommands().front();
    for (const auto& [key, value] : raw) {
      for (const auto* opt : sub->get_options())
        if (opt->get_name() == "--" + std::string(key == "top_p" ? "top-p" : key) && opt->count() > 0) flags[key] = value;
    }
    std::map<std::string, std::string> file;
    if (!config_path.empty()) file = reprobe::config::parse_file(reprobe::read_file(config_path));
    const auto cfg = Config::resolve(file, flags, reprobe::config::process_env());
    spdlog::info("{} config_hash={} seed={} threads={}", verb, cfg.hash(verb), cfg.seed(), reprobe::default_threads());
    const auto summary = reprobe::pipeline::run(verb, cfg);
    spdlog::info("{} done", verb);
    std::cout << summary.dump(2) << std::endl;
    return 0;
  } catch (const reprobe::Error& e) {
    const std::string what = e.what();
    const auto name = reprobe::to_string(e.code());
    return report_error(name, what.substr(std::min(what.size(), name.size() + 2)));
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what());
  }
}
