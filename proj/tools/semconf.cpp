/*
 * Copyright 2026 The semconf Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// semconf: calibrate, infer, evaluate, simulate and sweep from one config.

#include <cstdlib>
#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "semconf/commands.hpp"
#include "semconf/config.hpp"
#include "semconf/error.hpp"
#include "semconf/stub_server.hpp"
#include "semconf/util.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct GlobalFlags {
  std::string config_path;
  std::vector<double> alphas;
  std::string out_dir;
  std::optional<std::size_t> workers;
  std::optional<bool> strict;
  std::vector<std::string> overrides;
  std::string log_level = "info";
};

// key.path=value, value parsed as JSON and falling back to a plain string.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw semconf::ValidationError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

semconf::RunConfig resolve_config(const GlobalFlags& flags) {
  json doc = json::object();
  if (!flags.config_path.empty()) {
    try {
      doc = json::parse(semconf::read_file(flags.config_path));
    } catch (const json::parse_error& e) {
      throw semconf::ValidationError("config " + flags.config_path +
                                     " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : flags.overrides) apply_override(doc, o);
  semconf::RunConfig config = semconf::RunConfig::from_json(doc);
  if (!flags.alphas.empty()) config.alphas = flags.alphas;
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  if (flags.workers) config.workers = *flags.workers;
  if (flags.strict) config.strict = *flags.strict;
  config.validate();
  return config;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_logger_mt("semconf");
  logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    throw semconf::ValidationError("unknown log level '" + level + "'");
  }
  spdlog::set_level(lvl);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal semantic-uncertainty gating for sampled LLM responses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "semconf 0.1.0");

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "JSON run configuration");
  app.add_option("--alpha", flags.alphas, "Risk level(s); overrides 'alphas'");
  app.add_option("--out-dir", flags.out_dir, "Output directory; overrides 'out_dir'");
  app.add_option("--workers", flags.workers, "Worker threads; overrides 'workers'");
  app.add_flag("--strict,!--lenient", flags.strict,
               "Fail on the first malformed record (default) or skip it");
  app.add_option("--set", flags.overrides, "Override any config key: key.path=value");
  app.add_option("--log-level", flags.log_level, "trace|debug|info|warn|error|off");

  std::string dataset, artifact, prompts, decisions, labels, axis, sweep_dataset;
  std::vector<std::string> values;
  int port = 8089;

  auto* calibrate = app.add_subcommand("calibrate", "Fit thresholds on a calibration set");
  calibrate->add_option("dataset", dataset, "Calibration dataset (JSONL)")->required();

  auto* infer = app.add_subcommand("infer", "Accept or abstain on new prompts");
  infer->add_option("artifact", artifact, "Calibration artifact (JSON)")->required();
  infer->add_option("prompts", prompts, "Prompt dataset (JSONL)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Metric reports for a decisions file");
  evaluate->add_option("decisions", decisions, "Decisions (JSONL)")->required();
  evaluate->add_option("labels", labels, "Labelled dataset (JSONL)")->required();

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coverage experiment");

  auto* generate = app.add_subcommand("generate-world", "Write a synthetic calibration/test world");

  auto* split = app.add_subcommand("split", "Deterministic calibration/test split");
  split->add_option("dataset", dataset, "Dataset (JSONL)")->required();

  auto* prepare = app.add_subcommand("prepare", "Sample and embed missing responses");
  prepare->add_option("dataset", dataset, "Dataset (JSONL)")->required();

  auto* sweep = app.add_subcommand("sweep", "Evaluate across values of one setting");
  sweep->add_option("axis", axis, "epsilon | n | weights | alpha | tau_cos")->required();
  sweep->add_option("values", values, "Values to try")->required();
  sweep->add_option("--dataset", sweep_dataset,
                    "Dataset to split; a simulator world is used when omitted");

  auto* stub = app.add_subcommand("stub-serve", "Serve canned completion/embedding endpoints");
  stub->add_option("--port", port, "Port on 127.0.0.1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    setup_logging(flags.log_level);
    if (stub->parsed()) {
      semconf::StubServer server;
      server.start(port);
      std::cout << server.base_url() << std::endl;
      server.wait();
      return kExitOk;
    }
    const semconf::RunConfig config = resolve_config(flags);
    if (calibrate->parsed()) {
      semconf::cmd_calibrate(config, dataset, std::cout);
    } else if (infer->parsed()) {
      semconf::cmd_infer(config, artifact, prompts, std::cout);
    } else if (evaluate->parsed()) {
      semconf::cmd_evaluate(config, decisions, labels, std::cout);
    } else if (simulate->parsed()) {
      semconf::cmd_simulate(config, std::cout);
    } else if (generate->parsed()) {
      semconf::cmd_generate_world(config, std::cout);
    } else if (split->parsed()) {
      semconf::cmd_split(config, dataset, std::cout);
    } else if (prepare->parsed()) {
      semconf::cmd_prepare(config, dataset, std::cout);
    } else if (sweep->parsed()) {
      semconf::cmd_sweep(config, semconf::parse_sweep_axis(axis), values, sweep_dataset,
                         std::cout);
    }
  } catch (const semconf::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const semconf::RuntimeFailure& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
