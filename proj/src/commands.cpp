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

#include "semconf/commands.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "semconf/clients.hpp"
#include "semconf/error.hpp"
#include "semconf/report.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_effective_config(const RunConfig& config) {
  atomic_write(fs::path(config.out_dir) / "effective_config.json",
               config.to_json().dump(2) + "\n");
}

std::vector<PromptRecord> load_records(const RunConfig& config, const fs::path& path,
                                       bool require_reference) {
  LoadOptions options;
  options.level = Completeness::kPromptsOnly;
  options.require_reference = require_reference;
  options.strict = config.strict;
  LoadResult result = load_dataset(path, options);
  for (const auto& issue : result.issues) {
    spdlog::warn("{}: skipped line {}: {}", path.string(), issue.line, issue.message);
  }
  if (result.records.empty()) {
    throw ValidationError("dataset " + path.string() + " holds no usable records");
  }
  return std::move(result.records);
}

std::vector<int> labels_for(const PromptRecord& r, double tau_cos) {
  if (r.reference_embedding && !r.response_embeddings.empty()) {
    return response_labels(r, tau_cos);
  }
  if (!r.labels.empty()) return r.labels;
  throw ValidationError("record '" + r.id +
                        "' has neither a reference embedding nor labels");
}

std::string dataset_name(const RunConfig& config, const fs::path& path) {
  if (!config.dataset_name.empty()) return config.dataset_name;
  return path.empty() ? std::string("simulator") : path.stem().string();
}

MetricsReport evaluate_results(std::span<const InferenceResult> results,
                               std::span<const std::vector<int>> labels,
                               const RunConfig& config, double alpha,
                               const std::string& dataset) {
  std::vector<EvaluatedPrompt> evaluated;
  evaluated.reserve(results.size());
  for (std::size_t j = 0; j < results.size(); ++j) {
    evaluated.push_back(to_evaluated(results[j], labels[j]));
  }
  MetricsReport report = evaluate_prompts(evaluated, config.evaluation(alpha));
  report.dataset = dataset;
  report.model = config.pipeline.sampling.model_name;
  report.alpha = alpha;
  report.seed = config.seed;
  return report;
}

std::vector<MetricsReport> evaluate_split_named(std::span<const PromptRecord> calibration,
                                                std::span<const PromptRecord> test,
                                                const RunConfig& config,
                                                const std::string& dataset) {
  config.validate();
  if (test.empty()) throw ValidationError("test split is empty");
  const auto artifacts =
      calibrate(calibration, config.pipeline, config.alphas, config.workers);
  std::vector<std::vector<int>> labels;
  labels.reserve(test.size());
  for (const auto& r : test) labels.push_back(labels_for(r, config.pipeline.tau_cos));
  std::vector<MetricsReport> reports;
  for (const auto& artifact : artifacts) {
    if (artifact.abstain_all()) {
      spdlog::warn("alpha {}: no correct calibration prompt, abstaining on all",
                   artifact.alpha);
    }
    std::vector<InferenceResult> results(test.size());
    parallel_for(test.size(), config.workers, [&](std::size_t j) {
      results[j] = infer_record(test[j], artifact);
    });
    reports.push_back(evaluate_results(results, labels, config, artifact.alpha, dataset));
  }
  return reports;
}

}  // namespace

std::string alpha_tag(double alpha) { return format_number(alpha); }

std::unique_ptr<Embedder> make_embedder(const RunConfig& config) {
  const std::string& id = config.pipeline.encoder;
  const auto colon = id.find(':');
  const std::string kind = id.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : id.substr(colon + 1);
  if (kind == "hash-v1") {
    std::size_t dim = 0;
    try {
      dim = std::stoul(arg);
    } catch (const std::logic_error&) {
      throw ValidationError("encoder '" + id + "' needs a dimension, e.g. hash-v1:64");
    }
    return std::make_unique<HashEmbedder>(dim);
  }
  if (kind == "openai" && !arg.empty()) {
    Endpoint ep = config.embedding.resolve(kEmbedUrlEnv, kEmbedKeyEnv);
    if (ep.base_url.empty()) {
      throw ValidationError(std::string("encoder '") + id +
                            "' needs embedding.base_url or " + kEmbedUrlEnv);
    }
    return std::make_unique<OpenAiEmbedder>(std::move(ep), arg);
  }
  throw ValidationError("encoder '" + id +
                        "' cannot embed text (use hash-v1:<dim> or openai:<model>)");
}

bool prepare_records(std::vector<PromptRecord>& records, const RunConfig& config) {
  bool changed = false;
  std::vector<std::size_t> unsampled;
  for (std::size_t j = 0; j < records.size(); ++j) {
    if (records[j].responses.empty() && records[j].response_embeddings.empty()) {
      unsampled.push_back(j);
    }
  }
  if (!unsampled.empty()) {
    Endpoint ep = config.llm.resolve(kLlmUrlEnv, kLlmKeyEnv);
    if (ep.base_url.empty()) {
      throw ValidationError(fmt::format(
          "{} records lack responses and no LLM endpoint is configured (llm.base_url or {})",
          unsampled.size(), kLlmUrlEnv));
    }
    OpenAiCompletionClient client(std::move(ep));
    SamplingOptions options;
    options.prompt_template = config.pipeline.prompt_template;
    options.max_resample_rounds = config.max_resample_rounds;
    parallel_for(unsampled.size(), config.workers, [&](std::size_t k) {
      sample_responses(records[unsampled[k]], config.pipeline.sampling, client, options);
    });
    changed = true;
  }
  const bool need_embedding =
      std::any_of(records.begin(), records.end(), [](const PromptRecord& r) {
        return r.response_embeddings.empty() ||
               (r.reference_answer && !r.reference_embedding);
      });
  if (need_embedding) {
    auto embedder = make_embedder(config);
    std::unique_ptr<EmbeddingCache> cache;
    if (!config.cache_dir.empty()) cache = std::make_unique<EmbeddingCache>(config.cache_dir);
    embed_records(records, *embedder, cache.get());
    if (cache) {
      spdlog::info("embedding cache: {} hits, {} misses", cache->hits(), cache->misses());
    }
    changed = true;
  }
  return changed;
}

std::vector<MetricsReport> evaluate_split(std::span<const PromptRecord> calibration,
                                          std::span<const PromptRecord> test,
                                          const RunConfig& config) {
  return evaluate_split_named(calibration, test, config, dataset_name(config, {}));
}

std::vector<fs::path> cmd_calibrate(const RunConfig& config, const fs::path& dataset,
                                    std::ostream& out) {
  config.validate();
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  auto records = load_records(config, dataset, true);
  if (prepare_records(records, config)) {
    write_dataset(dir / "calibration_records.jsonl", records);
  }
  const auto artifacts =
      calibrate(records, config.pipeline, config.alphas, config.workers);
  std::vector<fs::path> paths;
  for (const auto& a : artifacts) {
    const fs::path path = dir / ("calibration_alpha_" + alpha_tag(a.alpha) + ".json");
    save_artifact(path, a);
    paths.push_back(path);
    if (a.abstain_all()) {
      spdlog::warn("alpha {}: no calibration prompt has a correct returned response; "
                   "the artifact abstains on every prompt",
                   a.alpha);
    }
    auto show = [](const Threshold& t) {
      return t ? format_number(*t) : std::string("none");
    };
    out << fmt::format(
        "alpha={} tau_hat={} q_hat={} kappa={} tau_ref={} M0={} S0={} prompts={} -> {}\n",
        format_number(a.alpha), show(a.tau_hat), show(a.q_hat), format_number(a.kappa),
        format_number(a.tau_ref), a.m0, a.s0_count, a.calibration_prompts, path.string());
  }
  return paths;
}

fs::path cmd_infer(const RunConfig& config, const fs::path& artifact_path,
                   const fs::path& prompts, std::ostream& out) {
  config.validate();
  const CalibrationArtifact artifact = load_artifact(artifact_path);
  check_compatible(artifact, config.pipeline);
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  auto records = load_records(config, prompts, false);
  if (prepare_records(records, config)) {
    write_dataset(dir / "inference_records.jsonl", records);
  }
  if (artifact.abstain_all()) {
    spdlog::warn("artifact {} abstains on every prompt", artifact_path.string());
  }
  std::vector<InferenceResult> results(records.size());
  parallel_for(records.size(), config.workers, [&](std::size_t j) {
    results[j] = infer_record(records[j], artifact);
  });
  std::string body;
  std::size_t accepted = 0;
  for (const auto& r : results) {
    body += inference_to_json(r, artifact).dump() + "\n";
    accepted += r.accepted ? 1 : 0;
    spdlog::info("fingerprint={} id={} u_hat={} decision={} set_size={}",
                 artifact.fingerprint, r.id, format_number(r.u_hat),
                 r.accepted ? "accept" : "abstain", r.prediction_set.size());
  }
  const fs::path path = dir / ("decisions_alpha_" + alpha_tag(artifact.alpha) + ".jsonl");
  atomic_write(path, body);
  out << fmt::format("alpha={} prompts={} accepted={} abstained={} -> {}\n",
                     format_number(artifact.alpha), results.size(), accepted,
                     results.size() - accepted, path.string());
  return path;
}

std::vector<MetricsReport> cmd_evaluate(const RunConfig& config, const fs::path& decisions,
                                        const fs::path& labels_path, std::ostream& out) {
  config.validate();
  std::map<double, std::vector<InferenceResult>> by_alpha;
  {
    std::istringstream in(read_file(decisions));
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json j = json::parse(line);
        by_alpha[j.at("alpha").get<double>()].push_back(inference_from_json(j));
      } catch (const json::exception& e) {
        throw ValidationError(fmt::format("{} line {}: {}", decisions.string(), number,
                                          e.what()));
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{} line {}: {}", decisions.string(), number,
                                          e.what()));
      }
    }
  }
  if (by_alpha.empty()) throw ValidationError("decisions file holds no decisions");

  const auto records = load_records(config, labels_path, false);
  std::map<std::string, std::vector<int>> labels;
  for (const auto& r : records) labels[r.id] = labels_for(r, config.pipeline.tau_cos);

  const fs::path dir(config.out_dir);
  write_effective_config(config);
  const std::string dataset = dataset_name(config, labels_path);
  std::vector<MetricsReport> reports;
  for (const auto& [alpha, results] : by_alpha) {
    std::set<std::string> seen;
    std::vector<std::vector<int>> aligned;
    for (const auto& r : results) {
      if (!seen.insert(r.id).second) {
        throw ValidationError("duplicate decision id '" + r.id + "'");
      }
      const auto it = labels.find(r.id);
      if (it == labels.end()) {
        throw ValidationError("decision id '" + r.id + "' has no labels");
      }
      aligned.push_back(it->second);
    }
    if (seen.size() != labels.size()) {
      for (const auto& [id, unused] : labels) {
        if (!seen.count(id)) {
          throw ValidationError(fmt::format("labelled id '{}' has no decision at alpha {}",
                                            id, format_number(alpha)));
        }
      }
    }
    MetricsReport report = evaluate_results(results, aligned, config, alpha, dataset);
    const std::string stem = "report_alpha_" + alpha_tag(alpha);
    atomic_write(dir / (stem + ".json"), report_to_json(report).dump(2) + "\n");
    atomic_write(dir / (stem + ".csv"), reports_csv(std::span(&report, 1)));
    auto show = [](const std::optional<double>& v) {
      return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
    };
    out << fmt::format(
        "alpha={} prompts={} auroc={} selective_risk={} acceptance={} "
        "prompt_coverage={} response_coverage={} aps={} sscv={}\n",
        format_number(alpha), report.num_prompts, show(report.auroc),
        show(report.selective_risk), show(report.acceptance_rate),
        show(report.prompt_coverage), show(report.response_coverage), show(report.aps),
        show(report.sscv));
    reports.push_back(std::move(report));
  }
  return reports;
}

CoverageSummary cmd_simulate(const RunConfig& config, std::ostream& out) {
  config.validate();
  ExperimentOptions options;
  options.trials = config.simulation.trials;
  options.m_cal = config.simulation.m_cal;
  options.m_test = config.simulation.m_test;
  options.alphas = config.alphas;
  options.weights = config.pipeline.weights;
  options.gamma = config.pipeline.gamma;
  options.workers = config.workers;
  if (config.simulation.test_world) {
    WorldSpec shifted = *config.simulation.test_world;
    const WorldSpec base = config.world();
    shifted.n = base.n;
    shifted.epsilon = base.epsilon;
    shifted.tau_cos = base.tau_cos;
    shifted.alpha = base.alpha;
    options.test_world = shifted;
  }
  const CoverageSummary summary = run_coverage_experiment(config.world(), options);
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  atomic_write(dir / "coverage_summary.json", summary.to_json().dump(2) + "\n");
  atomic_write(dir / "coverage_trials.csv", summary.rows_csv());
  for (const auto& s : summary.per_alpha) {
    out << fmt::format(
        "alpha={} P-Cov={:.4f} ({}) R-Cov={:.4f} ({}) risk={:.4f} ({}) "
        "acceptance={:.4f} APS={:.3f} nesting_violations={}\n",
        format_number(s.alpha), s.prompt_coverage.value().value_or(0.0),
        s.prompt_coverage_ok() ? "ok" : "FAIL", s.response_coverage.value().value_or(0.0),
        s.response_coverage_ok() ? "ok" : "FAIL", s.selective_error.value().value_or(0.0),
        s.selective_risk_ok() ? "ok" : "FAIL", s.acceptance.value().value_or(0.0),
        s.mean_aps, s.nesting_violations);
  }
  return summary;
}

void cmd_generate_world(const RunConfig& config, std::ostream& out) {
  config.validate();
  const World world =
      generate_world(config.world(), config.simulation.m_cal, config.simulation.m_test);
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  write_dataset(dir / "calibration.jsonl", world.calibration);
  write_dataset(dir / "test.jsonl", world.test);
  out << fmt::format("calibration={} test={} -> {}\n", world.calibration.size(),
                     world.test.size(), dir.string());
}

void cmd_split(const RunConfig& config, const fs::path& dataset, std::ostream& out) {
  config.validate();
  const auto records = load_records(config, dataset, false);
  const auto [cal, test] = split_records(records, config.split_fraction, config.split_seed);
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  write_dataset(dir / "calibration.jsonl", cal);
  write_dataset(dir / "test.jsonl", test);
  out << fmt::format("calibration={} test={} -> {}\n", cal.size(), test.size(),
                     dir.string());
}

fs::path cmd_prepare(const RunConfig& config, const fs::path& dataset, std::ostream& out) {
  config.validate();
  auto records = load_records(config, dataset, false);
  prepare_records(records, config);
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  const fs::path path = dir / "prepared.jsonl";
  write_dataset(path, records);
  out << fmt::format("records={} -> {}\n", records.size(), path.string());
  return path;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "epsilon") return SweepAxis::kEpsilon;
  if (name == "n") return SweepAxis::kN;
  if (name == "weights") return SweepAxis::kWeights;
  if (name == "alpha") return SweepAxis::kAlpha;
  if (name == "tau_cos") return SweepAxis::kTauCos;
  throw ValidationError("unknown sweep axis '" + name +
                        "' (expected epsilon, n, weights, alpha or tau_cos)");
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kEpsilon: return "epsilon";
    case SweepAxis::kN: return "n";
    case SweepAxis::kWeights: return "weights";
    case SweepAxis::kAlpha: return "alpha";
    case SweepAxis::kTauCos: return "tau_cos";
  }
  return "unknown";
}

namespace {

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ValidationError("invalid " + what + " value '" + text + "'");
}

}  // namespace

RunConfig apply_sweep_value(const RunConfig& config, SweepAxis axis,
                            const std::string& value) {
  RunConfig c = config;
  switch (axis) {
    case SweepAxis::kEpsilon:
      c.pipeline.epsilon = parse_double(value, "epsilon");
      break;
    case SweepAxis::kN: {
      const double n = parse_double(value, "n");
      if (n < 2 || n != static_cast<double>(static_cast<std::size_t>(n))) {
        throw ValidationError("invalid n value '" + value + "'");
      }
      c.pipeline.sampling.n = static_cast<std::size_t>(n);
      break;
    }
    case SweepAxis::kWeights:
      c.pipeline.weights = parse_weights(value, &c.weights_name);
      break;
    case SweepAxis::kAlpha:
      c.alphas = {parse_double(value, "alpha")};
      break;
    case SweepAxis::kTauCos:
      c.pipeline.tau_cos = parse_double(value, "tau_cos");
      break;
  }
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("sweep {}={}: {}", sweep_axis_name(axis), value,
                                      e.what()));
  }
  return c;
}

fs::path cmd_sweep(const RunConfig& config, SweepAxis axis,
                   const std::vector<std::string>& values, const fs::path& dataset,
                   std::ostream& out) {
  config.validate();
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (const auto& v : values) configs.push_back(apply_sweep_value(config, axis, v));

  std::vector<PromptRecord> cal;
  std::vector<PromptRecord> test;
  if (!dataset.empty()) {
    auto records = load_records(config, dataset, true);
    prepare_records(records, config);
    std::tie(cal, test) = split_records(records, config.split_fraction, config.split_seed);
  }
  const std::string name = dataset_name(config, dataset);
  std::vector<std::string> header{"axis", "value"};
  for (auto& col : report_columns()) header.push_back(std::move(col));
  std::string csv = csv_line(header) + "\n";
  json stacked = json::array();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const RunConfig& c = configs[k];
    std::vector<MetricsReport> reports;
    if (dataset.empty()) {
      const World world =
          generate_world(c.world(), c.simulation.m_cal, c.simulation.m_test);
      reports = evaluate_split_named(world.calibration, world.test, c, name);
    } else if (axis == SweepAxis::kN) {
      std::vector<PromptRecord> cal_n;
      std::vector<PromptRecord> test_n;
      for (const auto& r : cal) cal_n.push_back(truncate_responses(r, c.pipeline.sampling.n));
      for (const auto& r : test) test_n.push_back(truncate_responses(r, c.pipeline.sampling.n));
      reports = evaluate_split_named(cal_n, test_n, c, name);
    } else {
      reports = evaluate_split_named(cal, test, c, name);
    }
    for (const auto& r : reports) {
      std::vector<std::string> cells{sweep_axis_name(axis), values[k]};
      for (auto& cell : report_cells(r)) cells.push_back(std::move(cell));
      csv += csv_line(cells) + "\n";
      json j = report_to_json(r);
      j["axis"] = sweep_axis_name(axis);
      j["value"] = values[k];
      stacked.push_back(std::move(j));
      out << fmt::format("{}={} alpha={} auroc={} selective_risk={}\n", sweep_axis_name(axis),
                         values[k], format_number(r.alpha),
                         r.auroc ? fmt::format("{:.4f}", *r.auroc) : "n/a",
                         r.selective_risk ? fmt::format("{:.4f}", *r.selective_risk) : "n/a");
    }
  }
  const fs::path dir(config.out_dir);
  write_effective_config(config);
  const fs::path path = dir / ("sweep_" + sweep_axis_name(axis) + ".csv");
  atomic_write(path, csv);
  atomic_write(dir / ("sweep_" + sweep_axis_name(axis) + ".json"), stacked.dump(2) + "\n");
  return path;
}

}  // namespace semconf
