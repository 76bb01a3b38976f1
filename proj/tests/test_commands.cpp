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

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "doctest.h"
#include "fixtures.hpp"
#include "semconf/commands.hpp"
#include "semconf/config.hpp"
#include "semconf/error.hpp"
#include "semconf/report.hpp"
#include "semconf/simulator.hpp"
#include "semconf/util.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using semconf::RunConfig;

namespace {

// Routes the default logger into a string for the lifetime of the object.
class LogCapture {
 public:
  LogCapture() : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(stream_);
    spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink));
  }
  ~LogCapture() { spdlog::set_default_logger(previous_); }
  std::string text() const { return stream_.str(); }

 private:
  std::ostringstream stream_;
  std::shared_ptr<spdlog::logger> previous_;
};

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.out_dir = out.string();
  c.simulation.m_cal = 120;
  c.simulation.m_test = 60;
  c.simulation.trials = 2;
  c.simulation.world.seed = 3;
  c.pipeline = semconf::simulator_pipeline(c.world());
  return c;
}

}  // namespace

TEST_CASE("run config defaults") {
  const RunConfig c;
  CHECK(c.pipeline.sampling.n == 10);
  CHECK(c.pipeline.sampling.nucleus_eta == 0.9);
  CHECK(c.pipeline.sampling.temperature == 0.3);
  CHECK(c.pipeline.epsilon == 0.35);
  CHECK(c.pipeline.gamma == 0.75);
  CHECK(c.pipeline.weights == semconf::FeatureWeights::uniform());
  CHECK(c.split_fraction == 0.6);
  CHECK(c.strata == semconf::default_strata());
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("run config parses flat keys and rejects unknown ones") {
  const json j = {{"n", 7},
                  {"epsilon", 0.2},
                  {"weights", "margin"},
                  {"alphas", {0.05, 0.1}},
                  {"strata", {{1, 3}, {4, 7}}},
                  {"split", {{"fraction", 0.5}, {"seed", 9}}},
                  {"simulation", {{"world", {{"k_true", 2}, {"concentration", "inf"}}},
                                  {"trials", 4}}}};
  const auto c = RunConfig::from_json(j);
  CHECK(c.pipeline.sampling.n == 7);
  CHECK(c.pipeline.epsilon == 0.2);
  CHECK(c.pipeline.weights == semconf::FeatureWeights::margin());
  CHECK(c.alphas == std::vector<double>{0.05, 0.1});
  CHECK(c.strata.size() == 2);
  CHECK(c.split_seed == 9);
  CHECK(c.simulation.trials == 4);
  CHECK(c.world().n == 7);
  CHECK(c.world().epsilon == 0.2);
  CHECK(c.world().k_true == 2);

  CHECK_THROWS_AS(RunConfig::from_json({{"epsilonn", 0.2}}), semconf::ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"split", {{"fracton", 0.5}}}}), semconf::ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"n", "ten"}}), semconf::ValidationError);
  const auto round = RunConfig::from_json(c.to_json());
  CHECK(round.to_json() == c.to_json());
}

TEST_CASE("run config validation catches bad values") {
  for (auto change : std::vector<void (*)(RunConfig&)>{
           [](RunConfig& c) { c.alphas = {0.0}; },
           [](RunConfig& c) { c.alphas = {1.0}; },
           [](RunConfig& c) { c.alphas = {}; },
           [](RunConfig& c) { c.pipeline.epsilon = 0.0; },
           [](RunConfig& c) { c.pipeline.tau_cos = 1.0; },
           [](RunConfig& c) { c.pipeline.gamma = 1.0; },
           [](RunConfig& c) { c.pipeline.sampling.n = 1; },
           [](RunConfig& c) { c.strata = {{1, 3}, {2, 4}}; },
           [](RunConfig& c) { c.split_fraction = 1.0; },
           [](RunConfig& c) { c.workers = 0; },
           [](RunConfig& c) { c.simulation.trials = 0; }}) {
    RunConfig c;
    change(c);
    CHECK_THROWS_AS(c.validate(), semconf::ValidationError);
  }
}

TEST_CASE("weights parse from presets and lists") {
  std::string name;
  CHECK(semconf::parse_weights("support", &name) == semconf::FeatureWeights::support());
  CHECK(name == "support");
  CHECK(semconf::parse_weights("0.2,0.2,0.2,0.2,0.2") == semconf::FeatureWeights::uniform());
  CHECK_THROWS_AS(semconf::parse_weights("0.5,0.5"), semconf::ValidationError);
  CHECK_THROWS_AS(semconf::parse_weights("0.5,0.5,0.5,0.5,0.5"), semconf::ValidationError);
  CHECK_THROWS_AS(semconf::parse_weights("bogus"), semconf::ValidationError);
}

TEST_CASE("api keys come from the environment only") {
  ::setenv("SEMCONF_TEST_URL", "http://from-env/v1", 1);
  ::setenv("SEMCONF_TEST_KEY", "secret", 1);
  semconf::EndpointConfig e;
  auto ep = e.resolve("SEMCONF_TEST_URL", "SEMCONF_TEST_KEY");
  CHECK(ep.base_url == "http://from-env/v1");
  CHECK(ep.api_key == "secret");
  e.base_url = "http://from-config/v1";
  ep = e.resolve("SEMCONF_TEST_URL", "SEMCONF_TEST_KEY");
  CHECK(ep.base_url == "http://from-config/v1");
  CHECK(RunConfig{}.to_json().dump().find("secret") == std::string::npos);
  ::unsetenv("SEMCONF_TEST_URL");
  ::unsetenv("SEMCONF_TEST_KEY");
}

TEST_CASE("report rows mark absent metrics") {
  semconf::MetricsReport r;
  r.dataset = "data, \"quoted\"";
  r.model = "m";
  r.auroc = 0.75;
  const auto j = semconf::report_to_json(r);
  CHECK(j.at("auroc") == 0.75);
  CHECK(j.at("aupr").is_null());
  const auto cells = semconf::report_cells(r);
  CHECK(cells.size() == semconf::report_columns().size());
  const auto line = semconf::csv_line(cells);
  CHECK(line.rfind("\"data, \"\"quoted\"\"\",m,", 0) == 0);
  const std::vector<semconf::MetricsReport> two{r, r};
  const auto csv = semconf::reports_csv(two);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(semconf::format_number(0.1) == "0.1");
  CHECK(std::stod(semconf::format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("infer abstains on the toy cloud and accepts a single meaning") {
  test_support::TempDir dir;
  RunConfig config;
  config.out_dir = (dir.path() / "out").string();
  const fs::path artifact = dir.path() / "artifact.json";
  semconf::save_artifact(artifact, fixtures::toy_artifact(config.pipeline));
  const std::vector<semconf::PromptRecord> prompts{fixtures::toy_cloud(),
                                                   fixtures::single_meaning()};
  semconf::write_dataset(dir.path() / "prompts.jsonl", prompts);

  std::ostringstream out;
  const auto path = semconf::cmd_infer(config, artifact, dir.path() / "prompts.jsonl", out);
  std::istringstream lines(semconf::read_file(path));
  std::string line;
  std::vector<json> decisions;
  while (std::getline(lines, line)) decisions.push_back(json::parse(line));
  REQUIRE(decisions.size() == 2);
  CHECK(decisions[0].at("decision") == "abstain");
  CHECK(decisions[0].at("u_hat").get<double>() > 0.58);
  CHECK(decisions[1].at("decision") == "accept");
  CHECK(fs::exists(fs::path(config.out_dir) / "effective_config.json"));
  CHECK(out.str().find("accepted=1 abstained=1") != std::string::npos);
}

TEST_CASE("infer refuses an artifact from a different pipeline") {
  test_support::TempDir dir;
  RunConfig config;
  config.out_dir = (dir.path() / "out").string();
  const fs::path artifact = dir.path() / "artifact.json";
  semconf::save_artifact(artifact, fixtures::toy_artifact(config.pipeline));
  const std::vector<semconf::PromptRecord> prompts{fixtures::single_meaning()};
  semconf::write_dataset(dir.path() / "prompts.jsonl", prompts);
  config.pipeline.epsilon = 0.5;
  std::ostringstream out;
  CHECK_THROWS_AS(semconf::cmd_infer(config, artifact, dir.path() / "prompts.jsonl", out),
                  semconf::FingerprintMismatchError);
}

TEST_CASE("calibrate on a small labelled world gives finite thresholds") {
  test_support::TempDir dir;
  auto config = small_config(dir.path() / "out");
  auto spec = config.world();
  const auto world = semconf::generate_world(spec, 20, 1);
  semconf::write_dataset(dir.path() / "cal.jsonl", world.calibration);
  std::ostringstream out;
  const auto paths = semconf::cmd_calibrate(config, dir.path() / "cal.jsonl", out);
  REQUIRE(paths.size() == 1);
  const auto artifact = semconf::load_artifact(paths[0]);
  CHECK(artifact.tau_hat.has_value());
  CHECK(artifact.calibration_prompts == 20);
  CHECK(out.str().find("tau_hat=") != std::string::npos);
}

TEST_CASE("calibrate warns when no calibration prompt is correct") {
  test_support::TempDir dir;
  auto config = small_config(dir.path() / "out");
  auto world = semconf::generate_world(config.world(), 20, 1);
  for (auto& r : world.calibration) {
    const auto s = semconf::analyze_structure(r.response_embeddings, config.pipeline.epsilon);
    const auto& returned = r.response_embeddings[s.profile.representative_response];
    std::vector<double> away;
    for (std::size_t i = 0; i < returned.dim(); ++i) away.push_back(-returned[i]);
    r.reference_embedding = semconf::normalize(away);
  }
  semconf::write_dataset(dir.path() / "cal.jsonl", world.calibration);
  LogCapture capture;
  std::ostringstream out;
  const auto paths = semconf::cmd_calibrate(config, dir.path() / "cal.jsonl", out);
  CHECK(semconf::load_artifact(paths[0]).abstain_all());
  CHECK(out.str().find("tau_hat=none") != std::string::npos);
  CHECK(capture.text().find("abstains on every prompt") != std::string::npos);
}

TEST_CASE("calibrate without responses or an llm endpoint is a validation error") {
  test_support::TempDir dir;
  RunConfig config;
  config.out_dir = (dir.path() / "out").string();
  semconf::atomic_write(dir.path() / "p.jsonl",
                        "{\"id\":\"a\",\"prompt\":\"hi\",\"reference_answer\":\"x\"}\n");
  ::unsetenv(semconf::kLlmUrlEnv);
  std::ostringstream out;
  CHECK_THROWS_AS(semconf::cmd_calibrate(config, dir.path() / "p.jsonl", out),
                  semconf::ValidationError);
}

TEST_CASE("generate, calibrate, infer and evaluate through the commands") {
  test_support::TempDir dir;
  auto config = small_config(dir.path() / "out");
  config.alphas = {0.1, 0.2};
  std::ostringstream out;
  semconf::cmd_generate_world(config, out);
  const fs::path o(config.out_dir);
  const auto artifacts = semconf::cmd_calibrate(config, o / "calibration.jsonl", out);
  REQUIRE(artifacts.size() == 2);
  std::string decisions;
  for (const auto& a : artifacts) {
    decisions += semconf::read_file(semconf::cmd_infer(config, a, o / "test.jsonl", out));
  }
  semconf::atomic_write(dir.path() / "decisions.jsonl", decisions);
  const auto reports =
      semconf::cmd_evaluate(config, dir.path() / "decisions.jsonl", o / "test.jsonl", out);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].alpha == 0.1);
  CHECK(reports[0].num_prompts == 60);
  CHECK(reports[0].auroc.has_value());
  CHECK(fs::exists(o / "report_alpha_0.1.json"));
  CHECK(fs::exists(o / "report_alpha_0.2.csv"));
}

TEST_CASE("evaluate requires decision and label ids to align") {
  test_support::TempDir dir;
  auto config = small_config(dir.path() / "out");
  std::ostringstream out;
  semconf::cmd_generate_world(config, out);
  const fs::path o(config.out_dir);
  const auto artifact = semconf::cmd_calibrate(config, o / "calibration.jsonl", out).front();
  const auto decisions = semconf::cmd_infer(config, artifact, o / "test.jsonl", out);
  // Labels from a different split: no id matches.
  CHECK_THROWS_AS(semconf::cmd_evaluate(config, decisions, o / "calibration.jsonl", out),
                  semconf::ValidationError);
  const std::string text = semconf::read_file(decisions);
  const std::string first = text.substr(0, text.find('\n') + 1);
  semconf::atomic_write(dir.path() / "dup.jsonl", text + first);
  CHECK_THROWS_AS(semconf::cmd_evaluate(config, dir.path() / "dup.jsonl", o / "test.jsonl", out),
                  semconf::ValidationError);
  semconf::atomic_write(dir.path() / "short.jsonl", first);
  CHECK_THROWS_AS(
      semconf::cmd_evaluate(config, dir.path() / "short.jsonl", o / "test.jsonl", out),
      semconf::ValidationError);
}

TEST_CASE("sweep axes and values") {
  CHECK(semconf::parse_sweep_axis("epsilon") == semconf::SweepAxis::kEpsilon);
  CHECK(semconf::parse_sweep_axis("tau_cos") == semconf::SweepAxis::kTauCos);
  CHECK_THROWS_AS(semconf::parse_sweep_axis("depth"), semconf::ValidationError);
  const RunConfig base;
  CHECK(semconf::apply_sweep_value(base, semconf::SweepAxis::kEpsilon, "0.2").pipeline.epsilon ==
        0.2);
  CHECK(semconf::apply_sweep_value(base, semconf::SweepAxis::kN, "4").pipeline.sampling.n == 4);
  CHECK(semconf::apply_sweep_value(base, semconf::SweepAxis::kWeights, "margin")
            .pipeline.weights == semconf::FeatureWeights::margin());
  CHECK_THROWS_AS(semconf::apply_sweep_value(base, semconf::SweepAxis::kEpsilon, "1.5"),
                  semconf::ValidationError);
  CHECK_THROWS_AS(semconf::apply_sweep_value(base, semconf::SweepAxis::kN, "many"),
                  semconf::ValidationError);
  CHECK_THROWS_AS(semconf::apply_sweep_value(base, semconf::SweepAxis::kAlpha, "0"),
                  semconf::ValidationError);
}

TEST_CASE("sweep writes one row per value and rejects an empty list") {
  test_support::TempDir dir;
  auto config = small_config(dir.path() / "out");
  std::ostringstream out;
  CHECK_THROWS_AS(semconf::cmd_sweep(config, semconf::SweepAxis::kEpsilon, {}, {}, out),
                  semconf::ValidationError);
  const std::vector<std::string> grid{"0.10", "0.20", "0.35", "0.50", "0.70"};
  const auto csv = semconf::cmd_sweep(config, semconf::SweepAxis::kEpsilon, grid, {}, out);
  const std::string text = semconf::read_file(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);

  // The n axis over a dataset truncates the sampled responses.
  semconf::cmd_generate_world(config, out);
  const std::vector<std::string> sizes{"4", "7", "10"};
  const auto n_csv = semconf::cmd_sweep(config, semconf::SweepAxis::kN, sizes,
                                        fs::path(config.out_dir) / "calibration.jsonl", out);
  const std::string n_text = semconf::read_file(n_csv);
  CHECK(std::count(n_text.begin(), n_text.end(), '\n') == 4);
  CHECK_THROWS_AS(semconf::cmd_sweep(config, semconf::SweepAxis::kN, {"13"},
                                     fs::path(config.out_dir) / "calibration.jsonl", out),
                  semconf::ValidationError);
}

TEST_CASE("split writes disjoint calibration and test files") {
  test_support::TempDir dir;
  auto config = small_config(dir.path() / "out");
  std::ostringstream out;
  semconf::cmd_generate_world(config, out);
  semconf::cmd_split(config, fs::path(config.out_dir) / "calibration.jsonl", out);
  CHECK(out.str().find("calibration=72 test=48") != std::string::npos);
}

TEST_CASE("hash encoder identities") {
  RunConfig config;
  config.pipeline.encoder = "hash-v1:32";
  CHECK(semconf::make_embedder(config)->identity() == "hash-v1:32");
  config.pipeline.encoder = "simulator:16";
  CHECK_THROWS_AS(semconf::make_embedder(config), semconf::ValidationError);
  config.pipeline.encoder = "hash-v1:";
  CHECK_THROWS_AS(semconf::make_embedder(config), semconf::ValidationError);
}
