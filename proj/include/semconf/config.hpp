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

#ifndef SEMCONF_CONFIG_HPP_
#define SEMCONF_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semconf/clients.hpp"
#include "semconf/metrics.hpp"
#include "semconf/pipeline.hpp"
#include "semconf/simulator.hpp"

namespace semconf {

struct EndpointConfig {
  std::string base_url;  // empty: taken from the environment
  double timeout_seconds = 60.0;
  std::size_t max_attempts = 3;
  double retry_backoff_seconds = 0.5;
  double min_request_interval_seconds = 0.0;

  // API keys only ever come from the environment.
  Endpoint resolve(const char* url_env, const char* key_env) const;
};

struct SimulationConfig {
  WorldSpec world;
  std::size_t trials = 500;
  std::size_t m_cal = 1000;
  std::size_t m_test = 1000;
  std::optional<WorldSpec> test_world;
};

// Every tunable of a run. Unknown keys are rejected so typos surface early.
struct RunConfig {
  PipelineConfig pipeline;
  std::string weights_name = "uniform";  // preset name, or "custom"
  std::vector<double> alphas{0.1};
  std::vector<SizeStratum> strata = default_strata();
  std::size_t ece_bins = kDefaultCalibrationBins;
  double split_fraction = 0.6;
  std::uint64_t split_seed = 0;
  EndpointConfig llm;
  EndpointConfig embedding;
  std::size_t max_resample_rounds = 3;
  std::string cache_dir;  // empty disables the on-disk embedding cache
  std::string out_dir = "out";
  std::size_t workers = 1;
  bool strict = true;
  std::string dataset_name;
  std::optional<long long> seed;  // reported in metrics metadata
  SimulationConfig simulation;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  EvaluationOptions evaluation(double alpha) const;
  // The world of `simulation` with n, epsilon, tau_cos taken from pipeline.
  WorldSpec world() const;
};

// Accepts a preset name or "w1,w2,w3,w4,w5".
FeatureWeights parse_weights(const std::string& text, std::string* name = nullptr);

}  // namespace semconf

#endif  // SEMCONF_CONFIG_HPP_
