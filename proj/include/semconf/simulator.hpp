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

#ifndef SEMCONF_SIMULATOR_HPP_
#define SEMCONF_SIMULATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semconf/ingestion.hpp"
#include "semconf/pipeline.hpp"

namespace semconf {

// Synthetic prompt distribution. Each prompt has k_true latent meanings
// (random unit directions in R^dim) with mixing weights drawn from a
// symmetric Dirichlet(meaning_dispersion). Responses pick a meaning from the
// mixture and add isotropic noise of norm about 1/concentration before
// renormalizing. With probability correct_meaning_prob the reference answer
// is the dominant meaning; otherwise it is another latent meaning (or an
// unrelated direction when k_true = 1).
//
// kSampledMajority: dominant = most frequent meaning among the n sampled
// responses, ties to the larger mixture weight, then the lower index.
// kMixtureArgmax: dominant = largest mixture weight, whatever was sampled.
enum class ReferenceRule { kSampledMajority, kMixtureArgmax };

std::string reference_rule_name(ReferenceRule rule);
ReferenceRule parse_reference_rule(const std::string& name);

struct WorldSpec {
  std::size_t dim = 16;
  std::size_t k_true = 3;
  double concentration = 2.5;  // +infinity removes the noise
  double correct_meaning_prob = 0.98;
  double meaning_dispersion = 0.5;
  std::size_t n = 10;
  double epsilon = kDefaultEpsilon;
  double alpha = 0.1;
  double tau_cos = kDefaultTauCos;
  std::uint64_t seed = 0;
  ReferenceRule reference_rule = ReferenceRule::kSampledMajority;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep the values in `defaults`.
  static WorldSpec from_json(const nlohmann::json& j, WorldSpec defaults);
};

inline WorldSpec world_spec_from_json(const nlohmann::json& j) {
  return WorldSpec::from_json(j, WorldSpec{});
}

struct World {
  std::vector<PromptRecord> calibration;
  std::vector<PromptRecord> test;
};

// Records carry responses, embeddings, the reference embedding and labels
// from the tau_cos rule. The seed fully determines the output.
World generate_world(const WorldSpec& spec, std::size_t m_cal,
                     std::size_t m_test);

// Pipeline matching the world's n, epsilon and tau_cos, with encoder
// identity "simulator:<dim>".
PipelineConfig simulator_pipeline(const WorldSpec& spec,
                                  const FeatureWeights& weights = FeatureWeights::uniform(),
                                  double gamma = kDefaultGamma);

struct ExperimentOptions {
  std::size_t trials = 500;
  std::size_t m_cal = 1000;
  std::size_t m_test = 1000;
  std::vector<double> alphas;  // empty means {spec.alpha}
  FeatureWeights weights = FeatureWeights::uniform();
  double gamma = kDefaultGamma;
  std::size_t workers = 1;
  // When set, test prompts come from this world instead (exchangeability
  // deliberately broken). The runner still reports what it measures.
  std::optional<WorldSpec> test_world;
};

// A pooled proportion over every trial: successes / total.
struct Proportion {
  std::size_t successes = 0;
  std::size_t total = 0;

  std::optional<double> value() const;
  // sqrt(p (1 - p) / total) at the given p.
  double binomial_se(double p) const;
  // Binomial SE at the average per-trial denominator total / trials.
  double per_trial_se(double p, std::size_t trials) const;
};

struct AlphaSummary {
  double alpha = 0.1;
  std::size_t trials = 0;
  Proportion prompt_coverage;     // accepted among E = 0 test prompts
  Proportion response_coverage;   // in-set among e = 0 test responses
  Proportion selective_error;     // E = 1 among accepted test prompts
  Proportion acceptance;          // accepted among all test prompts
  double mean_aps = 0.0;
  double mean_trial_prompt_coverage = 0.0;
  double mean_trial_response_coverage = 0.0;
  std::size_t abstain_all_trials = 0;
  std::size_t nesting_violations = 0;  // vs. the next larger alpha

  // pooled value >= 1 - alpha - 3 * per_trial_se(1 - alpha)
  bool prompt_coverage_ok() const;
  bool response_coverage_ok() const;
  // pooled risk <= alpha + 3 * per_trial_se(alpha)
  bool selective_risk_ok() const;
  // Same checks against the pooled binomial SE. Responses of one prompt are
  // correlated and share a threshold, so this is a diagnostic only.
  bool prompt_coverage_pooled_ok() const;
  bool response_coverage_pooled_ok() const;
  bool selective_risk_pooled_ok() const;
};

struct TrialRow {
  std::size_t trial = 0;
  double alpha = 0.1;
  std::optional<double> prompt_coverage;
  std::optional<double> response_coverage;
  std::optional<double> selective_risk;
  double acceptance_rate = 0.0;
  double aps = 0.0;
  std::optional<double> tau_hat;
  std::optional<double> q_hat;
};

struct CoverageSummary {
  WorldSpec spec;
  std::size_t trials = 0;
  std::vector<AlphaSummary> per_alpha;  // ascending alpha
  std::vector<TrialRow> rows;           // trial-major, ascending alpha
  double mean_u = 0.0;
  double mean_u_hat = 0.0;
  double test_error_rate = 0.0;  // pooled E over test prompts

  nlohmann::json to_json() const;
  std::string rows_csv() const;
};

// Per trial: generate, calibrate on the calibration prompts, score the test
// prompts, and measure coverage, risk and set sizes for each alpha.
CoverageSummary run_coverage_experiment(const WorldSpec& spec,
                                        const ExperimentOptions& options);

// Seed of trial t derived from the base seed.
std::uint64_t trial_seed(std::uint64_t base, std::size_t trial);

}  // namespace semconf

#endif  // SEMCONF_SIMULATOR_HPP_
