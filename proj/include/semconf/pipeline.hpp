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

#ifndef SEMCONF_PIPELINE_HPP_
#define SEMCONF_PIPELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semconf/clustering.hpp"
#include "semconf/conformal.hpp"
#include "semconf/inflation.hpp"
#include "semconf/ingestion.hpp"
#include "semconf/metrics.hpp"

namespace semconf {

// Everything that changes how a prompt is scored. Calibration and inference
// must agree on all of it; the fingerprint enforces that.
struct PipelineConfig {
  double epsilon = kDefaultEpsilon;
  FeatureWeights weights = FeatureWeights::uniform();
  double gamma = kDefaultGamma;
  double tau_cos = kDefaultTauCos;
  std::string encoder = "hash-v1:64";
  std::string prompt_template = "{prompt}";
  SamplingConfig sampling;

  std::size_t n_samples() const { return sampling.n; }
  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  // sha256 of the canonical JSON form.
  std::string fingerprint() const;
};

struct CalibrationArtifact {
  static constexpr int kSchemaVersion = 1;
  static constexpr const char* kSchemaName = "semconf.calibration";

  PipelineConfig pipeline;
  std::string fingerprint;
  double alpha = 0.1;
  Threshold tau_hat;
  Threshold q_hat;
  double kappa = 1.0;
  double tau_ref = 0.0;
  std::size_t m0 = 0;        // calibration prompts whose returned response is correct
  std::size_t s0_count = 0;  // correct calibration responses
  std::size_t calibration_prompts = 0;

  bool abstain_all() const { return !tau_hat.has_value(); }
  InflationConfig inflation() const;
};

nlohmann::json artifact_to_json(const CalibrationArtifact& artifact);
// Unknown fields are ignored. Throws ValidationError on a missing field, a
// different schema name, or a newer schema version.
CalibrationArtifact artifact_from_json(const nlohmann::json& j);
void save_artifact(const std::filesystem::path& path,
                   const CalibrationArtifact& artifact);
CalibrationArtifact load_artifact(const std::filesystem::path& path);

// Throws FingerprintMismatchError naming the differing settings.
void check_compatible(const CalibrationArtifact& artifact,
                      const PipelineConfig& runtime);

// Label-free structure of one prompt's responses.
struct PromptStructure {
  ClusterSet clusters;
  SoftAssignment assignment;
  SemanticProfile profile;
};

PromptStructure analyze_structure(std::span<const EmbeddingVector> embeddings,
                                  double epsilon);

struct PromptScore {
  BrittlenessFeatures features;
  AdjustedUncertainty adjusted;
  std::vector<double> conformity;     // phi_i
  std::vector<double> nonconformity;  // S(x, y_i)
  std::size_t representative = 0;     // i*

  double u_hat() const { return adjusted.u_hat; }
};

PromptScore score_prompt(const PromptStructure& structure,
                         const InflationConfig& inflation);

// kappa and tau_ref from the calibration structures; weights and gamma from
// the pipeline.
InflationConfig fit_inflation(std::span<const PromptStructure> calibration,
                              const PipelineConfig& config);

// Scores of correct calibration items.
struct CalibrationPool {
  std::vector<double> prompt_scores;    // u_hat where E = 0
  std::vector<double> response_scores;  // S where e = 0
  std::size_t prompts = 0;
};

// labels[j] holds e_i for prompt j.
CalibrationPool collect_pool(std::span<const PromptScore> scores,
                             std::span<const std::vector<int>> labels);

CalibrationArtifact make_artifact(const PipelineConfig& config,
                                  const InflationConfig& inflation,
                                  const CalibrationPool& pool, double alpha);

// Labels each record against its reference with config.tau_cos, then fits one
// artifact per alpha. Records must carry exactly n_samples response
// embeddings and a reference embedding.
std::vector<CalibrationArtifact> calibrate(std::span<const PromptRecord> records,
                                           const PipelineConfig& config,
                                           std::span<const double> alphas,
                                           std::size_t workers = 1);

struct InferenceResult {
  std::string id;
  double u = 0.0;
  double brittleness = 0.0;
  double lambda = 1.0;
  double u_hat = 0.0;
  std::size_t num_clusters = 0;
  bool accepted = false;
  std::size_t representative = 0;  // i*, reported even on abstention
  std::optional<std::size_t> returned_response;
  PredictionSet prediction_set;
  std::optional<std::size_t> set_representative;
  std::optional<std::string> returned_text;
};

InferenceResult infer_from_score(const std::string& id, const PromptScore& score,
                                 const PromptStructure& structure,
                                 const CalibrationArtifact& artifact);

InferenceResult infer_record(const PromptRecord& record,
                             const CalibrationArtifact& artifact);

nlohmann::json inference_to_json(const InferenceResult& result,
                                 const CalibrationArtifact& artifact);
InferenceResult inference_from_json(const nlohmann::json& j);

// Response labels against the reference with tau_cos; E is the label of the
// returned (representative) response.
EvaluatedPrompt to_evaluated(const InferenceResult& result,
                             std::span<const int> response_labels);

std::vector<int> response_labels(const PromptRecord& record, double tau_cos);

}  // namespace semconf

#endif  // SEMCONF_PIPELINE_HPP_
