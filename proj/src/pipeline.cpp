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

#include "semconf/pipeline.hpp"

#include <algorithm>
#include <string>

#include "semconf/error.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon must lie in (0, 1)");
  }
  weights.validate();
  if (!(gamma >= 0.5 && gamma < 1.0)) {
    throw ValidationError("gamma must lie in [0.5, 1)");
  }
  if (!(tau_cos > 0.0 && tau_cos < 1.0)) {
    throw ValidationError("tau_cos must lie in (0, 1)");
  }
  if (encoder.empty()) throw ValidationError("encoder identity must be set");
  sampling.validate();
}

json PipelineConfig::to_json() const {
  return json{
      {"epsilon", epsilon},
      {"weights", weights.values},
      {"gamma", gamma},
      {"tau_cos", tau_cos},
      {"encoder", encoder},
      {"prompt_template", prompt_template},
      {"n_samples", sampling.n},
      {"sampling",
       {{"model", sampling.model_name},
        {"top_p", sampling.nucleus_eta},
        {"temperature", sampling.temperature},
        {"max_tokens", sampling.max_tokens}}},
  };
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.weights.values = j.at("weights").get<std::array<double, 5>>();
  c.gamma = j.at("gamma").get<double>();
  c.tau_cos = j.at("tau_cos").get<double>();
  c.encoder = j.at("encoder").get<std::string>();
  c.prompt_template = j.at("prompt_template").get<std::string>();
  c.sampling.n = j.at("n_samples").get<std::size_t>();
  const json& s = j.at("sampling");
  c.sampling.model_name = s.at("model").get<std::string>();
  c.sampling.nucleus_eta = s.at("top_p").get<double>();
  c.sampling.temperature = s.at("temperature").get<double>();
  c.sampling.max_tokens = s.at("max_tokens").get<std::size_t>();
  return c;
}

std::string PipelineConfig::fingerprint() const {
  return sha256_hex(to_json().dump());
}

InflationConfig CalibrationArtifact::inflation() const {
  InflationConfig c;
  c.weights = pipeline.weights;
  c.kappa = kappa;
  c.tau_ref = tau_ref;
  c.gamma = pipeline.gamma;
  return c;
}

namespace {

json threshold_json(const Threshold& t) { return t ? json(*t) : json(nullptr); }

Threshold threshold_from(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw ValidationError(std::string("artifact is missing '") + key + "'");
  }
  if (j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json artifact_to_json(const CalibrationArtifact& a) {
  return json{
      {"schema", CalibrationArtifact::kSchemaName},
      {"schema_version", CalibrationArtifact::kSchemaVersion},
      {"fingerprint", a.fingerprint},
      {"pipeline", a.pipeline.to_json()},
      {"alpha", a.alpha},
      {"tau_hat", threshold_json(a.tau_hat)},
      {"q_hat", threshold_json(a.q_hat)},
      {"abstain_all", a.abstain_all()},
      {"kappa", a.kappa},
      {"tau_ref", a.tau_ref},
      {"m0", a.m0},
      {"s0_count", a.s0_count},
      {"calibration_prompts", a.calibration_prompts},
  };
}

CalibrationArtifact artifact_from_json(const json& j) {
  try {
    if (j.value("schema", "") != CalibrationArtifact::kSchemaName) {
      throw ValidationError("not a calibration artifact");
    }
    const int version = j.at("schema_version").get<int>();
    if (version > CalibrationArtifact::kSchemaVersion) {
      throw ValidationError("artifact schema version " + std::to_string(version) +
                            " is newer than supported version " +
                            std::to_string(CalibrationArtifact::kSchemaVersion));
    }
    CalibrationArtifact a;
    a.pipeline = PipelineConfig::from_json(j.at("pipeline"));
    a.fingerprint = j.at("fingerprint").get<std::string>();
    a.alpha = j.at("alpha").get<double>();
    a.tau_hat = threshold_from(j, "tau_hat");
    a.q_hat = threshold_from(j, "q_hat");
    a.kappa = j.at("kappa").get<double>();
    a.tau_ref = j.at("tau_ref").get<double>();
    a.m0 = j.at("m0").get<std::size_t>();
    a.s0_count = j.at("s0_count").get<std::size_t>();
    a.calibration_prompts = j.value("calibration_prompts", std::size_t{0});
    if (a.fingerprint != a.pipeline.fingerprint()) {
      throw ValidationError("artifact fingerprint does not match its pipeline");
    }
    return a;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed artifact: ") + e.what());
  }
}

void save_artifact(const std::filesystem::path& path,
                   const CalibrationArtifact& artifact) {
  atomic_write(path, artifact_to_json(artifact).dump(2) + "\n");
}

CalibrationArtifact load_artifact(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return artifact_from_json(j);
}

void check_compatible(const CalibrationArtifact& artifact,
                      const PipelineConfig& runtime) {
  if (artifact.fingerprint == runtime.fingerprint()) return;
  const json a = artifact.pipeline.to_json();
  const json b = runtime.to_json();
  std::string diff;
  for (const auto& [key, value] : a.items()) {
    if (!b.contains(key) || b.at(key) != value) {
      diff += (diff.empty() ? "" : ", ") + key;
    }
  }
  throw FingerprintMismatchError(
      "artifact was calibrated with a different pipeline configuration (" +
      (diff.empty() ? std::string("fingerprint") : diff) + " differ)");
}

PromptStructure analyze_structure(std::span<const EmbeddingVector> embeddings,
                                  double epsilon) {
  PromptStructure s;
  s.clusters = hac_cluster(embeddings, epsilon);
  s.assignment = soft_assign(embeddings, s.clusters);
  s.profile = semantic_profile(s.assignment);
  return s;
}

PromptScore score_prompt(const PromptStructure& structure,
                         const InflationConfig& inflation) {
  PromptScore out;
  out.features = compute_features(structure.profile, structure.assignment,
                                  structure.clusters, inflation);
  out.adjusted = inflate(structure.profile.u, out.features, inflation);
  out.representative = structure.profile.representative_response;
  const std::size_t n = structure.assignment.num_responses();
  out.conformity.reserve(n);
  out.nonconformity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi =
        response_conformity(structure.assignment, structure.profile, i);
    out.conformity.push_back(phi);
    out.nonconformity.push_back(nonconformity(out.adjusted.u_hat, phi));
  }
  return out;
}

InflationConfig fit_inflation(std::span<const PromptStructure> calibration,
                              const PipelineConfig& config) {
  std::vector<std::size_t> largest;
  std::vector<double> base;
  largest.reserve(calibration.size());
  base.reserve(calibration.size());
  for (const auto& s : calibration) {
    largest.push_back(s.clusters.largest_cluster_size());
    base.push_back(s.profile.u);
  }
  InflationConfig c;
  c.weights = config.weights;
  c.gamma = config.gamma;
  c.kappa = fit_kappa(largest);
  c.tau_ref = fit_tau_ref(base, config.gamma);
  return c;
}

CalibrationPool collect_pool(std::span<const PromptScore> scores,
                             std::span<const std::vector<int>> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels cover different prompt counts");
  }
  CalibrationPool pool;
  pool.prompts = scores.size();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const auto& e = labels[j];
    if (e.size() != scores[j].nonconformity.size()) {
      throw ValidationError("prompt " + std::to_string(j) +
                            ": labels and responses differ in length");
    }
    if (e.at(scores[j].representative) == 0) {
      pool.prompt_scores.push_back(scores[j].u_hat());
    }
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 0) pool.response_scores.push_back(scores[j].nonconformity[i]);
    }
  }
  return pool;
}

CalibrationArtifact make_artifact(const PipelineConfig& config,
                                  const InflationConfig& inflation,
                                  const CalibrationPool& pool, double alpha) {
  CalibrationArtifact a;
  a.pipeline = config;
  a.fingerprint = config.fingerprint();
  a.alpha = alpha;
  a.kappa = inflation.kappa;
  a.tau_ref = inflation.tau_ref;
  a.tau_hat = calibrate_prompt_threshold(pool.prompt_scores, alpha);
  a.q_hat = calibrate_response_quantile(pool.response_scores, alpha);
  a.m0 = pool.prompt_scores.size();
  a.s0_count = pool.response_scores.size();
  a.calibration_prompts = pool.prompts;
  return a;
}

std::vector<int> response_labels(const PromptRecord& record, double tau_cos) {
  if (!record.reference_embedding) {
    throw ValidationError("record '" + record.id +
                          "' has no reference embedding to label against");
  }
  std::vector<int> out;
  out.reserve(record.response_embeddings.size());
  for (const auto& v : record.response_embeddings) {
    out.push_back(as_bit(label_correct(v, *record.reference_embedding, tau_cos)));
  }
  return out;
}

namespace {

void check_sample_count(const PromptRecord& r, std::size_t n) {
  if (r.response_embeddings.size() != n) {
    throw ValidationError("record '" + r.id + "' has " +
                          std::to_string(r.response_embeddings.size()) +
                          " response embeddings, pipeline expects " +
                          std::to_string(n));
  }
}

}  // namespace

std::vector<CalibrationArtifact> calibrate(std::span<const PromptRecord> records,
                                           const PipelineConfig& config,
                                           std::span<const double> alphas,
                                           std::size_t workers) {
  config.validate();
  if (records.empty()) throw ValidationError("calibration set is empty");
  if (alphas.empty()) throw ValidationError("no alpha values to calibrate");
  for (const auto& r : records) check_sample_count(r, config.n_samples());

  std::vector<PromptStructure> structures(records.size());
  std::vector<std::vector<int>> labels(records.size());
  parallel_for(records.size(), workers, [&](std::size_t j) {
    structures[j] = analyze_structure(records[j].response_embeddings, config.epsilon);
    labels[j] = response_labels(records[j], config.tau_cos);
  });
  const InflationConfig inflation = fit_inflation(structures, config);
  std::vector<PromptScore> scores(records.size());
  parallel_for(records.size(), workers, [&](std::size_t j) {
    scores[j] = score_prompt(structures[j], inflation);
  });
  const CalibrationPool pool = collect_pool(scores, labels);

  std::vector<CalibrationArtifact> out;
  for (double alpha : alphas) {
    out.push_back(make_artifact(config, inflation, pool, alpha));
  }
  return out;
}

InferenceResult infer_from_score(const std::string& id, const PromptScore& score,
                                 const PromptStructure& structure,
                                 const CalibrationArtifact& artifact) {
  InferenceResult r;
  r.id = id;
  r.u = score.adjusted.u;
  r.brittleness = score.adjusted.brittleness;
  r.lambda = score.adjusted.lambda;
  r.u_hat = score.adjusted.u_hat;
  r.num_clusters = structure.clusters.size();
  r.representative = score.representative;
  const PromptDecision d =
      decide_prompt(score.u_hat(), artifact.tau_hat, score.representative);
  r.accepted = d.accepted;
  r.returned_response = d.returned_response;
  r.prediction_set = prediction_set(score.nonconformity, artifact.q_hat);
  r.set_representative = most_representative(r.prediction_set, score.conformity);
  return r;
}

InferenceResult infer_record(const PromptRecord& record,
                             const CalibrationArtifact& artifact) {
  check_sample_count(record, artifact.pipeline.n_samples());
  const PromptStructure s =
      analyze_structure(record.response_embeddings, artifact.pipeline.epsilon);
  const PromptScore score = score_prompt(s, artifact.inflation());
  InferenceResult r = infer_from_score(record.id, score, s, artifact);
  if (r.returned_response && *r.returned_response < record.responses.size()) {
    r.returned_text = record.responses[*r.returned_response];
  }
  return r;
}

json inference_to_json(const InferenceResult& r, const CalibrationArtifact& a) {
  json set = json::array();
  for (std::size_t k = 0; k < r.prediction_set.members.size(); ++k) {
    set.push_back({{"index", r.prediction_set.members[k]},
                   {"score", r.prediction_set.scores[k]}});
  }
  return json{
      {"id", r.id},
      {"alpha", a.alpha},
      {"fingerprint", a.fingerprint},
      {"u", r.u},
      {"brittleness", r.brittleness},
      {"lambda", r.lambda},
      {"u_hat", r.u_hat},
      {"num_clusters", r.num_clusters},
      {"accepted", r.accepted},
      {"decision", r.accepted ? "accept" : "abstain"},
      {"representative", r.representative},
      {"returned_response",
       r.returned_response ? json(*r.returned_response) : json(nullptr)},
      {"returned_text", r.returned_text ? json(*r.returned_text) : json(nullptr)},
      {"prediction_set", std::move(set)},
      {"set_representative",
       r.set_representative ? json(*r.set_representative) : json(nullptr)},
  };
}

InferenceResult inference_from_json(const json& j) {
  try {
    InferenceResult r;
    r.id = j.at("id").get<std::string>();
    r.u = j.at("u").get<double>();
    r.brittleness = j.at("brittleness").get<double>();
    r.lambda = j.at("lambda").get<double>();
    r.u_hat = j.at("u_hat").get<double>();
    r.num_clusters = j.at("num_clusters").get<std::size_t>();
    r.accepted = j.at("accepted").get<bool>();
    r.representative = j.at("representative").get<std::size_t>();
    if (!j.at("returned_response").is_null()) {
      r.returned_response = j.at("returned_response").get<std::size_t>();
    }
    if (j.contains("returned_text") && !j.at("returned_text").is_null()) {
      r.returned_text = j.at("returned_text").get<std::string>();
    }
    for (const auto& m : j.at("prediction_set")) {
      r.prediction_set.members.push_back(m.at("index").get<std::size_t>());
      r.prediction_set.scores.push_back(m.at("score").get<double>());
    }
    if (!std::is_sorted(r.prediction_set.members.begin(),
                        r.prediction_set.members.end())) {
      throw ValidationError("prediction set indices must be ascending");
    }
    if (!j.at("set_representative").is_null()) {
      r.set_representative = j.at("set_representative").get<std::size_t>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed decision line: ") + e.what());
  }
}

EvaluatedPrompt to_evaluated(const InferenceResult& result,
                             std::span<const int> labels) {
  if (result.representative >= labels.size()) {
    throw ValidationError("decision for '" + result.id +
                          "' references a response the labels do not cover");
  }
  for (std::size_t i : result.prediction_set.members) {
    if (i >= labels.size()) {
      throw ValidationError("prediction set of '" + result.id +
                            "' references an unknown response");
    }
  }
  EvaluatedPrompt p;
  p.u_hat = result.u_hat;
  p.accepted = result.accepted;
  p.prompt_error = labels[result.representative];
  p.response_errors.assign(labels.begin(), labels.end());
  p.set_members = result.prediction_set.members;
  return p;
}

}  // namespace semconf
