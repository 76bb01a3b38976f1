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

#ifndef SEMCONF_TESTS_FIXTURES_HPP_
#define SEMCONF_TESTS_FIXTURES_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "semconf/ingestion.hpp"
#include "semconf/pipeline.hpp"

namespace fixtures {

// Cosine between the two answers of the toy cloud. Soft assignment then puts
// about 0.87 of the mass on the nine-member cluster.
inline constexpr double kToyCrossCosine = -0.922;

// Nine samples agree on one answer, one disagrees.
inline semconf::PromptRecord toy_cloud(const std::string& id = "toy") {
  semconf::PromptRecord r;
  r.id = id;
  r.prompt = "What is the capital of Australia?";
  const double c = kToyCrossCosine;
  const auto majority = semconf::normalize(std::vector<double>{1.0, 0.0});
  const auto minority = semconf::normalize(std::vector<double>{c, std::sqrt(1.0 - c * c)});
  for (int i = 0; i < 9; ++i) {
    r.responses.push_back("Sydney");
    r.response_embeddings.push_back(majority);
  }
  r.responses.push_back("Canberra");
  r.response_embeddings.push_back(minority);
  return r;
}

// Ten samples with one meaning.
inline semconf::PromptRecord single_meaning(const std::string& id = "single") {
  semconf::PromptRecord r;
  r.id = id;
  r.prompt = "What is 2 + 2?";
  const auto v = semconf::normalize(std::vector<double>{0.0, 1.0});
  for (int i = 0; i < 10; ++i) {
    r.responses.push_back("4");
    r.response_embeddings.push_back(v);
  }
  return r;
}

// Thresholds in the range of the toy narrative. kappa equals the majority
// size so the size penalty is 1; tau_ref leaves a modest margin term.
inline semconf::CalibrationArtifact toy_artifact(const semconf::PipelineConfig& pipeline) {
  semconf::CalibrationArtifact a;
  a.pipeline = pipeline;
  a.fingerprint = pipeline.fingerprint();
  a.alpha = 0.1;
  a.tau_hat = 0.58;
  a.q_hat = 0.5;
  a.kappa = 9.0;
  a.tau_ref = 0.9;
  a.m0 = 20;
  a.s0_count = 180;
  a.calibration_prompts = 20;
  return a;
}

}  // namespace fixtures

#endif  // SEMCONF_TESTS_FIXTURES_HPP_
