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

#ifndef SEMCONF_CONFORMAL_HPP_
#define SEMCONF_CONFORMAL_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semconf/clustering.hpp"

namespace semconf {

// A calibrated cutoff. nullopt means the correct-score multiset was empty:
// every prompt is rejected and every prediction set is empty.
using Threshold = std::optional<double>;

// Rank ceil((m + 1)(1 - alpha)) clamped to [1, m]. m must be positive.
std::size_t conformal_rank(std::size_t m, double alpha);

// The conformal_rank(m, alpha)-th smallest score, or nullopt when `scores` is
// empty. Throws ValidationError unless alpha lies in (0, 1). The result is
// independent of the input order.
Threshold conformal_quantile(std::span<const double> scores, double alpha);

// Threshold over adjusted uncertainties of calibration prompts whose returned
// response is correct.
Threshold calibrate_prompt_threshold(std::span<const double> scores_correct,
                                     double alpha);

// Threshold over non-conformity scores of correct calibration responses.
Threshold calibrate_response_quantile(std::span<const double> scores_correct,
                                      double alpha);

struct PromptDecision {
  double u_hat = 0.0;
  bool accepted = false;
  std::optional<std::size_t> returned_response;
};

// Accept iff u_hat <= tau_hat. `representative` is returned on acceptance.
PromptDecision decide_prompt(double u_hat, const Threshold& tau_hat,
                             std::size_t representative);

// phi_i = s_{i,k} * mass_k for k = argmax_k s_ik (lowest index on ties).
double response_conformity(const SoftAssignment& assignment,
                           const SemanticProfile& profile, std::size_t i);

// S = (u_hat + (1 - phi)) / 2; smaller is more conforming.
double nonconformity(double u_hat, double phi);

struct PredictionSet {
  std::vector<std::size_t> members;  // ascending response indices
  std::vector<double> scores;        // S for each member

  std::size_t size() const { return members.size(); }
  bool contains(std::size_t i) const;
};

// Responses with S <= q_hat. An abstain-all threshold gives the empty set.
PredictionSet prediction_set(std::span<const double> scores,
                             const Threshold& q_hat);

// As above; throws ValidationError unless there is one score per response.
PredictionSet prediction_set(std::span<const std::string> responses,
                             std::span<const double> scores,
                             const Threshold& q_hat);

// Member with the highest conformity, lowest index on ties; nullopt when the
// set is empty. Throws ValidationError if a member index is out of range.
std::optional<std::size_t> most_representative(const PredictionSet& set,
                                               std::span<const double> phi);

}  // namespace semconf

#endif  // SEMCONF_CONFORMAL_HPP_
