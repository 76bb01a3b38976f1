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

#include "semconf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semconf/error.hpp"

namespace semconf {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1), got " +
                          std::to_string(alpha));
  }
}

}  // namespace

std::size_t conformal_rank(std::size_t m, double alpha) {
  check_alpha(alpha);
  if (m == 0) throw ValidationError("conformal rank of an empty multiset");
  // The slack absorbs representation error in products such as 10 * 0.9 that
  // are integers in exact arithmetic.
  const double target = static_cast<double>(m + 1) * (1.0 - alpha);
  const auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9));
  return std::clamp<std::size_t>(rank, 1, m);
}

Threshold conformal_quantile(std::span<const double> scores, double alpha) {
  check_alpha(alpha);
  if (scores.empty()) return std::nullopt;
  std::vector<double> sorted(scores.begin(), scores.end());
  const std::size_t rank = conformal_rank(sorted.size(), alpha);
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  return sorted[rank - 1];
}

Threshold calibrate_prompt_threshold(std::span<const double> scores_correct,
                                     double alpha) {
  return conformal_quantile(scores_correct, alpha);
}

Threshold calibrate_response_quantile(std::span<const double> scores_correct,
                                      double alpha) {
  return conformal_quantile(scores_correct, alpha);
}

PromptDecision decide_prompt(double u_hat, const Threshold& tau_hat,
                             std::size_t representative) {
  PromptDecision d;
  d.u_hat = u_hat;
  d.accepted = tau_hat.has_value() && u_hat <= *tau_hat;
  if (d.accepted) d.returned_response = representative;
  return d;
}

double response_conformity(const SoftAssignment& assignment,
                           const SemanticProfile& profile, std::size_t i) {
  const auto& row = assignment.s.at(i);
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return std::clamp(row[best] * profile.mass.at(best), 0.0, 1.0);
}

double nonconformity(double u_hat, double phi) {
  return std::clamp(0.5 * (u_hat + (1.0 - phi)), 0.0, 1.0);
}

bool PredictionSet::contains(std::size_t i) const {
  return std::binary_search(members.begin(), members.end(), i);
}

PredictionSet prediction_set(std::span<const double> scores,
                             const Threshold& q_hat) {
  PredictionSet set;
  if (!q_hat) return set;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] <= *q_hat) {
      set.members.push_back(i);
      set.scores.push_back(scores[i]);
    }
  }
  return set;
}

PredictionSet prediction_set(std::span<const std::string> responses,
                             std::span<const double> scores,
                             const Threshold& q_hat) {
  if (responses.size() != scores.size()) {
    throw ValidationError("prediction set needs one score per response: " +
                          std::to_string(responses.size()) + " responses, " +
                          std::to_string(scores.size()) + " scores");
  }
  return prediction_set(scores, q_hat);
}

std::optional<std::size_t> most_representative(const PredictionSet& set,
                                               std::span<const double> phi) {
  std::optional<std::size_t> best;
  for (std::size_t i : set.members) {
    if (i >= phi.size()) {
      throw ValidationError("prediction set member " + std::to_string(i) +
                            " has no conformity value");
    }
    if (!best || phi[i] > phi[*best]) best = i;
  }
  return best;
}

}  // namespace semconf
