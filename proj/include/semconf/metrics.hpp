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

#ifndef SEMCONF_METRICS_HPP_
#define SEMCONF_METRICS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semconf/conformal.hpp"

namespace semconf {

// Inclusive range of prediction-set sizes.
struct SizeStratum {
  std::size_t lo = 1;
  std::size_t hi = 1;
  bool operator==(const SizeStratum&) const = default;
};

// [1-2, 3-5, 6-7, 8-10]
std::vector<SizeStratum> default_strata();

inline constexpr std::size_t kDefaultCalibrationBins = 10;

// Detection metrics treat label 1 (hallucination) as the positive class and
// larger scores as more positive. All throw ValidationError on length
// mismatch, on labels outside {0,1}, or when only one class is present.

// Mann-Whitney statistic with ties counted one half.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct descending thresholds of
// (recall_t - recall_{t-1}) * precision_t, with tied scores admitted together.
double aupr(std::span<const double> scores, std::span<const int> labels);

// Smallest false-positive rate among thresholds whose true-positive rate is at
// least tpr_target. tpr_target must lie in (0, 1].
double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels,
                  double tpr_target);

// Area under accuracy versus rejection rate. `errors` are prompt error bits;
// prompts are accepted when score <= threshold. The sweep visits every
// distinct score plus the reject-all endpoint, where the accuracy of the
// smallest non-empty acceptance set is carried forward. Trapezoidal rule.
double auarc(std::span<const double> scores, std::span<const int> errors);

double acceptance_rate(std::span<const double> u_hat, const Threshold& tau_hat);

// Mean error among prompts with u_hat <= tau_hat; nullopt when none accepted.
std::optional<double> selective_risk(std::span<const double> u_hat,
                                     std::span<const int> errors,
                                     const Threshold& tau_hat);

// Everything the coverage metrics need to know about one test prompt.
struct EvaluatedPrompt {
  double u_hat = 0.0;
  bool accepted = false;
  int prompt_error = 0;                // E: error bit of the returned response
  std::vector<int> response_errors;    // e_i per sampled response
  std::vector<std::size_t> set_members;  // ascending indices into responses
};

struct CoverageMetrics {
  std::optional<double> response_coverage;
  std::optional<double> prompt_coverage;
  std::optional<double> aps;
};

CoverageMetrics coverage_metrics(std::span<const EvaluatedPrompt> prompts);

struct SscvResult {
  std::optional<double> value;
  std::size_t excluded_empty = 0;  // prompts with an empty prediction set
  std::size_t unstratified = 0;    // non-empty sets outside every stratum
};

// Worst shortfall ((1 - alpha) - Cov_b)_+ over non-empty strata. Strata must
// be disjoint with 1 <= lo <= hi.
SscvResult sscv(std::span<const std::size_t> set_sizes,
                std::span<const int> contains_truth, double alpha,
                std::span<const SizeStratum> strata);

struct CalibrationScores {
  double ece = 0.0;
  double brier = 0.0;
};

// Equal-width ECE and Brier score. correctness is 1 for a correct answer.
CalibrationScores calibration_scores(std::span<const double> confidences,
                                     std::span<const int> correctness,
                                     std::size_t bins = kDefaultCalibrationBins);

struct MetricsReport {
  std::string dataset;
  std::string model;
  double alpha = 0.1;
  std::optional<long long> seed;

  std::optional<double> auroc;
  std::optional<double> aupr;
  std::optional<double> fpr_at_95_tpr;
  std::optional<double> fpr_at_90_tpr;
  std::optional<double> auarc;
  std::optional<double> acceptance_rate;
  std::optional<double> selective_risk;
  std::optional<double> selective_accuracy;
  std::optional<double> rejection_rate;
  std::optional<double> response_coverage;
  std::optional<double> prompt_coverage;
  std::optional<double> aps;
  std::optional<double> sscv;
  std::optional<double> ece;
  std::optional<double> brier;

  std::size_t num_prompts = 0;
  std::size_t sscv_excluded_empty = 0;
};

struct EvaluationOptions {
  double alpha = 0.1;
  std::vector<SizeStratum> strata = default_strata();
  std::size_t ece_bins = kDefaultCalibrationBins;
};

// Full metric suite over one test run. The prompt score is u_hat; detection
// metrics are absent when the test set holds a single class.
MetricsReport evaluate_prompts(std::span<const EvaluatedPrompt> prompts,
                               const EvaluationOptions& options);

}  // namespace semconf

#endif  // SEMCONF_METRICS_HPP_
