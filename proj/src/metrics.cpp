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

#include "semconf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "semconf/error.hpp"

namespace semconf {

std::vector<SizeStratum> default_strata() {
  return {{1, 2}, {3, 5}, {6, 7}, {8, 10}};
}

namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts check_binary(std::span<const double> scores,
                         std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length: " +
                          std::to_string(scores.size()) + " vs " +
                          std::to_string(labels.size()));
  }
  ClassCounts counts;
  for (int y : labels) {
    if (y == 1) {
      ++counts.positives;
    } else if (y == 0) {
      ++counts.negatives;
    } else {
      throw ValidationError("labels must be 0 or 1");
    }
  }
  return counts;
}

ClassCounts check_two_class(std::span<const double> scores,
                            std::span<const int> labels) {
  const ClassCounts counts = check_binary(scores, labels);
  if (counts.positives == 0 || counts.negatives == 0) {
    throw ValidationError("metric requires both classes to be present");
  }
  return counts;
}

// Indices ordered by descending score.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts counts = check_two_class(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Sum of mid-ranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) positive_rank_sum += mid_rank;
    }
    i = j;
  }
  const auto p = static_cast<double>(counts.positives);
  const auto n = static_cast<double>(counts.negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts counts = check_two_class(scores, labels);
  const auto order = descending_order(scores);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double prev_recall = 0.0;
  double area = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp; else ++fp;
      ++j;
    }
    const double recall =
        static_cast<double>(tp) / static_cast<double>(counts.positives);
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels,
                  double tpr_target) {
  const ClassCounts counts = check_two_class(scores, labels);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw ValidationError("tpr_target must lie in (0, 1]");
  }
  // FPR and TPR both grow as the threshold decreases, so the first threshold
  // reaching the target has the smallest FPR.
  const auto order = descending_order(scores);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp; else ++fp;
      ++j;
    }
    const double tpr =
        static_cast<double>(tp) / static_cast<double>(counts.positives);
    if (tpr >= tpr_target - 1e-12) {
      return static_cast<double>(fp) / static_cast<double>(counts.negatives);
    }
    i = j;
  }
  return 1.0;
}

double auarc(std::span<const double> scores, std::span<const int> errors) {
  check_binary(scores, errors);
  if (scores.empty()) throw ValidationError("auarc of an empty set");
  const auto total = static_cast<double>(scores.size());

  // Walk thresholds from accept-all downwards: each step rejects the group of
  // prompts sharing the current largest score.
  const auto order = descending_order(scores);
  std::size_t accepted = scores.size();
  std::size_t accepted_correct = 0;
  for (int e : errors) accepted_correct += (e == 0);

  std::vector<std::pair<double, double>> curve;  // (rejection, accuracy)
  std::size_t i = 0;
  while (i < order.size()) {
    curve.emplace_back(1.0 - static_cast<double>(accepted) / total,
                       static_cast<double>(accepted_correct) /
                           static_cast<double>(accepted));
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      --accepted;
      accepted_correct -= (errors[order[j]] == 0);
      ++j;
    }
    i = j;
  }
  curve.emplace_back(1.0, curve.back().second);

  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].first - curve[k - 1].first) *
            0.5 * (curve[k].second + curve[k - 1].second);
  }
  return area;
}

double acceptance_rate(std::span<const double> u_hat, const Threshold& tau_hat) {
  if (u_hat.empty()) throw ValidationError("acceptance rate of an empty set");
  if (!tau_hat) return 0.0;
  const auto accepted = std::count_if(u_hat.begin(), u_hat.end(),
                                      [&](double u) { return u <= *tau_hat; });
  return static_cast<double>(accepted) / static_cast<double>(u_hat.size());
}

std::optional<double> selective_risk(std::span<const double> u_hat,
                                     std::span<const int> errors,
                                     const Threshold& tau_hat) {
  check_binary(u_hat, errors);
  if (!tau_hat) return std::nullopt;
  std::size_t accepted = 0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < u_hat.size(); ++i) {
    if (u_hat[i] <= *tau_hat) {
      ++accepted;
      wrong += (errors[i] == 1);
    }
  }
  if (accepted == 0) return std::nullopt;
  return static_cast<double>(wrong) / static_cast<double>(accepted);
}

CoverageMetrics coverage_metrics(std::span<const EvaluatedPrompt> prompts) {
  CoverageMetrics out;
  if (prompts.empty()) return out;
  std::size_t correct_responses = 0;
  std::size_t covered_responses = 0;
  std::size_t correct_prompts = 0;
  std::size_t accepted_correct_prompts = 0;
  std::size_t total_set_size = 0;
  for (const auto& p : prompts) {
    for (std::size_t i = 0; i < p.response_errors.size(); ++i) {
      if (p.response_errors[i] != 0) continue;
      ++correct_responses;
      if (std::binary_search(p.set_members.begin(), p.set_members.end(), i)) {
        ++covered_responses;
      }
    }
    if (p.prompt_error == 0) {
      ++correct_prompts;
      accepted_correct_prompts += p.accepted ? 1 : 0;
    }
    total_set_size += p.set_members.size();
  }
  if (correct_responses > 0) {
    out.response_coverage = static_cast<double>(covered_responses) /
                            static_cast<double>(correct_responses);
  }
  if (correct_prompts > 0) {
    out.prompt_coverage = static_cast<double>(accepted_correct_prompts) /
                          static_cast<double>(correct_prompts);
  }
  out.aps = static_cast<double>(total_set_size) /
            static_cast<double>(prompts.size());
  return out;
}

SscvResult sscv(std::span<const std::size_t> set_sizes,
                std::span<const int> contains_truth, double alpha,
                std::span<const SizeStratum> strata) {
  if (set_sizes.size() != contains_truth.size()) {
    throw ValidationError("set sizes and coverage flags differ in length");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  for (std::size_t b = 0; b < strata.size(); ++b) {
    if (strata[b].lo < 1 || strata[b].lo > strata[b].hi) {
      throw ValidationError("stratum bounds must satisfy 1 <= lo <= hi");
    }
    for (std::size_t c = 0; c < b; ++c) {
      if (strata[b].lo <= strata[c].hi && strata[c].lo <= strata[b].hi) {
        throw ValidationError("size strata overlap");
      }
    }
  }
  std::vector<std::size_t> members(strata.size(), 0);
  std::vector<std::size_t> covered(strata.size(), 0);
  SscvResult out;
  for (std::size_t i = 0; i < set_sizes.size(); ++i) {
    if (set_sizes[i] == 0) {
      ++out.excluded_empty;
      continue;
    }
    bool placed = false;
    for (std::size_t b = 0; b < strata.size(); ++b) {
      if (set_sizes[i] >= strata[b].lo && set_sizes[i] <= strata[b].hi) {
        ++members[b];
        covered[b] += contains_truth[i] != 0 ? 1 : 0;
        placed = true;
        break;
      }
    }
    if (!placed) ++out.unstratified;
  }
  for (std::size_t b = 0; b < strata.size(); ++b) {
    if (members[b] == 0) continue;
    const double cov =
        static_cast<double>(covered[b]) / static_cast<double>(members[b]);
    const double shortfall = std::max(0.0, (1.0 - alpha) - cov);
    out.value = std::max(out.value.value_or(0.0), shortfall);
  }
  return out;
}

CalibrationScores calibration_scores(std::span<const double> confidences,
                                     std::span<const int> correctness,
                                     std::size_t bins) {
  check_binary(confidences, correctness);
  if (confidences.empty()) {
    throw ValidationError("calibration scores of an empty set");
  }
  if (bins < 1) throw ValidationError("bin count must be at least 1");
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<double> correct_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  CalibrationScores out;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw ValidationError("confidences must lie in [0, 1]");
    }
    const auto b = std::min(
        bins - 1, static_cast<std::size_t>(std::floor(c * static_cast<double>(bins))));
    conf_sum[b] += c;
    correct_sum[b] += correctness[i];
    ++count[b];
    const double diff = c - correctness[i];
    out.brier += diff * diff;
  }
  const auto total = static_cast<double>(confidences.size());
  out.brier /= total;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const auto nb = static_cast<double>(count[b]);
    out.ece += (nb / total) * std::abs(correct_sum[b] / nb - conf_sum[b] / nb);
  }
  return out;
}

MetricsReport evaluate_prompts(std::span<const EvaluatedPrompt> prompts,
                               const EvaluationOptions& options) {
  if (prompts.empty()) throw ValidationError("no prompts to evaluate");
  MetricsReport report;
  report.alpha = options.alpha;
  report.num_prompts = prompts.size();

  std::vector<double> scores;
  std::vector<int> errors;
  std::vector<double> confidences;
  std::vector<int> correct;
  std::size_t accepted = 0;
  std::size_t accepted_wrong = 0;
  for (const auto& p : prompts) {
    scores.push_back(p.u_hat);
    errors.push_back(p.prompt_error);
    confidences.push_back(std::clamp(1.0 - p.u_hat, 0.0, 1.0));
    correct.push_back(1 - p.prompt_error);
    if (p.accepted) {
      ++accepted;
      accepted_wrong += (p.prompt_error == 1);
    }
  }

  const ClassCounts counts = check_binary(scores, errors);
  if (counts.positives > 0 && counts.negatives > 0) {
    report.auroc = auroc(scores, errors);
    report.aupr = aupr(scores, errors);
    report.fpr_at_95_tpr = fpr_at_tpr(scores, errors, 0.95);
    report.fpr_at_90_tpr = fpr_at_tpr(scores, errors, 0.90);
  }
  report.auarc = auarc(scores, errors);

  const auto total = static_cast<double>(prompts.size());
  report.acceptance_rate = static_cast<double>(accepted) / total;
  report.rejection_rate = 1.0 - *report.acceptance_rate;
  if (accepted > 0) {
    report.selective_risk =
        static_cast<double>(accepted_wrong) / static_cast<double>(accepted);
    report.selective_accuracy = 1.0 - *report.selective_risk;
  }

  const CoverageMetrics cov = coverage_metrics(prompts);
  report.response_coverage = cov.response_coverage;
  report.prompt_coverage = cov.prompt_coverage;
  report.aps = cov.aps;

  // Strata only hold prompts with at least one correct sampled response;
  // coverage means the set contains one of them.
  std::vector<std::size_t> sizes;
  std::vector<int> hit;
  for (const auto& p : prompts) {
    bool any_correct = false;
    bool covered = false;
    for (std::size_t i = 0; i < p.response_errors.size(); ++i) {
      if (p.response_errors[i] != 0) continue;
      any_correct = true;
      if (std::binary_search(p.set_members.begin(), p.set_members.end(), i)) {
        covered = true;
      }
    }
    if (!any_correct) continue;
    sizes.push_back(p.set_members.size());
    hit.push_back(covered ? 1 : 0);
  }
  const SscvResult s = sscv(sizes, hit, options.alpha, options.strata);
  report.sscv = s.value;
  report.sscv_excluded_empty = s.excluded_empty;

  const CalibrationScores cal =
      calibration_scores(confidences, correct, options.ece_bins);
  report.ece = cal.ece;
  report.brier = cal.brier;
  return report;
}

}  // namespace semconf
