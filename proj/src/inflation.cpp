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

#include "semconf/inflation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "semconf/error.hpp"

namespace semconf {

void FeatureWeights::validate() const {
  double total = 0.0;
  for (double w : values) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw ValidationError("feature weights must lie in [0, 1]");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("feature weights must sum to 1, got " +
                          std::to_string(total));
  }
}

FeatureWeights FeatureWeights::uniform() {
  return {{1.0 / 5, 1.0 / 5, 1.0 / 5, 1.0 / 5, 1.0 / 5}};
}
FeatureWeights FeatureWeights::entropy() {
  return {{2.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6}};
}
FeatureWeights FeatureWeights::geometry() {
  return {{1.0 / 7, 2.0 / 7, 2.0 / 7, 1.0 / 7, 1.0 / 7}};
}
FeatureWeights FeatureWeights::support() {
  return {{1.0 / 6, 1.0 / 6, 1.0 / 6, 2.0 / 6, 1.0 / 6}};
}
FeatureWeights FeatureWeights::margin() {
  return {{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 2.0 / 6}};
}

std::optional<FeatureWeights> FeatureWeights::preset(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "uniform") return uniform();
  if (lower == "entropy") return entropy();
  if (lower == "geometry") return geometry();
  if (lower == "support") return support();
  if (lower == "margin") return margin();
  return std::nullopt;
}

std::vector<std::string> FeatureWeights::preset_names() {
  return {"uniform", "entropy", "geometry", "support", "margin"};
}

void InflationConfig::validate() const {
  weights.validate();
  if (!(kappa >= 1.0)) {
    throw ValidationError("kappa must be >= 1, got " + std::to_string(kappa));
  }
  if (!(tau_ref >= 0.0 && tau_ref <= 1.0)) {
    throw ValidationError("tau_ref must lie in [0, 1], got " +
                          std::to_string(tau_ref));
  }
  if (!(gamma >= 0.5 && gamma < 1.0)) {
    throw ValidationError("gamma must lie in [0.5, 1), got " +
                          std::to_string(gamma));
  }
}

double fit_kappa(std::span<const std::size_t> largest_cluster_sizes) {
  if (largest_cluster_sizes.empty()) {
    throw ValidationError("kappa requires a non-empty calibration set");
  }
  std::vector<std::size_t> sorted(largest_cluster_sizes.begin(),
                                  largest_cluster_sizes.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  if (m % 2 == 1) return static_cast<double>(sorted[m / 2]);
  return 0.5 * (static_cast<double>(sorted[m / 2 - 1]) +
                static_cast<double>(sorted[m / 2]));
}

double fit_kappa(std::span<const ClusterSet> calibration_clusters) {
  std::vector<std::size_t> sizes;
  sizes.reserve(calibration_clusters.size());
  for (const auto& c : calibration_clusters) {
    sizes.push_back(c.largest_cluster_size());
  }
  return fit_kappa(sizes);
}

double fit_tau_ref(std::span<const double> calibration_u, double gamma) {
  if (calibration_u.empty()) {
    throw ValidationError("tau_ref requires a non-empty calibration set");
  }
  if (!(gamma >= 0.5 && gamma < 1.0)) {
    throw ValidationError("gamma must lie in [0.5, 1), got " +
                          std::to_string(gamma));
  }
  std::vector<double> sorted(calibration_u.begin(), calibration_u.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = gamma * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BrittlenessFeatures compute_features(const SemanticProfile& profile,
                                     const SoftAssignment& assignment,
                                     const ClusterSet& clusters,
                                     const InflationConfig& config) {
  if (!(config.tau_ref >= 0.0)) {
    throw ValidationError("tau_ref must be non-negative");
  }
  const std::size_t dom = profile.dominant_cluster;
  const std::size_t rep = profile.representative_response;
  const auto& members = clusters.clusters.at(dom);

  BrittlenessFeatures f;
  f.u = std::clamp(profile.u, 0.0, 1.0);
  f.centroid_distance = std::clamp(1.0 - assignment.a.at(rep).at(dom), 0.0, 1.0);

  // (1 - cos) / 2 == 1 - a, so the dispersion is the mean of 1 - a over the
  // dominant cluster's members.
  double spread = 0.0;
  for (std::size_t i : members) spread += 1.0 - assignment.a[i][dom];
  f.dispersion =
      std::clamp(spread / static_cast<double>(members.size()), 0.0, 1.0);

  f.size_penalty =
      std::min(1.0, config.kappa / static_cast<double>(members.size()));

  // With tau_ref = 0 every u satisfies u >= tau_ref, so the margin vanishes.
  f.margin = config.tau_ref > 0.0
                 ? std::max(0.0, 1.0 - f.u / config.tau_ref)
                 : 0.0;
  return f;
}

double inflation_factor(double brittleness) {
  return 2.0 / (2.0 - std::clamp(brittleness, 0.0, 1.0));
}

double inflate_odds(double u, double lambda) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double adjusted = lambda * u / (1.0 + (lambda - 1.0) * u);
  return std::clamp(adjusted, u, 1.0);
}

AdjustedUncertainty inflate(double u, const BrittlenessFeatures& features,
                            const InflationConfig& config) {
  const auto w = config.weights.values;
  const auto l = features.as_array();
  double b = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) b += w[j] * l[j];

  AdjustedUncertainty out;
  out.u = std::clamp(u, 0.0, 1.0);
  out.brittleness = std::clamp(b, 0.0, 1.0);
  out.lambda = inflation_factor(out.brittleness);
  out.u_hat = inflate_odds(out.u, out.lambda);
  return out;
}

}  // namespace semconf
