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

#ifndef SEMCONF_INFLATION_HPP_
#define SEMCONF_INFLATION_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semconf/clustering.hpp"

namespace semconf {

inline constexpr double kDefaultGamma = 0.75;

// Relative contribution of each brittleness feature, in the fixed order
// <u, centroid distance, dispersion, size penalty, margin>.
struct FeatureWeights {
  std::array<double, 5> values{0.2, 0.2, 0.2, 0.2, 0.2};

  bool operator==(const FeatureWeights&) const = default;

  // Throws ValidationError unless every weight is in [0,1] and they sum to 1.
  void validate() const;

  static FeatureWeights uniform();
  static FeatureWeights entropy();
  static FeatureWeights geometry();
  static FeatureWeights support();
  static FeatureWeights margin();
  // Case-insensitive lookup of the presets above; nullopt for unknown names.
  static std::optional<FeatureWeights> preset(std::string_view name);
  static std::vector<std::string> preset_names();
};

struct InflationConfig {
  FeatureWeights weights;
  double kappa = 1.0;
  double tau_ref = 1.0;
  double gamma = kDefaultGamma;

  void validate() const;
};

// All fields lie in [0,1].
struct BrittlenessFeatures {
  double u = 0.0;
  double centroid_distance = 0.0;
  double dispersion = 0.0;
  double size_penalty = 0.0;
  double margin = 0.0;

  std::array<double, 5> as_array() const {
    return {u, centroid_distance, dispersion, size_penalty, margin};
  }
};

struct AdjustedUncertainty {
  double u = 0.0;
  double brittleness = 0.0;  // composite B in [0,1]
  double lambda = 1.0;       // odds multiplier in [1,2]
  double u_hat = 0.0;        // in [u, 1]
};

// Median over calibration prompts of the largest cluster size. Even counts
// take the mean of the middle pair.
double fit_kappa(std::span<const std::size_t> largest_cluster_sizes);
double fit_kappa(std::span<const ClusterSet> calibration_clusters);

// gamma-quantile of the calibration base uncertainties, linearly
// interpolated between order statistics. gamma must lie in [0.5, 1).
double fit_tau_ref(std::span<const double> calibration_u, double gamma);

BrittlenessFeatures compute_features(const SemanticProfile& profile,
                                     const SoftAssignment& assignment,
                                     const ClusterSet& clusters,
                                     const InflationConfig& config);

// lambda = 2 / (2 - B)
double inflation_factor(double brittleness);

// Scales the odds u / (1 - u) by lambda. u in {0, 1} is returned unchanged.
double inflate_odds(double u, double lambda);

AdjustedUncertainty inflate(double u, const BrittlenessFeatures& features,
                            const InflationConfig& config);

}  // namespace semconf

#endif  // SEMCONF_INFLATION_HPP_
