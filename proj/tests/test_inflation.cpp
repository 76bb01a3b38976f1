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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "semconf/clustering.hpp"
#include "semconf/error.hpp"
#include "semconf/inflation.hpp"

using semconf::BrittlenessFeatures;
using semconf::FeatureWeights;
using semconf::InflationConfig;

TEST_CASE("kappa is the median largest-cluster size") {
  CHECK(semconf::fit_kappa(std::vector<std::size_t>{8, 10, 6}) ==
        oracle::median({8, 10, 6}));
  CHECK(semconf::fit_kappa(std::vector<std::size_t>{10}) == 10.0);
  CHECK(semconf::fit_kappa(std::vector<std::size_t>{4, 8}) == oracle::median({4, 8}));
  CHECK(semconf::fit_kappa(std::vector<std::size_t>{4, 8}) == 6.0);
  CHECK_THROWS_AS(semconf::fit_kappa(std::vector<std::size_t>{}), semconf::ValidationError);
}

TEST_CASE("tau_ref is a linearly interpolated quantile") {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4};
  CHECK(semconf::fit_tau_ref(grid, 0.75) ==
        doctest::Approx(oracle::linear_quantile(grid, 0.75)).epsilon(1e-15));
  CHECK(semconf::fit_tau_ref(grid, 0.75) == doctest::Approx(0.325).epsilon(1e-12));
  CHECK(semconf::fit_tau_ref(std::vector<double>{0.5, 0.5, 0.5}, 0.9) == 0.5);
  CHECK(semconf::fit_tau_ref(std::vector<double>{0.2, 0.8}, 0.5) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(semconf::fit_tau_ref(grid, 1.0), semconf::ValidationError);
  CHECK_THROWS_AS(semconf::fit_tau_ref(grid, 0.4), semconf::ValidationError);
  CHECK_THROWS_AS(semconf::fit_tau_ref(std::vector<double>{}, 0.75), semconf::ValidationError);
}

TEST_CASE("tau_ref matches the oracle on random inputs regardless of order") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + t % 50);
    for (double& x : v) x = u(rng);
    const double gamma = 0.5 + 0.49 * u(rng);
    const double expected = oracle::linear_quantile(v, gamma);
    CHECK(semconf::fit_tau_ref(v, gamma) == doctest::Approx(expected).epsilon(1e-12));
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(semconf::fit_tau_ref(v, gamma) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("weight presets are valid and distinct") {
  for (const auto& name : FeatureWeights::preset_names()) {
    const auto w = FeatureWeights::preset(name);
    REQUIRE(w.has_value());
    CHECK_NOTHROW(w->validate());
  }
  CHECK(FeatureWeights::preset("UNIFORM") == FeatureWeights::uniform());
  CHECK_FALSE(FeatureWeights::preset("nope").has_value());
  CHECK(FeatureWeights::entropy() != FeatureWeights::margin());
  FeatureWeights bad;
  bad.values = {0.5, 0.5, 0.5, 0.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), semconf::ValidationError);
  bad.values = {1.2, -0.2, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), semconf::ValidationError);
}

namespace {

struct Fixture {
  std::vector<semconf::EmbeddingVector> points;
  semconf::ClusterSet clusters;
  semconf::SoftAssignment assignment;
  semconf::SemanticProfile profile;
};

Fixture build(const std::vector<oracle::Vec>& raw) {
  Fixture f;
  for (const auto& v : raw) f.points.push_back(semconf::normalize(v));
  f.clusters = semconf::hac_cluster(f.points, 0.35);
  f.assignment = semconf::soft_assign(f.points, f.clusters);
  f.profile = semconf::semantic_profile(f.assignment);
  return f;
}

}  // namespace

TEST_CASE("members sitting on their centroid have zero dispersion") {
  const auto f = build({{1, 0}, {1, 0}, {1, 0}, {1, 0}, {0, 1}});
  InflationConfig cfg;
  cfg.kappa = 8;
  cfg.tau_ref = 0.6;
  const auto feat = semconf::compute_features(f.profile, f.assignment, f.clusters, cfg);
  CHECK(feat.dispersion == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(feat.centroid_distance == doctest::Approx(0.0).epsilon(1e-12));
  // Dominant cluster holds 4 members: min(1, 8 / 4) = 1.
  CHECK(feat.size_penalty == 1.0);
}

TEST_CASE("size penalty and margin follow their closed forms") {
  std::vector<oracle::Vec> raw(10, oracle::Vec{1, 0});
  const auto f = build(raw);
  InflationConfig cfg;
  cfg.kappa = 8;
  cfg.tau_ref = 0.6;
  auto feat = semconf::compute_features(f.profile, f.assignment, f.clusters, cfg);
  CHECK(feat.size_penalty == doctest::Approx(8.0 / 10.0).epsilon(1e-15));
  // u = 0 here, so the margin is 1 - 0 / 0.6.
  CHECK(feat.margin == doctest::Approx(1.0));

  semconf::SemanticProfile p = f.profile;
  p.u = 0.3;
  feat = semconf::compute_features(p, f.assignment, f.clusters, cfg);
  CHECK(feat.margin == doctest::Approx(1.0 - 0.3 / 0.6).epsilon(1e-15));
  p.u = 0.6;
  CHECK(semconf::compute_features(p, f.assignment, f.clusters, cfg).margin == 0.0);
  p.u = 0.9;
  CHECK(semconf::compute_features(p, f.assignment, f.clusters, cfg).margin == 0.0);
  cfg.tau_ref = 0.0;
  CHECK(semconf::compute_features(p, f.assignment, f.clusters, cfg).margin == 0.0);
}

TEST_CASE("dispersion is the mean half cosine distance to the centroid") {
  const auto f = build({{1, 0.2}, {1, -0.2}, {1, 0.0}});
  REQUIRE(f.clusters.size() == 1);
  const auto& c = f.clusters.centroids[0];
  double expected = 0.0;
  for (const auto& p : f.points) {
    expected += (1.0 - semconf::cosine_similarity(p, c)) / 2.0;
  }
  expected /= 3.0;
  const auto feat = semconf::compute_features(f.profile, f.assignment, f.clusters, {});
  CHECK(feat.dispersion == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("inflation factor endpoints") {
  CHECK(semconf::inflation_factor(0.0) == 1.0);
  CHECK(semconf::inflation_factor(1.0) == 2.0);
  CHECK(semconf::inflate_odds(0.4, 1.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(semconf::inflate_odds(0.5, 2.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(semconf::inflate_odds(0.0, 2.0) == 0.0);
  CHECK(semconf::inflate_odds(1.0, 2.0) == 1.0);
}

TEST_CASE("inflate combines features with the configured weights") {
  const BrittlenessFeatures f{1.0, 1.0, 1.0, 1.0, 1.0};
  InflationConfig cfg;
  const auto out = semconf::inflate(0.5, f, cfg);
  CHECK(out.brittleness == doctest::Approx(1.0));
  CHECK(out.lambda == doctest::Approx(2.0));
  CHECK(out.u_hat == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const auto benign = semconf::inflate(0.5, BrittlenessFeatures{}, cfg);
  CHECK(benign.u_hat == 0.5);
}

TEST_CASE("inflation grid properties") {
  for (int i = 0; i <= 100; ++i) {
    const double u = i / 100.0;
    double previous_lambda = 0.0;
    for (int j = 0; j <= 100; ++j) {
      const double b = j / 100.0;
      const double lambda = semconf::inflation_factor(b);
      const double u_hat = semconf::inflate_odds(u, lambda);
      CHECK(lambda >= 1.0);
      CHECK(lambda <= 2.0);
      CHECK(lambda > previous_lambda);
      previous_lambda = lambda;
      CHECK(u_hat >= u);
      CHECK(u_hat <= 1.0);
      const bool fixed = j == 0 || i == 0 || i == 100;
      CHECK((u_hat == u) == fixed);
      if (i > 0 && i < 100) {
        const double odds_in = u / (1.0 - u);
        const double odds_out = u_hat / (1.0 - u_hat);
        CHECK(std::abs(odds_out - lambda * odds_in) <= 1e-9 * std::max(1.0, odds_out));
      }
      if (j > 0 && j < 100) {
        const double lo = semconf::inflation_factor((j - 1) / 100.0);
        const double hi = semconf::inflation_factor((j + 1) / 100.0);
        CHECK(lambda <= 0.5 * (lo + hi) + 1e-15);
      }
    }
  }
}

TEST_CASE("inflation preserves the order of base uncertainties") {
  for (int j = 0; j <= 20; ++j) {
    const double lambda = semconf::inflation_factor(j / 20.0);
    double previous = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const double u_hat = semconf::inflate_odds(i / 100.0, lambda);
      CHECK(u_hat > previous);
      previous = u_hat;
    }
  }
}

TEST_CASE("raising any single feature never lowers the adjusted score") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& name : FeatureWeights::preset_names()) {
    InflationConfig cfg;
    cfg.weights = *FeatureWeights::preset(name);
    for (int t = 0; t < 200; ++t) {
      BrittlenessFeatures f{unit(rng), unit(rng), unit(rng), unit(rng), unit(rng)};
      const double u = unit(rng);
      const double base = semconf::inflate(u, f, cfg).u_hat;
      for (int l = 0; l < 5; ++l) {
        BrittlenessFeatures g = f;
        double* fields[] = {&g.u, &g.centroid_distance, &g.dispersion, &g.size_penalty,
                            &g.margin};
        *fields[l] = std::min(1.0, *fields[l] + 0.1);
        CHECK(semconf::inflate(u, g, cfg).u_hat >= base);
      }
    }
  }
}
