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
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "semconf/clustering.hpp"
#include "semconf/error.hpp"

using semconf::EmbeddingVector;

namespace {

std::vector<EmbeddingVector> embed(const std::vector<oracle::Vec>& raw) {
  std::vector<EmbeddingVector> out;
  for (const auto& v : raw) out.push_back(semconf::normalize(v));
  return out;
}

// A few tight groups around random directions.
std::vector<oracle::Vec> grouped_cloud(std::mt19937_64& rng, std::size_t n,
                                       std::size_t d, double noise) {
  std::uniform_int_distribution<std::size_t> groups(1, 4);
  std::vector<oracle::Vec> centers;
  const std::size_t k = groups(rng);
  for (std::size_t j = 0; j < k; ++j) centers.push_back(oracle::random_unit(rng, d));
  std::normal_distribution<double> g(0.0, noise / std::sqrt(static_cast<double>(d)));
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<oracle::Vec> out;
  for (std::size_t i = 0; i < n; ++i) {
    oracle::Vec v = centers[pick(rng)];
    for (double& x : v) x += g(rng);
    out.push_back(oracle::unit(v));
  }
  return out;
}

}  // namespace

TEST_CASE("two identical points and an orthogonal one form two clusters") {
  const auto pts = embed({{1, 0}, {1, 0}, {0, 1}});
  const auto cs = semconf::hac_cluster(pts, 0.35);
  // Within the pair the distance is 0; across, the average distance is 1.
  REQUIRE(cs.size() == 2);
  CHECK(cs.clusters[0] == std::vector<std::size_t>{0, 1});
  CHECK(cs.clusters[1] == std::vector<std::size_t>{2});
  CHECK(cs.largest_cluster_size() == 2);
  CHECK(cs.num_points() == 3);
}

TEST_CASE("degenerate inputs to clustering") {
  const auto one = embed({{0.3, 0.4}});
  CHECK(semconf::hac_cluster(one, 0.1).size() == 1);
  const auto same = embed({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  CHECK(semconf::hac_cluster(same, 0.01).size() == 1);
  CHECK_THROWS_AS(semconf::hac_cluster(std::vector<EmbeddingVector>{}, 0.35),
                  semconf::ValidationError);
  CHECK_THROWS_AS(semconf::hac_cluster(same, 0.0), semconf::ValidationError);
  CHECK_THROWS_AS(semconf::hac_cluster(same, 1.0), semconf::ValidationError);
}

TEST_CASE("clustering matches the naive average-linkage oracle") {
  std::mt19937_64 rng(1234);
  int compared = 0;
  while (compared < 300) {
    std::uniform_int_distribution<std::size_t> size(1, 12);
    const std::size_t d = std::vector<std::size_t>{3, 8, 64}[compared % 3];
    const double eps = std::vector<double>{0.2, 0.35, 0.5}[(compared / 3) % 3];
    const auto raw = grouped_cloud(rng, size(rng), d, 0.6);
    if (oracle::hac_margin(raw, eps) < 1e-9) continue;
    const auto cs = semconf::hac_cluster(embed(raw), eps);
    CHECK(cs.clusters == oracle::naive_hac(raw, eps));
    ++compared;
  }
}

TEST_CASE("centroids are normalized member means") {
  const auto pts = embed({{1, 0, 0}, {0.9, 0.1, 0}, {0, 0, 1}});
  const auto cs = semconf::hac_cluster(pts, 0.35);
  REQUIRE(cs.size() == 2);
  const auto& c = cs.centroids[0];
  oracle::Vec mean{pts[0][0] + pts[1][0], pts[0][1] + pts[1][1], 0.0};
  mean = oracle::unit(mean);
  for (std::size_t i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(mean[i]).epsilon(1e-12));
}

TEST_CASE("antipodal members fall back to the first member as centroid") {
  const auto pts = embed({{1, 0}, {-1, 0}});
  const std::vector<std::size_t> members{0, 1};
  const auto c = semconf::cluster_centroid(pts, members);
  CHECK(c == pts[0]);
}

TEST_CASE("soft assignment of an aligned and an orthogonal centroid") {
  // Point 0 sits on centroid 0 and is orthogonal to centroid 1.
  const auto pts = embed({{1, 0}, {0, 1}});
  const auto cs = semconf::hac_cluster(pts, 0.35);
  const auto sa = semconf::soft_assign(pts, cs);
  const double a_same = (1.0 + 1.0) / 2.0;
  const double a_orth = (1.0 + 0.0) / 2.0;
  CHECK(sa.a[0][0] == doctest::Approx(a_same));
  CHECK(sa.a[0][1] == doctest::Approx(a_orth));
  CHECK(sa.s[0][0] == doctest::Approx(a_same / (a_same + a_orth)));
  CHECK(sa.s[0][1] == doctest::Approx(a_orth / (a_same + a_orth)));
}

TEST_CASE("single cluster gives unit soft assignment and zero entropy") {
  const auto pts = embed({{1, 0.1}, {1, 0}, {1, -0.1}});
  const auto cs = semconf::hac_cluster(pts, 0.35);
  REQUIRE(cs.size() == 1);
  const auto sa = semconf::soft_assign(pts, cs);
  for (const auto& row : sa.s) CHECK(row[0] == 1.0);
  const auto p = semconf::semantic_profile(sa);
  CHECK(p.u == 0.0);
  CHECK(p.mass[0] == 1.0);
}

TEST_CASE("equidistant point splits its weight evenly") {
  const auto pts = embed({{1, 0}, {0, 1}, {1, 1}});
  semconf::ClusterSet cs;
  // Point 2 joins cluster 0, but the centroids are pinned to the two axes.
  cs.clusters = {{0, 2}, {1}};
  cs.centroids = {pts[0], pts[1]};
  const auto sa = semconf::soft_assign(pts, cs);
  CHECK(sa.s[2][0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sa.s[2][1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("soft assignment rows are stochastic") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto pts = embed(grouped_cloud(rng, 10, 16, 0.8));
    const auto sa = semconf::soft_assign(pts, semconf::hac_cluster(pts, 0.35));
    for (std::size_t i = 0; i < sa.num_responses(); ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < sa.num_clusters(); ++k) {
        CHECK(sa.s[i][k] >= 0.0);
        CHECK(sa.a[i][k] >= 0.0);
        CHECK(sa.a[i][k] <= 1.0);
        sum += sa.s[i][k];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    const auto p = semconf::semantic_profile(sa);
    CHECK(std::abs(std::accumulate(p.mass.begin(), p.mass.end(), 0.0) - 1.0) <= 1e-9);
    CHECK(p.u >= 0.0);
    CHECK(p.u <= 1.0);
  }
}

TEST_CASE("normalized entropy of a two-way split") {
  const std::vector<double> toy{0.87, 0.13};
  const double u = semconf::normalized_entropy(toy);
  CHECK(u == doctest::Approx(oracle::entropy_normalized(toy)).epsilon(1e-14));
  CHECK(std::abs(u - 0.557) <= 0.001);
  CHECK(semconf::normalized_entropy(std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(semconf::normalized_entropy(std::vector<double>{1.0}) == 0.0);
}

TEST_CASE("entropy grows as mass moves toward uniform") {
  for (std::size_t k : {2u, 3u}) {
    double previous = -1.0;
    for (int step = 0; step <= 50; ++step) {
      // Mix a point mass on cluster 0 with the uniform distribution.
      const double t = step / 50.0;
      std::vector<double> mass(k, t / static_cast<double>(k));
      mass[0] += 1.0 - t;
      const double u = semconf::normalized_entropy(mass);
      CHECK(u > previous);
      previous = u;
    }
  }
}

TEST_CASE("dominant cluster and representative use lowest index on ties") {
  semconf::SoftAssignment sa;
  sa.s = {{0.5, 0.5}, {0.5, 0.5}};
  sa.a = sa.s;
  const auto p = semconf::semantic_profile(sa);
  CHECK(p.dominant_cluster == 0);
  CHECK(p.representative_response == 0);
  CHECK(p.u == doctest::Approx(1.0));
}

TEST_CASE("input permutation leaves partition, mass and entropy unchanged") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto raw = grouped_cloud(rng, 10, 8, 0.6);
    if (oracle::hac_margin(raw, 0.35) < 1e-9) continue;
    std::vector<std::size_t> perm(raw.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<oracle::Vec> shuffled;
    for (std::size_t i : perm) shuffled.push_back(raw[i]);

    const auto a = embed(raw);
    const auto b = embed(shuffled);
    const auto ca = semconf::hac_cluster(a, 0.35);
    const auto cb = semconf::hac_cluster(b, 0.35);
    oracle::Partition mapped;
    for (const auto& c : cb.clusters) {
      std::vector<std::size_t> m;
      for (std::size_t i : c) m.push_back(perm[i]);
      mapped.push_back(m);
    }
    CHECK(oracle::canonical(mapped) == ca.clusters);
    auto pa = semconf::semantic_profile(semconf::soft_assign(a, ca));
    auto pb = semconf::semantic_profile(semconf::soft_assign(b, cb));
    CHECK(pa.u == doctest::Approx(pb.u).epsilon(1e-12));
    std::sort(pa.mass.begin(), pa.mass.end());
    std::sort(pb.mass.begin(), pb.mass.end());
    for (std::size_t k = 0; k < pa.mass.size(); ++k) {
      CHECK(pa.mass[k] == doctest::Approx(pb.mass[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("a larger cut threshold coarsens the partition") {
  std::mt19937_64 rng(4242);
  for (int t = 0; t < 100; ++t) {
    const auto pts = embed(grouped_cloud(rng, 12, 8, 0.9));
    const auto fine = semconf::hac_cluster(pts, 0.2);
    const auto coarse = semconf::hac_cluster(pts, 0.5);
    for (const auto& c : fine.clusters) {
      const auto home = std::find_if(coarse.clusters.begin(), coarse.clusters.end(),
                                     [&](const auto& big) {
                                       return std::find(big.begin(), big.end(), c[0]) !=
                                              big.end();
                                     });
      REQUIRE(home != coarse.clusters.end());
      for (std::size_t i : c) {
        CHECK(std::find(home->begin(), home->end(), i) != home->end());
      }
    }
  }
}
