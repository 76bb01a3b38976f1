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

#include "semconf/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "semconf/error.hpp"

namespace semconf {

std::size_t ClusterSet::num_points() const {
  std::size_t total = 0;
  for (const auto& c : clusters) total += c.size();
  return total;
}

std::size_t ClusterSet::largest_cluster_size() const {
  std::size_t best = 0;
  for (const auto& c : clusters) best = std::max(best, c.size());
  return best;
}

namespace {

void check_embeddings(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.empty()) {
    throw ValidationError("clustering requires at least one embedding");
  }
  const std::size_t d = embeddings.front().dim();
  for (std::size_t i = 1; i < embeddings.size(); ++i) {
    if (embeddings[i].dim() != d) {
      throw DimensionMismatchError(
          "embedding " + std::to_string(i) + " has dimension " +
          std::to_string(embeddings[i].dim()) + ", expected " +
          std::to_string(d));
    }
  }
}

}  // namespace

ClusterSet hac_cluster(std::span<const EmbeddingVector> embeddings,
                       double epsilon) {
  check_embeddings(embeddings);
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon must lie in (0, 1), got " +
                          std::to_string(epsilon));
  }
  const std::size_t n = embeddings.size();

  // Slot i holds the cluster whose smallest member is i, so the slot index is
  // also the tie-breaking representative.
  std::vector<std::vector<double>> linkage(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = cosine_dissimilarity(embeddings[i], embeddings[j]);
      linkage[i][j] = dist;
      linkage[j][i] = dist;
    }
  }
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<bool> active(n, true);

  using Candidate = std::tuple<double, std::size_t, std::size_t>;
  std::set<Candidate> queue;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) queue.emplace(linkage[i][j], i, j);
  }
  auto pair_key = [&](std::size_t x, std::size_t y) {
    return Candidate{linkage[x][y], std::min(x, y), std::max(x, y)};
  };

  while (!queue.empty()) {
    const auto [dist, keep, drop] = *queue.begin();
    if (dist > epsilon) break;

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep || k == drop) continue;
      queue.erase(pair_key(k, keep));
      queue.erase(pair_key(k, drop));
    }
    queue.erase(queue.begin());

    // Lance-Williams recurrence for average linkage.
    const double size_keep = static_cast<double>(members[keep].size());
    const double size_drop = static_cast<double>(members[drop].size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep || k == drop) continue;
      const double merged =
          (size_keep * linkage[k][keep] + size_drop * linkage[k][drop]) /
          (size_keep + size_drop);
      linkage[k][keep] = merged;
      linkage[keep][k] = merged;
    }
    members[keep].insert(members[keep].end(), members[drop].begin(),
                         members[drop].end());
    members[drop].clear();
    active[drop] = false;

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep) continue;
      queue.insert(pair_key(k, keep));
    }
  }

  ClusterSet result;
  result.epsilon = epsilon;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    std::sort(members[i].begin(), members[i].end());
    result.clusters.push_back(std::move(members[i]));
  }
  // Slots are visited in increasing order of smallest member, so clusters
  // are already canonical.
  for (const auto& c : result.clusters) {
    result.centroids.push_back(cluster_centroid(embeddings, c));
  }
  return result;
}

EmbeddingVector cluster_centroid(std::span<const EmbeddingVector> embeddings,
                                 std::span<const std::size_t> members) {
  if (members.empty()) throw ValidationError("centroid of an empty cluster");
  const std::size_t d = embeddings[members.front()].dim();
  std::vector<double> sum(d, 0.0);
  for (std::size_t m : members) {
    const auto v = embeddings[m].values();
    for (std::size_t j = 0; j < d; ++j) sum[j] += v[j];
  }
  double sq = 0.0;
  for (double& x : sum) {
    x /= static_cast<double>(members.size());
    sq += x * x;
  }
  if (std::sqrt(sq) < 1e-12) return embeddings[members.front()];
  return normalize(sum);
}

SoftAssignment soft_assign(std::span<const EmbeddingVector> embeddings,
                           const ClusterSet& clusters) {
  check_embeddings(embeddings);
  if (clusters.size() == 0 || clusters.num_points() != embeddings.size()) {
    throw ValidationError(
        "cluster set does not partition the given embeddings");
  }
  const std::size_t n = embeddings.size();
  const std::size_t k_count = clusters.size();
  SoftAssignment out;
  out.a.assign(n, std::vector<double>(k_count, 0.0));
  out.s.assign(n, std::vector<double>(k_count, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double cos = cosine_similarity(embeddings[i], clusters.centroids[k]);
      out.a[i][k] = std::clamp(0.5 * (1.0 + cos), 0.0, 1.0);
      total += out.a[i][k];
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      out.s[i][k] = total > 0.0 ? out.a[i][k] / total
                                : 1.0 / static_cast<double>(k_count);
    }
  }
  return out;
}

double normalized_entropy(std::span<const double> mass) {
  if (mass.size() <= 1) return 0.0;
  double h = 0.0;
  for (double p : mass) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(mass.size())), 0.0, 1.0);
}

SemanticProfile semantic_profile(const SoftAssignment& assignment) {
  const std::size_t n = assignment.num_responses();
  const std::size_t k_count = assignment.num_clusters();
  if (n == 0 || k_count == 0) {
    throw ValidationError("semantic profile of an empty assignment");
  }
  SemanticProfile profile;
  profile.mass.assign(k_count, 0.0);
  for (const auto& row : assignment.s) {
    for (std::size_t k = 0; k < k_count; ++k) profile.mass[k] += row[k];
  }
  for (double& m : profile.mass) m /= static_cast<double>(n);

  for (double p : profile.mass) {
    if (p > 0.0) profile.entropy_nats -= p * std::log(p);
  }
  profile.u = normalized_entropy(profile.mass);

  for (std::size_t k = 1; k < k_count; ++k) {
    if (profile.mass[k] > profile.mass[profile.dominant_cluster]) {
      profile.dominant_cluster = k;
    }
  }
  const std::size_t dom = profile.dominant_cluster;
  for (std::size_t i = 1; i < n; ++i) {
    if (assignment.s[i][dom] >
        assignment.s[profile.representative_response][dom]) {
      profile.representative_response = i;
    }
  }
  return profile;
}

}  // namespace semconf
