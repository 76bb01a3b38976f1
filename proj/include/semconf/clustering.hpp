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

#ifndef SEMCONF_CLUSTERING_HPP_
#define SEMCONF_CLUSTERING_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "semconf/geometry.hpp"

namespace semconf {

inline constexpr double kDefaultEpsilon = 0.35;

// Partition of response indices produced by cutting an average-linkage
// dendrogram at `epsilon`. Clusters are in canonical order: members sorted
// ascending, clusters sorted by their smallest member.
struct ClusterSet {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<EmbeddingVector> centroids;
  double epsilon = kDefaultEpsilon;

  std::size_t size() const { return clusters.size(); }
  std::size_t num_points() const;
  std::size_t largest_cluster_size() const;
};

// Row i holds response i's weights over the K clusters.
struct SoftAssignment {
  std::vector<std::vector<double>> a;  // (1 + cos(v_i, c_k)) / 2
  std::vector<std::vector<double>> s;  // a row-normalized

  std::size_t num_responses() const { return s.size(); }
  std::size_t num_clusters() const { return s.empty() ? 0 : s.front().size(); }
};

struct SemanticProfile {
  std::vector<double> mass;  // column means of s
  double entropy_nats = 0.0;
  double u = 0.0;  // entropy / log K, 0 when K = 1
  std::size_t dominant_cluster = 0;
  std::size_t representative_response = 0;
};

// Average-linkage agglomerative clustering under cosine dissimilarity.
// Merging continues while the smallest inter-cluster linkage is <= epsilon.
// Among equal linkages the pair with the lexicographically smallest
// (min index, max index) of cluster representatives merges first, where a
// cluster's representative is its smallest member index.
ClusterSet hac_cluster(std::span<const EmbeddingVector> embeddings,
                       double epsilon);

// l2-normalized mean of the members. Falls back to the first member when the
// mean is (numerically) the zero vector.
EmbeddingVector cluster_centroid(std::span<const EmbeddingVector> embeddings,
                                 std::span<const std::size_t> members);

SoftAssignment soft_assign(std::span<const EmbeddingVector> embeddings,
                           const ClusterSet& clusters);

SemanticProfile semantic_profile(const SoftAssignment& assignment);

// Shannon entropy in nats divided by log(size); 0 for a single-element mass.
double normalized_entropy(std::span<const double> mass);

}  // namespace semconf

#endif  // SEMCONF_CLUSTERING_HPP_
