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

#include "semconf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "semconf/error.hpp"

namespace semconf {

EmbeddingVector normalize(std::span<const double> raw) {
  if (raw.size() < 2) {
    throw ValidationError("embedding dimension must be at least 2, got " +
                          std::to_string(raw.size()));
  }
  double sq = 0.0;
  for (double x : raw) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DegenerateEmbeddingError("cannot normalize embedding with norm " +
                                   std::to_string(norm));
  }
  std::vector<double> out(raw.begin(), raw.end());
  // Already unit up to rounding: keep the bits so that normalizing twice, or
  // reloading a saved vector, is a no-op.
  const double slack = 4.0 * static_cast<double>(raw.size()) *
                       std::numeric_limits<double>::epsilon();
  if (std::abs(sq - 1.0) <= slack) return EmbeddingVector(std::move(out));
  for (double& x : out) x /= norm;
  return EmbeddingVector(std::move(out));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatchError("embedding dimensions differ: " +
                                 std::to_string(a.dim()) + " vs " +
                                 std::to_string(b.dim()));
  }
  const auto va = a.values();
  const auto vb = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i];
  return std::clamp(dot, -1.0, 1.0);
}

double cosine_dissimilarity(const EmbeddingVector& a,
                            const EmbeddingVector& b) {
  return 1.0 - cosine_similarity(a, b);
}

CorrectnessLabel label_correct(const EmbeddingVector& response,
                               const EmbeddingVector& reference,
                               double tau_cos) {
  if (!(tau_cos > 0.0 && tau_cos < 1.0)) {
    throw ValidationError("tau_cos must lie in (0, 1), got " +
                          std::to_string(tau_cos));
  }
  return cosine_similarity(response, reference) >= tau_cos
             ? CorrectnessLabel::kCorrect
             : CorrectnessLabel::kIncorrect;
}

}  // namespace semconf
