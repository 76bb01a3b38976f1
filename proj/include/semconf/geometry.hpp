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

#ifndef SEMCONF_GEOMETRY_HPP_
#define SEMCONF_GEOMETRY_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace semconf {

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kDefaultTauCos = 0.7;

// A unit-norm point in R^d. Only constructible through normalize(), so every
// instance satisfies |v| = 1 within kUnitNormTolerance.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<double> values)
      : values_(std::move(values)) {}
  friend EmbeddingVector normalize(std::span<const double> raw);

  std::vector<double> values_;
};

// 0 = correct, 1 = incorrect.
enum class CorrectnessLabel : int { kCorrect = 0, kIncorrect = 1 };

inline int as_bit(CorrectnessLabel label) { return static_cast<int>(label); }

// Throws DegenerateEmbeddingError on zero (or non-finite) norm and
// ValidationError when d < 2. Input that is already unit length up to
// rounding is returned unchanged, so normalizing is idempotent.
EmbeddingVector normalize(std::span<const double> raw);

// Dot product of two unit vectors, clamped to [-1, 1]. Throws
// DimensionMismatchError when dimensions differ.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// 1 - cosine_similarity, in [0, 2].
double cosine_dissimilarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Correct iff cos(response, reference) >= tau_cos. tau_cos must lie in (0,1).
CorrectnessLabel label_correct(const EmbeddingVector& response,
                               const EmbeddingVector& reference,
                               double tau_cos);

}  // namespace semconf

#endif  // SEMCONF_GEOMETRY_HPP_
