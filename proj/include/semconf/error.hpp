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

#ifndef SEMCONF_ERROR_HPP_
#define SEMCONF_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace semconf {

// Bad input or configuration. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Embedding with zero norm, or any vector that cannot be normalized.
class DegenerateEmbeddingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Artifact produced under a different pipeline configuration.
class FingerprintMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failures outside the caller's control: network, filesystem. Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace semconf

#endif  // SEMCONF_ERROR_HPP_
