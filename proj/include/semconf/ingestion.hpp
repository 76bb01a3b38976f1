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

#ifndef SEMCONF_INGESTION_HPP_
#define SEMCONF_INGESTION_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "semconf/geometry.hpp"

namespace semconf {

struct SamplingConfig {
  std::size_t n = 10;
  double nucleus_eta = 0.9;
  double temperature = 0.3;
  std::size_t max_tokens = 128;
  std::string model_name = "default";

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

// One line of a dataset file.
struct PromptRecord {
  std::string id;
  std::string prompt;
  std::optional<std::string> reference_answer;
  std::vector<std::string> responses;
  std::vector<EmbeddingVector> response_embeddings;
  std::optional<EmbeddingVector> reference_embedding;
  std::vector<int> labels;          // e_i, 1 = incorrect
  std::optional<int> prompt_label;  // E, set once the returned response is known
  nlohmann::json sampling;          // request metadata, null when absent

  std::size_t embedding_dim() const;
};

enum class Completeness { kPromptsOnly, kWithResponses, kWithEmbeddings };

std::optional<Completeness> parse_completeness(std::string_view name);

struct LoadOptions {
  Completeness level = Completeness::kWithEmbeddings;
  bool require_reference = true;
  // Strict mode turns the first malformed line into a ValidationError;
  // otherwise malformed lines are skipped and reported.
  bool strict = true;
};

struct LoadIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  std::vector<PromptRecord> records;
  std::vector<LoadIssue> issues;
};

nlohmann::json record_to_json(const PromptRecord& record);

// Parses and validates one record. Embeddings are re-normalized.
PromptRecord record_from_json(const nlohmann::json& j, const LoadOptions& options);

// JSON Lines, one record per line, UTF-8. Blank lines are ignored.
LoadResult load_dataset(const std::filesystem::path& path,
                        const LoadOptions& options);
LoadResult parse_dataset(std::string_view content, const LoadOptions& options);

std::string serialize_dataset(std::span<const PromptRecord> records);
void write_dataset(const std::filesystem::path& path,
                   std::span<const PromptRecord> records);

// Digest of the records' canonical serialization.
std::string dataset_digest(std::span<const PromptRecord> records);

// Deterministic in (dataset digest, seed, fraction). Each record goes to
// exactly one side; the first element is the calibration split.
std::pair<std::vector<PromptRecord>, std::vector<PromptRecord>> split_records(
    std::span<const PromptRecord> records, double calibration_fraction,
    std::uint64_t seed);

// Fills e_i from the response and reference embeddings. Throws
// ValidationError when a record lacks the reference embedding.
void label_records(std::span<PromptRecord> records, double tau_cos);

// Keeps the first n responses (and their embeddings and labels). Throws when
// a record holds fewer than n.
PromptRecord truncate_responses(const PromptRecord& record, std::size_t n);

}  // namespace semconf

#endif  // SEMCONF_INGESTION_HPP_
