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

#ifndef SEMCONF_CLIENTS_HPP_
#define SEMCONF_CLIENTS_HPP_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "semconf/geometry.hpp"
#include "semconf/ingestion.hpp"

namespace semconf {

// Where an OpenAI-compatible service lives and how hard to try.
struct Endpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string api_key;   // sent as a bearer token; never logged
  double timeout_seconds = 60.0;
  std::size_t max_attempts = 3;
  double retry_backoff_seconds = 0.5;  // doubles after each failed attempt
  double min_request_interval_seconds = 0.0;  // per-endpoint rate ceiling

  // Fills base_url / api_key from the environment when unset.
  static Endpoint from_env(const char* url_var, const char* key_var,
                           std::string fallback_url = {});
};

inline constexpr const char* kLlmUrlEnv = "SEMCONF_LLM_BASE_URL";
inline constexpr const char* kLlmKeyEnv = "SEMCONF_LLM_API_KEY";
inline constexpr const char* kEmbedUrlEnv = "SEMCONF_EMBED_BASE_URL";
inline constexpr const char* kEmbedKeyEnv = "SEMCONF_EMBED_API_KEY";

// Spaces successive requests by at least a fixed interval.
class RateLimiter {
 public:
  explicit RateLimiter(double min_interval_seconds);
  void acquire();

 private:
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
  std::mutex mutex_;
};

struct CompletionBatch {
  std::vector<std::string> texts;  // may hold fewer than requested, or ""
  nlohmann::json metadata;
};

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  // One request for `count` completions. Throws TransportError when the
  // endpoint keeps failing after the configured attempts.
  virtual CompletionBatch complete(const std::string& prompt,
                                   const SamplingConfig& config,
                                   std::size_t count) = 0;
};

// POST {base_url}/chat/completions.
class OpenAiCompletionClient : public CompletionClient {
 public:
  explicit OpenAiCompletionClient(Endpoint endpoint);
  CompletionBatch complete(const std::string& prompt,
                           const SamplingConfig& config,
                           std::size_t count) override;

 private:
  Endpoint endpoint_;
  RateLimiter limiter_;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Part of the cache key and of the calibration fingerprint.
  virtual std::string identity() const = 0;
  // Raw (not necessarily normalized) vectors, one per text, in order.
  virtual std::vector<std::vector<double>> embed_batch(
      std::span<const std::string> texts) = 0;
};

// POST {base_url}/embeddings.
class OpenAiEmbedder : public Embedder {
 public:
  OpenAiEmbedder(Endpoint endpoint, std::string model);
  std::string identity() const override { return "openai:" + model_; }
  std::vector<std::vector<double>> embed_batch(
      std::span<const std::string> texts) override;
  std::size_t request_count() const { return requests_.load(); }

 private:
  Endpoint endpoint_;
  std::string model_;
  RateLimiter limiter_;
  std::atomic<std::size_t> requests_{0};
};

// Deterministic offline encoder: signed feature hashing of lowercase word
// tokens (minus a few stop words) into `dim` buckets. Texts sharing content
// words land close together in cosine geometry.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 64);
  std::string identity() const override;
  std::vector<std::vector<double>> embed_batch(
      std::span<const std::string> texts) override;
  std::vector<double> embed_one(const std::string& text) const;

 private:
  std::size_t dim_;
};

// Content-addressed on-disk store:
//   <root>/<sha256(encoder identity)[:16]>/<digest[:2]>/<digest>.json
// where digest = sha256(text). Each file holds {"encoder", "dim", "values"}.
// The whole tree may be deleted at any time.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path root);

  std::optional<EmbeddingVector> get(const std::string& encoder,
                                     const std::string& text);
  void put(const std::string& encoder, const std::string& text,
           const EmbeddingVector& vector);

  std::filesystem::path entry_path(const std::string& encoder,
                                   const std::string& text) const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::filesystem::path root_;
  std::shared_mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> memory_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Cached texts are served locally; the remaining distinct texts go to the
// embedder in one batch. Results are l2-normalized. Throws ValidationError
// for empty texts (before any request) and DimensionMismatchError when the
// batch disagrees on dimension.
std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts,
                                         Embedder& embedder,
                                         EmbeddingCache* cache);

struct SamplingOptions {
  std::string prompt_template = "{prompt}";
  // Extra rounds for slots that came back empty.
  std::size_t max_resample_rounds = 3;
};

// Substitutes {prompt} in the template.
std::string render_prompt(const std::string& prompt_template,
                          const std::string& prompt);

// Fills record.responses with exactly config.n non-empty generations and
// stores request metadata in record.sampling. Throws TransportError when the
// endpoint fails, or when slots stay empty after the resample budget.
void sample_responses(PromptRecord& record, const SamplingConfig& config,
                      CompletionClient& client, const SamplingOptions& options);

// Embeds responses (and the reference answer, when present) of every record
// lacking embeddings.
void embed_records(std::span<PromptRecord> records, Embedder& embedder,
                   EmbeddingCache* cache);

}  // namespace semconf

#endif  // SEMCONF_CLIENTS_HPP_
