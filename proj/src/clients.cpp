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

#include "semconf/clients.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <thread>
#include <unordered_set>

#include "httplib.h"
#include "semconf/error.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;

Endpoint Endpoint::from_env(const char* url_var, const char* key_var,
                            std::string fallback_url) {
  Endpoint ep;
  if (const char* url = std::getenv(url_var); url != nullptr && *url != '\0') {
    ep.base_url = url;
  } else {
    ep.base_url = std::move(fallback_url);
  }
  if (const char* key = std::getenv(key_var); key != nullptr) ep.api_key = key;
  return ep;
}

RateLimiter::RateLimiter(double min_interval_seconds)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(std::max(0.0, min_interval_seconds)))),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    slot = std::max(next_, std::chrono::steady_clock::now());
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

ParsedUrl parse_url(const std::string& base_url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url, m, kUrl)) {
    throw ValidationError("endpoint URL must look like http[s]://host[:port]/path, got '" +
                          base_url + "'");
  }
  ParsedUrl out{m[1].str(), m[2].matched ? m[2].str() : ""};
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

// POSTs JSON with bounded retries. 5xx, 429 and connection failures are
// retried; other statuses fail at once.
json post_json(const Endpoint& ep, RateLimiter& limiter, const std::string& path,
               const json& body, json* attempts_log) {
  if (ep.base_url.empty()) {
    throw ValidationError("endpoint base URL is not configured");
  }
  const ParsedUrl url = parse_url(ep.base_url);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::duration<double>(ep.timeout_seconds);
  client.set_connection_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!ep.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + ep.api_key);
  }
  const std::string payload = body.dump();
  const std::string full_path = url.prefix + path;
  const std::size_t attempts = std::max<std::size_t>(1, ep.max_attempts);
  double backoff = ep.retry_backoff_seconds;
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
    limiter.acquire();
    auto res = client.Post(full_path, headers, payload, "application/json");
    json entry{{"attempt", attempt}, {"path", full_path}};
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      entry["error"] = last_error;
    } else {
      entry["status"] = res->status;
      if (res->status >= 200 && res->status < 300) {
        if (attempts_log) attempts_log->push_back(entry);
        try {
          return json::parse(res->body);
        } catch (const json::parse_error& e) {
          throw TransportError("endpoint returned invalid JSON: " +
                               std::string(e.what()));
        }
      }
      last_error = "HTTP " + std::to_string(res->status);
      const bool retryable = res->status >= 500 || res->status == 429;
      if (!retryable) {
        if (attempts_log) attempts_log->push_back(entry);
        throw TransportError(full_path + " failed: " + last_error);
      }
    }
    if (attempts_log) attempts_log->push_back(entry);
    spdlog::warn("{} attempt {}/{} failed: {}", full_path, attempt, attempts,
                 last_error);
    if (attempt < attempts && backoff > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
  }
  throw TransportError(full_path + " failed after " + std::to_string(attempts) +
                       " attempts: " + last_error);
}

}  // namespace

OpenAiCompletionClient::OpenAiCompletionClient(Endpoint endpoint)
    : endpoint_(std::move(endpoint)),
      limiter_(endpoint_.min_request_interval_seconds) {}

CompletionBatch OpenAiCompletionClient::complete(const std::string& prompt,
                                                 const SamplingConfig& config,
                                                 std::size_t count) {
  const json body{
      {"model", config.model_name},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config.temperature},
      {"top_p", config.nucleus_eta},
      {"max_tokens", config.max_tokens},
      {"n", count},
  };
  CompletionBatch batch;
  batch.metadata = json{{"model", config.model_name},
                        {"temperature", config.temperature},
                        {"top_p", config.nucleus_eta},
                        {"max_tokens", config.max_tokens},
                        {"n", count},
                        {"attempts", json::array()}};
  const json reply =
      post_json(endpoint_, limiter_, "/chat/completions", body,
                &batch.metadata["attempts"]);
  if (reply.contains("id")) batch.metadata["response_id"] = reply["id"];
  if (reply.contains("model")) batch.metadata["served_model"] = reply["model"];
  if (!reply.contains("choices") || !reply["choices"].is_array()) {
    throw TransportError("completion reply has no 'choices' array");
  }
  json finish = json::array();
  for (const auto& choice : reply["choices"]) {
    std::string text;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      text = choice["message"]["content"].get<std::string>();
    } else if (choice.contains("text") && choice["text"].is_string()) {
      text = choice["text"].get<std::string>();
    }
    batch.texts.push_back(std::move(text));
    finish.push_back(choice.value("finish_reason", json()));
  }
  batch.metadata["finish_reasons"] = std::move(finish);
  return batch;
}

OpenAiEmbedder::OpenAiEmbedder(Endpoint endpoint, std::string model)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      limiter_(endpoint_.min_request_interval_seconds) {}

std::vector<std::vector<double>> OpenAiEmbedder::embed_batch(
    std::span<const std::string> texts) {
  ++requests_;
  const json body{{"model", model_},
                  {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const json reply = post_json(endpoint_, limiter_, "/embeddings", body, nullptr);
  if (!reply.contains("data") || !reply["data"].is_array() ||
      reply["data"].size() != texts.size()) {
    throw TransportError("embedding reply does not hold one vector per input");
  }
  std::vector<std::vector<double>> out(texts.size());
  for (std::size_t k = 0; k < reply["data"].size(); ++k) {
    const auto& item = reply["data"][k];
    const std::size_t index = item.value("index", k);
    if (index >= out.size()) {
      throw TransportError("embedding reply index out of range");
    }
    out[index] = item.at("embedding").get<std::vector<double>>();
  }
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> kWords{
      "a", "an", "the", "is", "are", "was", "were", "of", "to", "in", "it",
      "its", "and", "or", "that", "this", "be", "i", "think", "answer"};
  return kWords;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ < 2) throw ValidationError("hash embedder dimension must be >= 2");
}

std::string HashEmbedder::identity() const {
  return "hash-v1:" + std::to_string(dim_);
}

std::vector<double> HashEmbedder::embed_one(const std::string& text) const {
  std::vector<double> v(dim_, 0.0);
  std::string token;
  auto flush = [&] {
    if (!token.empty() && !stop_words().contains(token)) {
      const std::uint64_t h = fnv1a(token, 0);
      const double sign = (fnv1a(token, 0x9e3779b97f4a7c15ULL) & 1U) ? 1.0 : -1.0;
      v[h % dim_] += sign;
    }
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  const bool all_zero =
      std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  if (all_zero) v[fnv1a(text, 7) % dim_] = 1.0;
  return v;
}

std::vector<std::vector<double>> HashEmbedder::embed_batch(
    std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path root)
    : root_(std::move(root)) {}

std::filesystem::path EmbeddingCache::entry_path(const std::string& encoder,
                                                 const std::string& text) const {
  const std::string digest = sha256_hex(text);
  return root_ / sha256_hex(encoder).substr(0, 16) / digest.substr(0, 2) /
         (digest + ".json");
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& encoder,
                                                   const std::string& text) {
  const std::string key = encoder + '\0' + text;
  {
    std::shared_lock lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const auto path = entry_path(encoder, text);
  std::optional<EmbeddingVector> found;
  if (std::filesystem::exists(path)) {
    try {
      const json j = json::parse(read_file(path));
      if (j.value("encoder", "") == encoder) {
        found = normalize(j.at("values").get<std::vector<double>>());
      }
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(),
                   e.what());
    }
  }
  std::unique_lock lock(mutex_);
  if (found) {
    ++hits_;
    memory_.emplace(key, *found);
  } else {
    ++misses_;
  }
  return found;
}

void EmbeddingCache::put(const std::string& encoder, const std::string& text,
                         const EmbeddingVector& vector) {
  const json j{{"encoder", encoder},
               {"dim", vector.dim()},
               {"values", std::vector<double>(vector.values().begin(),
                                              vector.values().end())}};
  std::unique_lock lock(mutex_);
  atomic_write(entry_path(encoder, text), j.dump());
  memory_.insert_or_assign(encoder + '\0' + text, vector);
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts,
                                         Embedder& embedder,
                                         EmbeddingCache* cache) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw ValidationError("cannot embed empty text at position " +
                            std::to_string(i));
    }
  }
  const std::string encoder = embedder.identity();
  std::vector<std::optional<EmbeddingVector>> result(texts.size());
  std::vector<std::string> pending;
  std::unordered_map<std::string, std::size_t> pending_index;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache) result[i] = cache->get(encoder, texts[i]);
    if (!result[i] && !pending_index.contains(texts[i])) {
      pending_index.emplace(texts[i], pending.size());
      pending.push_back(texts[i]);
    }
  }
  if (!pending.empty()) {
    const auto raw = embedder.embed_batch(pending);
    if (raw.size() != pending.size()) {
      throw TransportError("embedder returned " + std::to_string(raw.size()) +
                           " vectors for " + std::to_string(pending.size()) +
                           " texts");
    }
    std::vector<EmbeddingVector> fresh;
    fresh.reserve(raw.size());
    for (const auto& v : raw) {
      if (v.size() != raw.front().size()) {
        throw DimensionMismatchError("embedding dimension drifted within a batch");
      }
      fresh.push_back(normalize(v));
      if (cache) cache->put(encoder, pending[fresh.size() - 1], fresh.back());
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (!result[i]) result[i] = fresh[pending_index.at(texts[i])];
    }
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const std::size_t dim = result.empty() ? 0 : result.front()->dim();
  for (auto& r : result) {
    if (r->dim() != dim) {
      throw DimensionMismatchError(
          "cached and fresh embeddings differ in dimension");
    }
    out.push_back(std::move(*r));
  }
  return out;
}

std::string render_prompt(const std::string& prompt_template,
                          const std::string& prompt) {
  std::string out = prompt_template;
  static const std::string kSlot = "{prompt}";
  for (auto pos = out.find(kSlot); pos != std::string::npos;
       pos = out.find(kSlot, pos + prompt.size())) {
    out.replace(pos, kSlot.size(), prompt);
  }
  return out;
}

void sample_responses(PromptRecord& record, const SamplingConfig& config,
                      CompletionClient& client, const SamplingOptions& options) {
  config.validate();
  const std::string prompt = render_prompt(options.prompt_template, record.prompt);
  std::vector<std::string> slots(config.n);
  json requests = json::array();
  for (std::size_t round = 0; round <= options.max_resample_rounds; ++round) {
    std::vector<std::size_t> empty;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].empty()) empty.push_back(i);
    }
    if (empty.empty()) break;
    CompletionBatch batch = client.complete(prompt, config, empty.size());
    requests.push_back(batch.metadata);
    for (std::size_t k = 0; k < empty.size() && k < batch.texts.size(); ++k) {
      slots[empty[k]] = std::move(batch.texts[k]);
    }
  }
  const auto missing = std::count_if(slots.begin(), slots.end(),
                                     [](const std::string& s) { return s.empty(); });
  if (missing > 0) {
    throw TransportError("prompt '" + record.id + "': " +
                         std::to_string(missing) +
                         " response slots still empty after resampling");
  }
  record.responses = std::move(slots);
  record.response_embeddings.clear();
  record.labels.clear();
  record.prompt_label.reset();
  record.sampling = json{{"model", config.model_name},
                         {"temperature", config.temperature},
                         {"top_p", config.nucleus_eta},
                         {"max_tokens", config.max_tokens},
                         {"n", config.n},
                         {"requests", std::move(requests)}};
  spdlog::info("sampled {} responses for prompt '{}'", config.n, record.id);
}

void embed_records(std::span<PromptRecord> records, Embedder& embedder,
                   EmbeddingCache* cache) {
  for (auto& r : records) {
    const bool need_responses = r.response_embeddings.empty();
    const bool need_reference = !r.reference_embedding && r.reference_answer;
    if (!need_responses && !need_reference) continue;
    if (need_responses && r.responses.empty()) {
      throw ValidationError("record '" + r.id + "' has no responses to embed");
    }
    std::vector<std::string> texts;
    if (need_responses) texts = r.responses;
    if (need_reference) texts.push_back(*r.reference_answer);
    auto vectors = embed_texts(texts, embedder, cache);
    if (need_reference) {
      r.reference_embedding = std::move(vectors.back());
      vectors.pop_back();
    }
    if (need_responses) r.response_embeddings = std::move(vectors);
  }
}

}  // namespace semconf
