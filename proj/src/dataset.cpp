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
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>
#include <unordered_set>

#include "semconf/error.hpp"
#include "semconf/ingestion.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;

void SamplingConfig::validate() const {
  if (n < 2) throw ValidationError("sample count n must be at least 2");
  if (!(nucleus_eta > 0.0 && nucleus_eta <= 1.0)) {
    throw ValidationError("nucleus eta must lie in (0, 1]");
  }
  if (!(temperature > 0.0)) {
    throw ValidationError("temperature must be positive");
  }
  if (max_tokens == 0) throw ValidationError("max_tokens must be positive");
  if (model_name.empty()) throw ValidationError("model name must be set");
}

std::size_t PromptRecord::embedding_dim() const {
  if (!response_embeddings.empty()) return response_embeddings.front().dim();
  if (reference_embedding) return reference_embedding->dim();
  return 0;
}

std::optional<Completeness> parse_completeness(std::string_view name) {
  if (name == "prompts-only") return Completeness::kPromptsOnly;
  if (name == "with-responses") return Completeness::kWithResponses;
  if (name == "with-embeddings") return Completeness::kWithEmbeddings;
  return std::nullopt;
}

namespace {

bool has(const json& j, const char* key) {
  return j.contains(key) && !j.at(key).is_null();
}

std::string require_string(const json& j, const char* key) {
  if (!has(j, key)) {
    throw ValidationError(std::string("missing required field '") + key + "'");
  }
  if (!j.at(key).is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return j.at(key).get<std::string>();
}

EmbeddingVector parse_embedding(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array");
  std::vector<double> raw;
  raw.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ValidationError(what + " must hold numbers");
    raw.push_back(x.get<double>());
  }
  try {
    return normalize(raw);
  } catch (const ValidationError& e) {
    throw DegenerateEmbeddingError(what + ": " + e.what());
  }
}

json embedding_to_json(const EmbeddingVector& v) {
  return json(std::vector<double>(v.values().begin(), v.values().end()));
}

}  // namespace

json record_to_json(const PromptRecord& r) {
  json j;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  if (r.reference_answer) j["reference_answer"] = *r.reference_answer;
  if (!r.responses.empty()) j["responses"] = r.responses;
  if (!r.response_embeddings.empty()) {
    json arr = json::array();
    for (const auto& v : r.response_embeddings) arr.push_back(embedding_to_json(v));
    j["response_embeddings"] = std::move(arr);
  }
  if (r.reference_embedding) {
    j["reference_embedding"] = embedding_to_json(*r.reference_embedding);
  }
  if (!r.labels.empty()) j["labels"] = r.labels;
  if (r.prompt_label) j["prompt_label"] = *r.prompt_label;
  if (!r.sampling.is_null()) j["sampling"] = r.sampling;
  return j;
}

PromptRecord record_from_json(const json& j, const LoadOptions& options) {
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
  PromptRecord r;
  r.id = require_string(j, "id");
  if (r.id.empty()) throw ValidationError("field 'id' must be non-empty");
  r.prompt = require_string(j, "prompt");
  if (options.require_reference) {
    r.reference_answer = require_string(j, "reference_answer");
  } else if (has(j, "reference_answer")) {
    r.reference_answer = require_string(j, "reference_answer");
  }

  if (has(j, "responses")) {
    const auto& arr = j.at("responses");
    if (!arr.is_array()) throw ValidationError("'responses' must be an array");
    for (const auto& x : arr) {
      if (!x.is_string()) throw ValidationError("responses must be strings");
      r.responses.push_back(x.get<std::string>());
    }
  }
  const bool need_responses = options.level != Completeness::kPromptsOnly;
  const bool need_embeddings = options.level == Completeness::kWithEmbeddings;

  if (has(j, "response_embeddings")) {
    const auto& arr = j.at("response_embeddings");
    if (!arr.is_array()) {
      throw ValidationError("'response_embeddings' must be an array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      r.response_embeddings.push_back(
          parse_embedding(arr[i], "response_embeddings[" + std::to_string(i) + "]"));
    }
  }
  if (has(j, "reference_embedding")) {
    r.reference_embedding =
        parse_embedding(j.at("reference_embedding"), "reference_embedding");
  }

  if (need_embeddings) {
    if (r.response_embeddings.empty()) {
      throw ValidationError("missing required field 'response_embeddings'");
    }
    if (options.require_reference && !r.reference_embedding) {
      throw ValidationError("missing required field 'reference_embedding'");
    }
  } else if (need_responses && r.responses.empty()) {
    throw ValidationError("missing required field 'responses'");
  }
  for (const auto& text : r.responses) {
    if (text.empty() && !need_embeddings) {
      throw ValidationError("responses must be non-empty strings");
    }
  }

  const std::size_t n = r.response_embeddings.empty() ? r.responses.size()
                                                      : r.response_embeddings.size();
  if (need_responses && n < 2) {
    throw ValidationError("a record needs at least 2 responses, got " +
                          std::to_string(n));
  }
  if (!r.responses.empty() && !r.response_embeddings.empty() &&
      r.responses.size() != r.response_embeddings.size()) {
    throw ValidationError("responses and response_embeddings differ in length");
  }
  const std::size_t d = r.embedding_dim();
  for (const auto& v : r.response_embeddings) {
    if (v.dim() != d) {
      throw DimensionMismatchError("response embedding has dimension " +
                                   std::to_string(v.dim()) + ", expected " +
                                   std::to_string(d));
    }
  }
  if (r.reference_embedding && r.reference_embedding->dim() != d) {
    throw DimensionMismatchError("reference embedding has dimension " +
                                 std::to_string(r.reference_embedding->dim()) +
                                 ", expected " + std::to_string(d));
  }

  if (has(j, "labels")) {
    r.labels = j.at("labels").get<std::vector<int>>();
    for (int e : r.labels) {
      if (e != 0 && e != 1) throw ValidationError("labels must be 0 or 1");
    }
    if (r.labels.size() != n) {
      throw ValidationError("labels and responses differ in length");
    }
  }
  if (has(j, "prompt_label")) {
    r.prompt_label = j.at("prompt_label").get<int>();
    if (*r.prompt_label != 0 && *r.prompt_label != 1) {
      throw ValidationError("prompt_label must be 0 or 1");
    }
  }
  if (has(j, "sampling")) r.sampling = j.at("sampling");
  return r;
}

LoadResult parse_dataset(std::string_view content, const LoadOptions& options) {
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::size_t dataset_dim = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
      }
      PromptRecord r;
      try {
        r = record_from_json(j, options);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("bad field type: ") + e.what());
      }
      const std::size_t d = r.embedding_dim();
      if (d != 0) {
        if (dataset_dim == 0) dataset_dim = d;
        if (d != dataset_dim) {
          throw DimensionMismatchError(
              "embedding dimension " + std::to_string(d) +
              " differs from the dataset's " + std::to_string(dataset_dim));
        }
      }
      if (!seen.insert(r.id).second) {
        throw ValidationError("duplicate id '" + r.id + "'");
      }
      result.records.push_back(std::move(r));
    } catch (const DimensionMismatchError& e) {
      if (options.strict) {
        throw DimensionMismatchError("line " + std::to_string(line_no) + ": " +
                                     e.what());
      }
      result.issues.push_back({line_no, e.what()});
    } catch (const ValidationError& e) {
      if (options.strict) {
        throw ValidationError("line " + std::to_string(line_no) + ": " +
                              e.what());
      }
      result.issues.push_back({line_no, e.what()});
    }
  }
  return result;
}

LoadResult load_dataset(const std::filesystem::path& path,
                        const LoadOptions& options) {
  try {
    return parse_dataset(read_file(path), options);
  } catch (const DimensionMismatchError& e) {
    throw DimensionMismatchError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_dataset(std::span<const PromptRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path,
                   std::span<const PromptRecord> records) {
  atomic_write(path, serialize_dataset(records));
}

std::string dataset_digest(std::span<const PromptRecord> records) {
  return sha256_hex(serialize_dataset(records));
}

std::pair<std::vector<PromptRecord>, std::vector<PromptRecord>> split_records(
    std::span<const PromptRecord> records, double calibration_fraction,
    std::uint64_t seed) {
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw ValidationError("calibration fraction must lie in (0, 1)");
  }
  const std::string digest = dataset_digest(records);
  std::vector<std::pair<std::string, std::size_t>> keyed;
  keyed.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    keyed.emplace_back(
        sha256_hex(digest + ":" + std::to_string(seed) + ":" + records[i].id),
        i);
  }
  std::sort(keyed.begin(), keyed.end());
  const auto cal_count = static_cast<std::size_t>(
      std::llround(calibration_fraction * static_cast<double>(records.size())));
  std::vector<std::size_t> cal_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    (k < cal_count ? cal_idx : test_idx).push_back(keyed[k].second);
  }
  // Each side keeps the original file order.
  std::sort(cal_idx.begin(), cal_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::pair<std::vector<PromptRecord>, std::vector<PromptRecord>> out;
  for (std::size_t i : cal_idx) out.first.push_back(records[i]);
  for (std::size_t i : test_idx) out.second.push_back(records[i]);
  return out;
}

void label_records(std::span<PromptRecord> records, double tau_cos) {
  for (auto& r : records) {
    if (!r.reference_embedding) {
      throw ValidationError("record '" + r.id +
                            "' has no reference embedding to label against");
    }
    r.labels.clear();
    for (const auto& v : r.response_embeddings) {
      r.labels.push_back(as_bit(label_correct(v, *r.reference_embedding, tau_cos)));
    }
  }
}

PromptRecord truncate_responses(const PromptRecord& record, std::size_t n) {
  const std::size_t have = std::max(record.responses.size(),
                                    record.response_embeddings.size());
  if (have < n) {
    throw ValidationError("record '" + record.id + "' holds " +
                          std::to_string(have) + " responses, need " +
                          std::to_string(n));
  }
  PromptRecord out = record;
  if (out.responses.size() > n) out.responses.resize(n);
  if (out.response_embeddings.size() > n) {
    out.response_embeddings.erase(out.response_embeddings.begin() + n,
                                  out.response_embeddings.end());
  }
  if (out.labels.size() > n) out.labels.resize(n);
  out.prompt_label.reset();
  return out;
}

}  // namespace semconf
