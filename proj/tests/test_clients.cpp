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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "semconf/clients.hpp"
#include "semconf/error.hpp"
#include "semconf/stub_server.hpp"
#include "test_support.hpp"

using semconf::StubOptions;
using semconf::StubServer;

namespace {

semconf::Endpoint endpoint_for(const StubServer& server) {
  semconf::Endpoint e;
  e.base_url = server.base_url();
  e.timeout_seconds = 5.0;
  e.max_attempts = 3;
  e.retry_backoff_seconds = 0.01;
  return e;
}

semconf::PromptRecord prompt_record(const std::string& text) {
  semconf::PromptRecord r;
  r.id = "x";
  r.prompt = text;
  return r;
}

}  // namespace

TEST_CASE("sampling against canned completions fills every slot") {
  StubOptions opts;
  opts.canned["What is 2+2?"] = {"4", "four"};
  StubServer server(opts);
  server.start();
  semconf::OpenAiCompletionClient client(endpoint_for(server));
  auto record = prompt_record("What is 2+2?");
  semconf::sample_responses(record, semconf::SamplingConfig{}, client, {});
  REQUIRE(record.responses.size() == 10);
  for (const auto& r : record.responses) CHECK((r == "4" || r == "four"));
  CHECK(record.sampling.at("top_p") == 0.9);
  CHECK(record.sampling.at("temperature") == 0.3);
}

TEST_CASE("transient server errors are retried") {
  StubOptions opts;
  opts.fail_first_completions = 2;
  StubServer server(opts);
  server.start();
  semconf::OpenAiCompletionClient client(endpoint_for(server));
  auto record = prompt_record("Who wrote Hamlet?");
  semconf::sample_responses(record, semconf::SamplingConfig{}, client, {});
  CHECK(record.responses.size() == 10);
  CHECK(server.completion_requests() >= 3);
}

TEST_CASE("persistent server errors surface as transport errors") {
  StubOptions opts;
  opts.fail_first_completions = 1000;
  StubServer server(opts);
  server.start();
  semconf::OpenAiCompletionClient client(endpoint_for(server));
  auto record = prompt_record("Who wrote Hamlet?");
  CHECK_THROWS_AS(semconf::sample_responses(record, semconf::SamplingConfig{}, client, {}),
                  semconf::TransportError);
  CHECK(server.completion_requests() == 3);
}

TEST_CASE("empty generations are resampled") {
  StubOptions opts;
  opts.empty_choice_every = 3;
  StubServer server(opts);
  server.start();
  semconf::OpenAiCompletionClient client(endpoint_for(server));
  auto record = prompt_record("Name a prime number.");
  semconf::sample_responses(record, semconf::SamplingConfig{}, client, {});
  REQUIRE(record.responses.size() == 10);
  for (const auto& r : record.responses) CHECK_FALSE(r.empty());
  CHECK(server.completion_requests() >= 2);
}

TEST_CASE("an unreachable endpoint is a transport error") {
  semconf::Endpoint e;
  e.base_url = "http://127.0.0.1:1/v1";
  e.timeout_seconds = 1.0;
  e.max_attempts = 1;
  semconf::OpenAiCompletionClient client(e);
  auto record = prompt_record("hello");
  CHECK_THROWS_AS(semconf::sample_responses(record, semconf::SamplingConfig{}, client, {}),
                  semconf::TransportError);
}

TEST_CASE("prompt templates substitute the prompt") {
  CHECK(semconf::render_prompt("Q: {prompt}\nA:", "why?") == "Q: why?\nA:");
  CHECK(semconf::render_prompt("{prompt}", "x") == "x");
}

TEST_CASE("hash embedder is deterministic and groups shared words") {
  semconf::HashEmbedder e(64);
  const auto a = e.embed_one("Canberra is the capital");
  CHECK(a == e.embed_one("Canberra is the capital"));
  const std::vector<std::string> texts{"canberra capital", "Canberra", "Sydney"};
  const auto vs = e.embed_batch(texts);
  const auto n0 = semconf::normalize(vs[0]);
  const auto n1 = semconf::normalize(vs[1]);
  const auto n2 = semconf::normalize(vs[2]);
  CHECK(semconf::cosine_similarity(n0, n1) > semconf::cosine_similarity(n0, n2));
}

TEST_CASE("embedding cache serves repeats without the network") {
  test_support::TempDir dir;
  StubServer server;
  server.start();
  semconf::OpenAiEmbedder embedder(endpoint_for(server), "stub-embed");
  semconf::EmbeddingCache cache(dir.path() / "cache");

  const std::vector<std::string> first{"alpha beta", "gamma"};
  const auto v1 = semconf::embed_texts(first, embedder, &cache);
  CHECK(server.embedding_requests() == 1);
  for (const auto& v : v1) {
    double sq = 0.0;
    for (std::size_t i = 0; i < v.dim(); ++i) sq += v[i] * v[i];
    CHECK(std::abs(sq - 1.0) <= 1e-9);
  }

  const auto v2 = semconf::embed_texts(first, embedder, &cache);
  CHECK(server.embedding_requests() == 1);
  CHECK(v2 == v1);

  const std::vector<std::string> mixed{"gamma", "delta", "alpha beta", "delta"};
  const auto v3 = semconf::embed_texts(mixed, embedder, &cache);
  CHECK(server.embedding_requests() == 2);
  CHECK(v3[0] == v1[1]);
  CHECK(v3[1] == v3[3]);

  // A fresh cache over the same directory reads the files back.
  semconf::EmbeddingCache reopened(dir.path() / "cache");
  const auto v4 = semconf::embed_texts(mixed, embedder, &reopened);
  CHECK(server.embedding_requests() == 2);
  CHECK(v4 == v3);
  CHECK(std::filesystem::exists(reopened.entry_path(embedder.identity(), "delta")));
}

TEST_CASE("empty texts are rejected before any request") {
  StubServer server;
  server.start();
  semconf::OpenAiEmbedder embedder(endpoint_for(server), "stub-embed");
  const std::vector<std::string> texts{"fine", ""};
  CHECK_THROWS_AS(semconf::embed_texts(texts, embedder, nullptr), semconf::ValidationError);
  CHECK(server.embedding_requests() == 0);
}

TEST_CASE("cache keys depend on the encoder identity") {
  test_support::TempDir dir;
  semconf::EmbeddingCache cache(dir.path());
  CHECK(cache.entry_path("a", "text") != cache.entry_path("b", "text"));
  const auto v = semconf::normalize(std::vector<double>{1.0, 2.0});
  cache.put("a", "text", v);
  CHECK(cache.get("a", "text") == v);
  CHECK_FALSE(cache.get("b", "text").has_value());
}

TEST_CASE("stub answers are deterministic per prompt") {
  CHECK(StubServer::primary_answer("p") == StubServer::primary_answer("p"));
  CHECK(StubServer::primary_answer("p") != StubServer::primary_answer("q"));
  CHECK(StubServer::alternative_answer("p", 0) != StubServer::primary_answer("p"));
}
