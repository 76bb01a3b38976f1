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

#ifndef SEMCONF_STUB_SERVER_HPP_
#define SEMCONF_STUB_SERVER_HPP_

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace semconf {

// Canned OpenAI-compatible endpoints on 127.0.0.1 for offline runs.
// /v1/chat/completions answers with single-word replies derived from the
// prompt: the primary answer with probability 0.7, otherwise one of three
// alternatives. /v1/embeddings returns HashEmbedder vectors.
struct StubOptions {
  std::size_t embed_dim = 64;
  // Prompt text -> replies, cycled per choice. Overrides the generator.
  std::map<std::string, std::vector<std::string>> canned;
  std::size_t fail_first_completions = 0;  // answered with HTTP 503
  std::size_t fail_first_embeddings = 0;
  std::size_t empty_choice_every = 0;  // every k-th choice is "" (0 = never)
};

class StubServer {
 public:
  explicit StubServer(StubOptions options = {});
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  // Binds to `port` (0 picks a free one) and serves on a background thread.
  void start(int port = 0);
  void stop();
  // Blocks until stop() from another thread.
  void wait();

  int port() const { return port_; }
  std::string base_url() const;  // http://127.0.0.1:<port>/v1

  std::size_t completion_requests() const { return completion_requests_; }
  std::size_t embedding_requests() const { return embedding_requests_; }

  static std::string primary_answer(const std::string& prompt);
  static std::string alternative_answer(const std::string& prompt, std::size_t k);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  StubOptions options_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> completion_requests_{0};
  std::atomic<std::size_t> embedding_requests_{0};
  std::atomic<std::size_t> choices_served_{0};
};

}  // namespace semconf

#endif  // SEMCONF_STUB_SERVER_HPP_
