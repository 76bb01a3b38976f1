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

#include "semconf/stub_server.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"
#include "semconf/clients.hpp"
#include "semconf/error.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;

struct StubServer::Impl {
  httplib::Server server;
};

namespace {

std::string word_for(const std::string& prompt, std::size_t k) {
  return "w" + sha256_hex(prompt + "#" + std::to_string(k)).substr(0, 10);
}

std::string user_content(const json& body) {
  std::string out;
  if (body.contains("messages") && body["messages"].is_array()) {
    for (const auto& m : body["messages"]) {
      if (m.value("role", "") == "user" && m.contains("content") &&
          m["content"].is_string()) {
        out = m["content"].get<std::string>();
      }
    }
  }
  return out;
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

std::string StubServer::primary_answer(const std::string& prompt) {
  return word_for(prompt, 0);
}

std::string StubServer::alternative_answer(const std::string& prompt,
                                           std::size_t k) {
  return word_for(prompt, k + 1);
}

StubServer::StubServer(StubOptions options)
    : impl_(std::make_unique<Impl>()), options_(std::move(options)) {
  auto& srv = impl_->server;
  srv.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                          httplib::Response& res) {
    const std::size_t call = completion_requests_++;
    if (call < options_.fail_first_completions) {
      reply_json(res, 503, json{{"error", "injected failure"}});
      return;
    }
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      reply_json(res, 400, json{{"error", "bad json"}});
      return;
    }
    const std::string prompt = user_content(body);
    const std::size_t n = body.value("n", std::size_t{1});
    json choices = json::array();
    const auto canned = options_.canned.find(prompt);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t served = ++choices_served_;
      std::string text;
      if (options_.empty_choice_every != 0 &&
          served % options_.empty_choice_every == 0) {
        text.clear();
      } else if (canned != options_.canned.end() && !canned->second.empty()) {
        text = canned->second[(served - 1) % canned->second.size()];
      } else {
        const std::string h = sha256_hex(fmt::format("{}|{}|{}", prompt, call, i));
        const unsigned draw = std::stoul(h.substr(0, 4), nullptr, 16) % 10;
        text = draw < 7 ? primary_answer(prompt) : alternative_answer(prompt, draw % 3);
      }
      choices.push_back(json{{"index", i},
                             {"message", {{"role", "assistant"}, {"content", text}}},
                             {"finish_reason", "stop"}});
    }
    reply_json(res, 200,
               json{{"object", "chat.completion"},
                    {"model", body.value("model", "stub")},
                    {"choices", std::move(choices)}});
  });
  srv.Post("/v1/embeddings", [this](const httplib::Request& req,
                                    httplib::Response& res) {
    const std::size_t call = embedding_requests_++;
    if (call < options_.fail_first_embeddings) {
      reply_json(res, 503, json{{"error", "injected failure"}});
      return;
    }
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      reply_json(res, 400, json{{"error", "bad json"}});
      return;
    }
    std::vector<std::string> inputs;
    if (body.contains("input") && body["input"].is_string()) {
      inputs.push_back(body["input"].get<std::string>());
    } else if (body.contains("input") && body["input"].is_array()) {
      inputs = body["input"].get<std::vector<std::string>>();
    } else {
      reply_json(res, 400, json{{"error", "missing input"}});
      return;
    }
    HashEmbedder embedder(options_.embed_dim);
    json data = json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      data.push_back(json{{"object", "embedding"},
                          {"index", i},
                          {"embedding", embedder.embed_one(inputs[i])}});
    }
    reply_json(res, 200, json{{"object", "list"},
                              {"model", body.value("model", "stub")},
                              {"data", std::move(data)}});
  });
}

StubServer::~StubServer() { stop(); }

void StubServer::start(int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    port_ = srv.bind_to_any_port("127.0.0.1");
  } else {
    port_ = srv.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw RuntimeFailure("stub server could not bind a port");
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  spdlog::debug("stub server listening on {}", base_url());
}

void StubServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void StubServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::base_url() const {
  return fmt::format("http://127.0.0.1:{}/v1", port_);
}

}  // namespace semconf
