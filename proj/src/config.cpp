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

#include "semconf/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include "semconf/error.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;

namespace {

const std::set<std::string>& top_level_keys() {
  static const std::set<std::string> kKeys{
      "n", "top_p", "temperature", "max_tokens", "model", "prompt_template",
      "encoder", "epsilon", "weights", "gamma", "tau_cos", "alphas", "strata",
      "ece_bins", "split", "llm", "embedding", "max_resample_rounds",
      "cache_dir", "out_dir", "workers", "strict", "dataset_name", "seed",
      "simulation"};
  return kKeys;
}

const std::set<std::string>& world_keys() {
  static const std::set<std::string> kKeys{
      "dim", "k_true", "concentration", "correct_meaning_prob",
      "meaning_dispersion", "seed", "reference_rule"};
  return kKeys;
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ValidationError("unknown config key '" + where + key + "'");
    }
  }
}

json endpoint_json(const EndpointConfig& e) {
  return json{{"base_url", e.base_url},
              {"timeout_seconds", e.timeout_seconds},
              {"max_attempts", e.max_attempts},
              {"retry_backoff_seconds", e.retry_backoff_seconds},
              {"min_request_interval_seconds", e.min_request_interval_seconds}};
}

EndpointConfig endpoint_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"base_url", "timeout_seconds", "max_attempts",
                  "retry_backoff_seconds", "min_request_interval_seconds"},
                 where);
  EndpointConfig e;
  e.base_url = j.value("base_url", e.base_url);
  e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
  e.max_attempts = j.value("max_attempts", e.max_attempts);
  e.retry_backoff_seconds = j.value("retry_backoff_seconds", e.retry_backoff_seconds);
  e.min_request_interval_seconds =
      j.value("min_request_interval_seconds", e.min_request_interval_seconds);
  return e;
}

json world_json(const WorldSpec& w) {
  json j = w.to_json();
  for (const char* key : {"n", "epsilon", "alpha", "tau_cos"}) j.erase(key);
  return j;
}

WorldSpec world_from_json(const json& j, const std::string& where) {
  reject_unknown(j, world_keys(), where);
  return WorldSpec::from_json(j, WorldSpec{});
}

}  // namespace

Endpoint EndpointConfig::resolve(const char* url_env, const char* key_env) const {
  Endpoint e = Endpoint::from_env(url_env, key_env, base_url);
  if (!base_url.empty()) e.base_url = base_url;
  e.timeout_seconds = timeout_seconds;
  e.max_attempts = max_attempts;
  e.retry_backoff_seconds = retry_backoff_seconds;
  e.min_request_interval_seconds = min_request_interval_seconds;
  return e;
}

FeatureWeights parse_weights(const std::string& text, std::string* name) {
  if (auto preset = FeatureWeights::preset(text)) {
    if (name) {
      *name = text;
      std::transform(name->begin(), name->end(), name->begin(),
                     [](unsigned char c) { return std::tolower(c); });
    }
    return *preset;
  }
  FeatureWeights w;
  std::stringstream in(text);
  std::string cell;
  std::size_t k = 0;
  while (std::getline(in, cell, ',')) {
    if (k >= 5) throw ValidationError("weights need exactly 5 values: " + text);
    try {
      std::size_t used = 0;
      w.values[k] = std::stod(cell, &used);
      if (cell.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument(cell);
      }
    } catch (const std::logic_error&) {
      throw ValidationError("unknown weight preset or bad weight list '" + text + "'");
    }
    ++k;
  }
  if (k != 5) throw ValidationError("unknown weight preset or bad weight list '" + text + "'");
  w.validate();
  if (name) *name = "custom";
  return w;
}

void RunConfig::validate() const {
  pipeline.validate();
  if (alphas.empty()) throw ValidationError("alphas must not be empty");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ValidationError("alpha must lie in (0, 1), got " + std::to_string(a));
    }
  }
  if (strata.empty()) throw ValidationError("strata must not be empty");
  for (std::size_t b = 0; b < strata.size(); ++b) {
    if (strata[b].lo < 1 || strata[b].lo > strata[b].hi) {
      throw ValidationError("strata need 1 <= lo <= hi");
    }
    for (std::size_t c = 0; c < b; ++c) {
      if (strata[b].lo <= strata[c].hi && strata[c].lo <= strata[b].hi) {
        throw ValidationError("strata must be disjoint");
      }
    }
  }
  if (ece_bins < 1) throw ValidationError("ece_bins must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ValidationError("split.fraction must lie in (0, 1)");
  }
  if (workers < 1) throw ValidationError("workers must be >= 1");
  for (const EndpointConfig* e : {&llm, &embedding}) {
    if (!(e->timeout_seconds > 0.0)) throw ValidationError("timeout_seconds must be positive");
    if (e->max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
    if (e->retry_backoff_seconds < 0.0 || e->min_request_interval_seconds < 0.0) {
      throw ValidationError("endpoint intervals must be non-negative");
    }
  }
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
  world().validate();
  if (simulation.test_world) {
    WorldSpec shifted = *simulation.test_world;
    shifted.n = pipeline.sampling.n;
    shifted.epsilon = pipeline.epsilon;
    shifted.tau_cos = pipeline.tau_cos;
    shifted.validate();
  }
  if (simulation.trials < 1) throw ValidationError("simulation.trials must be >= 1");
  if (simulation.m_cal < 1 || simulation.m_test < 1) {
    throw ValidationError("simulation.m_cal and m_test must be >= 1");
  }
}

json RunConfig::to_json() const {
  json strata_json = json::array();
  for (const auto& s : strata) strata_json.push_back({s.lo, s.hi});
  json sim{{"world", world_json(simulation.world)},
           {"trials", simulation.trials},
           {"m_cal", simulation.m_cal},
           {"m_test", simulation.m_test}};
  if (simulation.test_world) sim["test_world"] = world_json(*simulation.test_world);
  return json{
      {"n", pipeline.sampling.n},
      {"top_p", pipeline.sampling.nucleus_eta},
      {"temperature", pipeline.sampling.temperature},
      {"max_tokens", pipeline.sampling.max_tokens},
      {"model", pipeline.sampling.model_name},
      {"prompt_template", pipeline.prompt_template},
      {"encoder", pipeline.encoder},
      {"epsilon", pipeline.epsilon},
      {"weights", weights_name == "custom" ? json(pipeline.weights.values)
                                           : json(weights_name)},
      {"gamma", pipeline.gamma},
      {"tau_cos", pipeline.tau_cos},
      {"alphas", alphas},
      {"strata", std::move(strata_json)},
      {"ece_bins", ece_bins},
      {"split", {{"fraction", split_fraction}, {"seed", split_seed}}},
      {"llm", endpoint_json(llm)},
      {"embedding", endpoint_json(embedding)},
      {"max_resample_rounds", max_resample_rounds},
      {"cache_dir", cache_dir},
      {"out_dir", out_dir},
      {"workers", workers},
      {"strict", strict},
      {"dataset_name", dataset_name},
      {"seed", seed ? json(*seed) : json(nullptr)},
      {"simulation", std::move(sim)},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j, top_level_keys(), "");
  RunConfig c;
  try {
    auto& s = c.pipeline.sampling;
    s.n = j.value("n", s.n);
    s.nucleus_eta = j.value("top_p", s.nucleus_eta);
    s.temperature = j.value("temperature", s.temperature);
    s.max_tokens = j.value("max_tokens", s.max_tokens);
    s.model_name = j.value("model", s.model_name);
    c.pipeline.prompt_template = j.value("prompt_template", c.pipeline.prompt_template);
    c.pipeline.encoder = j.value("encoder", c.pipeline.encoder);
    c.pipeline.epsilon = j.value("epsilon", c.pipeline.epsilon);
    c.pipeline.gamma = j.value("gamma", c.pipeline.gamma);
    c.pipeline.tau_cos = j.value("tau_cos", c.pipeline.tau_cos);
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      if (w.is_string()) {
        c.pipeline.weights = parse_weights(w.get<std::string>(), &c.weights_name);
      } else {
        c.pipeline.weights.values = w.get<std::array<double, 5>>();
        c.weights_name = "custom";
      }
    }
    if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("strata")) {
      c.strata.clear();
      for (const auto& pair : j.at("strata")) {
        const auto v = pair.get<std::vector<std::size_t>>();
        if (v.size() != 2) throw ValidationError("each stratum is [lo, hi]");
        c.strata.push_back(SizeStratum{v[0], v[1]});
      }
    }
    c.ece_bins = j.value("ece_bins", c.ece_bins);
    if (j.contains("split")) {
      const json& sp = j.at("split");
      reject_unknown(sp, {"fraction", "seed"}, "split.");
      c.split_fraction = sp.value("fraction", c.split_fraction);
      c.split_seed = sp.value("seed", c.split_seed);
    }
    if (j.contains("llm")) c.llm = endpoint_from_json(j.at("llm"), "llm.");
    if (j.contains("embedding")) {
      c.embedding = endpoint_from_json(j.at("embedding"), "embedding.");
    }
    c.max_resample_rounds = j.value("max_resample_rounds", c.max_resample_rounds);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.workers = j.value("workers", c.workers);
    c.strict = j.value("strict", c.strict);
    c.dataset_name = j.value("dataset_name", c.dataset_name);
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<long long>();
    if (j.contains("simulation")) {
      const json& sim = j.at("simulation");
      reject_unknown(sim, {"world", "trials", "m_cal", "m_test", "test_world"},
                     "simulation.");
      if (sim.contains("world")) {
        c.simulation.world = world_from_json(sim.at("world"), "simulation.world.");
      }
      if (sim.contains("test_world") && !sim.at("test_world").is_null()) {
        c.simulation.test_world =
            world_from_json(sim.at("test_world"), "simulation.test_world.");
      }
      c.simulation.trials = sim.value("trials", c.simulation.trials);
      c.simulation.m_cal = sim.value("m_cal", c.simulation.m_cal);
      c.simulation.m_test = sim.value("m_test", c.simulation.m_test);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

EvaluationOptions RunConfig::evaluation(double alpha) const {
  EvaluationOptions o;
  o.alpha = alpha;
  o.strata = strata;
  o.ece_bins = ece_bins;
  return o;
}

WorldSpec RunConfig::world() const {
  WorldSpec w = simulation.world;
  w.n = pipeline.sampling.n;
  w.epsilon = pipeline.epsilon;
  w.tau_cos = pipeline.tau_cos;
  w.alpha = alphas.empty() ? w.alpha : alphas.front();
  return w;
}

}  // namespace semconf
