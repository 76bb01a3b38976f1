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

#include "semconf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "semconf/error.hpp"
#include "semconf/util.hpp"

namespace semconf {

using nlohmann::json;

std::string reference_rule_name(ReferenceRule rule) {
  return rule == ReferenceRule::kSampledMajority ? "sampled-majority"
                                                 : "mixture-argmax";
}

ReferenceRule parse_reference_rule(const std::string& name) {
  if (name == "sampled-majority") return ReferenceRule::kSampledMajority;
  if (name == "mixture-argmax") return ReferenceRule::kMixtureArgmax;
  throw ValidationError("unknown reference rule '" + name +
                        "' (expected sampled-majority or mixture-argmax)");
}

void WorldSpec::validate() const {
  if (dim < 2) throw ValidationError("world dimension must be >= 2");
  if (k_true < 1) throw ValidationError("k_true must be >= 1");
  if (!(concentration > 0.0)) {
    throw ValidationError("concentration must be positive");
  }
  if (!(correct_meaning_prob >= 0.0 && correct_meaning_prob <= 1.0)) {
    throw ValidationError("correct_meaning_prob must lie in [0, 1]");
  }
  if (!(meaning_dispersion > 0.0)) {
    throw ValidationError("meaning_dispersion must be positive");
  }
  if (n < 2) throw ValidationError("n must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon must lie in (0, 1)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  if (!(tau_cos > 0.0 && tau_cos < 1.0)) {
    throw ValidationError("tau_cos must lie in (0, 1)");
  }
}

json WorldSpec::to_json() const {
  return json{{"dim", dim},
              {"k_true", k_true},
              {"concentration",
               std::isinf(concentration) ? json("inf") : json(concentration)},
              {"correct_meaning_prob", correct_meaning_prob},
              {"meaning_dispersion", meaning_dispersion},
              {"n", n},
              {"epsilon", epsilon},
              {"alpha", alpha},
              {"tau_cos", tau_cos},
              {"seed", seed},
              {"reference_rule", reference_rule_name(reference_rule)}};
}

WorldSpec WorldSpec::from_json(const json& j, WorldSpec s) {
  try {
    s.dim = j.value("dim", s.dim);
    s.k_true = j.value("k_true", s.k_true);
    if (j.contains("concentration")) {
      const json& c = j.at("concentration");
      s.concentration = c.is_string() && c.get<std::string>() == "inf"
                            ? std::numeric_limits<double>::infinity()
                            : c.get<double>();
    }
    s.correct_meaning_prob = j.value("correct_meaning_prob", s.correct_meaning_prob);
    s.meaning_dispersion = j.value("meaning_dispersion", s.meaning_dispersion);
    s.n = j.value("n", s.n);
    s.epsilon = j.value("epsilon", s.epsilon);
    s.alpha = j.value("alpha", s.alpha);
    s.tau_cos = j.value("tau_cos", s.tau_cos);
    s.seed = j.value("seed", s.seed);
    if (j.contains("reference_rule")) {
      s.reference_rule = parse_reference_rule(j.at("reference_rule").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad world spec: ") + e.what());
  }
  return s;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t trial) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

class WorldSampler {
 public:
  WorldSampler(const WorldSpec& spec, std::uint64_t seed)
      : spec_(spec), rng_(seed) {}

  PromptRecord prompt(const std::string& id, bool with_text) {
    const std::size_t k = spec_.k_true;
    std::vector<std::vector<double>> directions;
    directions.reserve(k);
    for (std::size_t j = 0; j < k; ++j) directions.push_back(random_unit());

    std::vector<double> weights(k);
    double total = 0.0;
    std::gamma_distribution<double> gamma(spec_.meaning_dispersion, 1.0);
    for (double& w : weights) {
      w = gamma(rng_);
      total += w;
    }
    if (total <= 0.0) {
      std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(k));
    } else {
      for (double& w : weights) w /= total;
    }
    const double noise = std::isinf(spec_.concentration) ? 0.0 : 1.0 / spec_.concentration;
    const double per_coord = noise / std::sqrt(static_cast<double>(spec_.dim));
    PromptRecord r;
    r.id = id;
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < spec_.n; ++i) {
      const std::size_t m = categorical(weights);
      ++counts[m];
      std::vector<double> v = directions[m];
      if (per_coord > 0.0) {
        for (double& x : v) x += per_coord * normal_(rng_);
      }
      r.response_embeddings.push_back(normalize(v));
      if (with_text) {
        r.responses.push_back(fmt::format("meaning-{} sample {}", m, i));
      }
    }

    std::size_t dominant = 0;
    for (std::size_t j = 1; j < k; ++j) {
      const bool better =
          spec_.reference_rule == ReferenceRule::kSampledMajority
              ? (counts[j] > counts[dominant] ||
                 (counts[j] == counts[dominant] && weights[j] > weights[dominant]))
              : weights[j] > weights[dominant];
      if (better) dominant = j;
    }

    std::vector<double> reference;
    std::size_t reference_meaning = dominant;
    if (uniform_(rng_) < spec_.correct_meaning_prob) {
      reference = directions[dominant];
    } else if (k >= 2) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 2);
      reference_meaning = pick(rng_);
      if (reference_meaning >= dominant) ++reference_meaning;
      reference = directions[reference_meaning];
    } else {
      reference = random_unit();
      reference_meaning = k;
    }
    if (with_text) {
      r.prompt = "synthetic prompt " + id;
      r.reference_answer = "meaning-" + std::to_string(reference_meaning);
    }
    r.reference_embedding = normalize(reference);
    for (const auto& v : r.response_embeddings) {
      r.labels.push_back(
          as_bit(label_correct(v, *r.reference_embedding, spec_.tau_cos)));
    }
    return r;
  }

 private:
  std::vector<double> random_unit() {
    std::vector<double> v(spec_.dim);
    double sq = 0.0;
    do {
      sq = 0.0;
      for (double& x : v) {
        x = normal_(rng_);
        sq += x * x;
      }
    } while (sq < 1e-12);
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
    return v;
  }

  std::size_t categorical(const std::vector<double>& weights) {
    const double u = uniform_(rng_);
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      acc += weights[j];
      if (u < acc) return j;
    }
    return weights.size() - 1;
  }

  const WorldSpec& spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::vector<PromptRecord> sample_prompts(const WorldSpec& spec,
                                         std::uint64_t seed, std::size_t count,
                                         const std::string& prefix,
                                         bool with_text) {
  WorldSampler sampler(spec, seed);
  std::vector<PromptRecord> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    out.push_back(sampler.prompt(fmt::format("{}-{}", prefix, j), with_text));
  }
  return out;
}

}  // namespace

World generate_world(const WorldSpec& spec, std::size_t m_cal,
                     std::size_t m_test) {
  spec.validate();
  if (m_cal < 1 || m_test < 1) {
    throw ValidationError("world needs at least one calibration and one test prompt");
  }
  World w;
  const std::string tag = "sim" + std::to_string(spec.seed);
  w.calibration = sample_prompts(spec, trial_seed(spec.seed, 0), m_cal,
                                 tag + "-cal", true);
  w.test = sample_prompts(spec, trial_seed(spec.seed, 1), m_test,
                          tag + "-test", true);
  return w;
}

PipelineConfig simulator_pipeline(const WorldSpec& spec,
                                  const FeatureWeights& weights, double gamma) {
  PipelineConfig c;
  c.epsilon = spec.epsilon;
  c.weights = weights;
  c.gamma = gamma;
  c.tau_cos = spec.tau_cos;
  c.encoder = "simulator:" + std::to_string(spec.dim);
  c.sampling.n = spec.n;
  c.sampling.model_name = "simulator";
  return c;
}

std::optional<double> Proportion::value() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(successes) / static_cast<double>(total);
}

double Proportion::binomial_se(double p) const {
  if (total == 0) return 0.0;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(total));
}

double Proportion::per_trial_se(double p, std::size_t trials) const {
  if (total == 0 || trials == 0) return 0.0;
  const double per_trial = static_cast<double>(total) / static_cast<double>(trials);
  return std::sqrt(p * (1.0 - p) / per_trial);
}

namespace {

bool at_least(const Proportion& x, double target, double se) {
  const auto v = x.value();
  return v && *v >= target - 3.0 * se;
}

bool at_most(const Proportion& x, double target, double se) {
  const auto v = x.value();
  return v && *v <= target + 3.0 * se;
}

}  // namespace

bool AlphaSummary::prompt_coverage_ok() const {
  return at_least(prompt_coverage, 1.0 - alpha,
                  prompt_coverage.per_trial_se(1.0 - alpha, trials));
}

bool AlphaSummary::response_coverage_ok() const {
  return at_least(response_coverage, 1.0 - alpha,
                  response_coverage.per_trial_se(1.0 - alpha, trials));
}

bool AlphaSummary::selective_risk_ok() const {
  return at_most(selective_error, alpha, selective_error.per_trial_se(alpha, trials));
}

bool AlphaSummary::prompt_coverage_pooled_ok() const {
  return at_least(prompt_coverage, 1.0 - alpha, prompt_coverage.binomial_se(1.0 - alpha));
}

bool AlphaSummary::response_coverage_pooled_ok() const {
  return at_least(response_coverage, 1.0 - alpha,
                  response_coverage.binomial_se(1.0 - alpha));
}

bool AlphaSummary::selective_risk_pooled_ok() const {
  return at_most(selective_error, alpha, selective_error.binomial_se(alpha));
}

namespace {

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json proportion_json(const Proportion& p, double target, std::size_t trials) {
  return json{{"successes", p.successes},
              {"total", p.total},
              {"value", optional_json(p.value())},
              {"per_trial_se", p.per_trial_se(target, trials)},
              {"pooled_se", p.binomial_se(target)}};
}

struct TrialOutcome {
  std::vector<TrialRow> rows;
  std::vector<AlphaSummary> counts;  // per alpha, counts only
  double sum_u = 0.0;
  double sum_u_hat = 0.0;
  std::size_t test_prompts = 0;
  std::size_t test_errors = 0;
};

TrialOutcome run_trial(const WorldSpec& spec, const ExperimentOptions& options,
                       const std::vector<double>& alphas,
                       const PipelineConfig& pipeline, std::size_t trial) {
  const std::uint64_t seed = trial_seed(spec.seed, trial);
  const auto cal = sample_prompts(spec, trial_seed(seed, 0), options.m_cal, "cal", false);
  const WorldSpec& test_spec = options.test_world ? *options.test_world : spec;
  const auto test =
      sample_prompts(test_spec, trial_seed(seed, 1), options.m_test, "test", false);

  std::vector<PromptStructure> cal_structures;
  cal_structures.reserve(cal.size());
  for (const auto& r : cal) {
    cal_structures.push_back(analyze_structure(r.response_embeddings, pipeline.epsilon));
  }
  const InflationConfig inflation = fit_inflation(cal_structures, pipeline);
  std::vector<PromptScore> cal_scores;
  std::vector<std::vector<int>> cal_labels;
  cal_scores.reserve(cal.size());
  for (std::size_t j = 0; j < cal.size(); ++j) {
    cal_scores.push_back(score_prompt(cal_structures[j], inflation));
    cal_labels.push_back(cal[j].labels);
  }
  const CalibrationPool pool = collect_pool(cal_scores, cal_labels);

  std::vector<PromptStructure> test_structures;
  std::vector<PromptScore> test_scores;
  test_structures.reserve(test.size());
  test_scores.reserve(test.size());
  TrialOutcome out;
  for (const auto& r : test) {
    test_structures.push_back(analyze_structure(r.response_embeddings, pipeline.epsilon));
    test_scores.push_back(score_prompt(test_structures.back(), inflation));
    out.sum_u += test_scores.back().adjusted.u;
    out.sum_u_hat += test_scores.back().u_hat();
    out.test_errors += r.labels[test_scores.back().representative];
  }
  out.test_prompts = test.size();

  std::vector<std::vector<PredictionSet>> sets(alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const CalibrationArtifact artifact =
        make_artifact(pipeline, inflation, pool, alphas[a]);
    AlphaSummary counts;
    counts.alpha = alphas[a];
    counts.abstain_all_trials = artifact.abstain_all() ? 1 : 0;
    std::vector<EvaluatedPrompt> evaluated;
    evaluated.reserve(test.size());
    std::size_t total_set = 0;
    for (std::size_t j = 0; j < test.size(); ++j) {
      const InferenceResult res =
          infer_from_score(test[j].id, test_scores[j], test_structures[j], artifact);
      EvaluatedPrompt p = to_evaluated(res, test[j].labels);
      if (p.prompt_error == 0) {
        ++counts.prompt_coverage.total;
        counts.prompt_coverage.successes += p.accepted ? 1 : 0;
      }
      ++counts.acceptance.total;
      if (p.accepted) {
        ++counts.acceptance.successes;
        ++counts.selective_error.total;
        counts.selective_error.successes += p.prompt_error;
      }
      for (std::size_t i = 0; i < p.response_errors.size(); ++i) {
        if (p.response_errors[i] != 0) continue;
        ++counts.response_coverage.total;
        counts.response_coverage.successes +=
            res.prediction_set.contains(i) ? 1 : 0;
      }
      total_set += res.prediction_set.size();
      sets[a].push_back(res.prediction_set);
      evaluated.push_back(std::move(p));
    }
    TrialRow row;
    row.trial = trial;
    row.alpha = alphas[a];
    const CoverageMetrics cov = coverage_metrics(evaluated);
    row.prompt_coverage = cov.prompt_coverage;
    row.response_coverage = cov.response_coverage;
    row.aps = cov.aps.value_or(0.0);
    row.acceptance_rate = counts.acceptance.value().value_or(0.0);
    row.selective_risk = counts.selective_error.value();
    row.tau_hat = artifact.tau_hat;
    row.q_hat = artifact.q_hat;
    counts.mean_aps = static_cast<double>(total_set);
    out.rows.push_back(row);
    out.counts.push_back(counts);
  }
  // Larger alpha must never grow a prediction set.
  for (std::size_t a = 0; a + 1 < alphas.size(); ++a) {
    for (std::size_t j = 0; j < test.size(); ++j) {
      for (std::size_t i : sets[a + 1][j].members) {
        if (!sets[a][j].contains(i)) {
          ++out.counts[a].nesting_violations;
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace

CoverageSummary run_coverage_experiment(const WorldSpec& spec,
                                        const ExperimentOptions& options) {
  spec.validate();
  if (options.test_world) options.test_world->validate();
  if (options.trials < 1) throw ValidationError("trials must be >= 1");
  if (options.m_cal < 1 || options.m_test < 1) {
    throw ValidationError("m_cal and m_test must be >= 1");
  }
  std::vector<double> alphas = options.alphas;
  if (alphas.empty()) alphas.push_back(spec.alpha);
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  }
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  const PipelineConfig pipeline =
      simulator_pipeline(spec, options.weights, options.gamma);
  pipeline.validate();

  std::vector<TrialOutcome> outcomes(options.trials);
  parallel_for(options.trials, options.workers, [&](std::size_t t) {
    outcomes[t] = run_trial(spec, options, alphas, pipeline, t);
  });

  // Deterministic reduction in trial order.
  CoverageSummary summary;
  summary.spec = spec;
  summary.trials = options.trials;
  summary.per_alpha.resize(alphas.size());
  double sum_u = 0.0;
  double sum_u_hat = 0.0;
  std::size_t prompts = 0;
  std::size_t errors = 0;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    summary.per_alpha[a].alpha = alphas[a];
    summary.per_alpha[a].trials = options.trials;
  }
  for (const auto& o : outcomes) {
    sum_u += o.sum_u;
    sum_u_hat += o.sum_u_hat;
    prompts += o.test_prompts;
    errors += o.test_errors;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      auto& s = summary.per_alpha[a];
      const auto& c = o.counts[a];
      const auto& row = o.rows[a];
      s.prompt_coverage.successes += c.prompt_coverage.successes;
      s.prompt_coverage.total += c.prompt_coverage.total;
      s.response_coverage.successes += c.response_coverage.successes;
      s.response_coverage.total += c.response_coverage.total;
      s.selective_error.successes += c.selective_error.successes;
      s.selective_error.total += c.selective_error.total;
      s.acceptance.successes += c.acceptance.successes;
      s.acceptance.total += c.acceptance.total;
      s.mean_aps += c.mean_aps;
      s.mean_trial_prompt_coverage += row.prompt_coverage.value_or(0.0);
      s.mean_trial_response_coverage += row.response_coverage.value_or(0.0);
      s.abstain_all_trials += c.abstain_all_trials;
      s.nesting_violations += c.nesting_violations;
    }
    summary.rows.insert(summary.rows.end(), o.rows.begin(), o.rows.end());
  }
  const auto trials = static_cast<double>(options.trials);
  for (auto& s : summary.per_alpha) {
    s.mean_aps /= static_cast<double>(prompts);
    s.mean_trial_prompt_coverage /= trials;
    s.mean_trial_response_coverage /= trials;
  }
  summary.mean_u = sum_u / static_cast<double>(prompts);
  summary.mean_u_hat = sum_u_hat / static_cast<double>(prompts);
  summary.test_error_rate = static_cast<double>(errors) / static_cast<double>(prompts);
  return summary;
}

json CoverageSummary::to_json() const {
  json per = json::array();
  for (const auto& s : per_alpha) {
    per.push_back(json{
        {"alpha", s.alpha},
        {"prompt_coverage", proportion_json(s.prompt_coverage, 1.0 - s.alpha, s.trials)},
        {"response_coverage",
         proportion_json(s.response_coverage, 1.0 - s.alpha, s.trials)},
        {"selective_risk", proportion_json(s.selective_error, s.alpha, s.trials)},
        {"acceptance_rate", optional_json(s.acceptance.value())},
        {"aps", s.mean_aps},
        {"mean_trial_prompt_coverage", s.mean_trial_prompt_coverage},
        {"mean_trial_response_coverage", s.mean_trial_response_coverage},
        {"abstain_all_trials", s.abstain_all_trials},
        {"nesting_violations", s.nesting_violations},
        {"prompt_coverage_ok", s.prompt_coverage_ok()},
        {"response_coverage_ok", s.response_coverage_ok()},
        {"selective_risk_ok", s.selective_risk_ok()},
        {"prompt_coverage_pooled_ok", s.prompt_coverage_pooled_ok()},
        {"response_coverage_pooled_ok", s.response_coverage_pooled_ok()},
        {"selective_risk_pooled_ok", s.selective_risk_pooled_ok()},
    });
  }
  return json{{"world", spec.to_json()},
              {"trials", trials},
              {"mean_u", mean_u},
              {"mean_u_hat", mean_u_hat},
              {"test_error_rate", test_error_rate},
              {"per_alpha", std::move(per)}};
}

std::string CoverageSummary::rows_csv() const {
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{}", *v) : std::string();
  };
  std::ostringstream out;
  out << "trial,alpha,prompt_coverage,response_coverage,selective_risk,"
         "acceptance_rate,aps,tau_hat,q_hat\n";
  for (const auto& r : rows) {
    out << r.trial << ',' << fmt::format("{}", r.alpha) << ','
        << cell(r.prompt_coverage) << ',' << cell(r.response_coverage) << ','
        << cell(r.selective_risk) << ',' << fmt::format("{}", r.acceptance_rate)
        << ',' << fmt::format("{}", r.aps) << ',' << cell(r.tau_hat) << ','
        << cell(r.q_hat) << '\n';
  }
  return out.str();
}

}  // namespace semconf
