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

#include "semconf/report.hpp"

#include <fmt/format.h>

namespace semconf {

using nlohmann::json;

namespace {

struct MetricField {
  const char* name;
  std::optional<double> MetricsReport::*member;
};

constexpr MetricField kMetricFields[] = {
    {"auroc", &MetricsReport::auroc},
    {"aupr", &MetricsReport::aupr},
    {"fpr_at_95_tpr", &MetricsReport::fpr_at_95_tpr},
    {"fpr_at_90_tpr", &MetricsReport::fpr_at_90_tpr},
    {"auarc", &MetricsReport::auarc},
    {"acceptance_rate", &MetricsReport::acceptance_rate},
    {"selective_risk", &MetricsReport::selective_risk},
    {"selective_accuracy", &MetricsReport::selective_accuracy},
    {"rejection_rate", &MetricsReport::rejection_rate},
    {"response_coverage", &MetricsReport::response_coverage},
    {"prompt_coverage", &MetricsReport::prompt_coverage},
    {"aps", &MetricsReport::aps},
    {"sscv", &MetricsReport::sscv},
    {"ece", &MetricsReport::ece},
    {"brier", &MetricsReport::brier},
};

}  // namespace

std::string format_number(double value) { return fmt::format("{}", value); }

json report_to_json(const MetricsReport& r) {
  json j{{"dataset", r.dataset},
         {"model", r.model},
         {"alpha", r.alpha},
         {"seed", r.seed ? json(*r.seed) : json(nullptr)},
         {"num_prompts", r.num_prompts}};
  for (const auto& f : kMetricFields) {
    const auto& v = r.*(f.member);
    j[f.name] = v ? json(*v) : json(nullptr);
  }
  j["sscv_excluded_empty"] = r.sscv_excluded_empty;
  return j;
}

std::vector<std::string> report_columns() {
  std::vector<std::string> cols{"dataset", "model", "alpha", "seed", "num_prompts"};
  for (const auto& f : kMetricFields) cols.emplace_back(f.name);
  cols.emplace_back("sscv_excluded_empty");
  return cols;
}

std::vector<std::string> report_cells(const MetricsReport& r) {
  std::vector<std::string> cells{r.dataset, r.model, format_number(r.alpha),
                                 r.seed ? std::to_string(*r.seed) : std::string(),
                                 std::to_string(r.num_prompts)};
  for (const auto& f : kMetricFields) {
    const auto& v = r.*(f.member);
    cells.push_back(v ? format_number(*v) : std::string());
  }
  cells.push_back(std::to_string(r.sscv_excluded_empty));
  return cells;
}

std::string csv_line(std::span<const std::string> cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    const std::string& c = cells[k];
    if (c.find_first_of(",\"\n\r") == std::string::npos) {
      out += c;
      continue;
    }
    out += '"';
    for (char ch : c) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += '"';
  }
  return out;
}

std::string reports_csv(std::span<const MetricsReport> reports) {
  const auto cols = report_columns();
  std::string out = csv_line(cols) + "\n";
  for (const auto& r : reports) {
    const auto cells = report_cells(r);
    out += csv_line(cells) + "\n";
  }
  return out;
}

}  // namespace semconf
