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

#ifndef SEMCONF_REPORT_HPP_
#define SEMCONF_REPORT_HPP_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semconf/metrics.hpp"

namespace semconf {

// Absent metrics are null in JSON and empty cells in CSV.
nlohmann::json report_to_json(const MetricsReport& report);

std::vector<std::string> report_columns();
std::vector<std::string> report_cells(const MetricsReport& report);

// RFC 4180 quoting where needed; no trailing newline.
std::string csv_line(std::span<const std::string> cells);

// Header plus one row per report.
std::string reports_csv(std::span<const MetricsReport> reports);

// Shortest representation that parses back to the same double.
std::string format_number(double value);

}  // namespace semconf

#endif  // SEMCONF_REPORT_HPP_
