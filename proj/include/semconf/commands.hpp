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

#ifndef SEMCONF_COMMANDS_HPP_
#define SEMCONF_COMMANDS_HPP_

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "semconf/config.hpp"
#include "semconf/ingestion.hpp"
#include "semconf/metrics.hpp"
#include "semconf/pipeline.hpp"
#include "semconf/simulator.hpp"

namespace semconf {

// Command implementations behind the semconf binary. Each one validates the
// config before doing any work, writes outputs atomically into
// config.out_dir, echoes the effective config there, and prints a short
// human summary to `out`. Errors propagate as ValidationError or
// RuntimeFailure.

// "hash-v1:<dim>" or "openai:<model>". Other identities cannot embed text.
std::unique_ptr<Embedder> make_embedder(const RunConfig& config);

// Samples responses for records without them and embeds whatever is missing.
// Returns true when anything changed.
bool prepare_records(std::vector<PromptRecord>& records, const RunConfig& config);

// Runs calibrate on `calibration` and scores `test` for every alpha in the
// config, without touching the filesystem.
std::vector<MetricsReport> evaluate_split(std::span<const PromptRecord> calibration,
                                          std::span<const PromptRecord> test,
                                          const RunConfig& config);

std::string alpha_tag(double alpha);

std::vector<std::filesystem::path> cmd_calibrate(const RunConfig& config,
                                                 const std::filesystem::path& dataset,
                                                 std::ostream& out);

std::filesystem::path cmd_infer(const RunConfig& config,
                                const std::filesystem::path& artifact,
                                const std::filesystem::path& prompts,
                                std::ostream& out);

// Labels come from a dataset file: tau_cos against the reference embedding
// when present, otherwise the record's explicit labels.
std::vector<MetricsReport> cmd_evaluate(const RunConfig& config,
                                        const std::filesystem::path& decisions,
                                        const std::filesystem::path& labels,
                                        std::ostream& out);

CoverageSummary cmd_simulate(const RunConfig& config, std::ostream& out);

// Writes calibration.jsonl and test.jsonl for the configured world.
void cmd_generate_world(const RunConfig& config, std::ostream& out);

void cmd_split(const RunConfig& config, const std::filesystem::path& dataset,
               std::ostream& out);

std::filesystem::path cmd_prepare(const RunConfig& config,
                                  const std::filesystem::path& dataset,
                                  std::ostream& out);

enum class SweepAxis { kEpsilon, kN, kWeights, kAlpha, kTauCos };

SweepAxis parse_sweep_axis(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);

// The config with one axis set to `value`; validated.
RunConfig apply_sweep_value(const RunConfig& config, SweepAxis axis,
                            const std::string& value);

// One evaluate run per value over a split of `dataset`, or over a fresh
// simulator world when `dataset` is empty. Writes sweep_<axis>.csv.
std::filesystem::path cmd_sweep(const RunConfig& config, SweepAxis axis,
                                const std::vector<std::string>& values,
                                const std::filesystem::path& dataset,
                                std::ostream& out);

}  // namespace semconf

#endif  // SEMCONF_COMMANDS_HPP_
