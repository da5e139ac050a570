// Copyright 2026 the wimark authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wimark/provider_game.hpp"
#include "wimark/scenario.hpp"
#include "wimark/segmentation.hpp"

namespace wimark::io {

/// Parses a scenario configuration document. Unknown keys are rejected at
/// every nesting level.
scenario::ScenarioSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const scenario::ScenarioSpec& spec);
scenario::ScenarioSpec load_spec(const std::string& path);

nlohmann::json to_json(const queueing::TrafficSolution& traffic);
nlohmann::json to_json(const queueing::QosReport& qos);
nlohmann::json to_json(const segmentation::ProviderView& view);
nlohmann::json to_json(const game::NashResult& nash);
nlohmann::json to_json(const scenario::MarketOutcome& outcome);

/// Deterministic float formatting shared by all CSV writers.
std::string format_double(double v);

void write_sweep_csv(std::ostream& out, const scenario::SweepResult& result);
void write_sweep_csv_file(const std::string& path, const scenario::SweepResult& result);

/// Reads the outcome columns back from a sweep CSV (prices, revenues,
/// shares, disconnection, categories); solver detail is not recoverable.
std::vector<scenario::MarketOutcome> read_sweep_csv(const std::string& path);

void write_gains_csv(std::ostream& out, const std::vector<scenario::GainRow>& gains);

/// One (price, revenue) scan per verification entry.
void write_verification_csv(std::ostream& out, const game::VerificationReport& report);

void write_trajectory_csv(std::ostream& out,
                          const std::vector<std::pair<double, Matrix>>& trajectory);

}  // namespace wimark::io
