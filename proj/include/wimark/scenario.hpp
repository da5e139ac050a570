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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wimark/provider_game.hpp"
#include "wimark/segmentation.hpp"
#include "wimark/user_dynamics.hpp"

namespace wimark::scenario {

/// Joint distribution of the sampled profile triples
/// (willingness to pay, rate tolerance, normalized session rate).
struct ProfileDistribution {
  std::array<double, 3> means{30.0, 0.6, 1.0};
  std::array<double, 3> std_devs{7.6, 0.3, 0.2};
  Matrix correlation = Matrix::identity(3);
  double saturation_offset = 1.0;
  double variance_weight = 0.0;
  double price_weight = 1.0;
};

struct SweepSpec {
  double lambda_min = 0.0;  // mean per-user sessions/hour
  double lambda_max = 1.5;
  int points = 9;

  std::vector<double> grid() const {
    std::vector<double> g;
    for (int p = 0; p < points; ++p)
      g.push_back(points == 1 ? lambda_min
                              : lambda_min + (lambda_max - lambda_min) * p / (points - 1));
    return g;
  }
};

struct ScenarioSpec {
  double width_km = 14.4;
  double height_km = 12.5;
  double spacing_km = 1.6;
  double session_mb = 10.0;
  double mean_speed_kmh = 5.0;
  std::vector<double> capacities_mbps = {25.0, 22.0, 19.0, 16.0};
  std::vector<int> detail_levels = {1, 1, 1, 1};
  std::vector<int> plan_counts = {1, 1, 1, 1};
  double price_cap = 100.0;
  double population = 300000.0;
  int group_count = 100;
  ProfileDistribution profile;
  users::LogitConfig logit;
  game::GameConfig game;
  SweepSpec sweep;
  std::uint64_t seed = 1;

  int provider_count() const { return static_cast<int>(capacities_mbps.size()); }
};

/// Throws std::invalid_argument describing the first violated constraint.
void validate_spec(const ScenarioSpec& spec);

/// Base stations on a triangular lattice filling the market rectangle, one
/// network per provider with that provider's uniform bandwidth. Mobility
/// (routing, handover rates, stationary location weights) comes from the
/// lattice adjacency and the fluid-flow crossing rates.
std::vector<queueing::ProviderNetwork> build_network(const ScenarioSpec& spec);

/// Independent count of the lattice sites for the given rectangle; used to
/// cross-check build_network.
int lattice_point_count(double width_km, double height_km, double spacing_km);

/// Ground-truth population: group profiles drawn from the correlated
/// normal distribution (resampled until positive), equal populations.
std::vector<users::UserGroup> sample_population(const ScenarioSpec& spec, std::uint64_t seed);

/// Sets per-group session rates and monthly demands for a sweep point.
/// Demands use max(lambda_bar, 1) so that the zero-demand point keeps the
/// tier structure of the limit.
void scale_to_demand(std::vector<users::UserGroup>& groups, double lambda_bar,
                     double session_mb = 10.0);

double demand_scale(double lambda_bar);

/// One sweep point of the market.
struct MarketOutcome {
  double lambda_bar = 0.0;
  bool solved = false;
  game::NashStatus status = game::NashStatus::Failed;
  std::vector<std::vector<double>> prices;  // per provider, per plan
  std::vector<double> revenue;              // realized, per provider
  std::vector<double> shares;               // per strategy, index 0 = disconnected
  double disconnected = 0.0;
  std::array<double, 4> category_disconnected{};  // per user category
  game::NashResult nash;
  std::string note;
};

struct SweepResult {
  ScenarioSpec spec;
  std::vector<users::UserGroup> population;       // at the demand reference scale
  std::vector<segmentation::UserCategory> categories;
  std::vector<segmentation::ProviderView> views;  // per provider
  std::vector<MarketOutcome> rows;
};

/// Full demand sweep: cluster once per provider, then per sweep point solve
/// the pricing game on the views and evaluate the outcome on the ground
/// truth. Points may run on `jobs` threads; output order is by lambda.
/// Per-point solver failures are recorded in the row.
SweepResult run_sweep(const ScenarioSpec& spec, int jobs = 1);

/// Differences of one variant sweep against a baseline on the same grid.
struct GainRow {
  double lambda_bar = 0.0;
  bool comparable = false;
  std::vector<double> revenue_delta;
  std::vector<double> revenue_gain_pct;  // 0 when the baseline revenue is 0
  std::vector<double> price_delta;       // first plan of each provider
  std::vector<double> share_delta;
  double disconnected_delta = 0.0;
};

std::vector<GainRow> compare_runs(const std::vector<MarketOutcome>& baseline,
                                  const std::vector<MarketOutcome>& variant);

}  // namespace wimark::scenario
