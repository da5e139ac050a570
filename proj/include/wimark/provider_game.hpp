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

#include <cstdint>
#include <string>
#include <vector>

#include "wimark/user_dynamics.hpp"

namespace wimark::game {

struct GameConfig {
  users::LogitConfig logit;
  double fd_step = 0.05;           // finite-difference step on prices
  double foc_tolerance = 1e-6;     // on the gradient, per population member
  int max_root_iterations = 60;
  int sweep_max_passes = 60;       // best-response fallback
  int sweep_grid = 17;             // coarse bracketing grid per 1-D maximization
  double sweep_price_tolerance = 2e-3;
  double line_tolerance = 5e-4;    // golden-section width
  int verify_grid = 200;
  double verify_tolerance = 0.005;  // max relative unilateral gain for a global NE
  int multistart = 5;               // random starts besides the midpoint
  std::uint64_t seed = 1;
};

/// Revenue of provider `i` under its own market view at the given prices:
/// the view's user equilibrium is solved from uniform initial conditions and
/// each cluster pays the tier price of its monthly demand. Throws when the
/// equilibrium solve does not converge.
double provider_revenue(const users::MarketModel& view, int provider,
                        const std::vector<users::DataplanSchedule>& prices,
                        const users::LogitConfig& logit,
                        users::EquilibriumResult* equilibrium = nullptr);

/// Revenue of each provider from an already-solved strategy profile.
std::vector<double> revenue_from_profile(const std::vector<users::UserGroup>& groups,
                                         const users::StrategyProfile& z,
                                         const std::vector<users::DataplanSchedule>& prices);

/// Own-price revenue derivatives d sigma_i / d c_is, stacked provider-major,
/// by central differences (one-sided at the price box boundary). Every
/// evaluation re-solves the equilibrium of the owning provider's view.
std::vector<double> revenue_gradient(const std::vector<users::MarketModel>& views,
                                     const std::vector<users::DataplanSchedule>& prices,
                                     const GameConfig& config, double step);

struct VerificationEntry {
  int provider = 0;
  int plan = 0;
  double base_price = 0.0;
  double base_revenue = 0.0;
  double best_price = 0.0;
  double best_revenue = 0.0;
  double relative_gain = 0.0;
};

struct VerificationReport {
  std::vector<VerificationEntry> entries;
  double max_relative_gain = 0.0;
  bool global = false;
  // One (price, revenue) scan per entry when requested, for plotting.
  std::vector<std::vector<std::pair<double, double>>> scans;
};

/// Scans each provider's own prices over a uniform grid on [0, cap],
/// holding everything else fixed, and reports the best unilateral relative
/// revenue gain. Global iff the maximum gain stays below the tolerance.
VerificationReport verify_nash(const std::vector<users::MarketModel>& views,
                               const std::vector<users::DataplanSchedule>& prices,
                               const GameConfig& config, bool keep_scans = false);

enum class NashStatus { Global, Local, Failed };

const char* nash_status_name(NashStatus s);

struct NashResult {
  std::vector<users::DataplanSchedule> prices;
  std::vector<double> view_revenue;                    // sigma_i(c*) per own view
  std::vector<users::StrategyProfile> view_equilibria; // estimated profiles per view
  users::StrategyProfile realized_equilibrium;         // ground-truth profile at c*
  std::vector<double> realized_revenue;
  VerificationReport verification;
  NashStatus status = NashStatus::Failed;
  double foc_residual = 0.0;  // per-member gradient norm at c*
  long equilibrium_solves = 0;
  std::vector<std::vector<double>> stationary_candidates;  // flattened price vectors
  std::string note;
};

/// First-stage game solve: damped quasi-Newton root finding on the
/// first-order conditions, with a cyclic per-provider best-response sweep as
/// fallback, multistarted from the box midpoint plus seeded random points.
/// Every candidate is grid-verified; the one with the best verification
/// margin is returned.
NashResult solve_nash(const std::vector<users::MarketModel>& views,
                      const users::MarketModel& ground_truth,
                      const std::vector<users::DataplanSchedule>& schedules,
                      const GameConfig& config);

}  // namespace wimark::game
