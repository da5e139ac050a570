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

#include <utility>
#include <vector>

#include "wimark/linalg.hpp"
#include "wimark/queueing.hpp"

namespace wimark::users {

/// One homogeneous sub-population and its profile.
struct UserGroup {
  int id = 0;
  double population = 0.0;          // N_j, members
  double wtp_scale = 0.0;           // willingness-to-pay scale on the rate term
  double saturation_offset = 1.0;   // offset inside the diminishing-return term
  double rate_sensitivity = 1.0;    // 1/Mbps; larger values tolerate lower rates
  double variance_weight = 0.0;     // weight of the rate variance
  double price_weight = 1.0;        // weight of the subscription price
  double session_rate = 0.0;        // total group sessions/min
  double monthly_demand_mb = 0.0;   // per-member monthly demand
  double normalized_rate = 1.0;     // per-member session rate relative to the market mean
};

/// Flat prices per demand tier: tier s applies to monthly demand in
/// (threshold[s-1], threshold[s]], with threshold[-1] = 0. Demand above the
/// last threshold is charged the last tier.
struct DataplanSchedule {
  std::vector<double> prices;
  std::vector<double> thresholds_mb;
  double price_cap = 100.0;

  int plan_count() const { return static_cast<int>(prices.size()); }
};

double dataplan_price(const DataplanSchedule& schedule, double demand_mb);
int dataplan_tier(const DataplanSchedule& schedule, double demand_mb);

/// Per-group probabilities over {disconnect, provider 1..I}; column 0 is
/// the disconnection state. Rows sum to one.
struct StrategyProfile {
  Matrix z;

  int groups() const { return z.rows(); }
  int strategies() const { return z.cols(); }

  static StrategyProfile uniform(int groups, int providers) {
    StrategyProfile p;
    p.z = Matrix(groups, providers + 1, 1.0 / (providers + 1));
    return p;
  }
};

struct LogitConfig {
  double noise = 1.5;        // epsilon > 0; the rational limit is out of scope
  double speed = 1.0;        // r
  double tolerance = 1e-8;   // convergence threshold on ||dz/dt||_inf
  double max_time = 2000.0;  // integration horizon
  double rel_tol = 1e-8;     // step error control
  double abs_tol = 1e-10;
};

/// Precomputed market state for equilibrium solves: per provider the
/// location weights, bandwidths and full-participation per-group intensities,
/// all of which scale linearly into loads for any strategy profile.
struct MarketModel {
  struct Provider {
    queueing::ProviderNetwork network;
    Matrix group_sojourn;     // groups x stations (rows repeated when shared)
    Matrix group_intensity;   // groups x stations, rho at z = 1
  };
  std::vector<Provider> providers;
  std::vector<UserGroup> groups;

  int provider_count() const { return static_cast<int>(providers.size()); }
  int group_count() const { return static_cast<int>(groups.size()); }
  int strategy_count() const { return provider_count() + 1; }
};

MarketModel build_market_model(std::vector<queueing::ProviderNetwork> networks,
                               std::vector<UserGroup> groups);

queueing::QosReport qos_report(const MarketModel& market, const StrategyProfile& z);

/// Utility of one group for one strategy, given the QoS at the profile the
/// report was computed from. Strategy 0 (disconnection) has utility zero.
double group_utility(const queueing::QosReport& qos, const UserGroup& group,
                     const std::vector<DataplanSchedule>& prices, int group_index,
                     int strategy);

/// All group/strategy utilities at profile z (recomputing QoS from z).
Matrix utility_matrix(const MarketModel& market, const StrategyProfile& z,
                      const std::vector<DataplanSchedule>& prices);

/// Row-wise noisy-choice probabilities softmax(u / noise).
Matrix choice_probabilities(const Matrix& utilities, double noise);

/// dz/dt = r * softmax(u / noise) - r * z.
Matrix logit_rhs(const StrategyProfile& z, const Matrix& utilities, double noise,
                 double speed);

struct EquilibriumResult {
  StrategyProfile z;
  bool converged = false;
  double residual = 0.0;  // ||z - softmax(u(z)/noise)||_inf at the final state
  double elapsed = 0.0;   // integrated time
  long rhs_evaluations = 0;
};

/// Integrates the Logit dynamics from z0 (uniform when null) until
/// ||dz/dt||_inf drops below the tolerance. QoS is recomputed from the
/// current profile at every evaluation. Non-convergence is reported in the
/// result, carrying the last iterate and residual.
EquilibriumResult solve_user_equilibrium(
    const MarketModel& market, const std::vector<DataplanSchedule>& prices,
    const LogitConfig& config, const StrategyProfile* initial = nullptr,
    std::vector<std::pair<double, Matrix>>* trajectory = nullptr);

/// Population-weighted share of each strategy (index 0 = disconnected).
std::vector<double> market_share(const StrategyProfile& z,
                                 const std::vector<UserGroup>& groups);

}  // namespace wimark::users
