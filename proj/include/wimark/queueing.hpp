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

#include <optional>
#include <vector>

#include "wimark/linalg.hpp"

namespace wimark::queueing {

// Unit conventions, used everywhere below:
//   rates        sessions per minute
//   bandwidth    Mbps
//   distances    km, areas km^2, speeds km/h
// A session of `session_mb` megabytes served at B Mbps completes at
// B * 60 / (8 * session_mb) sessions per minute (e.g. 25 Mbps and 10 MB
// sessions give 18.75 sessions/min).
inline double service_rate_per_min(double bandwidth_mbps, double session_mb) {
  return bandwidth_mbps * 60.0 / (8.0 * session_mb);
}

struct BaseStation {
  int id = 0;
  double x_km = 0.0;
  double y_km = 0.0;
  double bandwidth_mbps = 0.0;
  double cell_area_km2 = 0.0;
  double cell_perimeter_km = 0.0;
};

/// User mobility over the cells of one provider: the embedded handover
/// chain and the stationary location distribution derived from it.
struct MobilityModel {
  Matrix routing;               // conditional handover targets, row-stochastic, zero diagonal
  std::vector<double> sojourn;  // stationary location probabilities, shared by all groups
  std::optional<Matrix> group_sojourn;  // optional per-group rows (groups x stations)
  double mean_speed_kmh = 0.0;
};

struct ProviderNetwork {
  std::vector<BaseStation> stations;
  MobilityModel mobility;
  std::vector<double> service_rate;   // per station, sessions/min
  std::vector<double> handover_rate;  // per station, sessions/min

  int station_count() const { return static_cast<int>(stations.size()); }

  std::vector<double> departure_rate() const {
    std::vector<double> d(stations.size());
    for (std::size_t k = 0; k < stations.size(); ++k)
      d[k] = service_rate[k] + handover_rate[k];
    return d;
  }

  std::vector<double> bandwidths() const {
    std::vector<double> b(stations.size());
    for (std::size_t k = 0; k < stations.size(); ++k)
      b[k] = stations[k].bandwidth_mbps;
    return b;
  }

  /// Unconditional handover probabilities p(m,k) = v_m * p*(m,k) / d_m.
  Matrix unconditional_routing() const;
};

/// Per-session handover rate of each cell from the fluid flow model:
/// crossings per hour = speed * perimeter / (pi * area), returned per minute.
/// Throws on non-positive cell area.
std::vector<double> handover_rates(const std::vector<BaseStation>& stations,
                                   double mean_speed_kmh);

/// Stationary location distribution of the handover chain, weighting the
/// embedded chain's stationary vector by mean sojourn times 1/d and
/// renormalizing. Throws when the chain is reducible.
std::vector<double> mobility_stationary(const Matrix& routing,
                                        const std::vector<double>& departure_rates);

/// Solves gamma = a + P^T gamma for the total per-station session arrival
/// rates, given new-session rates and the unconditional routing matrix.
/// Throws when the routing has no exit (singular system).
std::vector<double> solve_traffic_equations(const std::vector<double>& new_session_rates,
                                            const Matrix& routing);

/// rho_k = gamma_k / d_k.
std::vector<double> traffic_intensities(const std::vector<double>& arrival_rates,
                                        const std::vector<double>& departure_rates);

/// Per-group traffic through one provider at full participation.
/// Row j holds the quantity for group j across stations.
struct TrafficSolution {
  Matrix new_session_rates;  // a
  Matrix arrival_rates;      // gamma
  Matrix intensities;        // rho
};

/// Solves the traffic equations for every group, with new sessions placed
/// according to the (shared or per-group) location distribution:
/// a_jk = omega_jk * lambda_j.
TrafficSolution solve_group_traffic(const ProviderNetwork& network,
                                    const std::vector<double>& group_session_rates);

/// Station loads under a strategy column: rho_k = sum_j z_j * rho_jk.
/// `saturated` is set when any load reaches 1 (diagnostic, not fatal).
struct TotalLoad {
  std::vector<double> rho;
  bool saturated = false;
};
TotalLoad total_intensity(const Matrix& group_intensities,
                          const std::vector<double>& provider_weights);

/// Joint stationary distribution of station occupancies on the truncated
/// box [0, truncation]^K, stored flat in mixed radix (station 0 fastest).
struct ProductFormDistribution {
  int stations = 0;
  int truncation = 0;
  std::vector<double> prob;

  std::size_t index(const std::vector<int>& n) const {
    std::size_t idx = 0, mult = 1;
    for (int k = 0; k < stations; ++k) {
      idx += static_cast<std::size_t>(n[k]) * mult;
      mult *= truncation + 1;
    }
    return idx;
  }
  double at(const std::vector<int>& n) const { return prob[index(n)]; }
};

/// Product-form distribution Q(n) ~ prod_k (1 - rho_k) rho_k^{n_k},
/// renormalized over the truncated box. Throws when any rho >= 1.
ProductFormDistribution stationary_distribution(const std::vector<double>& rho,
                                                int truncation);

/// Maximum absolute residual of the local-balance equations over all
/// interior truncated states. Diagnostic only.
double check_local_balance(const ProductFormDistribution& q,
                           const std::vector<double>& new_session_rates,
                           const std::vector<double>& handover_rate,
                           const std::vector<double>& service_rate,
                           const Matrix& routing);

/// Mean data rate sum_k omega_k B_k (1 - load_k), with the effective rate
/// clamped at zero once a station saturates.
double average_rate(const std::vector<double>& sojourn,
                    const std::vector<double>& bandwidths,
                    const std::vector<double>& total_load);

/// Spatial variance of the data rate around average_rate, same clamping.
double rate_variance(const std::vector<double>& sojourn,
                     const std::vector<double>& bandwidths,
                     const std::vector<double>& total_load);

/// Per-(group, provider) QoS summary consumed by the economics layers.
struct QosReport {
  Matrix mean_rate;      // groups x providers
  Matrix rate_variance;  // groups x providers
  std::vector<std::vector<double>> expected_occupancy;  // per provider, per station
};

}  // namespace wimark::queueing
