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

#include "wimark/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wimark::queueing {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
}

// Strong connectivity of the positive-entry graph, checked with one forward
// and one backward reachability pass.
bool strongly_connected(const Matrix& p) {
  const int n = p.rows();
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = forward ? p(u, v) : p(v, u);
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(true) && reach(false);
}

}  // namespace

Matrix ProviderNetwork::unconditional_routing() const {
  const int n = station_count();
  Matrix p(n, n);
  const auto d = departure_rate();
  for (int m = 0; m < n; ++m) {
    if (d[m] <= 0.0) throw std::runtime_error("unconditional_routing: non-positive departure rate");
    const double f = handover_rate[m] / d[m];
    for (int k = 0; k < n; ++k) p(m, k) = f * mobility.routing(m, k);
  }
  return p;
}

std::vector<double> handover_rates(const std::vector<BaseStation>& stations,
                                   double mean_speed_kmh) {
  if (mean_speed_kmh < 0.0)
    throw std::invalid_argument("handover_rates: negative mean speed");
  std::vector<double> v(stations.size());
  for (std::size_t k = 0; k < stations.size(); ++k) {
    const auto& s = stations[k];
    if (s.cell_area_km2 <= 0.0)
      throw std::runtime_error("handover_rates: degenerate cell geometry (zero area)");
    const double per_hour = mean_speed_kmh * s.cell_perimeter_km / (kPi * s.cell_area_km2);
    v[k] = per_hour / 60.0;
  }
  return v;
}

std::vector<double> mobility_stationary(const Matrix& routing,
                                        const std::vector<double>& departure_rates) {
  require_square(routing, "mobility_stationary");
  const int n = routing.rows();
  if (static_cast<int>(departure_rates.size()) != n)
    throw std::invalid_argument("mobility_stationary: departure rate size mismatch");
  for (double d : departure_rates)
    if (d <= 0.0) throw std::invalid_argument("mobility_stationary: non-positive departure rate");
  if (n == 1) return {1.0};

  for (int r = 0; r < n; ++r) {
    if (std::fabs(routing.row_sum(r) - 1.0) > 1e-9)
      throw std::invalid_argument("mobility_stationary: routing row not stochastic");
    if (routing(r, r) != 0.0)
      throw std::invalid_argument("mobility_stationary: routing diagonal not zero");
  }
  if (!strongly_connected(routing))
    throw std::runtime_error("mobility_stationary: chain is reducible, stationary distribution not unique");

  // phi = phi P*, solved as (P*^T - I) phi = 0 with the last balance row
  // replaced by the normalization sum phi = 1.
  Matrix a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = routing(c, r) - (r == c ? 1.0 : 0.0);
  for (int c = 0; c < n; ++c) a(n - 1, c) = 1.0;
  std::vector<double> b(n, 0.0);
  b[n - 1] = 1.0;
  std::vector<double> phi = solve_linear(a, b);

  std::vector<double> omega(n);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    omega[k] = std::max(phi[k], 0.0) / departure_rates[k];
    total += omega[k];
  }
  for (double& w : omega) w /= total;
  return omega;
}

std::vector<double> solve_traffic_equations(const std::vector<double>& new_session_rates,
                                            const Matrix& routing) {
  require_square(routing, "solve_traffic_equations");
  const int n = routing.rows();
  if (static_cast<int>(new_session_rates.size()) != n)
    throw std::invalid_argument("solve_traffic_equations: rate size mismatch");

  // (I - P^T) gamma = a
  Matrix a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = (r == c ? 1.0 : 0.0) - routing(c, r);
  std::vector<double> gamma;
  try {
    gamma = solve_linear(a, new_session_rates);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("solve_traffic_equations: unstable routing (closed loop with no exit)");
  }
  for (int k = 0; k < n; ++k) {
    if (!std::isfinite(gamma[k]) || gamma[k] < new_session_rates[k] - 1e-9)
      throw std::runtime_error("solve_traffic_equations: unstable routing (closed loop with no exit)");
  }
  return gamma;
}

std::vector<double> traffic_intensities(const std::vector<double>& arrival_rates,
                                        const std::vector<double>& departure_rates) {
  if (arrival_rates.size() != departure_rates.size())
    throw std::invalid_argument("traffic_intensities: size mismatch");
  std::vector<double> rho(arrival_rates.size());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    if (departure_rates[k] <= 0.0)
      throw std::invalid_argument("traffic_intensities: non-positive departure rate");
    rho[k] = arrival_rates[k] / departure_rates[k];
  }
  return rho;
}

TrafficSolution solve_group_traffic(const ProviderNetwork& network,
                                    const std::vector<double>& group_session_rates) {
  const int stations = network.station_count();
  const int groups = static_cast<int>(group_session_rates.size());
  const auto d = network.departure_rate();
  const Matrix p = network.unconditional_routing();

  TrafficSolution out;
  out.new_session_rates = Matrix(groups, stations);
  out.arrival_rates = Matrix(groups, stations);
  out.intensities = Matrix(groups, stations);

  const bool per_group = network.mobility.group_sojourn.has_value();
  if (per_group && network.mobility.group_sojourn->rows() != groups)
    throw std::invalid_argument("solve_group_traffic: per-group sojourn rows != group count");

  // With shared mobility the traffic equations are linear in lambda, so a
  // single unit solve covers all groups.
  std::vector<double> unit_gamma;
  if (!per_group) {
    if (static_cast<int>(network.mobility.sojourn.size()) != stations)
      throw std::invalid_argument("solve_group_traffic: sojourn size mismatch");
    unit_gamma = solve_traffic_equations(network.mobility.sojourn, p);
  }

  for (int j = 0; j < groups; ++j) {
    std::vector<double> omega_row(stations);
    std::vector<double> gamma(stations);
    if (per_group) {
      for (int k = 0; k < stations; ++k) omega_row[k] = (*network.mobility.group_sojourn)(j, k);
      std::vector<double> a_row(stations);
      for (int k = 0; k < stations; ++k) a_row[k] = omega_row[k] * group_session_rates[j];
      gamma = solve_traffic_equations(a_row, p);
    } else {
      omega_row = network.mobility.sojourn;
      for (int k = 0; k < stations; ++k) gamma[k] = unit_gamma[k] * group_session_rates[j];
    }
    for (int k = 0; k < stations; ++k) {
      out.new_session_rates(j, k) = omega_row[k] * group_session_rates[j];
      out.arrival_rates(j, k) = gamma[k];
      out.intensities(j, k) = gamma[k] / d[k];
    }
  }
  return out;
}

TotalLoad total_intensity(const Matrix& group_intensities,
                          const std::vector<double>& provider_weights) {
  if (group_intensities.rows() != static_cast<int>(provider_weights.size()))
    throw std::invalid_argument("total_intensity: weight size mismatch");
  TotalLoad out;
  out.rho.assign(group_intensities.cols(), 0.0);
  for (int j = 0; j < group_intensities.rows(); ++j) {
    const double w = provider_weights[j];
    if (w == 0.0) continue;
    for (int k = 0; k < group_intensities.cols(); ++k)
      out.rho[k] += w * group_intensities(j, k);
  }
  for (double r : out.rho)
    if (r >= 1.0) out.saturated = true;
  return out;
}

ProductFormDistribution stationary_distribution(const std::vector<double>& rho,
                                                int truncation) {
  const int stations = static_cast<int>(rho.size());
  if (truncation < 0) throw std::invalid_argument("stationary_distribution: negative truncation");
  for (double r : rho) {
    if (r < 0.0) throw std::invalid_argument("stationary_distribution: negative intensity");
    if (r >= 1.0) throw std::runtime_error("stationary_distribution: unstable queue (rho >= 1)");
  }
  std::size_t states = 1;
  for (int k = 0; k < stations; ++k) {
    states *= static_cast<std::size_t>(truncation) + 1;
    if (states > 40'000'000u)
      throw std::invalid_argument("stationary_distribution: truncated state space too large");
  }

  ProductFormDistribution q;
  q.stations = stations;
  q.truncation = truncation;
  q.prob.assign(states, 1.0);
  for (std::size_t idx = 0; idx < states; ++idx) {
    std::size_t rem = idx;
    double p = 1.0;
    for (int k = 0; k < stations; ++k) {
      const int nk = static_cast<int>(rem % (truncation + 1));
      rem /= truncation + 1;
      p *= (1.0 - rho[k]) * std::pow(rho[k], nk);
    }
    q.prob[idx] = p;
  }
  const double total = std::accumulate(q.prob.begin(), q.prob.end(), 0.0);
  if (total <= 0.0) throw std::runtime_error("stationary_distribution: zero mass on truncated box");
  for (double& p : q.prob) p /= total;
  return q;
}

double check_local_balance(const ProductFormDistribution& q,
                           const std::vector<double>& new_session_rates,
                           const std::vector<double>& handover_rate,
                           const std::vector<double>& service_rate,
                           const Matrix& routing) {
  const int stations = q.stations;
  const int cap = q.truncation;
  std::vector<double> d(stations);
  for (int k = 0; k < stations; ++k) d[k] = handover_rate[k] + service_rate[k];

  std::vector<int> n(stations, 0);
  double worst = 0.0;
  const std::size_t states = q.prob.size();
  for (std::size_t idx = 0; idx < states; ++idx) {
    std::size_t rem = idx;
    bool interior = true;
    for (int k = 0; k < stations; ++k) {
      n[k] = static_cast<int>(rem % (cap + 1));
      rem /= cap + 1;
      if (n[k] > cap - 1) interior = false;
    }
    if (!interior) continue;  // shifted states must stay inside the box
    const double qn = q.prob[idx];

    // Departure balance at each occupied station: the rate leaving due to a
    // departure at k equals the rate entering via a new session or handover.
    for (int k = 0; k < stations; ++k) {
      if (n[k] < 1) continue;
      n[k] -= 1;
      double rhs = new_session_rates[k] * q.at(n);
      for (int m = 0; m < stations; ++m) {
        if (m == k || handover_rate[m] == 0.0) continue;
        n[m] += 1;
        rhs += handover_rate[m] * routing(m, k) * q.at(n);
        n[m] -= 1;
      }
      n[k] += 1;
      worst = std::max(worst, std::fabs(d[k] * qn - rhs));
    }

    // New-session balance: total new-session inflow equals total service
    // outflow one level up.
    double lhs = 0.0, rhs = 0.0;
    for (int k = 0; k < stations; ++k) {
      lhs += new_session_rates[k] * qn;
      n[k] += 1;
      rhs += service_rate[k] * q.at(n);
      n[k] -= 1;
    }
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  return worst;
}

double average_rate(const std::vector<double>& sojourn,
                    const std::vector<double>& bandwidths,
                    const std::vector<double>& total_load) {
  double r = 0.0;
  for (std::size_t k = 0; k < sojourn.size(); ++k)
    r += sojourn[k] * bandwidths[k] * std::max(0.0, 1.0 - total_load[k]);
  return r;
}

double rate_variance(const std::vector<double>& sojourn,
                     const std::vector<double>& bandwidths,
                     const std::vector<double>& total_load) {
  const double mean = average_rate(sojourn, bandwidths, total_load);
  double v = 0.0;
  for (std::size_t k = 0; k < sojourn.size(); ++k) {
    const double eff = bandwidths[k] * std::max(0.0, 1.0 - total_load[k]);
    v += sojourn[k] * (eff - mean) * (eff - mean);
  }
  return v;
}

}  // namespace wimark::queueing
