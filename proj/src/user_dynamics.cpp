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

#include "wimark/user_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wimark::users {

double dataplan_price(const DataplanSchedule& schedule, double demand_mb) {
  return schedule.prices[dataplan_tier(schedule, demand_mb)];
}

int dataplan_tier(const DataplanSchedule& schedule, double demand_mb) {
  if (schedule.prices.empty())
    throw std::invalid_argument("dataplan_tier: empty schedule");
  if (schedule.thresholds_mb.size() != schedule.prices.size())
    throw std::invalid_argument("dataplan_tier: thresholds/prices size mismatch");
  for (std::size_t s = 0; s + 1 < schedule.thresholds_mb.size(); ++s)
    if (schedule.thresholds_mb[s] >= schedule.thresholds_mb[s + 1])
      throw std::invalid_argument("dataplan_tier: thresholds not strictly increasing");
  for (std::size_t s = 0; s < schedule.thresholds_mb.size(); ++s)
    if (demand_mb <= schedule.thresholds_mb[s]) return static_cast<int>(s);
  return schedule.plan_count() - 1;  // demand above the last tier
}

MarketModel build_market_model(std::vector<queueing::ProviderNetwork> networks,
                               std::vector<UserGroup> groups) {
  MarketModel market;
  market.groups = std::move(groups);
  const int group_count = static_cast<int>(market.groups.size());

  std::vector<double> rates(group_count);
  for (int j = 0; j < group_count; ++j) rates[j] = market.groups[j].session_rate;

  for (auto& network : networks) {
    const int stations = network.station_count();
    if (network.mobility.sojourn.empty() && !network.mobility.group_sojourn) {
      network.mobility.sojourn =
          queueing::mobility_stationary(network.mobility.routing, network.departure_rate());
    }

    MarketModel::Provider provider;
    const auto traffic = queueing::solve_group_traffic(network, rates);
    provider.group_intensity = traffic.intensities;
    provider.group_sojourn = Matrix(group_count, stations);
    for (int j = 0; j < group_count; ++j)
      for (int k = 0; k < stations; ++k)
        provider.group_sojourn(j, k) = network.mobility.group_sojourn
                                           ? (*network.mobility.group_sojourn)(j, k)
                                           : network.mobility.sojourn[k];
    provider.network = std::move(network);
    market.providers.push_back(std::move(provider));
  }
  return market;
}

namespace {

// Loads of every station of provider i under strategy column i+1.
void provider_loads(const MarketModel::Provider& provider, const Matrix& z,
                    int provider_index, std::vector<double>& load) {
  const int stations = provider.group_intensity.cols();
  load.assign(stations, 0.0);
  for (int j = 0; j < provider.group_intensity.rows(); ++j) {
    const double w = z(j, provider_index + 1);
    if (w == 0.0) continue;
    for (int k = 0; k < stations; ++k) load[k] += w * provider.group_intensity(j, k);
  }
}

// Fills one provider's column of the mean-rate and variance matrices.
void provider_qos_column(const MarketModel::Provider& provider,
                         const std::vector<double>& load, int provider_index,
                         Matrix& mean_rate, Matrix& variance, bool want_variance) {
  const int stations = provider.group_intensity.cols();
  const auto& bw = provider.network.stations;
  std::vector<double> effective(stations);
  for (int k = 0; k < stations; ++k)
    effective[k] = bw[k].bandwidth_mbps * std::max(0.0, 1.0 - load[k]);

  for (int j = 0; j < provider.group_intensity.rows(); ++j) {
    double r = 0.0;
    for (int k = 0; k < stations; ++k) r += provider.group_sojourn(j, k) * effective[k];
    mean_rate(j, provider_index) = r;
    if (want_variance) {
      double v = 0.0;
      for (int k = 0; k < stations; ++k) {
        const double dev = effective[k] - r;
        v += provider.group_sojourn(j, k) * dev * dev;
      }
      variance(j, provider_index) = v;
    }
  }
}

struct UtilityEvaluator {
  const MarketModel& market;
  Matrix price;  // groups x providers, fixed for one solve
  bool want_variance = false;
  mutable std::vector<double> load;

  UtilityEvaluator(const MarketModel& m, const std::vector<DataplanSchedule>& schedules)
      : market(m) {
    const int groups = m.group_count();
    const int providers = m.provider_count();
    if (static_cast<int>(schedules.size()) != providers)
      throw std::invalid_argument("solve_user_equilibrium: schedule count != provider count");
    price = Matrix(groups, providers);
    for (int j = 0; j < groups; ++j)
      for (int i = 0; i < providers; ++i)
        price(j, i) = dataplan_price(schedules[i], m.groups[j].monthly_demand_mb);
    for (const auto& g : m.groups)
      if (g.variance_weight != 0.0) want_variance = true;
  }

  void utilities(const Matrix& z, Matrix& u, Matrix& mean_rate, Matrix& variance) const {
    const int groups = market.group_count();
    const int providers = market.provider_count();
    for (int i = 0; i < providers; ++i) {
      provider_loads(market.providers[i], z, i, load);
      provider_qos_column(market.providers[i], load, i, mean_rate, variance, want_variance);
    }
    for (int j = 0; j < groups; ++j) {
      const auto& g = market.groups[j];
      u(j, 0) = 0.0;
      for (int i = 0; i < providers; ++i) {
        const double rate_term =
            g.wtp_scale * (g.saturation_offset - std::exp(-g.rate_sensitivity * mean_rate(j, i)));
        const double variance_term = want_variance ? g.variance_weight * variance(j, i) : 0.0;
        u(j, i + 1) = rate_term - variance_term - g.price_weight * price(j, i);
      }
    }
  }
};

double infinity_norm_of(const Matrix& m) {
  double v = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) v = std::max(v, std::fabs(m.data()[n]));
  return v;
}

void softmax_rows(const Matrix& u, double noise, Matrix& out) {
  for (int j = 0; j < u.rows(); ++j) {
    double top = u(j, 0);
    for (int c = 1; c < u.cols(); ++c) top = std::max(top, u(j, c));
    double total = 0.0;
    for (int c = 0; c < u.cols(); ++c) {
      const double e = std::exp((u(j, c) - top) / noise);
      out(j, c) = e;
      total += e;
    }
    for (int c = 0; c < u.cols(); ++c) out(j, c) /= total;
  }
}

}  // namespace

queueing::QosReport qos_report(const MarketModel& market, const StrategyProfile& z) {
  const int groups = market.group_count();
  const int providers = market.provider_count();
  queueing::QosReport report;
  report.mean_rate = Matrix(groups, providers);
  report.rate_variance = Matrix(groups, providers);
  std::vector<double> load;
  for (int i = 0; i < providers; ++i) {
    provider_loads(market.providers[i], z.z, i, load);
    provider_qos_column(market.providers[i], load, i, report.mean_rate,
                        report.rate_variance, true);
    std::vector<double> occupancy(load.size());
    for (std::size_t k = 0; k < load.size(); ++k)
      occupancy[k] = load[k] < 1.0 ? load[k] / (1.0 - load[k])
                                   : std::numeric_limits<double>::infinity();
    report.expected_occupancy.push_back(std::move(occupancy));
  }
  return report;
}

double group_utility(const queueing::QosReport& qos, const UserGroup& group,
                     const std::vector<DataplanSchedule>& prices, int group_index,
                     int strategy) {
  if (strategy == 0) return 0.0;
  const int i = strategy - 1;
  const double rate_term =
      group.wtp_scale *
      (group.saturation_offset -
       std::exp(-group.rate_sensitivity * qos.mean_rate(group_index, i)));
  return rate_term - group.variance_weight * qos.rate_variance(group_index, i) -
         group.price_weight * dataplan_price(prices[i], group.monthly_demand_mb);
}

Matrix utility_matrix(const MarketModel& market, const StrategyProfile& z,
                      const std::vector<DataplanSchedule>& prices) {
  const auto qos = qos_report(market, z);
  Matrix u(market.group_count(), market.strategy_count());
  for (int j = 0; j < market.group_count(); ++j)
    for (int s = 0; s < market.strategy_count(); ++s)
      u(j, s) = group_utility(qos, market.groups[j], prices, j, s);
  return u;
}

Matrix choice_probabilities(const Matrix& utilities, double noise) {
  if (noise <= 0.0) throw std::invalid_argument("choice_probabilities: noise must be positive");
  Matrix s(utilities.rows(), utilities.cols());
  softmax_rows(utilities, noise, s);
  return s;
}

Matrix logit_rhs(const StrategyProfile& z, const Matrix& utilities, double noise,
                 double speed) {
  if (noise <= 0.0) throw std::invalid_argument("logit_rhs: noise must be positive");
  Matrix out(z.groups(), z.strategies());
  softmax_rows(utilities, noise, out);
  for (int j = 0; j < z.groups(); ++j)
    for (int c = 0; c < z.strategies(); ++c)
      out(j, c) = speed * (out(j, c) - z.z(j, c));
  return out;
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kE1 = 35.0 / 384 - 5179.0 / 57600, kE3 = 500.0 / 1113 - 7571.0 / 16695,
                 kE4 = 125.0 / 192 - 393.0 / 640, kE5 = -2187.0 / 6784 + 92097.0 / 339200,
                 kE6 = 11.0 / 84 - 187.0 / 2100, kE7 = -1.0 / 40;

}  // namespace

EquilibriumResult solve_user_equilibrium(
    const MarketModel& market, const std::vector<DataplanSchedule>& prices,
    const LogitConfig& config, const StrategyProfile* initial,
    std::vector<std::pair<double, Matrix>>* trajectory) {
  if (config.noise <= 0.0)
    throw std::invalid_argument("solve_user_equilibrium: noise must be positive");
  if (config.speed <= 0.0)
    throw std::invalid_argument("solve_user_equilibrium: speed must be positive");

  const int groups = market.group_count();
  const int strategies = market.strategy_count();
  const UtilityEvaluator eval(market, prices);

  StrategyProfile state =
      initial ? *initial : StrategyProfile::uniform(groups, market.provider_count());
  if (state.z.rows() != groups || state.z.cols() != strategies)
    throw std::invalid_argument("solve_user_equilibrium: initial profile shape mismatch");

  Matrix u(groups, strategies), mean_rate(groups, market.provider_count()),
      variance(groups, market.provider_count());
  const std::size_t dim = state.z.size();
  long evals = 0;

  auto rhs = [&](const Matrix& z, Matrix& out) {
    eval.utilities(z, u, mean_rate, variance);
    softmax_rows(u, config.noise, out);
    double* o = out.data();
    const double* zv = z.data();
    for (std::size_t n = 0; n < dim; ++n) o[n] = config.speed * (o[n] - zv[n]);
    ++evals;
  };

  Matrix k1(groups, strategies), k2(groups, strategies), k3(groups, strategies),
      k4(groups, strategies), k5(groups, strategies), k6(groups, strategies),
      k7(groups, strategies), stage(groups, strategies), next(groups, strategies);

  double t = 0.0;
  double dt = 0.1;
  const double dt_max = 3.0 / config.speed;  // explicit-scheme stability margin
  rhs(state.z, k1);
  if (trajectory) trajectory->emplace_back(t, state.z);

  auto combine = [&](Matrix& out, std::initializer_list<std::pair<double, const Matrix*>> terms) {
    const double* zv = state.z.data();
    double* o = out.data();
    for (std::size_t n = 0; n < dim; ++n) {
      double acc = zv[n];
      for (const auto& [w, m] : terms) acc += dt * w * m->data()[n];
      o[n] = acc;
    }
  };

  // Newton finisher on the stationary condition. Near weakly damped fixed
  // points the step noise of the integrator sustains a micro-oscillation of
  // ||dz/dt|| just above tight tolerances, so once the dynamics are close
  // the remaining digits come from solving rhs(z) = 0 directly. Leaves k1
  // holding the rhs at the final state.
  auto newton_polish = [&]() {
    const int n = static_cast<int>(dim);
    const double fd_step = 1e-7;
    Matrix probe(groups, strategies), rhs_probe(groups, strategies),
        candidate(groups, strategies);
    for (int iter = 0; iter < 30; ++iter) {
      const double norm = infinity_norm_of(k1);
      if (norm < config.tolerance) return true;
      Matrix jac(n, n);
      for (int c = 0; c < n; ++c) {
        probe = state.z;
        probe.data()[c] += fd_step;
        rhs(probe, rhs_probe);
        for (int r = 0; r < n; ++r)
          jac(r, c) = (rhs_probe.data()[r] - k1.data()[r]) / fd_step;
      }
      std::vector<double> delta;
      try {
        std::vector<double> b(n);
        for (int r = 0; r < n; ++r) b[r] = -k1.data()[r];
        delta = solve_linear(jac, b);
      } catch (const std::runtime_error&) {
        return false;
      }
      double damp = 1.0;
      bool improved = false;
      for (int bt = 0; bt < 6 && !improved; ++bt) {
        for (int c = 0; c < n; ++c)
          candidate.data()[c] = state.z.data()[c] + damp * delta[c];
        // Project back onto the simplex rows.
        for (int j = 0; j < groups; ++j) {
          double total = 0.0;
          for (int s = 0; s < strategies; ++s) {
            if (candidate(j, s) < 0.0) candidate(j, s) = 0.0;
            total += candidate(j, s);
          }
          for (int s = 0; s < strategies; ++s) candidate(j, s) /= total;
        }
        rhs(candidate, rhs_probe);
        if (infinity_norm_of(rhs_probe) < norm) {
          improved = true;
          std::swap(state.z, candidate);
          std::swap(k1, rhs_probe);
        }
        damp *= 0.5;
      }
      if (!improved) return false;
    }
    return infinity_norm_of(k1) < config.tolerance;
  };

  bool converged = infinity_norm_of(k1) < config.tolerance;
  double polish_norm = std::max(1e-4 * config.speed, config.tolerance);
  while (!converged && t < config.max_time) {
    if (infinity_norm_of(k1) < polish_norm) {
      if (newton_polish()) {
        converged = true;
        break;
      }
      polish_norm *= 0.1;  // keep integrating before the next attempt
    }
    if (dt > dt_max) dt = dt_max;
    if (t + dt > config.max_time) dt = config.max_time - t;

    combine(stage, {{kA21, &k1}});
    rhs(stage, k2);
    combine(stage, {{kA31, &k1}, {kA32, &k2}});
    rhs(stage, k3);
    combine(stage, {{kA41, &k1}, {kA42, &k2}, {kA43, &k3}});
    rhs(stage, k4);
    combine(stage, {{kA51, &k1}, {kA52, &k2}, {kA53, &k3}, {kA54, &k4}});
    rhs(stage, k5);
    combine(stage, {{kA61, &k1}, {kA62, &k2}, {kA63, &k3}, {kA64, &k4}, {kA65, &k5}});
    rhs(stage, k6);
    combine(next, {{kB1, &k1}, {kB3, &k3}, {kB4, &k4}, {kB5, &k5}, {kB6, &k6}});
    rhs(next, k7);

    double err = 0.0;
    for (std::size_t n = 0; n < dim; ++n) {
      const double e = dt * (kE1 * k1.data()[n] + kE3 * k3.data()[n] + kE4 * k4.data()[n] +
                             kE5 * k5.data()[n] + kE6 * k6.data()[n] + kE7 * k7.data()[n]);
      const double scale =
          config.abs_tol + config.rel_tol * std::max(std::fabs(state.z.data()[n]),
                                                     std::fabs(next.data()[n]));
      err = std::max(err, std::fabs(e) / scale);
    }

    if (err <= 1.0) {
      t += dt;
      std::swap(state.z, next);
      std::swap(k1, k7);  // first-same-as-last
      if (trajectory) trajectory->emplace_back(t, state.z);
      converged = infinity_norm_of(k1) < config.tolerance;
    }
    const double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    dt *= std::clamp(factor, 0.2, 5.0);
    if (dt < 1e-12) break;  // step collapse; report non-convergence
  }

  EquilibriumResult result;
  result.z = std::move(state);
  result.converged = converged;
  result.residual = infinity_norm_of(k1) / config.speed;
  result.elapsed = t;
  result.rhs_evaluations = evals;
  return result;
}

std::vector<double> market_share(const StrategyProfile& z,
                                 const std::vector<UserGroup>& groups) {
  if (static_cast<int>(groups.size()) != z.groups())
    throw std::invalid_argument("market_share: group count mismatch");
  std::vector<double> share(z.strategies(), 0.0);
  double total = 0.0;
  for (int j = 0; j < z.groups(); ++j) {
    total += groups[j].population;
    for (int s = 0; s < z.strategies(); ++s) share[s] += z.z(j, s) * groups[j].population;
  }
  if (total <= 0.0) throw std::invalid_argument("market_share: zero population");
  for (double& s : share) s /= total;
  return share;
}

}  // namespace wimark::users
