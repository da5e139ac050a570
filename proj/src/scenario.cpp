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

#include "wimark/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "wimark/rng.hpp"

namespace wimark::scenario {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kHoursPerMonth = 24.0 * 30.0;

// Lower-triangular Cholesky factor, tolerating exactly-zero variance rows
// (a constant feature has zero correlation mass). Throws when the matrix is
// not positive semidefinite.
Matrix cholesky_psd(const Matrix& m) {
  const int n = m.rows();
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s < -1e-10)
          throw std::invalid_argument("correlation matrix is not positive semidefinite");
        l(i, i) = s > 0.0 ? std::sqrt(s) : 0.0;
      } else {
        l(i, j) = l(j, j) > 0.0 ? s / l(j, j) : 0.0;
      }
    }
  }
  return l;
}

}  // namespace

void validate_spec(const ScenarioSpec& spec) {
  if (spec.width_km <= 0.0 || spec.height_km <= 0.0)
    throw std::invalid_argument("market rectangle must have positive size");
  if (spec.spacing_km <= 0.0) throw std::invalid_argument("grid spacing must be positive");
  if (spec.spacing_km > std::hypot(spec.width_km, spec.height_km))
    throw std::invalid_argument("grid spacing exceeds the rectangle diagonal (degenerate geometry)");
  if (spec.session_mb <= 0.0) throw std::invalid_argument("session size must be positive");
  if (spec.mean_speed_kmh < 0.0) throw std::invalid_argument("mean speed must be non-negative");
  if (spec.capacities_mbps.empty()) throw std::invalid_argument("at least one provider required");
  for (double b : spec.capacities_mbps)
    if (b <= 0.0) throw std::invalid_argument("provider capacities must be positive");
  if (spec.detail_levels.size() != spec.capacities_mbps.size())
    throw std::invalid_argument("detail_levels must list one entry per provider");
  if (spec.plan_counts.size() != spec.capacities_mbps.size())
    throw std::invalid_argument("plan_counts must list one entry per provider");
  for (int l : spec.detail_levels)
    if (l < 1 || l > spec.group_count)
      throw std::invalid_argument("detail level must be in [1, group count]");
  for (int s : spec.plan_counts)
    if (s < 1) throw std::invalid_argument("plan counts must be >= 1");
  if (spec.price_cap <= 0.0) throw std::invalid_argument("price cap must be positive");
  if (spec.population <= 0.0) throw std::invalid_argument("population must be positive");
  if (spec.group_count < 1) throw std::invalid_argument("group count must be >= 1");
  if (spec.profile.correlation.rows() != 3 || spec.profile.correlation.cols() != 3)
    throw std::invalid_argument("profile correlation must be 3x3");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::fabs(spec.profile.correlation(i, j) - spec.profile.correlation(j, i)) > 1e-12)
        throw std::invalid_argument("profile correlation must be symmetric");
  cholesky_psd(spec.profile.correlation);
  for (double sd : spec.profile.std_devs)
    if (sd < 0.0) throw std::invalid_argument("profile std devs must be non-negative");
  if (spec.logit.noise <= 0.0) throw std::invalid_argument("logit noise must be positive");
  if (spec.logit.speed <= 0.0) throw std::invalid_argument("logit speed must be positive");
  if (spec.sweep.points < 1) throw std::invalid_argument("sweep needs at least one point");
  if (spec.sweep.lambda_min < 0.0 || spec.sweep.lambda_max < spec.sweep.lambda_min)
    throw std::invalid_argument("sweep range must be non-negative and ordered");
}

int lattice_point_count(double width_km, double height_km, double spacing_km) {
  const double row_height = spacing_km * kSqrt3 / 2.0;
  int count = 0;
  for (int r = 0;; ++r) {
    const double y = r * row_height;
    if (y > height_km + 1e-9) break;
    const double offset = (r % 2 == 0) ? 0.0 : spacing_km / 2.0;
    for (int c = 0;; ++c) {
      const double x = offset + c * spacing_km;
      if (x > width_km + 1e-9) break;
      ++count;
    }
  }
  return count;
}

std::vector<queueing::ProviderNetwork> build_network(const ScenarioSpec& spec) {
  if (spec.spacing_km <= 0.0) throw std::invalid_argument("build_network: spacing must be positive");
  if (spec.spacing_km > std::hypot(spec.width_km, spec.height_km))
    throw std::invalid_argument("build_network: spacing exceeds rectangle diagonal (degenerate geometry)");

  const double s = spec.spacing_km;
  const double row_height = s * kSqrt3 / 2.0;
  // Voronoi cell of a triangular lattice: regular hexagon of area
  // (sqrt(3)/2) s^2 and perimeter 2 sqrt(3) s.
  const double cell_area = kSqrt3 / 2.0 * s * s;
  const double cell_perimeter = 2.0 * kSqrt3 * s;

  std::vector<queueing::BaseStation> sites;
  for (int r = 0;; ++r) {
    const double y = r * row_height;
    if (y > spec.height_km + 1e-9) break;
    const double offset = (r % 2 == 0) ? 0.0 : s / 2.0;
    for (int c = 0;; ++c) {
      const double x = offset + c * s;
      if (x > spec.width_km + 1e-9) break;
      queueing::BaseStation bs;
      bs.id = static_cast<int>(sites.size());
      bs.x_km = x;
      bs.y_km = y;
      bs.cell_area_km2 = cell_area;
      bs.cell_perimeter_km = cell_perimeter;
      sites.push_back(bs);
    }
  }
  const int stations = static_cast<int>(sites.size());

  // Handover targets: uniform over lattice neighbours.
  Matrix routing(stations, stations);
  for (int a = 0; a < stations; ++a) {
    std::vector<int> neighbours;
    for (int b = 0; b < stations; ++b) {
      if (b == a) continue;
      const double d = std::hypot(sites[a].x_km - sites[b].x_km, sites[a].y_km - sites[b].y_km);
      if (d < 1.05 * s) neighbours.push_back(b);
    }
    if (neighbours.empty() && stations > 1)
      throw std::runtime_error("build_network: isolated base station");
    for (int b : neighbours) routing(a, b) = 1.0 / neighbours.size();
  }

  const std::vector<double> crossing =
      stations > 1 ? queueing::handover_rates(sites, spec.mean_speed_kmh)
                   : std::vector<double>(1, 0.0);

  std::vector<queueing::ProviderNetwork> networks;
  for (double capacity : spec.capacities_mbps) {
    queueing::ProviderNetwork n;
    n.stations = sites;
    for (auto& bs : n.stations) bs.bandwidth_mbps = capacity;
    n.service_rate.assign(stations, queueing::service_rate_per_min(capacity, spec.session_mb));
    n.handover_rate = crossing;
    n.mobility.routing = routing;
    n.mobility.mean_speed_kmh = spec.mean_speed_kmh;
    n.mobility.sojourn =
        stations > 1 ? queueing::mobility_stationary(routing, n.departure_rate())
                     : std::vector<double>(1, 1.0);
    networks.push_back(std::move(n));
  }
  return networks;
}

double demand_scale(double lambda_bar) { return lambda_bar > 0.0 ? lambda_bar : 1.0; }

void scale_to_demand(std::vector<users::UserGroup>& groups, double lambda_bar,
                     double session_mb) {
  const double scale = demand_scale(lambda_bar);
  for (auto& g : groups) {
    g.session_rate = g.normalized_rate * lambda_bar * g.population / 60.0;  // sessions/min
    g.monthly_demand_mb = g.normalized_rate * scale * kHoursPerMonth * session_mb;
  }
}

std::vector<users::UserGroup> sample_population(const ScenarioSpec& spec, std::uint64_t seed) {
  const Matrix chol = cholesky_psd(spec.profile.correlation);
  Rng rng(seed);
  std::vector<users::UserGroup> groups;
  groups.reserve(spec.group_count);
  const double member_count = spec.population / spec.group_count;

  for (int j = 0; j < spec.group_count; ++j) {
    double wtp = 0.0, sensitivity = 0.0, rate = 0.0;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const double n0 = rng.normal(), n1 = rng.normal(), n2 = rng.normal();
      const double c0 = chol(0, 0) * n0;
      const double c1 = chol(1, 0) * n0 + chol(1, 1) * n1;
      const double c2 = chol(2, 0) * n0 + chol(2, 1) * n1 + chol(2, 2) * n2;
      wtp = spec.profile.means[0] + spec.profile.std_devs[0] * c0;
      sensitivity = spec.profile.means[1] + spec.profile.std_devs[1] * c1;
      rate = spec.profile.means[2] + spec.profile.std_devs[2] * c2;
      if (wtp >= 0.0 && sensitivity > 0.0 && rate > 0.0) break;
    }
    users::UserGroup g;
    g.id = j;
    g.population = member_count;
    g.wtp_scale = wtp;
    g.rate_sensitivity = sensitivity;
    g.normalized_rate = rate;
    g.saturation_offset = spec.profile.saturation_offset;
    g.variance_weight = spec.profile.variance_weight;
    g.price_weight = spec.profile.price_weight;
    groups.push_back(g);
  }
  scale_to_demand(groups, 1.0, spec.session_mb);
  return groups;
}

namespace {

// Monthly demand of a group and the plan thresholds must use the same
// lambda scale; both are rebuilt per sweep point.
std::vector<users::DataplanSchedule> build_schedules(
    const ScenarioSpec& spec, const std::vector<users::UserGroup>& population,
    double lambda_bar) {
  std::vector<users::DataplanSchedule> schedules;
  for (int i = 0; i < spec.provider_count(); ++i) {
    users::DataplanSchedule sched;
    sched.price_cap = spec.price_cap;
    sched.thresholds_mb = segmentation::dataplan_tiers(
        population, spec.plan_counts[i], demand_scale(lambda_bar), spec.session_mb);
    sched.prices.assign(spec.plan_counts[i], 0.0);
    schedules.push_back(std::move(sched));
  }
  return schedules;
}

MarketOutcome solve_point(const ScenarioSpec& spec,
                          const std::vector<queueing::ProviderNetwork>& networks,
                          const std::vector<users::UserGroup>& population,
                          const std::vector<segmentation::UserCategory>& categories,
                          const std::vector<segmentation::ProviderView>& views,
                          double lambda_bar, int point_index) {
  MarketOutcome row;
  row.lambda_bar = lambda_bar;
  try {
    std::vector<users::UserGroup> truth = population;
    scale_to_demand(truth, lambda_bar, spec.session_mb);
    users::MarketModel ground_model = users::build_market_model(networks, truth);

    std::vector<users::MarketModel> view_models;
    for (const auto& view : views) {
      std::vector<users::UserGroup> clusters = view.clusters;
      scale_to_demand(clusters, lambda_bar, spec.session_mb);
      view_models.push_back(users::build_market_model(networks, clusters));
    }

    game::GameConfig cfg = spec.game;
    cfg.logit = spec.logit;
    cfg.seed = splitmix64(spec.seed ^ (0x9d5ab1cf00000000ULL + point_index));
    const auto schedules = build_schedules(spec, truth, lambda_bar);

    row.nash = game::solve_nash(view_models, ground_model, schedules, cfg);
    row.status = row.nash.status;
    row.solved = row.nash.status != game::NashStatus::Failed;
    if (!row.solved) {
      row.note = row.nash.note;
      return row;
    }

    for (const auto& sched : row.nash.prices) row.prices.push_back(sched.prices);
    row.revenue = row.nash.realized_revenue;
    row.shares = users::market_share(row.nash.realized_equilibrium, truth);
    row.disconnected = row.shares[0];

    std::array<double, 4> cat_pop{};
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const int c = static_cast<int>(categories[j]);
      cat_pop[c] += truth[j].population;
      row.category_disconnected[c] +=
          truth[j].population * row.nash.realized_equilibrium.z(static_cast<int>(j), 0);
    }
    for (int c = 0; c < 4; ++c)
      if (cat_pop[c] > 0.0) row.category_disconnected[c] /= cat_pop[c];
  } catch (const std::exception& error) {
    row.solved = false;
    row.status = game::NashStatus::Failed;
    row.note = error.what();
  }
  return row;
}

}  // namespace

SweepResult run_sweep(const ScenarioSpec& spec, int jobs) {
  validate_spec(spec);
  SweepResult result;
  result.spec = spec;

  const auto networks = build_network(spec);
  result.population = sample_population(spec, spec.seed);
  result.categories = segmentation::categorize_groups(result.population);
  for (int i = 0; i < spec.provider_count(); ++i) {
    auto view = segmentation::cluster_population(
        result.population, spec.detail_levels[i], splitmix64(spec.seed ^ (0xc1u + i)));
    view.provider = i;
    result.views.push_back(std::move(view));
  }

  const std::vector<double> grid = spec.sweep.grid();
  result.rows.resize(grid.size());

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
  if (workers == 1) {
    for (std::size_t p = 0; p < grid.size(); ++p)
      result.rows[p] = solve_point(spec, networks, result.population, result.categories,
                                   result.views, grid[p], static_cast<int>(p));
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t p = next.fetch_add(1); p < grid.size(); p = next.fetch_add(1))
        result.rows[p] = solve_point(spec, networks, result.population, result.categories,
                                     result.views, grid[p], static_cast<int>(p));
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

std::vector<GainRow> compare_runs(const std::vector<MarketOutcome>& baseline,
                                  const std::vector<MarketOutcome>& variant) {
  if (baseline.size() != variant.size())
    throw std::invalid_argument("compare_runs: sweeps have different lengths");
  std::vector<GainRow> rows;
  for (std::size_t p = 0; p < baseline.size(); ++p) {
    const auto& b = baseline[p];
    const auto& v = variant[p];
    if (std::fabs(b.lambda_bar - v.lambda_bar) > 1e-9)
      throw std::invalid_argument("compare_runs: sweep grids are not aligned");
    GainRow row;
    row.lambda_bar = b.lambda_bar;
    row.comparable = b.solved && v.solved;
    if (row.comparable) {
      const std::size_t providers = b.revenue.size();
      for (std::size_t i = 0; i < providers; ++i) {
        const double delta = v.revenue[i] - b.revenue[i];
        row.revenue_delta.push_back(delta);
        row.revenue_gain_pct.push_back(b.revenue[i] > 0.0 ? 100.0 * delta / b.revenue[i] : 0.0);
        row.price_delta.push_back(v.prices[i][0] - b.prices[i][0]);
        row.share_delta.push_back(v.shares[i + 1] - b.shares[i + 1]);
      }
      row.disconnected_delta = v.disconnected - b.disconnected;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace wimark::scenario
