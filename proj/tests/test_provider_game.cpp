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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "market_fixtures.hpp"
#include "wimark/json_io.hpp"
#include "wimark/provider_game.hpp"
#include "wimark/segmentation.hpp"

using namespace wimark;
using namespace wimark::game;
using wimark::users::DataplanSchedule;
using wimark::users::MarketModel;
using wimark::users::StrategyProfile;

namespace {

GameConfig fast_config() {
  GameConfig cfg;
  cfg.verify_grid = 120;
  cfg.multistart = 2;
  cfg.seed = 99;
  return cfg;
}

MarketModel monopoly_market(int groups, std::uint64_t seed) {
  std::vector<queueing::ProviderNetwork> networks{fixtures::ring_network(4, 25.0, 0.1)};
  return users::build_market_model(networks, fixtures::random_groups(groups, seed));
}

}  // namespace

TEST_CASE("revenue from a strategy profile") {
  SUBCASE("zero prices earn nothing") {
    auto market = fixtures::two_provider_market(4, 3);
    const auto z = StrategyProfile::uniform(4, 2);
    const auto rev = revenue_from_profile(market.groups, z, fixtures::flat_schedules(2, 0.0));
    CHECK(rev[0] == 0.0);
    CHECK(rev[1] == 0.0);
  }

  SUBCASE("direct sum") {
    std::vector<users::UserGroup> groups(1);
    groups[0].population = 100.0;
    groups[0].monthly_demand_mb = 50.0;
    StrategyProfile z;
    z.z = Matrix(1, 2);
    z.z(0, 0) = 0.4;
    z.z(0, 1) = 0.6;
    const auto rev = revenue_from_profile(groups, z, fixtures::flat_schedules(1, 10.0));
    CHECK(rev[0] == doctest::Approx(600.0));
  }

  SUBCASE("multi-plan revenue equals the per-tier summation") {
    auto groups = fixtures::random_groups(9, 17);
    StrategyProfile z;
    z.z = Matrix(9, 2);
    Rng rng(4);
    for (int j = 0; j < 9; ++j) {
      z.z(j, 1) = rng.uniform(0.0, 1.0);
      z.z(j, 0) = 1.0 - z.z(j, 1);
    }
    DataplanSchedule sched;
    sched.prices = {3.0, 6.0, 11.0};
    sched.thresholds_mb = {6000.0, 8000.0, 12000.0};
    const auto rev = revenue_from_profile(groups, z, {sched});

    // Independent route: bucket the groups per tier, then sum tier by tier.
    double expected = 0.0;
    for (int s = 0; s < 3; ++s) {
      const double lo = s == 0 ? 0.0 : sched.thresholds_mb[s - 1];
      const double hi = sched.thresholds_mb[s];
      for (int j = 0; j < 9; ++j) {
        const bool last_overflow = s == 2 && groups[j].monthly_demand_mb > hi;
        if ((groups[j].monthly_demand_mb > lo && groups[j].monthly_demand_mb <= hi) ||
            last_overflow)
          expected += groups[j].population * z.z(j, 1) * sched.prices[s];
      }
    }
    CHECK(rev[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("provider revenue solves the view equilibrium") {
  auto market = fixtures::two_provider_market(5, 23);
  auto prices = fixtures::flat_schedules(2, 7.0);
  users::EquilibriumResult eq;
  const double rev = provider_revenue(market, 0, prices, users::LogitConfig{}, &eq);
  CHECK(eq.converged);
  CHECK(rev == doctest::Approx(revenue_from_profile(market.groups, eq.z, prices)[0]));
  CHECK(rev > 0.0);
}

TEST_CASE("revenue gradients") {
  SUBCASE("symmetric duopoly has symmetric gradients at symmetric prices") {
    auto market = fixtures::symmetric_market(2, 6, 15);
    std::vector<MarketModel> views{market, market};
    auto prices = fixtures::flat_schedules(2, 10.0);
    const auto g = revenue_gradient(views, prices, fast_config(), 0.05);
    REQUIRE(g.size() == 2);
    const double scale = std::max(1.0, std::fabs(g[0]));
    CHECK(std::fabs(g[0] - g[1]) / scale < 1e-4);
  }

  SUBCASE("gradient nearly vanishes at a grid-search optimum") {
    auto market = monopoly_market(5, 31);
    std::vector<MarketModel> views{market};
    auto prices = fixtures::flat_schedules(1, 0.0);

    const double step = 0.25;
    double best_c = 0.0, best_rev = -1.0;
    for (double c = 0.5; c <= 60.0; c += step) {
      prices[0].prices[0] = c;
      const double rev = provider_revenue(market, 0, prices, users::LogitConfig{});
      if (rev > best_rev) {
        best_rev = rev;
        best_c = c;
      }
    }
    prices[0].prices[0] = best_c;
    const auto g = revenue_gradient(views, prices, fast_config(), 0.05);

    // Curvature from the second difference bounds the gradient at a grid
    // argmax: |sigma'| <= |sigma''| * step.
    prices[0].prices[0] = best_c + step;
    const double up = provider_revenue(market, 0, prices, users::LogitConfig{});
    prices[0].prices[0] = best_c - step;
    const double down = provider_revenue(market, 0, prices, users::LogitConfig{});
    const double curvature = std::fabs(up - 2.0 * best_rev + down) / (step * step);
    CHECK(std::fabs(g[0]) <= 2.0 * curvature * step);
  }

  SUBCASE("halving the step moves the estimate by little") {
    auto market = fixtures::two_provider_market(5, 41);
    std::vector<MarketModel> views{market, market};
    auto prices = fixtures::flat_schedules(2, 6.0);
    prices[1].prices[0] = 9.0;
    const auto g1 = revenue_gradient(views, prices, fast_config(), 0.1);
    const auto g2 = revenue_gradient(views, prices, fast_config(), 0.05);
    for (std::size_t n = 0; n < g1.size(); ++n) {
      const double scale = std::max(std::fabs(g1[n]), 1e-6);
      CHECK(std::fabs(g1[n] - g2[n]) / scale < 0.05);
    }
  }
}

TEST_CASE("monopoly pricing matches a fine grid search") {
  auto market = monopoly_market(5, 7);
  std::vector<MarketModel> views{market};
  auto schedules = fixtures::flat_schedules(1, 0.0);

  GameConfig cfg = fast_config();
  cfg.verify_grid = 200;
  const auto result = solve_nash(views, market, schedules, cfg);
  REQUIRE(result.status != NashStatus::Failed);

  double best_c = 0.0, best_rev = -1.0;
  const int grid = 500;
  auto probe = schedules;
  for (int g = 0; g < grid; ++g) {
    const double c = 100.0 * g / (grid - 1);
    probe[0].prices[0] = c;
    const double rev = provider_revenue(market, 0, probe, cfg.logit);
    if (rev > best_rev) {
      best_rev = rev;
      best_c = c;
    }
  }
  const double cell = 100.0 / (grid - 1);
  CHECK(std::fabs(result.prices[0].prices[0] - best_c) <= cell + 1e-9);
  CHECK(result.status == NashStatus::Global);
}

TEST_CASE("symmetric duopoly settles on symmetric prices") {
  auto market = fixtures::symmetric_market(2, 6, 19);
  std::vector<MarketModel> views{market, market};
  const auto result = solve_nash(views, market, fixtures::flat_schedules(2, 0.0), fast_config());
  REQUIRE(result.status != NashStatus::Failed);
  CHECK(std::fabs(result.prices[0].prices[0] - result.prices[1].prices[0]) < 1e-3);
}

TEST_CASE("verification") {
  auto market = monopoly_market(5, 7);
  std::vector<MarketModel> views{market};
  GameConfig cfg = fast_config();
  cfg.verify_grid = 200;
  const auto result = solve_nash(views, market, fixtures::flat_schedules(1, 0.0), cfg);
  REQUIRE(result.status == NashStatus::Global);

  SUBCASE("a perturbed price fails verification") {
    auto perturbed = result.prices;
    perturbed[0].prices[0] *= 1.2;
    const auto report = verify_nash(views, perturbed, cfg);
    CHECK_FALSE(report.global);
    CHECK(report.max_relative_gain > cfg.verify_tolerance);
  }

  SUBCASE("a finer grid still passes at a relaxed tolerance") {
    GameConfig fine = cfg;
    fine.verify_grid = 2 * cfg.verify_grid;
    const auto report = verify_nash(views, result.prices, fine);
    CHECK(report.max_relative_gain < 0.01);
  }

  SUBCASE("scan export") {
    GameConfig tiny = cfg;
    tiny.verify_grid = 16;
    const auto report = verify_nash(views, result.prices, tiny, true);
    REQUIRE(report.scans.size() == 1);
    CHECK(report.scans[0].size() == 16);
    std::ostringstream csv;
    io::write_verification_csv(csv, report);
    CHECK(csv.str().find("provider,plan,price,revenue") == 0);
  }
}

TEST_CASE("identical inputs give identical results") {
  auto market = fixtures::two_provider_market(5, 67);
  std::vector<MarketModel> views{market, market};
  GameConfig cfg = fast_config();
  cfg.verify_grid = 60;
  const auto a = solve_nash(views, market, fixtures::flat_schedules(2, 0.0), cfg);
  const auto b = solve_nash(views, market, fixtures::flat_schedules(2, 0.0), cfg);
  REQUIRE(a.status != NashStatus::Failed);
  CHECK(a.prices[0].prices[0] == b.prices[0].prices[0]);
  CHECK(a.prices[1].prices[0] == b.prices[1].prices[0]);
  CHECK(a.realized_revenue == b.realized_revenue);
}

TEST_CASE("full-detail views reproduce the ground-truth equilibrium") {
  auto networks = fixtures::two_provider_networks(5);
  auto groups = fixtures::random_groups(6, 6);
  auto truth = users::build_market_model(networks, groups);

  // A full-detail view is the clustering with one group per cluster.
  const auto view = segmentation::cluster_population(groups, 6, 1);
  auto view_model = users::build_market_model(networks, view.clusters);

  auto prices = fixtures::flat_schedules(2, 8.0);
  prices[1].prices[0] = 5.0;
  const auto eq_truth = users::solve_user_equilibrium(truth, prices, users::LogitConfig{});
  const auto eq_view = users::solve_user_equilibrium(view_model, prices, users::LogitConfig{});
  REQUIRE(eq_truth.converged);
  REQUIRE(eq_view.converged);

  // Match rows through the cluster assignment.
  for (int j = 0; j < 6; ++j) {
    const int c = view.assignment[j];
    for (int s = 0; s < 3; ++s)
      CHECK(eq_truth.z.z(j, s) == doctest::Approx(eq_view.z.z(c, s)).epsilon(1e-6));
  }
}

TEST_CASE("revenue is unimodal in one price under enough noise") {
  auto market = fixtures::two_provider_market(8, 91);
  auto prices = fixtures::flat_schedules(2, 6.0);
  users::LogitConfig logit;
  logit.noise = 1.5;

  std::vector<double> revenue;
  const int grid = 200;
  for (int g = 0; g < grid; ++g) {
    prices[0].prices[0] = 60.0 * g / (grid - 1);
    revenue.push_back(provider_revenue(market, 0, prices, logit));
  }
  const double global_max = *std::max_element(revenue.begin(), revenue.end());
  for (int g = 1; g + 1 < grid; ++g) {
    const bool local_max = revenue[g] > revenue[g - 1] && revenue[g] > revenue[g + 1];
    if (local_max) CHECK(global_max - revenue[g] <= 0.005 * global_max);
  }
}

TEST_CASE("nash result JSON export") {
  auto market = monopoly_market(4, 3);
  std::vector<MarketModel> views{market};
  GameConfig cfg = fast_config();
  cfg.verify_grid = 60;
  cfg.multistart = 1;
  const auto result = solve_nash(views, market, fixtures::flat_schedules(1, 0.0), cfg);
  const auto j = io::to_json(result);
  CHECK(j.contains("status"));
  CHECK(j.contains("verification"));
  CHECK(j["realized_revenue"].size() == 1);
}
