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

#include <cmath>
#include <sstream>

#include "market_fixtures.hpp"
#include "wimark/json_io.hpp"
#include "wimark/user_dynamics.hpp"

using namespace wimark;
using namespace wimark::users;

TEST_CASE("dataplan prices by demand tier") {
  DataplanSchedule sched;
  sched.prices = {5.0, 9.0};
  sched.thresholds_mb = {100.0, 500.0};

  SUBCASE("single plan covers everything") {
    DataplanSchedule one;
    one.prices = {4.0};
    one.thresholds_mb = {1000.0};
    CHECK(dataplan_price(one, 1.0) == 4.0);
    CHECK(dataplan_price(one, 999.0) == 4.0);
    CHECK(dataplan_price(one, 5000.0) == 4.0);  // above the last tier
  }

  SUBCASE("boundaries are right-closed") {
    CHECK(dataplan_price(sched, 100.0) == 5.0);
    CHECK(dataplan_price(sched, 100.0001) == 9.0);
  }

  SUBCASE("interval scan") {
    for (double d = 1.0; d <= 600.0; d += 7.0) {
      const double expected = d <= 100.0 ? 5.0 : 9.0;  // 500 is the last tier
      CHECK(dataplan_price(sched, d) == expected);
    }
  }
}

TEST_CASE("group utility") {
  auto market = fixtures::two_provider_market(3, 42);
  const auto z = StrategyProfile::uniform(market.group_count(), market.provider_count());
  const auto qos = qos_report(market, z);
  auto prices = fixtures::flat_schedules(2, 10.0);

  SUBCASE("disconnection is the zero anchor") {
    for (int j = 0; j < market.group_count(); ++j)
      CHECK(group_utility(qos, market.groups[j], prices, j, 0) == 0.0);
  }

  SUBCASE("zero rate, zero price, unit offset gives zero") {
    UserGroup g;
    g.wtp_scale = 30.0;
    g.saturation_offset = 1.0;
    g.rate_sensitivity = 0.6;
    queueing::QosReport report;
    report.mean_rate = Matrix(1, 1, 0.0);
    report.rate_variance = Matrix(1, 1, 0.0);
    auto free_plan = fixtures::flat_schedules(1, 0.0);
    CHECK(group_utility(report, g, free_plan, 0, 1) == doctest::Approx(0.0));
  }

  SUBCASE("scalar recomputation") {
    UserGroup g;
    g.wtp_scale = 30.0;
    g.saturation_offset = 1.0;
    g.rate_sensitivity = 0.6;
    g.price_weight = 1.0;
    g.monthly_demand_mb = 50.0;
    queueing::QosReport report;
    report.mean_rate = Matrix(1, 1, 5.0);
    report.rate_variance = Matrix(1, 1, 0.0);
    auto plan = fixtures::flat_schedules(1, 10.0);
    const double expected = 30.0 * (1.0 - std::exp(-3.0)) - 10.0;
    CHECK(group_utility(report, g, plan, 0, 1) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(18.506).epsilon(1e-4));
  }
}

TEST_CASE("logit right-hand side") {
  SUBCASE("uniform profile with equal utilities is stationary") {
    const auto z = StrategyProfile::uniform(4, 2);
    Matrix u(4, 3, 1.25);
    const Matrix dz = logit_rhs(z, u, 1.5, 2.0);
    for (std::size_t n = 0; n < dz.size(); ++n) CHECK(std::fabs(dz.data()[n]) < 1e-14);
  }

  SUBCASE("huge noise pulls towards the uniform profile") {
    Rng rng(1);
    StrategyProfile z;
    z.z = Matrix(3, 4);
    for (int j = 0; j < 3; ++j) {
      double total = 0.0;
      for (int s = 0; s < 4; ++s) {
        z.z(j, s) = rng.uniform(0.01, 1.0);
        total += z.z(j, s);
      }
      for (int s = 0; s < 4; ++s) z.z(j, s) /= total;
    }
    Matrix u(3, 4);
    for (std::size_t n = 0; n < u.size(); ++n) u.data()[n] = rng.uniform(-50.0, 50.0);
    const double r = 1.7;
    const Matrix dz = logit_rhs(z, u, 1e9, r);
    for (int j = 0; j < 3; ++j)
      for (int s = 0; s < 4; ++s)
        CHECK(dz(j, s) == doctest::Approx(r * (0.25 - z.z(j, s))).epsilon(1e-6));
  }

  SUBCASE("softmax equals the pairwise exponential form") {
    Rng rng(2);
    Matrix u(5, 4);
    for (std::size_t n = 0; n < u.size(); ++n) u.data()[n] = rng.uniform(-20.0, 20.0);
    const double eps = 1.5;
    const Matrix s = choice_probabilities(u, eps);
    for (int j = 0; j < 5; ++j) {
      for (int i = 0; i < 4; ++i) {
        double denom = 1.0;
        for (int k = 0; k < 4; ++k)
          if (k != i) denom += std::exp((u(j, k) - u(j, i)) / eps);
        CHECK(s(j, i) == doctest::Approx(1.0 / denom).epsilon(1e-12));
      }
    }
  }

  SUBCASE("softmax rows are invariant to constant utility shifts") {
    Rng rng(3);
    Matrix u(4, 3);
    for (std::size_t n = 0; n < u.size(); ++n) u.data()[n] = rng.uniform(-5.0, 5.0);
    Matrix shifted = u;
    for (int j = 0; j < 4; ++j) {
      const double c = rng.uniform(-100.0, 100.0);
      for (int s = 0; s < 3; ++s) shifted(j, s) += c;
    }
    const Matrix a = choice_probabilities(u, 0.7);
    const Matrix b = choice_probabilities(shifted, 0.7);
    for (std::size_t n = 0; n < a.size(); ++n)
      CHECK(a.data()[n] == doctest::Approx(b.data()[n]).epsilon(1e-12));
  }
}

TEST_CASE("user equilibrium solve") {
  SUBCASE("symmetric providers split symmetrically") {
    auto market = fixtures::symmetric_market(2, 4, 7);
    auto prices = fixtures::flat_schedules(2, 8.0);
    const auto eq = solve_user_equilibrium(market, prices, LogitConfig{});
    REQUIRE(eq.converged);
    for (int j = 0; j < market.group_count(); ++j)
      CHECK(eq.z.z(j, 1) == doctest::Approx(eq.z.z(j, 2)).epsilon(1e-6));
  }

  SUBCASE("fixed-point residual certifies every converged run") {
    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
      auto market = fixtures::two_provider_market(4 + trial, rng.fork(trial).seed());
      auto prices = fixtures::flat_schedules(2, rng.uniform(2.0, 20.0));
      LogitConfig cfg;
      cfg.noise = rng.uniform(0.8, 2.5);
      const auto eq = solve_user_equilibrium(market, prices, cfg);
      REQUIRE(eq.converged);
      const Matrix u = utility_matrix(market, eq.z, prices);
      const Matrix s = choice_probabilities(u, cfg.noise);
      double residual = 0.0;
      for (std::size_t n = 0; n < s.size(); ++n)
        residual = std::max(residual, std::fabs(s.data()[n] - eq.z.z.data()[n]));
      CHECK(residual < 1e-7);
    }
  }

  SUBCASE("damped fixed-point iteration reaches the same equilibrium") {
    auto market = fixtures::two_provider_market(5, 31);
    auto prices = fixtures::flat_schedules(2, 6.0);
    LogitConfig cfg;
    const auto eq = solve_user_equilibrium(market, prices, cfg);
    REQUIRE(eq.converged);

    StrategyProfile z = StrategyProfile::uniform(market.group_count(), 2);
    for (int it = 0; it < 20000; ++it) {
      const Matrix u = utility_matrix(market, z, prices);
      const Matrix s = choice_probabilities(u, cfg.noise);
      double diff = 0.0;
      for (std::size_t n = 0; n < s.size(); ++n) {
        const double next = 0.9 * z.z.data()[n] + 0.1 * s.data()[n];
        diff = std::max(diff, std::fabs(next - z.z.data()[n]));
        z.z.data()[n] = next;
      }
      if (diff < 1e-12) break;
    }
    for (std::size_t n = 0; n < z.z.size(); ++n)
      CHECK(std::fabs(z.z.data()[n] - eq.z.z.data()[n]) < 1e-5);
  }

  SUBCASE("trajectories stay on the simplex") {
    auto market = fixtures::two_provider_market(4, 11);
    auto prices = fixtures::flat_schedules(2, 12.0);
    std::vector<std::pair<double, Matrix>> trajectory;
    const auto eq = solve_user_equilibrium(market, prices, LogitConfig{}, nullptr, &trajectory);
    REQUIRE(eq.converged);
    REQUIRE(trajectory.size() > 3);
    for (const auto& [t, z] : trajectory) {
      for (int j = 0; j < z.rows(); ++j) {
        double total = 0.0;
        for (int s = 0; s < z.cols(); ++s) {
          total += z(j, s);
          CHECK(z(j, s) > -1e-9);
        }
        CHECK(std::fabs(total - 1.0) < 1e-6);
      }
    }
  }

  SUBCASE("fixed points are invariant to the dynamics speed") {
    auto market = fixtures::two_provider_market(5, 53);
    auto prices = fixtures::flat_schedules(2, 9.0);
    LogitConfig slow;
    slow.speed = 1.0;
    LogitConfig fast;
    fast.speed = 5.0;
    const auto a = solve_user_equilibrium(market, prices, slow);
    const auto b = solve_user_equilibrium(market, prices, fast);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    for (std::size_t n = 0; n < a.z.z.size(); ++n)
      CHECK(std::fabs(a.z.z.data()[n] - b.z.z.data()[n]) < 1e-6);
  }

  SUBCASE("raising a provider's price cannot raise its equilibrium share") {
    Rng rng(401);
    for (int trial = 0; trial < 20; ++trial) {
      auto market = fixtures::two_provider_market(4 + trial % 5, rng.fork(trial).seed());
      const double base = rng.uniform(2.0, 15.0);
      auto prices = fixtures::flat_schedules(2, base);
      prices[1].prices[0] = rng.uniform(2.0, 15.0);
      const auto eq0 = solve_user_equilibrium(market, prices, LogitConfig{});
      auto raised = prices;
      raised[0].prices[0] = base + rng.uniform(0.5, 5.0);
      const auto eq1 = solve_user_equilibrium(market, raised, LogitConfig{});
      REQUIRE(eq0.converged);
      REQUIRE(eq1.converged);
      const auto s0 = market_share(eq0.z, market.groups);
      const auto s1 = market_share(eq1.z, market.groups);
      CHECK(s1[1] <= s0[1] + 1e-9);
    }
  }
}

TEST_CASE("market shares") {
  std::vector<UserGroup> groups(3);
  groups[0].population = 100.0;
  groups[1].population = 300.0;
  groups[2].population = 600.0;

  SUBCASE("uniform profile shares evenly") {
    const auto share = market_share(StrategyProfile::uniform(3, 2), groups);
    for (double s : share) CHECK(s == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("everyone on provider one") {
    StrategyProfile z;
    z.z = Matrix(3, 3);
    for (int j = 0; j < 3; ++j) z.z(j, 1) = 1.0;
    const auto share = market_share(z, groups);
    CHECK(share[0] == 0.0);
    CHECK(share[1] == 1.0);
    CHECK(share[2] == 0.0);
  }

  SUBCASE("weighted mean recomputation") {
    Rng rng(5);
    StrategyProfile z;
    z.z = Matrix(3, 3);
    for (int j = 0; j < 3; ++j) {
      double total = 0.0;
      for (int s = 0; s < 3; ++s) {
        z.z(j, s) = rng.uniform(0.0, 1.0);
        total += z.z(j, s);
      }
      for (int s = 0; s < 3; ++s) z.z(j, s) /= total;
    }
    const auto share = market_share(z, groups);
    for (int s = 0; s < 3; ++s) {
      double expected = 0.0;
      for (int j = 0; j < 3; ++j) expected += z.z(j, s) * groups[j].population;
      expected /= 1000.0;
      CHECK(share[s] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-group location weights are honoured") {
  auto networks = fixtures::two_provider_networks(77);
  const int stations = networks[0].station_count();
  // Concentrate group 0 on station 0 and group 1 on station 1 of the second
  // provider, whose stations have distinct bandwidths.
  Matrix gs(2, stations);
  for (int k = 0; k < stations; ++k) {
    gs(0, k) = k == 0 ? 1.0 : 0.0;
    gs(1, k) = k == 1 ? 1.0 : 0.0;
  }
  networks[1].mobility.group_sojourn = gs;
  auto biased = users::build_market_model(networks, fixtures::random_groups(2, 78));

  const auto z = StrategyProfile::uniform(2, 2);
  const auto qos = qos_report(biased, z);
  CHECK(std::fabs(qos.mean_rate(0, 1) - qos.mean_rate(1, 1)) > 1e-6);
}

TEST_CASE("qos and trajectory exports") {
  auto market = fixtures::two_provider_market(3, 21);
  auto prices = fixtures::flat_schedules(2, 5.0);
  std::vector<std::pair<double, Matrix>> trajectory;
  const auto eq = solve_user_equilibrium(market, prices, LogitConfig{}, nullptr, &trajectory);
  REQUIRE(eq.converged);

  const auto qos = qos_report(market, eq.z);
  for (int i = 0; i < market.provider_count(); ++i) {
    double top = 0.0;
    for (const auto& bs : market.providers[i].network.stations)
      top = std::max(top, bs.bandwidth_mbps);
    for (int g = 0; g < market.group_count(); ++g) {
      CHECK(qos.mean_rate(g, i) <= top + 1e-12);
      CHECK(qos.rate_variance(g, i) >= 0.0);
    }
    // Occupancy follows the single-queue law at the realized loads.
    std::vector<double> weights(market.group_count());
    for (int g = 0; g < market.group_count(); ++g) weights[g] = eq.z.z(g, i + 1);
    const auto load = queueing::total_intensity(market.providers[i].group_intensity, weights);
    for (std::size_t k = 0; k < load.rho.size(); ++k)
      if (load.rho[k] < 1.0)
        CHECK(qos.expected_occupancy[i][k] ==
              doctest::Approx(load.rho[k] / (1.0 - load.rho[k])).epsilon(1e-12));
  }

  const auto j = io::to_json(qos);
  CHECK(j.contains("mean_rate"));
  CHECK(j["mean_rate"].size() == 3);

  std::ostringstream csv;
  io::write_trajectory_csv(csv, trajectory);
  CHECK(csv.str().find("time,z_0_0") == 0);
}
