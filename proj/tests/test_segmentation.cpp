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
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "market_fixtures.hpp"
#include "wimark/json_io.hpp"
#include "wimark/segmentation.hpp"

using namespace wimark;
using namespace wimark::segmentation;

namespace {

std::vector<users::UserGroup> spread_groups(int count, std::uint64_t seed) {
  auto groups = fixtures::random_groups(count, seed);
  // Integer populations keep the conservation sums exact.
  for (auto& g : groups) g.population = 1000.0;
  return groups;
}

}  // namespace

TEST_CASE("clustering levels of detail") {
  auto groups = spread_groups(12, 9);

  SUBCASE("full detail keeps every group as its own cluster") {
    const auto view = cluster_population(groups, 12, 1);
    REQUIRE(view.clusters.size() == 12);
    std::vector<int> seen(12, 0);
    for (int j = 0; j < 12; ++j) {
      const int c = view.assignment[j];
      seen[c] += 1;
      CHECK(view.clusters[c].wtp_scale == doctest::Approx(groups[j].wtp_scale));
      CHECK(view.clusters[c].rate_sensitivity ==
            doctest::Approx(groups[j].rate_sensitivity));
      CHECK(view.clusters[c].population == groups[j].population);
    }
    for (int c = 0; c < 12; ++c) CHECK(seen[c] == 1);
  }

  SUBCASE("macroscopic view is the weighted mean profile") {
    const auto view = cluster_population(groups, 1, 1);
    REQUIRE(view.clusters.size() == 1);
    double total = 0.0, wtp = 0.0, rate = 0.0;
    for (const auto& g : groups) {
      total += g.population;
      wtp += g.population * g.wtp_scale;
      rate += g.session_rate;
    }
    CHECK(view.clusters[0].population == doctest::Approx(total));
    CHECK(view.clusters[0].wtp_scale == doctest::Approx(wtp / total).epsilon(1e-12));
    CHECK(view.clusters[0].session_rate == doctest::Approx(rate).epsilon(1e-12));
  }

  SUBCASE("too much detail is rejected") {
    CHECK_THROWS_AS(cluster_population(groups, 13, 1), std::invalid_argument);
    CHECK_THROWS_AS(cluster_population(groups, 0, 1), std::invalid_argument);
  }

  SUBCASE("beats random assignments") {
    auto population = spread_groups(40, 77);
    const auto view = cluster_population(population, 5, 3);
    const double clustered = within_cluster_ss(population, view);
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
      ProviderView random_view;
      random_view.level_of_detail = 5;
      random_view.assignment.resize(population.size());
      for (auto& a : random_view.assignment) a = rng.uniform_int(5);
      CHECK(clustered <= within_cluster_ss(population, random_view) + 1e-9);
    }
  }
}

TEST_CASE("clustering invariants") {
  auto groups = spread_groups(40, 21);

  SUBCASE("population and traffic are conserved at every level") {
    double total_pop = 0.0, total_rate = 0.0;
    for (const auto& g : groups) {
      total_pop += g.population;
      total_rate += g.session_rate;
    }
    for (int level : {1, 5, 9, 20, 40}) {
      const auto view = cluster_population(groups, level, 5);
      double pop = 0.0, rate = 0.0;
      for (const auto& c : view.clusters) {
        pop += c.population;
        rate += c.session_rate;
      }
      CHECK(pop == total_pop);  // integer-valued populations sum exactly
      CHECK(rate == doctest::Approx(total_rate).epsilon(1e-12));
      for (int a : view.assignment) {
        CHECK(a >= 0);
        CHECK(a < level);
      }
    }
  }

  SUBCASE("objective improves with the level of detail") {
    double previous = std::numeric_limits<double>::infinity();
    for (int level : {1, 5, 9, 20}) {
      const auto view = cluster_population(groups, level, 5);
      const double wcss = within_cluster_ss(groups, view);
      CHECK(wcss <= previous + 1e-9);
      previous = wcss;
    }
  }

  SUBCASE("group order does not matter") {
    const auto view = cluster_population(groups, 6, 9);
    auto shuffled = groups;
    Rng rng(55);
    for (int j = static_cast<int>(shuffled.size()) - 1; j > 0; --j)
      std::swap(shuffled[j], shuffled[rng.uniform_int(j + 1)]);
    const auto view2 = cluster_population(shuffled, 6, 9);

    for (int c = 0; c < 6; ++c) {
      CHECK(view.clusters[c].wtp_scale == doctest::Approx(view2.clusters[c].wtp_scale));
      CHECK(view.clusters[c].population == view2.clusters[c].population);
    }
    // Assignments agree through the permutation.
    for (std::size_t j = 0; j < shuffled.size(); ++j) {
      const auto& g = shuffled[j];
      for (std::size_t k = 0; k < groups.size(); ++k)
        if (groups[k].id == g.id) CHECK(view.assignment[k] == view2.assignment[j]);
    }
  }

  SUBCASE("same seed reproduces the same view") {
    const auto a = cluster_population(groups, 7, 1234);
    const auto b = cluster_population(groups, 7, 1234);
    CHECK(a.assignment == b.assignment);
    for (int c = 0; c < 7; ++c)
      CHECK(a.clusters[c].wtp_scale == b.clusters[c].wtp_scale);
  }
}

TEST_CASE("dataplan tiers from demand percentiles") {
  SUBCASE("single plan spans the population") {
    auto groups = spread_groups(10, 3);
    const auto thresholds = dataplan_tiers(groups, 1, 1.0, 10.0);
    REQUIRE(thresholds.size() == 1);
    double top = 0.0;
    for (const auto& g : groups) top = std::max(top, g.normalized_rate);
    CHECK(thresholds[0] == doctest::Approx(top * 7200.0).epsilon(1e-12));
  }

  SUBCASE("two plans split at the median") {
    std::vector<users::UserGroup> groups(4);
    const double rates[4] = {0.8, 0.9, 1.1, 1.2};
    for (int j = 0; j < 4; ++j) {
      groups[j].id = j;
      groups[j].population = 100.0;
      groups[j].normalized_rate = rates[j];
    }
    const auto thresholds = dataplan_tiers(groups, 2, 1.0, 10.0);
    REQUIRE(thresholds.size() == 2);
    CHECK(thresholds[0] == doctest::Approx(1.0 * 7200.0).epsilon(1e-12));
  }

  SUBCASE("three plans take near-equal occupancy") {
    auto groups = spread_groups(100, 8);
    const double lambda = 1.0;
    const auto thresholds = dataplan_tiers(groups, 3, lambda, 10.0);
    users::DataplanSchedule sched;
    sched.prices = {1.0, 2.0, 3.0};
    sched.thresholds_mb = thresholds;
    std::array<int, 3> count{};
    for (auto& g : groups) {
      const double demand = g.normalized_rate * lambda * 720.0 * 10.0;
      count[users::dataplan_tier(sched, demand)] += 1;
    }
    for (int s = 0; s < 3; ++s) {
      CHECK(count[s] >= 100 / 3 - 2);
      CHECK(count[s] <= 100 / 3 + 3);
    }
  }
}

TEST_CASE("user categories") {
  SUBCASE("quadrant corners") {
    std::vector<users::UserGroup> groups(4);
    // (wtp, tolerance) corners around the medians.
    const double wtp[4] = {45.0, 15.0, 14.0, 46.0};
    const double tol[4] = {0.2, 1.1, 0.25, 1.2};
    for (int j = 0; j < 4; ++j) {
      groups[j].wtp_scale = wtp[j];
      groups[j].rate_sensitivity = tol[j];
    }
    const auto cats = categorize_groups(groups);
    CHECK(cats[0] == UserCategory::Business);       // pays most, least tolerant
    CHECK(cats[1] == UserCategory::LowProfile);     // pays least, most tolerant
    CHECK(cats[2] == UserCategory::ValueForMoney);  // both low
    CHECK(cats[3] == UserCategory::Lenient);        // both high
  }

  SUBCASE("every group lands in exactly one category") {
    auto groups = spread_groups(41, 10);
    const auto cats = categorize_groups(groups);
    REQUIRE(cats.size() == groups.size());
    std::array<int, 4> count{};
    for (auto c : cats) count[static_cast<int>(c)] += 1;
    CHECK(std::accumulate(count.begin(), count.end(), 0) == 41);
    for (int c = 0; c < 4; ++c) CHECK(count[c] > 0);
  }
}

TEST_CASE("provider view JSON export") {
  auto groups = spread_groups(8, 4);
  auto view = cluster_population(groups, 3, 2);
  view.provider = 1;
  const auto j = io::to_json(view);
  CHECK(j["level_of_detail"] == 3);
  CHECK(j["clusters"].size() == 3);
  CHECK(j["assignment"].size() == 8);
}
