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
#include <vector>

#include "wimark/user_dynamics.hpp"

namespace wimark::segmentation {

/// One provider's view of the market: the ground-truth groups reduced to
/// `level_of_detail` representative clusters.
struct ProviderView {
  int provider = 0;
  int level_of_detail = 0;
  std::vector<users::UserGroup> clusters;  // centroid profiles with aggregated populations
  std::vector<int> assignment;             // group index -> cluster index
};

/// Population-weighted k-means over standardized (wtp, sensitivity,
/// normalized rate, demand) profiles. Deterministic under the seed
/// (k-means++ seeding, best of 10 restarts), and invariant to the order of
/// the input groups.
ProviderView cluster_population(const std::vector<users::UserGroup>& groups, int level,
                                std::uint64_t seed);

/// Sum of population-weighted squared distances to the assigned centroids,
/// in the same standardized feature space used by cluster_population.
double within_cluster_ss(const std::vector<users::UserGroup>& groups,
                         const ProviderView& view);

/// Demand-tier boundaries at equal percentiles of the normalized session
/// rates, converted to monthly MB at the given mean per-user rate
/// (sessions/hour). Returns `plan_count` thresholds; the last one sits at
/// the population maximum and demand above it maps to the last tier.
std::vector<double> dataplan_tiers(const std::vector<users::UserGroup>& groups,
                                   int plan_count, double mean_rate_per_hour,
                                   double session_mb);

enum class UserCategory { Business, LowProfile, ValueForMoney, Lenient };

const char* category_name(UserCategory c);

/// Median-split quadrants of the (willingness-to-pay, rate-tolerance) plane.
/// Values equal to a median fall on the lower side.
std::vector<UserCategory> categorize_groups(const std::vector<users::UserGroup>& groups);

}  // namespace wimark::segmentation
