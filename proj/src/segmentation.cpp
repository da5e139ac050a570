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

#include "wimark/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wimark/rng.hpp"

namespace wimark::segmentation {

namespace {

constexpr int kFeatures = 4;
constexpr int kRestarts = 10;
constexpr int kMaxLloydIterations = 100;

std::array<double, kFeatures> features_of(const users::UserGroup& g) {
  return {g.wtp_scale, g.rate_sensitivity, g.normalized_rate, g.monthly_demand_mb};
}

// Interpolated sample quantile (the linear "type 7" convention).
double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

struct FeatureSpace {
  std::vector<std::array<double, kFeatures>> points;  // standardized, constant features zeroed
  std::vector<double> weights;

  double dist2(const std::array<double, kFeatures>& a,
               const std::array<double, kFeatures>& b) const {
    double s = 0.0;
    for (int f = 0; f < kFeatures; ++f) {
      const double d = a[f] - b[f];
      s += d * d;
    }
    return s;
  }
};

FeatureSpace standardize(const std::vector<users::UserGroup>& groups) {
  const std::size_t n = groups.size();
  FeatureSpace space;
  space.points.resize(n);
  space.weights.resize(n);
  std::array<double, kFeatures> mean{}, var{};
  for (std::size_t j = 0; j < n; ++j) {
    const auto x = features_of(groups[j]);
    for (int f = 0; f < kFeatures; ++f) mean[f] += x[f];
    space.weights[j] = groups[j].population;
  }
  for (int f = 0; f < kFeatures; ++f) mean[f] /= n;
  for (std::size_t j = 0; j < n; ++j) {
    const auto x = features_of(groups[j]);
    for (int f = 0; f < kFeatures; ++f) var[f] += (x[f] - mean[f]) * (x[f] - mean[f]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto x = features_of(groups[j]);
    for (int f = 0; f < kFeatures; ++f) {
      const double sd = std::sqrt(var[f] / n);
      // Constant features carry no information and would divide by zero.
      space.points[j][f] = sd > 1e-12 ? (x[f] - mean[f]) / sd : 0.0;
    }
  }
  return space;
}

struct KmeansRun {
  std::vector<int> assignment;
  std::vector<std::array<double, kFeatures>> centers;
  double wcss = 0.0;
};

int nearest_center(const FeatureSpace& space, const std::array<double, kFeatures>& x,
                   const std::vector<std::array<double, kFeatures>>& centers) {
  int best = 0;
  double best_d = space.dist2(x, centers[0]);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = space.dist2(x, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

// Index sampled proportionally to the given non-negative masses; falls back
// to the first positive-weight index when all masses vanish.
int weighted_pick(const std::vector<double>& mass, Rng& rng) {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (total <= 0.0) {
    for (std::size_t j = 0; j < mass.size(); ++j)
      if (mass[j] >= 0.0) return static_cast<int>(j);
    return 0;
  }
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t j = 0; j < mass.size(); ++j) {
    acc += mass[j];
    if (target < acc) return static_cast<int>(j);
  }
  return static_cast<int>(mass.size()) - 1;
}

KmeansRun lloyd(const FeatureSpace& space, int level, Rng rng) {
  const int n = static_cast<int>(space.points.size());
  KmeansRun run;
  run.centers.reserve(level);

  // k-means++ seeding, weighted by population.
  std::vector<double> d2(n, 0.0);
  std::vector<char> chosen(n, 0);
  {
    std::vector<double> mass = space.weights;
    const int first = weighted_pick(mass, rng);
    run.centers.push_back(space.points[first]);
    chosen[first] = 1;
  }
  while (static_cast<int>(run.centers.size()) < level) {
    std::vector<double> mass(n);
    for (int j = 0; j < n; ++j) {
      d2[j] = space.dist2(space.points[j], run.centers[nearest_center(space, space.points[j], run.centers)]);
      mass[j] = chosen[j] ? 0.0 : space.weights[j] * d2[j];
    }
    int pick = weighted_pick(mass, rng);
    if (chosen[pick]) {  // duplicate profiles: take the first free point
      for (int j = 0; j < n; ++j)
        if (!chosen[j]) {
          pick = j;
          break;
        }
    }
    run.centers.push_back(space.points[pick]);
    chosen[pick] = 1;
  }

  run.assignment.assign(n, -1);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = false;
    for (int j = 0; j < n; ++j) {
      const int c = nearest_center(space, space.points[j], run.centers);
      if (c != run.assignment[j]) {
        run.assignment[j] = c;
        changed = true;
      }
    }
    // Weighted centroid update; an emptied cluster is reseeded at the point
    // farthest from its centroid.
    std::vector<std::array<double, kFeatures>> sums(level, std::array<double, kFeatures>{});
    std::vector<double> mass(level, 0.0);
    for (int j = 0; j < n; ++j) {
      mass[run.assignment[j]] += space.weights[j];
      for (int f = 0; f < kFeatures; ++f)
        sums[run.assignment[j]][f] += space.weights[j] * space.points[j][f];
    }
    for (int c = 0; c < level; ++c) {
      if (mass[c] > 0.0) {
        for (int f = 0; f < kFeatures; ++f) run.centers[c][f] = sums[c][f] / mass[c];
      } else {
        int far = 0;
        double far_d = -1.0;
        for (int j = 0; j < n; ++j) {
          const double d = space.weights[j] *
                           space.dist2(space.points[j], run.centers[run.assignment[j]]);
          if (d > far_d) {
            far_d = d;
            far = j;
          }
        }
        run.centers[c] = space.points[far];
        changed = true;
      }
    }
    if (!changed) break;
  }

  run.wcss = 0.0;
  for (int j = 0; j < n; ++j)
    run.wcss += space.weights[j] * space.dist2(space.points[j], run.centers[run.assignment[j]]);
  return run;
}

}  // namespace

ProviderView cluster_population(const std::vector<users::UserGroup>& groups, int level,
                                std::uint64_t seed) {
  const int n = static_cast<int>(groups.size());
  if (level < 1 || level > n)
    throw std::invalid_argument("cluster_population: level of detail must be in [1, group count]");

  // Canonical processing order makes the result independent of the caller's
  // group ordering.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto fa = features_of(groups[a]);
    const auto fb = features_of(groups[b]);
    if (fa != fb) return fa < fb;
    return groups[a].population < groups[b].population;
  });
  std::vector<users::UserGroup> ordered(n);
  for (int j = 0; j < n; ++j) ordered[j] = groups[order[j]];

  const FeatureSpace space = standardize(ordered);
  Rng rng(seed);
  KmeansRun best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < kRestarts; ++r) {
    KmeansRun run = lloyd(space, level, rng.fork(r));
    if (run.wcss < best.wcss) best = std::move(run);
  }

  // Aggregate member profiles into centroid groups (population-weighted
  // means; populations and session rates are summed).
  std::vector<users::UserGroup> clusters(level);
  for (auto& cl : clusters) {
    cl.population = 0.0;
    cl.wtp_scale = 0.0;
    cl.saturation_offset = 0.0;
    cl.rate_sensitivity = 0.0;
    cl.variance_weight = 0.0;
    cl.price_weight = 0.0;
    cl.session_rate = 0.0;
    cl.monthly_demand_mb = 0.0;
    cl.normalized_rate = 0.0;
  }
  std::vector<double> mass(level, 0.0);
  for (int j = 0; j < n; ++j) {
    const int c = best.assignment[j];
    const auto& g = ordered[j];
    auto& cl = clusters[c];
    mass[c] += g.population;
    cl.population += g.population;
    cl.session_rate += g.session_rate;
    cl.wtp_scale += g.population * g.wtp_scale;
    cl.saturation_offset += g.population * g.saturation_offset;
    cl.rate_sensitivity += g.population * g.rate_sensitivity;
    cl.variance_weight += g.population * g.variance_weight;
    cl.price_weight += g.population * g.price_weight;
    cl.monthly_demand_mb += g.population * g.monthly_demand_mb;
    cl.normalized_rate += g.population * g.normalized_rate;
  }
  for (int c = 0; c < level; ++c) {
    if (mass[c] <= 0.0) throw std::runtime_error("cluster_population: empty cluster");
    auto& cl = clusters[c];
    cl.wtp_scale /= mass[c];
    cl.saturation_offset /= mass[c];
    cl.rate_sensitivity /= mass[c];
    cl.variance_weight /= mass[c];
    cl.price_weight /= mass[c];
    cl.monthly_demand_mb /= mass[c];
    cl.normalized_rate /= mass[c];
  }

  // Canonical cluster labels: sort centroids by profile.
  std::vector<int> label(level);
  std::iota(label.begin(), label.end(), 0);
  std::sort(label.begin(), label.end(), [&](int a, int b) {
    const auto fa = features_of(clusters[a]);
    const auto fb = features_of(clusters[b]);
    if (fa != fb) return fa < fb;
    return clusters[a].population < clusters[b].population;
  });
  std::vector<int> rank(level);
  for (int c = 0; c < level; ++c) rank[label[c]] = c;

  ProviderView view;
  view.level_of_detail = level;
  view.clusters.resize(level);
  for (int c = 0; c < level; ++c) {
    view.clusters[rank[c]] = clusters[c];
    view.clusters[rank[c]].id = rank[c];
  }
  view.assignment.assign(n, -1);
  for (int j = 0; j < n; ++j) view.assignment[order[j]] = rank[best.assignment[j]];
  return view;
}

double within_cluster_ss(const std::vector<users::UserGroup>& groups,
                         const ProviderView& view) {
  const FeatureSpace space = standardize(groups);
  // Project centroids into the same standardized space via their members.
  const int level = view.level_of_detail;
  std::vector<std::array<double, kFeatures>> centers(level, std::array<double, kFeatures>{});
  std::vector<double> mass(level, 0.0);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const int c = view.assignment[j];
    mass[c] += space.weights[j];
    for (int f = 0; f < kFeatures; ++f) centers[c][f] += space.weights[j] * space.points[j][f];
  }
  for (int c = 0; c < level; ++c)
    if (mass[c] > 0.0)
      for (int f = 0; f < kFeatures; ++f) centers[c][f] /= mass[c];
  double wcss = 0.0;
  for (std::size_t j = 0; j < groups.size(); ++j)
    wcss += space.weights[j] * space.dist2(space.points[j], centers[view.assignment[j]]);
  return wcss;
}

std::vector<double> dataplan_tiers(const std::vector<users::UserGroup>& groups,
                                   int plan_count, double mean_rate_per_hour,
                                   double session_mb) {
  if (plan_count < 1) throw std::invalid_argument("dataplan_tiers: plan count must be >= 1");
  if (groups.empty()) throw std::invalid_argument("dataplan_tiers: no groups");
  std::vector<double> rates;
  rates.reserve(groups.size());
  for (const auto& g : groups) rates.push_back(g.normalized_rate);
  std::sort(rates.begin(), rates.end());

  // Sessions/hour over a 30-day month, at session_mb megabytes per session.
  const double mb_per_unit_rate = mean_rate_per_hour * 24.0 * 30.0 * session_mb;
  std::vector<double> thresholds(plan_count);
  for (int s = 1; s <= plan_count; ++s) {
    double t = quantile(rates, static_cast<double>(s) / plan_count) * mb_per_unit_rate;
    if (s > 1 && t <= thresholds[s - 2])
      t = thresholds[s - 2] + 1e-9 * std::max(1.0, std::fabs(thresholds[s - 2]));
    thresholds[s - 1] = t;
  }
  return thresholds;
}

const char* category_name(UserCategory c) {
  switch (c) {
    case UserCategory::Business: return "business";
    case UserCategory::LowProfile: return "low_profile";
    case UserCategory::ValueForMoney: return "value_for_money";
    case UserCategory::Lenient: return "lenient";
  }
  return "unknown";
}

std::vector<UserCategory> categorize_groups(const std::vector<users::UserGroup>& groups) {
  if (groups.size() < 2)
    throw std::invalid_argument("categorize_groups: need at least two groups");
  std::vector<double> wtp, tol;
  for (const auto& g : groups) {
    wtp.push_back(g.wtp_scale);
    tol.push_back(g.rate_sensitivity);
  }
  std::sort(wtp.begin(), wtp.end());
  std::sort(tol.begin(), tol.end());
  const double wtp_median = quantile(wtp, 0.5);
  const double tol_median = quantile(tol, 0.5);

  std::vector<UserCategory> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    const bool high_pay = g.wtp_scale > wtp_median;   // ties fall on the lower side
    const bool tolerant = g.rate_sensitivity > tol_median;
    if (high_pay && !tolerant) out.push_back(UserCategory::Business);
    else if (!high_pay && tolerant) out.push_back(UserCategory::LowProfile);
    else if (!high_pay && !tolerant) out.push_back(UserCategory::ValueForMoney);
    else out.push_back(UserCategory::Lenient);
  }
  return out;
}

}  // namespace wimark::segmentation
