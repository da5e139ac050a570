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

#include "wimark/provider_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wimark/rng.hpp"

namespace wimark::game {

namespace {

struct PriceLayout {
  std::vector<int> offset;  // provider -> first flat index
  int total = 0;

  static PriceLayout of(const std::vector<users::DataplanSchedule>& schedules) {
    PriceLayout l;
    for (const auto& s : schedules) {
      l.offset.push_back(l.total);
      l.total += s.plan_count();
    }
    return l;
  }
};

std::vector<double> pack(const std::vector<users::DataplanSchedule>& schedules) {
  std::vector<double> x;
  for (const auto& s : schedules) x.insert(x.end(), s.prices.begin(), s.prices.end());
  return x;
}

void unpack(const std::vector<double>& x, std::vector<users::DataplanSchedule>& schedules) {
  std::size_t n = 0;
  for (auto& s : schedules)
    for (double& p : s.prices) p = x[n++];
}

// Shared context for one solve: counts equilibrium evaluations and keeps the
// working schedule copy that price vectors are written into.
struct Evaluator {
  const std::vector<users::MarketModel>& views;
  mutable std::vector<users::DataplanSchedule> schedules;
  const GameConfig& config;
  mutable long solves = 0;

  Evaluator(const std::vector<users::MarketModel>& v,
            const std::vector<users::DataplanSchedule>& s, const GameConfig& c)
      : views(v), schedules(s), config(c) {}

  double revenue(int provider, const std::vector<double>& x) const {
    unpack(x, schedules);
    ++solves;
    return provider_revenue(views[provider], provider, schedules, config.logit);
  }
};

double population_of(const users::MarketModel& model) {
  double n = 0.0;
  for (const auto& g : model.groups) n += g.population;
  return n;
}

std::vector<double> gradient_at(const Evaluator& eval, const PriceLayout& layout,
                                const std::vector<double>& x, double step, double cap) {
  std::vector<double> g(layout.total, 0.0);
  std::vector<double> probe = x;
  for (int i = 0; i < static_cast<int>(eval.views.size()); ++i) {
    const int plans = eval.schedules[i].plan_count();
    for (int s = 0; s < plans; ++s) {
      const int n = layout.offset[i] + s;
      const double c0 = x[n];
      const double hi = std::min(c0 + step, cap);
      const double lo = std::max(c0 - step, 0.0);
      probe[n] = hi;
      const double up = eval.revenue(i, probe);
      probe[n] = lo;
      const double down = eval.revenue(i, probe);
      probe[n] = c0;
      g[n] = (up - down) / (hi - lo);
    }
  }
  return g;
}

// Golden-section maximization of one provider's revenue in its own price
// coordinate. Revenue can be multimodal in one price (competing for the mass
// market versus charging a premium segment), so every local maximum of the
// grid scan is refined, as is a bracket around the incumbent price, and the
// best probe overall wins.
double maximize_own_price(const Evaluator& eval, int provider, std::vector<double>& x,
                          int index, double cap) {
  const auto& cfg = eval.config;
  const int grid = std::max(cfg.sweep_grid, 5);
  const double incumbent = x[index];
  const double cell = cap / (grid - 1);

  std::vector<double> value(grid);
  for (int g = 0; g < grid; ++g) {
    x[index] = cell * g;
    value[g] = eval.revenue(provider, x);
  }

  double best_price = 0.0;
  double best_value = -std::numeric_limits<double>::infinity();
  auto consider = [&](double price, double v) {
    if (v > best_value) {
      best_value = v;
      best_price = price;
    }
  };
  for (int g = 0; g < grid; ++g) consider(cell * g, value[g]);

  auto refine = [&](double lo, double hi) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = hi - kInvPhi * (hi - lo);
    double b = lo + kInvPhi * (hi - lo);
    x[index] = a;
    double fa = eval.revenue(provider, x);
    x[index] = b;
    double fb = eval.revenue(provider, x);
    consider(a, fa);
    consider(b, fb);
    while (hi - lo > cfg.line_tolerance) {
      if (fa < fb) {
        lo = a;
        a = b;
        fa = fb;
        b = lo + kInvPhi * (hi - lo);
        x[index] = b;
        fb = eval.revenue(provider, x);
        consider(b, fb);
      } else {
        hi = b;
        b = a;
        fb = fa;
        a = hi - kInvPhi * (hi - lo);
        x[index] = a;
        fa = eval.revenue(provider, x);
        consider(a, fa);
      }
    }
  };

  std::vector<int> peaks;
  for (int g = 0; g < grid; ++g) {
    const bool rises_left = g == 0 || value[g] >= value[g - 1];
    const bool falls_right = g == grid - 1 || value[g] >= value[g + 1];
    if (rises_left && falls_right) peaks.push_back(g);
  }
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) {
    if (value[a] != value[b]) return value[a] > value[b];
    return a < b;
  });
  if (peaks.size() > 3) peaks.resize(3);
  for (int g : peaks) refine(std::max(0.0, cell * (g - 1)), std::min(cap, cell * (g + 1)));
  refine(std::max(0.0, incumbent - cell), std::min(cap, incumbent + cell));

  x[index] = best_price;
  return best_price;
}

// Cyclic best-response sweep; `damping` scales each price move towards the
// best response. Returns true when prices stabilized.
bool best_response_sweep(const Evaluator& eval, const PriceLayout& layout,
                         std::vector<double>& x, double cap, double damping) {
  const auto& cfg = eval.config;
  for (int pass = 0; pass < cfg.sweep_max_passes; ++pass) {
    double moved = 0.0;
    for (int i = 0; i < static_cast<int>(eval.views.size()); ++i) {
      const int plans = eval.schedules[i].plan_count();
      for (int s = 0; s < plans; ++s) {
        const int n = layout.offset[i] + s;
        const double before = x[n];
        const double response = maximize_own_price(eval, i, x, n, cap);
        x[n] = before + damping * (response - before);
        moved = std::max(moved, std::fabs(x[n] - before));
      }
    }
    if (moved < cfg.sweep_price_tolerance) return true;
  }
  return false;
}

struct RootResult {
  std::vector<double> x;
  double residual = 0.0;
  bool converged = false;
};

// Damped Broyden iteration on the stacked first-order conditions, projected
// onto the price box.
RootResult root_find(const Evaluator& eval, const PriceLayout& layout,
                     std::vector<double> x, double cap, double scale) {
  const auto& cfg = eval.config;
  const int n = layout.total;
  const double tol = cfg.foc_tolerance * scale;

  auto clampx = [&](std::vector<double>& v) {
    for (double& c : v) c = std::clamp(c, 0.0, cap);
  };
  clampx(x);

  std::vector<double> g = gradient_at(eval, layout, x, cfg.fd_step, cap);
  double gnorm = infinity_norm(g);
  if (gnorm < tol) return {x, gnorm, true};

  // Finite-difference Jacobian of the gradient system.
  Matrix jac(n, n);
  const double jstep = std::max(cfg.fd_step, 1e-3 * cap);
  for (int c = 0; c < n; ++c) {
    std::vector<double> xp = x;
    xp[c] = std::min(xp[c] + jstep, cap);
    const double dx = xp[c] - x[c];
    if (dx == 0.0) {
      xp[c] = std::max(x[c] - jstep, 0.0);
    }
    const std::vector<double> gp = gradient_at(eval, layout, xp, cfg.fd_step, cap);
    const double denom = xp[c] - x[c];
    for (int r = 0; r < n; ++r) jac(r, c) = (gp[r] - g[r]) / denom;
  }

  int stalls = 0;
  for (int iter = 0; iter < cfg.max_root_iterations; ++iter) {
    std::vector<double> step;
    try {
      std::vector<double> rhs(n);
      for (int r = 0; r < n; ++r) rhs[r] = -g[r];
      step = solve_linear(jac, rhs);
    } catch (const std::runtime_error&) {
      return {x, gnorm, false};
    }

    double damp = 1.0;
    std::vector<double> xn, gn;
    double gn_norm = gnorm;
    bool improved = false;
    for (int bt = 0; bt < 6; ++bt) {
      xn = x;
      for (int c = 0; c < n; ++c) xn[c] += damp * step[c];
      clampx(xn);
      gn = gradient_at(eval, layout, xn, cfg.fd_step, cap);
      gn_norm = infinity_norm(gn);
      if (gn_norm < gnorm) {
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) {
      if (++stalls >= 2) return {x, gnorm, false};
      continue;
    }
    stalls = 0;

    // Broyden rank-one update: J += (dg - J dx) dx^T / |dx|^2.
    std::vector<double> dx(n), dg(n);
    double dx2 = 0.0;
    for (int c = 0; c < n; ++c) {
      dx[c] = xn[c] - x[c];
      dg[c] = gn[c] - g[c];
      dx2 += dx[c] * dx[c];
    }
    if (dx2 > 0.0) {
      for (int r = 0; r < n; ++r) {
        double jdx = 0.0;
        for (int c = 0; c < n; ++c) jdx += jac(r, c) * dx[c];
        const double f = (dg[r] - jdx) / dx2;
        for (int c = 0; c < n; ++c) jac(r, c) += f * dx[c];
      }
    }

    x = std::move(xn);
    g = std::move(gn);
    gnorm = gn_norm;
    if (gnorm < tol) return {x, gnorm, true};
  }
  return {x, gnorm, false};
}

}  // namespace

double provider_revenue(const users::MarketModel& view, int provider,
                        const std::vector<users::DataplanSchedule>& prices,
                        const users::LogitConfig& logit,
                        users::EquilibriumResult* equilibrium) {
  users::EquilibriumResult eq = users::solve_user_equilibrium(view, prices, logit);
  if (!eq.converged)
    throw std::runtime_error("provider_revenue: user equilibrium did not converge (residual " +
                             std::to_string(eq.residual) + ")");
  const double revenue = revenue_from_profile(view.groups, eq.z, prices)[provider];
  if (equilibrium) *equilibrium = std::move(eq);
  return revenue;
}

std::vector<double> revenue_from_profile(const std::vector<users::UserGroup>& groups,
                                         const users::StrategyProfile& z,
                                         const std::vector<users::DataplanSchedule>& prices) {
  std::vector<double> revenue(prices.size(), 0.0);
  for (std::size_t i = 0; i < prices.size(); ++i)
    for (std::size_t j = 0; j < groups.size(); ++j)
      revenue[i] += groups[j].population * z.z(static_cast<int>(j), static_cast<int>(i) + 1) *
                    users::dataplan_price(prices[i], groups[j].monthly_demand_mb);
  return revenue;
}

std::vector<double> revenue_gradient(const std::vector<users::MarketModel>& views,
                                     const std::vector<users::DataplanSchedule>& prices,
                                     const GameConfig& config, double step) {
  const Evaluator eval(views, prices, config);
  const PriceLayout layout = PriceLayout::of(prices);
  double cap = 0.0;
  for (const auto& s : prices) cap = std::max(cap, s.price_cap);
  return gradient_at(eval, layout, pack(prices), step, cap);
}

VerificationReport verify_nash(const std::vector<users::MarketModel>& views,
                               const std::vector<users::DataplanSchedule>& prices,
                               const GameConfig& config, bool keep_scans) {
  const Evaluator eval(views, prices, config);
  const PriceLayout layout = PriceLayout::of(prices);
  std::vector<double> x = pack(prices);

  VerificationReport report;
  for (int i = 0; i < static_cast<int>(views.size()); ++i) {
    const double base = eval.revenue(i, x);
    const double cap = prices[i].price_cap;
    for (int s = 0; s < prices[i].plan_count(); ++s) {
      const int n = layout.offset[i] + s;
      const double keep = x[n];
      VerificationEntry entry;
      entry.provider = i;
      entry.plan = s;
      entry.base_price = keep;
      entry.base_revenue = base;
      entry.best_price = keep;
      entry.best_revenue = base;
      std::vector<std::pair<double, double>> scan;
      const int grid = std::max(config.verify_grid, 2);
      for (int g = 0; g < grid; ++g) {
        const double c = cap * g / (grid - 1);
        x[n] = c;
        const double v = eval.revenue(i, x);
        if (keep_scans) scan.emplace_back(c, v);
        if (v > entry.best_revenue) {
          entry.best_revenue = v;
          entry.best_price = c;
        }
      }
      x[n] = keep;
      entry.relative_gain =
          (entry.best_revenue - base) / std::max(base, 1e-12);
      report.max_relative_gain = std::max(report.max_relative_gain, entry.relative_gain);
      report.entries.push_back(entry);
      if (keep_scans) report.scans.push_back(std::move(scan));
    }
  }
  report.global = report.max_relative_gain < config.verify_tolerance;
  return report;
}

const char* nash_status_name(NashStatus s) {
  switch (s) {
    case NashStatus::Global: return "global";
    case NashStatus::Local: return "local";
    case NashStatus::Failed: return "failed";
  }
  return "unknown";
}

NashResult solve_nash(const std::vector<users::MarketModel>& views,
                      const users::MarketModel& ground_truth,
                      const std::vector<users::DataplanSchedule>& schedules,
                      const GameConfig& config) {
  if (views.size() != schedules.size())
    throw std::invalid_argument("solve_nash: views/schedules size mismatch");
  const Evaluator eval(views, schedules, config);
  const PriceLayout layout = PriceLayout::of(schedules);
  double cap = 0.0;
  for (const auto& s : schedules) cap = std::max(cap, s.price_cap);
  const double scale = population_of(ground_truth);

  // Multistart: box midpoint plus seeded random interior points.
  std::vector<std::vector<double>> starts;
  starts.emplace_back(layout.total, cap / 2.0);
  Rng rng(config.seed);
  for (int m = 0; m < config.multistart; ++m) {
    std::vector<double> x(layout.total);
    for (double& c : x) c = rng.uniform(0.0, cap);
    starts.push_back(std::move(x));
  }

  std::vector<std::vector<double>> candidates;
  std::vector<double> residuals;
  auto add_candidate = [&](std::vector<double> x, double residual) {
    for (const auto& c : candidates) {
      double dist = 0.0;
      for (int n = 0; n < layout.total; ++n) dist = std::max(dist, std::fabs(c[n] - x[n]));
      if (dist < 1e-3 * cap) return;
    }
    candidates.push_back(std::move(x));
    residuals.push_back(residual);
  };

  for (const auto& start : starts) {
    RootResult root = root_find(eval, layout, start, cap, scale);
    if (root.converged) add_candidate(root.x, root.residual);
    // A first-order point need not be a maximum (the flat high-price tail is
    // stationary too), so the cyclic best-response sweep always runs as well,
    // resuming from wherever the root finder stopped. When the pure sweep
    // cycles between near-equal response peaks, a damped retry usually
    // settles; either way the final iterate enters the candidate pool and
    // verification ranks it.
    std::vector<double> x = root.x;
    if (!best_response_sweep(eval, layout, x, cap, 1.0))
      best_response_sweep(eval, layout, x, cap, 0.5);
    const double residual =
        infinity_norm(gradient_at(eval, layout, x, config.fd_step, cap));
    add_candidate(std::move(x), residual);
  }

  NashResult result;
  result.prices = schedules;
  result.equilibrium_solves = eval.solves;
  if (candidates.empty()) {
    result.status = NashStatus::Failed;
    result.note = "no stationary point found from any start";
    return result;
  }

  // Keep the candidate with the best verification margin.
  int best = -1;
  VerificationReport best_report;
  std::vector<users::DataplanSchedule> working = schedules;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    unpack(candidates[c], working);
    VerificationReport report = verify_nash(views, working, config, false);
    if (best < 0 || report.max_relative_gain < best_report.max_relative_gain) {
      best = static_cast<int>(c);
      best_report = std::move(report);
    }
  }

  unpack(candidates[best], result.prices);
  result.verification = std::move(best_report);
  result.status = result.verification.global ? NashStatus::Global : NashStatus::Local;
  result.foc_residual = residuals[best] / scale;
  result.stationary_candidates = std::move(candidates);

  for (int i = 0; i < static_cast<int>(views.size()); ++i) {
    users::EquilibriumResult eq;
    result.view_revenue.push_back(
        provider_revenue(views[i], i, result.prices, config.logit, &eq));
    result.view_equilibria.push_back(std::move(eq.z));
  }
  users::EquilibriumResult truth =
      users::solve_user_equilibrium(ground_truth, result.prices, config.logit);
  if (!truth.converged)
    throw std::runtime_error("solve_nash: ground-truth equilibrium did not converge");
  result.realized_revenue = revenue_from_profile(ground_truth.groups, truth.z, result.prices);
  result.realized_equilibrium = std::move(truth.z);
  result.equilibrium_solves = eval.solves;
  return result;
}

}  // namespace wimark::game
