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

#include "wimark/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wimark::io {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& context,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(context + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw std::invalid_argument(context + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument(context + ": expected a matrix");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols)
      throw std::invalid_argument(context + ": ragged matrix");
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json group_to_json(const users::UserGroup& g) {
  return json{{"id", g.id},
              {"population", g.population},
              {"wtp_scale", g.wtp_scale},
              {"saturation_offset", g.saturation_offset},
              {"rate_sensitivity", g.rate_sensitivity},
              {"variance_weight", g.variance_weight},
              {"price_weight", g.price_weight},
              {"session_rate", g.session_rate},
              {"monthly_demand_mb", g.monthly_demand_mb},
              {"normalized_rate", g.normalized_rate}};
}

}  // namespace

scenario::ScenarioSpec spec_from_json(const json& j) {
  scenario::ScenarioSpec spec;
  check_keys(j, "config",
             {"market", "session_mb", "mean_speed_kmh", "providers", "population", "logit",
              "game", "sweep", "seed"});

  if (j.contains("market")) {
    const auto& m = j.at("market");
    check_keys(m, "market", {"width_km", "height_km", "grid_spacing_km"});
    read_to(m, "width_km", spec.width_km);
    read_to(m, "height_km", spec.height_km);
    read_to(m, "grid_spacing_km", spec.spacing_km);
  }
  read_to(j, "session_mb", spec.session_mb);
  read_to(j, "mean_speed_kmh", spec.mean_speed_kmh);

  if (j.contains("providers")) {
    const auto& p = j.at("providers");
    check_keys(p, "providers", {"capacities_mbps", "detail_levels", "plan_counts", "price_cap"});
    read_to(p, "capacities_mbps", spec.capacities_mbps);
    read_to(p, "detail_levels", spec.detail_levels);
    read_to(p, "plan_counts", spec.plan_counts);
    read_to(p, "price_cap", spec.price_cap);
    if (!p.contains("detail_levels")) spec.detail_levels.assign(spec.capacities_mbps.size(), 1);
    if (!p.contains("plan_counts")) spec.plan_counts.assign(spec.capacities_mbps.size(), 1);
  }

  if (j.contains("population")) {
    const auto& p = j.at("population");
    check_keys(p, "population", {"size", "groups", "profile"});
    read_to(p, "size", spec.population);
    read_to(p, "groups", spec.group_count);
    if (p.contains("profile")) {
      const auto& prof = p.at("profile");
      check_keys(prof, "population.profile",
                 {"means", "std_devs", "correlation", "saturation_offset", "variance_weight",
                  "price_weight"});
      if (prof.contains("means")) {
        const auto v = prof.at("means").get<std::vector<double>>();
        if (v.size() != 3) throw std::invalid_argument("profile.means must have 3 entries");
        std::copy(v.begin(), v.end(), spec.profile.means.begin());
      }
      if (prof.contains("std_devs")) {
        const auto v = prof.at("std_devs").get<std::vector<double>>();
        if (v.size() != 3) throw std::invalid_argument("profile.std_devs must have 3 entries");
        std::copy(v.begin(), v.end(), spec.profile.std_devs.begin());
      }
      if (prof.contains("correlation"))
        spec.profile.correlation = matrix_from_json(prof.at("correlation"), "profile.correlation");
      read_to(prof, "saturation_offset", spec.profile.saturation_offset);
      read_to(prof, "variance_weight", spec.profile.variance_weight);
      read_to(prof, "price_weight", spec.profile.price_weight);
    }
  }

  if (j.contains("logit")) {
    const auto& l = j.at("logit");
    check_keys(l, "logit", {"noise", "speed", "tolerance", "max_time"});
    read_to(l, "noise", spec.logit.noise);
    read_to(l, "speed", spec.logit.speed);
    read_to(l, "tolerance", spec.logit.tolerance);
    read_to(l, "max_time", spec.logit.max_time);
  }

  if (j.contains("game")) {
    const auto& g = j.at("game");
    check_keys(g, "game",
               {"fd_step", "foc_tolerance", "max_root_iterations", "sweep_max_passes",
                "sweep_grid", "sweep_price_tolerance", "line_tolerance", "verify_grid",
                "verify_tolerance", "multistart"});
    read_to(g, "fd_step", spec.game.fd_step);
    read_to(g, "foc_tolerance", spec.game.foc_tolerance);
    read_to(g, "max_root_iterations", spec.game.max_root_iterations);
    read_to(g, "sweep_max_passes", spec.game.sweep_max_passes);
    read_to(g, "sweep_grid", spec.game.sweep_grid);
    read_to(g, "sweep_price_tolerance", spec.game.sweep_price_tolerance);
    read_to(g, "line_tolerance", spec.game.line_tolerance);
    read_to(g, "verify_grid", spec.game.verify_grid);
    read_to(g, "verify_tolerance", spec.game.verify_tolerance);
    read_to(g, "multistart", spec.game.multistart);
  }

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, "sweep", {"lambda_min", "lambda_max", "points"});
    read_to(s, "lambda_min", spec.sweep.lambda_min);
    read_to(s, "lambda_max", spec.sweep.lambda_max);
    read_to(s, "points", spec.sweep.points);
  }
  read_to(j, "seed", spec.seed);
  return spec;
}

json spec_to_json(const scenario::ScenarioSpec& spec) {
  return json{
      {"market",
       {{"width_km", spec.width_km},
        {"height_km", spec.height_km},
        {"grid_spacing_km", spec.spacing_km}}},
      {"session_mb", spec.session_mb},
      {"mean_speed_kmh", spec.mean_speed_kmh},
      {"providers",
       {{"capacities_mbps", spec.capacities_mbps},
        {"detail_levels", spec.detail_levels},
        {"plan_counts", spec.plan_counts},
        {"price_cap", spec.price_cap}}},
      {"population",
       {{"size", spec.population},
        {"groups", spec.group_count},
        {"profile",
         {{"means", spec.profile.means},
          {"std_devs", spec.profile.std_devs},
          {"correlation", matrix_to_json(spec.profile.correlation)},
          {"saturation_offset", spec.profile.saturation_offset},
          {"variance_weight", spec.profile.variance_weight},
          {"price_weight", spec.profile.price_weight}}}}},
      {"logit",
       {{"noise", spec.logit.noise},
        {"speed", spec.logit.speed},
        {"tolerance", spec.logit.tolerance},
        {"max_time", spec.logit.max_time}}},
      {"game",
       {{"fd_step", spec.game.fd_step},
        {"foc_tolerance", spec.game.foc_tolerance},
        {"max_root_iterations", spec.game.max_root_iterations},
        {"sweep_max_passes", spec.game.sweep_max_passes},
        {"sweep_grid", spec.game.sweep_grid},
        {"sweep_price_tolerance", spec.game.sweep_price_tolerance},
        {"line_tolerance", spec.game.line_tolerance},
        {"verify_grid", spec.game.verify_grid},
        {"verify_tolerance", spec.game.verify_tolerance},
        {"multistart", spec.game.multistart}}},
      {"sweep",
       {{"lambda_min", spec.sweep.lambda_min},
        {"lambda_max", spec.sweep.lambda_max},
        {"points", spec.sweep.points}}},
      {"seed", spec.seed}};
}

scenario::ScenarioSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return spec_from_json(j);
}

json to_json(const queueing::TrafficSolution& traffic) {
  return json{{"new_session_rates", matrix_to_json(traffic.new_session_rates)},
              {"arrival_rates", matrix_to_json(traffic.arrival_rates)},
              {"intensities", matrix_to_json(traffic.intensities)}};
}

json to_json(const queueing::QosReport& qos) {
  return json{{"mean_rate", matrix_to_json(qos.mean_rate)},
              {"rate_variance", matrix_to_json(qos.rate_variance)},
              {"expected_occupancy", qos.expected_occupancy}};
}

json to_json(const segmentation::ProviderView& view) {
  json clusters = json::array();
  for (const auto& c : view.clusters) clusters.push_back(group_to_json(c));
  return json{{"provider", view.provider},
              {"level_of_detail", view.level_of_detail},
              {"clusters", std::move(clusters)},
              {"assignment", view.assignment}};
}

json to_json(const game::NashResult& nash) {
  json prices = json::array();
  for (const auto& s : nash.prices)
    prices.push_back(json{{"prices", s.prices},
                          {"thresholds_mb", s.thresholds_mb},
                          {"price_cap", s.price_cap}});
  json entries = json::array();
  for (const auto& e : nash.verification.entries)
    entries.push_back(json{{"provider", e.provider},
                           {"plan", e.plan},
                           {"base_price", e.base_price},
                           {"base_revenue", e.base_revenue},
                           {"best_price", e.best_price},
                           {"best_revenue", e.best_revenue},
                           {"relative_gain", e.relative_gain}});
  return json{{"status", game::nash_status_name(nash.status)},
              {"prices", std::move(prices)},
              {"view_revenue", nash.view_revenue},
              {"realized_revenue", nash.realized_revenue},
              {"realized_equilibrium", matrix_to_json(nash.realized_equilibrium.z)},
              {"verification",
               {{"entries", std::move(entries)},
                {"max_relative_gain", nash.verification.max_relative_gain},
                {"global", nash.verification.global}}},
              {"foc_residual", nash.foc_residual},
              {"equilibrium_solves", nash.equilibrium_solves},
              {"stationary_candidates", nash.stationary_candidates},
              {"note", nash.note}};
}

json to_json(const scenario::MarketOutcome& outcome) {
  return json{{"lambda_bar", outcome.lambda_bar},
              {"solved", outcome.solved},
              {"status", game::nash_status_name(outcome.status)},
              {"prices", outcome.prices},
              {"revenue", outcome.revenue},
              {"shares", outcome.shares},
              {"disconnected", outcome.disconnected},
              {"category_disconnected", outcome.category_disconnected},
              {"nash", outcome.solved ? to_json(outcome.nash) : json()},
              {"note", outcome.note}};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

const char* kCategoryColumns[4] = {"cat_business_disc", "cat_low_profile_disc",
                                   "cat_value_disc", "cat_lenient_disc"};

}  // namespace

void write_sweep_csv(std::ostream& out, const scenario::SweepResult& result) {
  const int providers = result.spec.provider_count();
  out << "lambda_bar";
  for (int i = 0; i < providers; ++i)
    for (int s = 0; s < result.spec.plan_counts[i]; ++s)
      out << ",price_" << (i + 1) << "_" << (s + 1);
  for (int i = 0; i < providers; ++i) out << ",revenue_" << (i + 1);
  for (int i = 0; i < providers; ++i) out << ",share_" << (i + 1);
  out << ",disconnected_frac";
  for (const char* c : kCategoryColumns) out << "," << c;
  out << ",ne_status\n";

  for (const auto& row : result.rows) {
    out << format_double(row.lambda_bar);
    for (int i = 0; i < providers; ++i)
      for (int s = 0; s < result.spec.plan_counts[i]; ++s)
        out << "," << format_double(row.solved ? row.prices[i][s] : 0.0);
    for (int i = 0; i < providers; ++i)
      out << "," << format_double(row.solved ? row.revenue[i] : 0.0);
    for (int i = 0; i < providers; ++i)
      out << "," << format_double(row.solved ? row.shares[i + 1] : 0.0);
    out << "," << format_double(row.solved ? row.disconnected : 0.0);
    for (int c = 0; c < 4; ++c)
      out << "," << format_double(row.solved ? row.category_disconnected[c] : 0.0);
    out << "," << game::nash_status_name(row.status) << "\n";
  }
}

void write_sweep_csv_file(const std::string& path, const scenario::SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_sweep_csv(out, result);
}

std::vector<scenario::MarketOutcome> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  // Plan counts per provider are recovered from the price column names.
  std::vector<int> plan_counts;
  int providers = 0;
  for (const auto& h : header) {
    if (h.rfind("price_", 0) == 0) {
      const auto sep = h.find('_', 6);
      const int i = std::stoi(h.substr(6, sep - 6));
      providers = std::max(providers, i);
      plan_counts.resize(providers, 0);
      plan_counts[i - 1] += 1;
    }
  }

  std::vector<scenario::MarketOutcome> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw std::runtime_error("malformed CSV row in " + path);

    scenario::MarketOutcome row;
    std::size_t n = 0;
    row.lambda_bar = std::stod(cells[n++]);
    row.prices.resize(providers);
    for (int i = 0; i < providers; ++i)
      for (int s = 0; s < plan_counts[i]; ++s) row.prices[i].push_back(std::stod(cells[n++]));
    for (int i = 0; i < providers; ++i) row.revenue.push_back(std::stod(cells[n++]));
    row.shares.assign(1, 0.0);
    for (int i = 0; i < providers; ++i) row.shares.push_back(std::stod(cells[n++]));
    row.disconnected = std::stod(cells[n++]);
    row.shares[0] = row.disconnected;
    for (int c = 0; c < 4; ++c) row.category_disconnected[c] = std::stod(cells[n++]);
    const std::string status = cells[n++];
    row.solved = status != "failed";
    row.status = status == "global" ? game::NashStatus::Global
                 : status == "local" ? game::NashStatus::Local
                                     : game::NashStatus::Failed;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_gains_csv(std::ostream& out, const std::vector<scenario::GainRow>& gains) {
  const int providers = gains.empty() ? 0
                                      : static_cast<int>(gains.front().comparable
                                                             ? gains.front().revenue_delta.size()
                                                             : 0);
  int cols = providers;
  for (const auto& g : gains)
    if (g.comparable) cols = static_cast<int>(g.revenue_delta.size());

  out << "lambda_bar,comparable";
  for (int i = 0; i < cols; ++i) out << ",revenue_delta_" << (i + 1);
  for (int i = 0; i < cols; ++i) out << ",revenue_gain_pct_" << (i + 1);
  for (int i = 0; i < cols; ++i) out << ",price_delta_" << (i + 1);
  for (int i = 0; i < cols; ++i) out << ",share_delta_" << (i + 1);
  out << ",disconnected_delta\n";
  for (const auto& g : gains) {
    out << format_double(g.lambda_bar) << "," << (g.comparable ? 1 : 0);
    auto emit = [&](const std::vector<double>& v) {
      for (int i = 0; i < cols; ++i)
        out << "," << format_double(g.comparable ? v[i] : 0.0);
    };
    emit(g.revenue_delta);
    emit(g.revenue_gain_pct);
    emit(g.price_delta);
    emit(g.share_delta);
    out << "," << format_double(g.comparable ? g.disconnected_delta : 0.0) << "\n";
  }
}

void write_verification_csv(std::ostream& out, const game::VerificationReport& report) {
  out << "provider,plan,price,revenue\n";
  for (std::size_t e = 0; e < report.scans.size(); ++e) {
    const auto& entry = report.entries[e];
    for (const auto& [price, revenue] : report.scans[e])
      out << (entry.provider + 1) << "," << (entry.plan + 1) << "," << format_double(price)
          << "," << format_double(revenue) << "\n";
  }
}

void write_trajectory_csv(std::ostream& out,
                          const std::vector<std::pair<double, Matrix>>& trajectory) {
  if (trajectory.empty()) return;
  const auto& first = trajectory.front().second;
  out << "time";
  for (int j = 0; j < first.rows(); ++j)
    for (int s = 0; s < first.cols(); ++s) out << ",z_" << j << "_" << s;
  out << "\n";
  for (const auto& [t, z] : trajectory) {
    out << format_double(t);
    for (int j = 0; j < z.rows(); ++j)
      for (int s = 0; s < z.cols(); ++s) out << "," << format_double(z(j, s));
    out << "\n";
  }
}

}  // namespace wimark::io
