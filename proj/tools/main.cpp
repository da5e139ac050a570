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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wimark/json_io.hpp"
#include "wimark/scenario.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, long seed,
            int points, int jobs, bool verify_scans) {
  wimark::scenario::ScenarioSpec spec = wimark::io::load_spec(config_path);
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  if (points > 0) spec.sweep.points = points;
  wimark::scenario::validate_spec(spec);

  fs::create_directories(out_dir);
  const auto result = wimark::scenario::run_sweep(spec, jobs);

  {
    std::ofstream out(fs::path(out_dir) / "scenario.json");
    out << wimark::io::spec_to_json(spec).dump(2) << "\n";
  }
  wimark::io::write_sweep_csv_file((fs::path(out_dir) / "sweep.csv").string(), result);
  for (std::size_t p = 0; p < result.rows.size(); ++p) {
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu.json", p);
    std::ofstream out(fs::path(out_dir) / name);
    out << wimark::io::to_json(result.rows[p]).dump(2) << "\n";
  }

  if (verify_scans) {
    const auto networks = wimark::scenario::build_network(spec);
    wimark::game::GameConfig cfg = spec.game;
    cfg.logit = spec.logit;
    for (std::size_t p = 0; p < result.rows.size(); ++p) {
      const auto& row = result.rows[p];
      if (!row.solved) continue;
      std::vector<wimark::users::MarketModel> views;
      for (const auto& view : result.views) {
        auto clusters = view.clusters;
        wimark::scenario::scale_to_demand(clusters, row.lambda_bar, spec.session_mb);
        views.push_back(wimark::users::build_market_model(networks, clusters));
      }
      const auto report = wimark::game::verify_nash(views, row.nash.prices, cfg, true);
      char name[40];
      std::snprintf(name, sizeof name, "verify_%03zu.csv", p);
      std::ofstream out(fs::path(out_dir) / name);
      wimark::io::write_verification_csv(out, report);
    }
  }

  int failed = 0;
  for (const auto& row : result.rows)
    if (!row.solved) ++failed;
  std::cout << "wrote " << result.rows.size() << " sweep points to " << out_dir;
  if (failed > 0) std::cout << " (" << failed << " failed)";
  std::cout << "\n";
  return failed == 0 ? 0 : 2;
}

int cmd_compare(const std::string& baseline_dir, const std::string& variant_dir,
                const std::string& out_path) {
  const auto baseline = wimark::io::read_sweep_csv(
      (fs::path(baseline_dir) / "sweep.csv").string());
  const auto variant = wimark::io::read_sweep_csv(
      (fs::path(variant_dir) / "sweep.csv").string());
  const auto gains = wimark::scenario::compare_runs(baseline, variant);
  if (out_path.empty()) {
    wimark::io::write_gains_csv(std::cout, gains);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    wimark::io::write_gains_csv(out, gains);
    std::cout << "wrote " << gains.size() << " comparison rows to " << out_path << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const auto spec = wimark::io::load_spec(config_path);
  wimark::scenario::validate_spec(spec);
  std::cout << "config OK: " << spec.provider_count() << " providers, " << spec.group_count
            << " groups, " << spec.sweep.points << " sweep points\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wireless market equilibrium simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, baseline_dir, variant_dir, gains_out;
  long seed = -1;
  int points = 0, jobs = 1;
  bool verify_scans = false;

  auto* run = app.add_subcommand("run", "run a demand sweep for one scenario");
  run->add_option("--config", config_path, "scenario config JSON")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--points", points, "override the sweep point count");
  run->add_option("--jobs", jobs, "parallel sweep points")->check(CLI::PositiveNumber);
  run->add_flag("--verify-scans", verify_scans, "dump per-provider verification scans");

  auto* compare = app.add_subcommand("compare", "compare two sweep output directories");
  compare->add_option("--baseline", baseline_dir, "baseline output directory")->required();
  compare->add_option("--variant", variant_dir, "variant output directory")->required();
  compare->add_option("--out", gains_out, "gains CSV path (stdout when omitted)");

  auto* validate = app.add_subcommand("validate", "check a scenario config");
  validate->add_option("--config", config_path, "scenario config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, points, jobs, verify_scans);
    if (compare->parsed()) return cmd_compare(baseline_dir, variant_dir, gains_out);
    if (validate->parsed()) return cmd_validate(config_path);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
