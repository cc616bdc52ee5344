// Copyright 2026 The sps Authors
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

// sps simulate | analyze | report

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sps/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cavity-QED single-photon source simulator"};
  app.set_version_flag("--version", sps::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> trajectories;
  std::optional<unsigned> workers;
  std::string clicks_path;
  bool quiet = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Config file (key = value lines)");
    sub->add_option("--out", out_dir, "Output directory (overrides run.output_directory)");
    sub->add_flag("--quiet", quiet, "Suppress progress messages");
  };
  auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo experiment and write clicks.csv");
  common(sim);
  sim->add_option("--seed", seed, "Master seed (overrides run.seed)");
  sim->add_option("--trajectories", trajectories, "Trajectories for the emission-rate curve");
  sim->add_option("--workers", workers, "Worker threads, 0 = hardware concurrency");
  auto* ana = app.add_subcommand("analyze", "Analyze a click file");
  common(ana);
  ana->add_option("--clicks", clicks_path, "Click file (default: <out>/clicks.csv)");
  auto* rep = app.add_subcommand("report", "Compare analysis outputs with published values");
  common(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sps::kExitConfig;
  }

  return sps::guarded(
      [&] {
        sps::RunConfig cfg = config_path.empty() ? sps::RunConfig{} : sps::load_config(config_path);
        if (seed) cfg.master_seed = *seed;
        if (trajectories) cfg.trajectory_count = *trajectories;
        if (workers) cfg.workers = *workers;
        if (!out_dir.empty()) cfg.output_directory = out_dir;
        std::ostream* log = quiet ? nullptr : &std::cerr;

        if (*sim) {
          const auto stats = sps::cmd_simulate(cfg, log);
          if (log) *log << "wall time " << stats.wall_time << " s\n";
        } else if (*ana) {
          const std::string clicks =
              clicks_path.empty() ? (std::filesystem::path(cfg.output_directory) / "clicks.csv").string() : clicks_path;
          sps::cmd_analyze(clicks, cfg, cfg.output_directory, log);
        } else {
          const std::string text = sps::cmd_report(cfg.output_directory);
          if (!quiet) std::cout << text;
        }
      },
      std::cerr);
}
