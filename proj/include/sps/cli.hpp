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

// The simulate / analyze / report pipeline behind the `sps` tool.
//
// Files written into the output directory:
//   simulate: clicks.csv, emission_flux.csv, metadata.json
//   analyze:  arrival.csv, g2.csv, conditionals.json, pemit_fit.json, summary.json
//   report:   report.json

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "sps/io.hpp"

namespace sps {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3 };

struct SimulateStats {
  RunMetadata run;
  double wall_time = 0;
};

SimulateStats cmd_simulate(const RunConfig& cfg, std::ostream* log = nullptr);

/// Blind analysis of a click file; only the analysis, pulse and apparatus
/// sections of `cfg` are read.
void cmd_analyze(const std::filesystem::path& clicks_path, const RunConfig& cfg,
                 const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// Compares the analysis outputs in `out_dir` with the published values and
/// writes report.json. Returns the report text.
std::string cmd_report(const std::filesystem::path& out_dir);

/// Runs `body`, maps exceptions to exit codes and prints the message to `err`.
int guarded(const std::function<void()>& body, std::ostream& err);

}  // namespace sps
