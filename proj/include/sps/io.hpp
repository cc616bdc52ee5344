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

// Run configuration and the on-disk formats.
//
// Config files are flat `section.key = value` lines; `#` starts a comment.
// Frequencies are written as f = omega / 2 pi in MHz, times in microseconds
// unless the key says otherwise (`_s`, `_ns`, `_um`). Unknown keys are errors.
//
// Every output file starts with a schema line, `# schema: <name>/<version>`
// for text files and a "schema" member for JSON.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sps/experiment.hpp"

namespace sps {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kClicksSchema = "sps-clicks/1";
inline constexpr const char* kArrivalSchema = "sps-arrival/1";
inline constexpr const char* kG2Schema = "sps-g2/1";
inline constexpr const char* kFluxSchema = "sps-emission-flux/1";
inline constexpr const char* kMetadataSchema = "sps-run-metadata/1";
inline constexpr const char* kConditionalsSchema = "sps-conditionals/1";
inline constexpr const char* kPemitSchema = "sps-pemit-fit/1";
inline constexpr const char* kSummarySchema = "sps-summary/1";
inline constexpr const char* kReportSchema = "sps-report/1";

struct AnalysisConfig {
  double bin_width = 100e-9;
  double max_lag = 40e-6;
  double arrival_bin_width = 100e-9;
  /// Half-width of the comb-peak integration windows; 0 means the pump duration.
  double peak_half_width = 0;
  int max_lag_pulses = 7;
  int strong_min_clicks = 2;

  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct RunConfig {
  SystemParams system;
  PulseSequence pulses;
  ApparatusParams apparatus;
  AnalysisConfig analysis;
  double run_duration = 1.0;
  std::uint64_t master_seed = 1;
  /// Single-atom trajectories averaged for the simulated emission-rate curve.
  int trajectory_count = 500;
  unsigned workers = 0;  // 0: one per hardware thread
  std::string output_directory = "out";

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses config text on top of the defaults. Errors name the key and line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key, in a fixed order. parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& c);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

struct ClickFile {
  std::vector<ClickRecord> clicks;
  double acquisition_time = 0;  // s
  bool has_origin = true;
};

void write_clicks(std::ostream& os, const ClickFile& f);
/// Throws SchemaError with the offending line number.
ClickFile read_clicks(std::istream& is);

void write_clicks(const std::filesystem::path& path, const ClickFile& f);
ClickFile read_clicks(const std::filesystem::path& path);

/// Reads the `# schema:` line of a text file and checks it against `expected`.
void expect_schema_line(std::istream& is, std::string_view expected, long& line_no);

}  // namespace sps
