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


#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "sps/cli.hpp"
#include "support.hpp"

using namespace sps;
using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sps_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

RunConfig small_run(const fs::path& dir, double duration = 0.01) {
  RunConfig c;
  c.run_duration = duration;
  c.trajectory_count = 20;
  c.workers = 1;
  c.output_directory = dir.string();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kAnalysisOutputs[] = {"arrival.csv", "g2.csv", "conditionals.json", "pemit_fit.json", "summary.json"};

}  // namespace

TEST_CASE("config text round trip is a fixed point") {
  RunConfig c;
  c.system.g = 2 * 3.14159 * 1.7e6;
  c.system.delta_c = -2 * std::numbers::pi * 0.37e6;
  c.pulses.period = 6.1e-6;
  c.apparatus.waist = 33.3e-6;
  c.apparatus.dark_count_rate = 12.5;
  c.analysis.bin_width = 64e-9;
  c.master_seed = 123456789012345ULL;
  c.output_directory = "some/dir";
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(parse_config(serialize_config(back)) == back);
  CHECK(parse_config(serialize_config(RunConfig{})) == RunConfig{});
}

TEST_CASE("config parsing") {
  const auto c = parse_config("# comment\nsystem.g_mhz = 3.0\n\nrun.seed = 9  # trailing\napparatus.waist_um = 40\n");
  CHECK(c.system.g == doctest::Approx(2 * std::numbers::pi * 3e6));
  CHECK(c.master_seed == 9);
  CHECK(c.apparatus.waist == doctest::Approx(40e-6));

  SUBCASE("unknown keys are named with their line") {
    try {
      parse_config("system.g_mhz = 3\nsystem.gee = 1\n");
      FAIL("no error");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("system.gee") != std::string::npos);
      CHECK(msg.find("line 2") != std::string::npos);
    }
  }
  SUBCASE("bad values") {
    CHECK_THROWS_AS(parse_config("system.g_mhz = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("system.g_mhz\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("apparatus.quantum_efficiency = 2\n").validate(), ConfigError);
  }
  SUBCASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_config("/nonexistent/sps.cfg"), IoError);
  }
}

TEST_CASE("format_double is shortest round trip") {
  for (double x : {0.1, 1.0 / 3, 2.5e-6, 1e300, -7.25, 0.0}) {
    const auto s = format_double(x);
    CHECK(std::stod(s) == x);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("click file round trip") {
  const PulseSequence seq;
  auto s = test::synthetic_stream(20, 14, seq.period, 10e-6, [](int) { return 0.3; }, 1);
  s.clicks.push_back({Detector::D2, 8, ClickOrigin::dark});
  std::sort(s.clicks.begin(), s.clicks.end());
  std::stringstream ss;
  write_clicks(ss, {s.clicks, 0.25, true});
  const auto text = ss.str();
  CHECK(text.starts_with("# schema: sps-clicks/1\n"));
  const auto back = read_clicks(ss);
  CHECK(back.clicks == s.clicks);
  CHECK(back.acquisition_time == 0.25);
  CHECK(back.has_origin);

  SUBCASE("tag-stripped files parse as signal clicks") {
    std::stringstream st;
    write_clicks(st, {s.clicks, 0.25, false});
    CHECK(st.str().find("detector,t_ns\n") != std::string::npos);
    const auto stripped = read_clicks(st);
    CHECK_FALSE(stripped.has_origin);
    REQUIRE(stripped.clicks.size() == s.clicks.size());
    for (std::size_t i = 0; i < s.clicks.size(); ++i) {
      CHECK(stripped.clicks[i].t_ns == s.clicks[i].t_ns);
      CHECK(stripped.clicks[i].detector == s.clicks[i].detector);
    }
  }
}

TEST_CASE("click files with bad schema are rejected with a line number") {
  auto expect_line = [](const std::string& text, long line) {
    std::istringstream is(text);
    try {
      read_clicks(is);
      FAIL("accepted: " << text);
    } catch (const SchemaError& e) {
      CHECK(e.line == line);
    }
  };
  expect_line("# schema: sps-clicks/2\n", 1);
  expect_line("detector,t_ns\n", 1);
  expect_line("# schema: sps-clicks/1\ndetector,t_ns\n", 2);
  expect_line("# schema: sps-clicks/1\n# acquisition_time_s: 1\ndetector,t_ns\nD3,8\n", 4);
  expect_line("# schema: sps-clicks/1\n# acquisition_time_s: 1\ndetector,t_ns,origin\nD1,8,signal\nD1,x,dark\n", 5);
  expect_line("# schema: sps-clicks/1\n# acquisition_time_s: 1\ndetector,t_ns\nD1,8,signal\n", 4);
  CHECK_THROWS_AS(read_clicks(fs::path("/nonexistent/clicks.csv")), IoError);
}

TEST_CASE("simulate") {
  SUBCASE("zero duration writes empty, valid outputs") {
    const auto dir = scratch("sim0");
    auto cfg = small_run(dir, 0.0);
    const auto stats = cmd_simulate(cfg);
    CHECK(stats.run.atoms == 0);
    const auto f = read_clicks(dir / "clicks.csv");
    CHECK(f.clicks.empty());
    const auto meta = Json::parse(slurp(dir / "metadata.json"));
    CHECK(meta["schema"] == kMetadataSchema);
    CHECK(slurp(dir / "emission_flux.csv").starts_with("# schema: sps-emission-flux/1\n"));
  }
  SUBCASE("reruns are byte identical") {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    cmd_simulate(small_run(a));
    auto cb = small_run(b);
    cb.workers = 2;
    cmd_simulate(cb);
    CHECK(slurp(a / "clicks.csv") == slurp(b / "clicks.csv"));
    CHECK(slurp(a / "emission_flux.csv") == slurp(b / "emission_flux.csv"));
    const auto meta = Json::parse(slurp(a / "metadata.json"));
    CHECK(parse_config(meta["config"].get<std::string>()) == small_run(a));
  }
}

TEST_CASE("analyze") {
  const auto dir = scratch("ana");
  const auto cfg = small_run(dir, 0.05);
  cmd_simulate(cfg);
  cmd_analyze(dir / "clicks.csv", cfg, dir);
  for (const char* name : kAnalysisOutputs) CHECK(fs::exists(dir / name));
  CHECK(slurp(dir / "arrival.csv").starts_with("# schema: sps-arrival/1\nbin_start_us,bin_center_us,counts,counts_strong\n"));
  CHECK(slurp(dir / "g2.csv").starts_with("# schema: sps-g2/1\nlag_us,counts,g2,g2_noise_sub\n"));
  const auto summary = Json::parse(slurp(dir / "summary.json"));
  CHECK(summary["schema"] == kSummarySchema);
  for (const char* key : {"clicks_total", "noise_floor", "antibunching_ratio", "conditionals", "occupancy_p_one",
                          "linewidth_at_1p3us_khz", "pemit_amplitude", "annotations"})
    CHECK(summary.contains(key));
  CHECK(Json::parse(slurp(dir / "pemit_fit.json"))["schema"] == kPemitSchema);

  SUBCASE("tag-stripped input gives identical outputs") {
    const auto stripped = scratch("ana_stripped");
    auto f = read_clicks(dir / "clicks.csv");
    f.has_origin = false;
    write_clicks(stripped / "clicks.csv", f);
    cmd_analyze(stripped / "clicks.csv", cfg, stripped);
    for (const char* name : kAnalysisOutputs) CHECK(slurp(dir / name) == slurp(stripped / name));
  }
  SUBCASE("empty click file") {
    const auto empty = scratch("ana_empty");
    write_clicks(empty / "clicks.csv", ClickFile{{}, 1.0, true});
    cmd_analyze(empty / "clicks.csv", cfg, empty);
    for (const char* name : kAnalysisOutputs) CHECK(fs::exists(empty / name));
    const auto s = Json::parse(slurp(empty / "summary.json"));
    CHECK(s["clicks_total"] == 0);
    CHECK(s["antibunching_ratio"].is_null());
    CHECK(!s["annotations"].empty());
    CHECK(Json::parse(slurp(empty / "pemit_fit.json"))["status"] == "skipped");
  }
}

TEST_CASE("report") {
  const auto dir = scratch("rep");
  const auto cfg = small_run(dir, 0.05);
  cmd_simulate(cfg);
  cmd_analyze(dir / "clicks.csv", cfg, dir);
  const auto text = cmd_report(dir);
  const auto r = Json::parse(text);
  CHECK(r["schema"] == kReportSchema);
  std::map<std::string, Json> rows;
  for (const auto& row : r["rows"]) {
    for (const char* k : {"observable", "computed", "paper_value", "tolerance", "pass"}) CHECK(row.contains(k));
    rows[row["observable"].get<std::string>()] = row;
  }
  for (const char* k : {"antibunching_ratio", "occupancy_p_one", "occupancy_p_many", "linewidth_at_1p3us_khz",
                        "first_conditional", "pemit_sigma_um"})
    CHECK(rows.count(k) == 1);
  CHECK(rows["occupancy_p_one"]["pass"] == true);
  CHECK(rows["linewidth_at_1p3us_khz"]["pass"] == true);

  SUBCASE("idempotent") {
    CHECK(cmd_report(dir) == text);
    CHECK(slurp(dir / "report.json") == text);
  }
  SUBCASE("reads the antibunching from g2.csv") {
    std::istringstream in(slurp(dir / "g2.csv"));
    std::string out, line;
    int n = 0;
    while (std::getline(in, line)) {
      if (++n > 2) {
        const auto lag = std::stod(line.substr(0, line.find(',')));
        if (std::abs(lag) < 1.0) line = line.substr(0, line.rfind(',')) + ",1e9";
      }
      out += line + "\n";
    }
    spit(dir / "g2.csv", out);
    const auto doctored = Json::parse(cmd_report(dir));
    for (const auto& row : doctored["rows"])
      if (row["observable"] == "antibunching_ratio") CHECK(row["pass"] == false);
  }
  SUBCASE("missing inputs are schema errors") {
    fs::remove(dir / "summary.json");
    std::ostringstream err;
    CHECK(guarded([&] { cmd_report(dir); }, err) == kExitConfig);
    CHECK(err.str().find("summary.json") != std::string::npos);
  }
}

TEST_CASE("exit codes") {
  std::ostringstream err;
  CHECK(guarded([] {}, err) == kExitOk);
  CHECK(guarded([] { throw ConfigError("x"); }, err) == kExitConfig);
  CHECK(guarded([] { throw SchemaError("x", 3); }, err) == kExitConfig);
  CHECK(guarded([] { throw IoError("x"); }, err) == kExitIo);
  CHECK(guarded([] { throw AnalysisError("x"); }, err) == kExitFailure);

  const auto dir = scratch("exit");
  spit(dir / "bad.cfg", "system.nope = 1\n");
  CHECK(run_cli("simulate --config " + (dir / "bad.cfg").string() + " --out " + dir.string()) == kExitConfig);
  CHECK(run_cli("simulate --bogus-flag") == kExitConfig);
  CHECK(run_cli("simulate --config /nonexistent/x.cfg") == kExitIo);
  CHECK(run_cli("analyze --clicks /nonexistent/clicks.csv --out " + dir.string()) == kExitIo);
  spit(dir / "clicks.csv", "# schema: other/1\n");
  CHECK(run_cli("analyze --out " + dir.string()) == kExitConfig);
  CHECK(run_cli("report --out " + (dir / "nothing").string()) == kExitConfig);
  spit(dir / "ok.cfg", "run.duration_s = 0\nrun.trajectories = 2\n");
  CHECK(run_cli("simulate --quiet --config " + (dir / "ok.cfg").string() + " --out " + dir.string()) == kExitOk);
  CHECK(run_cli("analyze --quiet --out " + dir.string()) == kExitOk);
  CHECK(run_cli("report --quiet --out " + dir.string()) == kExitOk);
}
