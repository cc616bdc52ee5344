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

#include "sps/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sps/analysis.hpp"

namespace sps {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kFluxStream = 0x666c7578ULL;

// Published values the report compares against.
constexpr double kPublishedPulseFwhm = 1.3e-6;
constexpr double kPublishedLinewidth = 340e3;
constexpr double kPublishedPOne = 0.057;
constexpr double kPublishedPMany = 0.0018;
constexpr double kPublishedFirstConditional = 0.088;
constexpr double kPublishedPemitAmplitude = 0.17;
constexpr double kPublishedPemitSigma = 15.7e-6;

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path, std::string_view schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("missing input " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != schema)
    throw SchemaError(path.string() + ": expected schema `" + std::string(schema) + "`");
  return j;
}

Json number_or_null(std::optional<double> x) { return x && std::isfinite(*x) ? Json(*x) : Json(nullptr); }

std::string fmt(double x) { return format_double(x); }

double peak_half_width(const RunConfig& cfg) {
  return cfg.analysis.peak_half_width > 0 ? cfg.analysis.peak_half_width : cfg.pulses.pump_duration;
}

// Emission rate of one atom held on the cavity axis for one period, from the
// master equation and, when requested, from averaged trajectories.
std::string emission_flux_csv(const RunConfig& cfg) {
  SystemParams p = cfg.system;
  p.g = cfg.system.g * cfg.apparatus.coupling_factor;
  const auto space = p.space();
  const State initial = basis_state(space, Atom::u, 0);
  const double T = cfg.pulses.period;
  constexpr int kBins = 100;
  const double bin = T / kBins;

  std::vector<double> centers(kBins);
  for (int i = 0; i < kBins; ++i) centers[std::size_t(i)] = (i + 0.5) * bin;
  std::vector<double> grid{0.0};
  grid.insert(grid.end(), centers.begin(), centers.end());
  const auto me = evolve_master(initial, p, cfg.pulses, grid);

  std::vector<double> traj(kBins, 0.0);
  const int n = cfg.trajectory_count;
  for (int k = 0; k < n; ++k) {
    const auto rec = run_trajectory(initial, p, cfg.pulses, {0, T},
                                    derive_seed(cfg.master_seed ^ kFluxStream, std::uint64_t(k)));
    for (const auto& j : rec.jumps)
      if (j.channel == JumpChannel::cavity)
        traj[std::min<std::size_t>(std::size_t(j.time / bin), kBins - 1)] += 1.0;
  }

  std::string out = std::string("# schema: ") + kFluxSchema + "\n";
  out += "t_us,flux_me_per_us,flux_traj_per_us\n";
  for (int i = 0; i < kBins; ++i) {
    out += fmt(to_us(centers[std::size_t(i)])) + "," + fmt(me.emission_flux[std::size_t(i) + 1] * 1e-6) + ",";
    if (n > 0) out += fmt(traj[std::size_t(i)] / (n * to_us(bin)));
    out += "\n";
  }
  return out;
}

}  // namespace

SimulateStats cmd_simulate(const RunConfig& cfg, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const fs::path dir = cfg.output_directory;
  make_dir(dir);

  RunResult run;
  if (cfg.run_duration > 0) {
    RunOptions opts;
    opts.workers = cfg.workers;
    run = simulate_run(cfg.system, cfg.pulses, cfg.apparatus, cfg.run_duration, cfg.master_seed, opts);
  }
  if (log) *log << "simulated " << run.metadata.atoms << " atoms, " << run.clicks.size() << " clicks\n";
  write_clicks(dir / "clicks.csv", ClickFile{run.clicks, cfg.run_duration, true});
  write_text(dir / "emission_flux.csv", emission_flux_csv(cfg));

  SimulateStats stats;
  stats.run = run.metadata;
  stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& m = run.metadata;
  Json meta;
  meta["schema"] = kMetadataSchema;
  meta["version"] = kVersion;
  meta["seed"] = cfg.master_seed;
  meta["config"] = serialize_config(cfg);
  meta["run_duration_s"] = cfg.run_duration;
  meta["atoms"] = m.atoms;
  meta["overlapping_atoms"] = m.overlapping_atoms;
  meta["pulses_simulated"] = m.pulses_simulated;
  meta["emissions"] = m.emissions;
  meta["signal_clicks"] = m.signal_clicks;
  meta["dark_clicks"] = m.dark_clicks;
  meta["interaction_time_ratio"] = cfg.apparatus.interaction_time_ratio();
  meta["wall_time_s"] = stats.wall_time;
  write_json(dir / "metadata.json", meta);
  return stats;
}

void cmd_analyze(const fs::path& clicks_path, const RunConfig& cfg, const fs::path& out_dir, std::ostream* log) {
  cfg.validate();
  const ClickFile file = read_clicks(clicks_path);
  make_dir(out_dir);
  const auto& clicks = file.clicks;
  const auto& a = cfg.analysis;
  const double T = file.acquisition_time;
  const double half = peak_half_width(cfg);
  Json annotations = Json::array();

  // Arrival-time distribution, all clicks and strongly coupled ones.
  const auto strong = strongly_coupled(clicks, cfg.apparatus.interaction_time, a.strong_min_clicks);
  const auto arr = arrival_histogram(clicks, cfg.pulses, a.arrival_bin_width, cfg.apparatus.time_resolution);
  const auto arr_strong = arrival_histogram(strong, cfg.pulses, a.arrival_bin_width, cfg.apparatus.time_resolution);
  {
    std::string out = std::string("# schema: ") + kArrivalSchema + "\n";
    out += "bin_start_us,bin_center_us,counts,counts_strong\n";
    for (std::size_t i = 0; i < arr.counts.size(); ++i)
      out += fmt(to_us(i * a.arrival_bin_width)) + "," + fmt(to_us(arr.centers[i])) + "," +
             std::to_string(arr.counts[i]) + "," + std::to_string(arr_strong.counts[i]) + "\n";
    write_text(out_dir / "arrival.csv", out);
  }
  std::optional<double> pulse_fwhm;
  if (arr_strong.total() > 0) {
    std::vector<double> y(arr_strong.counts.begin(), arr_strong.counts.end());
    try {
      pulse_fwhm = fwhm(arr_strong.centers, y);
    } catch (const AnalysisError& e) {
      annotations.push_back(std::string("arrival: ") + e.what());
    }
  } else {
    annotations.push_back("arrival: no strongly coupled clicks");
  }

  // Correlation function and everything derived from it.
  std::size_t n1 = 0, n2 = 0;
  for (const auto& c : clicks) (c.detector == Detector::D1 ? n1 : n2) += 1;
  std::optional<CorrelationHistogram> h;
  std::string g2 = std::string("# schema: ") + kG2Schema + "\n" + "lag_us,counts,g2,g2_noise_sub\n";
  const double dark = cfg.apparatus.dark_count_rate;
  try {
    auto raw = cross_correlation(clicks, a.bin_width, a.max_lag, T);
    const DetectorRates signal{std::max(0.0, n1 / T - dark), std::max(0.0, n2 / T - dark)};
    h = subtract_noise(std::move(raw), {dark, dark}, signal);
    for (std::size_t i = 0; i < h->lags.size(); ++i)
      g2 += fmt(to_us(h->lags[i])) + "," + std::to_string(h->counts[i]) + "," + fmt(h->normalized[i]) + "," +
            fmt(h->noise_subtracted[i]) + "\n";
  } catch (const AnalysisError& e) {
    annotations.push_back(std::string("g2: ") + e.what());
  }
  write_text(out_dir / "g2.csv", g2);

  const double photons = double(clicks.size()) - 2 * dark * T;
  std::optional<double> zero_area, side_area, ratio;
  std::vector<double> cond;
  Json cj;
  cj["schema"] = kConditionalsSchema;
  cj["peak_half_width_us"] = to_us(half);
  cj["photons"] = photons;
  cj["splitter_ratio"] = cfg.apparatus.splitter_ratio;
  if (h) {
    zero_area = h->area(0, half);
    side_area = 0.5 * (h->area(cfg.pulses.period, half) + h->area(-cfg.pulses.period, half));
    ratio = *side_area > 0 ? std::optional(*zero_area / *side_area) : std::nullopt;
    try {
      cond = conditional_probabilities(*h, cfg.pulses, a.max_lag_pulses,
                                       {photons, cfg.apparatus.splitter_ratio, half});
    } catch (const AnalysisError& e) {
      annotations.push_back(std::string("conditionals: ") + e.what());
    }
  }
  Json lags = Json::array();
  for (std::size_t k = 0; k < cond.size(); ++k) lags.push_back(k + 1);
  cj["lags"] = lags;
  cj["values"] = cond;
  bool decreasing = cond.size() >= 4;
  for (std::size_t k = 1; k < std::min<std::size_t>(cond.size(), 4); ++k) decreasing = decreasing && cond[k] < cond[k - 1];
  cj["decreasing_lags_1_to_4"] = decreasing;
  cj["zero_peak_area"] = number_or_null(zero_area);
  cj["first_side_peak_area"] = number_or_null(side_area);
  cj["antibunching_ratio"] = number_or_null(ratio);
  write_json(out_dir / "conditionals.json", cj);

  Json pj;
  pj["schema"] = kPemitSchema;
  std::optional<EmissionProfileFit> fit;
  if (cond.size() >= 3) {
    try {
      fit = deconvolve_pemit(cond, cfg.apparatus.velocity, cfg.pulses.period);
    } catch (const Error& e) {
      pj["status"] = "failed";
      pj["message"] = e.what();
    }
  } else {
    pj["status"] = "skipped";
    pj["message"] = "fewer than 3 conditional probabilities";
  }
  if (fit) {
    pj["status"] = "ok";
    pj["amplitude"] = fit->amplitude;
    pj["sigma_um"] = fit->sigma_z * 1e6;
    pj["residual"] = fit->residual;
    pj["iterations"] = fit->iterations;
  }
  write_json(out_dir / "pemit_fit.json", pj);

  const auto occ = occupancy_statistics(cfg.apparatus.flux, cfg.apparatus.interaction_time);
  Json s;
  s["schema"] = kSummarySchema;
  s["version"] = kVersion;
  s["clicks_total"] = clicks.size();
  s["clicks_d1"] = n1;
  s["clicks_d2"] = n2;
  s["strongly_coupled_clicks"] = strong.size();
  s["acquisition_time_s"] = T;
  s["period_us"] = to_us(cfg.pulses.period);
  s["peak_half_width_us"] = to_us(half);
  s["noise_floor"] = h ? Json(h->noise_floor) : Json(nullptr);
  s["g2_zero_peak_area"] = number_or_null(zero_area);
  s["g2_first_side_peak_area"] = number_or_null(side_area);
  s["antibunching_ratio"] = number_or_null(ratio);
  s["conditionals"] = cond;
  s["arrival_fwhm_us"] = pulse_fwhm ? Json(to_us(*pulse_fwhm)) : Json(nullptr);
  s["linewidth_from_arrival_khz"] =
      pulse_fwhm ? Json(transform_limited_linewidth(*pulse_fwhm) * 1e-3) : Json(nullptr);
  s["linewidth_at_1p3us_khz"] = transform_limited_linewidth(kPublishedPulseFwhm) * 1e-3;
  s["occupancy_p_one"] = occ.p_one;
  s["occupancy_p_many"] = occ.p_many;
  s["pemit_amplitude"] = fit ? Json(fit->amplitude) : Json(nullptr);
  s["pemit_sigma_um"] = fit ? Json(fit->sigma_z * 1e6) : Json(nullptr);
  s["annotations"] = annotations;
  write_json(out_dir / "summary.json", s);
  if (log) *log << "analyzed " << clicks.size() << " clicks\n";
}

namespace {

struct G2Table {
  std::vector<double> lag_us;
  std::vector<double> g2_sub;
};

G2Table read_g2(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("missing input " + path.string());
  long line_no = 0;
  expect_schema_line(in, kG2Schema, line_no);
  std::string line;
  if (!std::getline(in, line) || line != "lag_us,counts,g2,g2_noise_sub")
    throw SchemaError(path.string() + ": bad header", line_no + 1);
  ++line_no;
  G2Table t;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') || !std::getline(ss, d))
      throw SchemaError(path.string() + ": wrong number of columns", line_no);
    try {
      t.lag_us.push_back(std::stod(a));
      t.g2_sub.push_back(std::stod(d));
    } catch (const std::exception&) {
      throw SchemaError(path.string() + ": malformed number", line_no);
    }
  }
  return t;
}

Json row(const std::string& name, const Json& computed, const Json& published, const std::string& tolerance,
         bool pass) {
  Json r;
  r["observable"] = name;
  r["computed"] = computed;
  r["paper_value"] = published;
  r["tolerance"] = tolerance;
  r["pass"] = pass;
  return r;
}

}  // namespace

std::string cmd_report(const fs::path& out_dir) {
  const Json s = read_json(out_dir / "summary.json", kSummarySchema);
  const G2Table g2 = read_g2(out_dir / "g2.csv");

  auto num = [&](const char* key) -> std::optional<double> {
    if (!s.contains(key) || s[key].is_null()) return std::nullopt;
    if (!s[key].is_number()) throw SchemaError(std::string("summary.json: `") + key + "` is not a number");
    return s[key].get<double>();
  };
  const auto period = num("period_us");
  const auto half = num("peak_half_width_us");
  if (!period || !half) throw SchemaError("summary.json: period_us and peak_half_width_us are required");

  // Antibunching is recomputed from g2.csv so the report reflects that file.
  std::optional<double> ratio;
  if (!g2.lag_us.empty()) {
    const double bin = g2.lag_us.size() > 1 ? g2.lag_us[1] - g2.lag_us[0] : 0;
    auto area = [&](double center) {
      double sum = 0;
      for (std::size_t i = 0; i < g2.lag_us.size(); ++i)
        if (std::abs(g2.lag_us[i] - center) <= *half + 1e-3 * bin) sum += g2.g2_sub[i];
      return sum;
    };
    const double side = 0.5 * (area(*period) + area(-*period));
    if (side > 0) ratio = area(0) / side;
  }

  Json rows = Json::array();
  rows.push_back(row("antibunching_ratio", number_or_null(ratio), 0.0, "< 0.1", ratio && *ratio < 0.1));

  const auto p1 = num("occupancy_p_one");
  const auto pm = num("occupancy_p_many");
  rows.push_back(row("occupancy_p_one", number_or_null(p1), kPublishedPOne, "+-0.002",
                     p1 && std::abs(*p1 - kPublishedPOne) <= 0.002 + 1e-12));
  rows.push_back(row("occupancy_p_many", number_or_null(pm), kPublishedPMany, "+-0.0002",
                     pm && std::abs(*pm - kPublishedPMany) <= 0.0002 + 1e-12));

  const auto lw = num("linewidth_at_1p3us_khz");
  rows.push_back(row("linewidth_at_1p3us_khz", number_or_null(lw), kPublishedLinewidth * 1e-3, "[335, 345]",
                     lw && *lw >= 335 && *lw <= 345));

  const auto fw = num("arrival_fwhm_us");
  rows.push_back(row("photon_pulse_fwhm_us", number_or_null(fw), to_us(kPublishedPulseFwhm), "+-30%",
                     fw && std::abs(*fw / to_us(kPublishedPulseFwhm) - 1) <= 0.3));
  const auto lwa = num("linewidth_from_arrival_khz");
  rows.push_back(row("linewidth_from_arrival_khz", number_or_null(lwa), kPublishedLinewidth * 1e-3, "+-30%",
                     lwa && std::abs(*lwa / (kPublishedLinewidth * 1e-3) - 1) <= 0.3));

  std::vector<double> cond;
  if (s.contains("conditionals") && s["conditionals"].is_array()) cond = s["conditionals"].get<std::vector<double>>();
  const std::optional<double> c1 = cond.empty() ? std::nullopt : std::optional(cond[0]);
  rows.push_back(row("first_conditional", number_or_null(c1), kPublishedFirstConditional, "factor 2",
                     c1 && *c1 >= kPublishedFirstConditional / 2 && *c1 <= kPublishedFirstConditional * 2));
  bool decreasing = cond.size() >= 4;
  for (std::size_t k = 1; k < std::min<std::size_t>(cond.size(), 4); ++k) decreasing = decreasing && cond[k] < cond[k - 1];
  bool positive = !cond.empty();
  for (double c : cond) positive = positive && c > 0;
  rows.push_back(row("conditionals_positive", positive, true, "all > 0", positive));
  rows.push_back(row("conditionals_decreasing_lags_1_to_4", decreasing, true, "strict", decreasing));

  const auto amp = num("pemit_amplitude");
  const auto sig = num("pemit_sigma_um");
  rows.push_back(row("pemit_amplitude", number_or_null(amp), kPublishedPemitAmplitude, "+-50%",
                     amp && std::abs(*amp / kPublishedPemitAmplitude - 1) <= 0.5));
  rows.push_back(row("pemit_sigma_um", number_or_null(sig), kPublishedPemitSigma * 1e6, "+-50%",
                     sig && std::abs(*sig / (kPublishedPemitSigma * 1e6) - 1) <= 0.5));

  Json r;
  r["schema"] = kReportSchema;
  r["rows"] = rows;
  const std::string text = r.dump(2) + "\n";
  write_text(out_dir / "report.json", text);
  return text;
}

int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sps
