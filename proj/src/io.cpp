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

#include "sps/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sps {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

template <class Int>
bool parse_integer(std::string_view s, Int& out) {
  s = trim(s);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

using Scale = double (*)(double);

// Value shown to the user for `stored`, chosen so that reading it back gives
// `stored` bit for bit whenever some nearby decimal does.
std::string format_scaled(double stored, Scale to_user, Scale from_user) {
  const double u = to_user(stored);
  // Shortest decimal first, so 1e-7 s shows as 100 ns.
  for (int digits = 1; digits <= 17; ++digits) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, u, std::chars_format::general, digits);
    double x;
    if (std::from_chars(buf, r.ptr, x).ec == std::errc{} && from_user(x) == stored) return format_double(x);
  }
  double lo = u, hi = u;
  for (int i = 0; i < 8; ++i) {
    lo = std::nextafter(lo, -INFINITY);
    hi = std::nextafter(hi, INFINITY);
    if (from_user(lo) == stored) return format_double(lo);
    if (from_user(hi) == stored) return format_double(hi);
  }
  return format_double(u);
}

double identity(double x) { return x; }
double from_mhz(double x) { return mhz(x); }
double to_mhz_(double x) { return to_mhz(x); }
double from_us(double x) { return x / 1e6; }
double to_us_(double x) { return x * 1e6; }
double from_ns(double x) { return x / 1e9; }
double to_ns_(double x) { return x * 1e9; }
double from_um(double x) { return x / 1e6; }
double to_um(double x) { return x * 1e6; }

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<bool(RunConfig&, std::string_view)> set;  // false: malformed value
};

template <class Section>
Key real_key(std::string name, Section RunConfig::*section, double Section::*field, Scale to_user = identity,
             Scale from_user = identity) {
  return {std::move(name),
          [=](const RunConfig& c) { return format_scaled(c.*section.*field, to_user, from_user); },
          [=](RunConfig& c, std::string_view v) {
            double x;
            if (!parse_number(v, x)) return false;
            c.*section.*field = from_user(x);
            return true;
          }};
}

template <class Section, class Int>
Key int_key(std::string name, Section RunConfig::*section, Int Section::*field) {
  return {std::move(name), [=](const RunConfig& c) { return std::to_string(c.*section.*field); },
          [=](RunConfig& c, std::string_view v) { return parse_integer(v, c.*section.*field); }};
}

const char* shape_name(PulseShape s) {
  switch (s) {
    case PulseShape::sawtooth: return "sawtooth";
    case PulseShape::constant: return "constant";
    case PulseShape::sampled: return "sampled";
  }
  return "?";
}

const std::vector<Key>& keys() {
  using C = RunConfig;
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(real_key("system.g_mhz", &C::system, &SystemParams::g, to_mhz_, from_mhz));
    k.push_back(real_key("system.omega_p_mhz", &C::system, &SystemParams::omega_p0, to_mhz_, from_mhz));
    k.push_back(real_key("system.omega_r_mhz", &C::system, &SystemParams::omega_r0, to_mhz_, from_mhz));
    k.push_back(real_key("system.delta_p_mhz", &C::system, &SystemParams::delta_p, to_mhz_, from_mhz));
    k.push_back(real_key("system.delta_c_mhz", &C::system, &SystemParams::delta_c, to_mhz_, from_mhz));
    k.push_back(real_key("system.delta_r_mhz", &C::system, &SystemParams::delta_r, to_mhz_, from_mhz));
    k.push_back(real_key("system.gamma_mhz", &C::system, &SystemParams::gamma, to_mhz_, from_mhz));
    k.push_back(real_key("system.kappa_mhz", &C::system, &SystemParams::kappa, to_mhz_, from_mhz));
    k.push_back(real_key("system.branch_u", &C::system, &SystemParams::branch_u));
    k.push_back(int_key("system.n_max", &C::system, &SystemParams::n_max));

    k.push_back(real_key("pulses.pump_duration_us", &C::pulses, &PulseSequence::pump_duration, to_us_, from_us));
    k.push_back(
        real_key("pulses.recycle_duration_us", &C::pulses, &PulseSequence::recycle_duration, to_us_, from_us));
    k.push_back(real_key("pulses.period_us", &C::pulses, &PulseSequence::period, to_us_, from_us));
    k.push_back(real_key("pulses.pump_start_us", &C::pulses, &PulseSequence::pump_start_offset, to_us_, from_us));
    k.push_back(
        real_key("pulses.recycle_start_us", &C::pulses, &PulseSequence::recycle_start_offset, to_us_, from_us));
    k.push_back(int_key("pulses.n_pulses", &C::pulses, &PulseSequence::n_pulses));
    k.push_back({"pulses.shape", [](const C& c) { return std::string(shape_name(c.pulses.shape)); },
                 [](C& c, std::string_view v) {
                   v = trim(v);
                   for (auto s : {PulseShape::sawtooth, PulseShape::constant, PulseShape::sampled})
                     if (v == shape_name(s)) {
                       c.pulses.shape = s;
                       return true;
                     }
                   return false;
                 }});
    k.push_back({"pulses.samples",
                 [](const C& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.pulses.samples.size(); ++i)
                     out += (i ? ", " : "") + format_double(c.pulses.samples[i]);
                   return out;
                 },
                 [](C& c, std::string_view v) {
                   std::vector<double> xs;
                   v = trim(v);
                   while (!v.empty()) {
                     const auto comma = v.find(',');
                     double x;
                     if (!parse_number(v.substr(0, comma), x)) return false;
                     xs.push_back(x);
                     if (comma == std::string_view::npos) break;
                     v.remove_prefix(comma + 1);
                   }
                   c.pulses.samples = std::move(xs);
                   return true;
                 }});

    k.push_back(real_key("apparatus.flux_per_s", &C::apparatus, &ApparatusParams::flux));
    k.push_back(real_key("apparatus.waist_um", &C::apparatus, &ApparatusParams::waist, to_um, from_um));
    k.push_back(real_key("apparatus.velocity_m_per_s", &C::apparatus, &ApparatusParams::velocity));
    k.push_back(
        real_key("apparatus.interaction_time_us", &C::apparatus, &ApparatusParams::interaction_time, to_us_, from_us));
    k.push_back(real_key("apparatus.quantum_efficiency", &C::apparatus, &ApparatusParams::quantum_efficiency));
    k.push_back(real_key("apparatus.dark_count_rate_per_s", &C::apparatus, &ApparatusParams::dark_count_rate));
    k.push_back(
        real_key("apparatus.time_resolution_ns", &C::apparatus, &ApparatusParams::time_resolution, to_ns_, from_ns));
    k.push_back(real_key("apparatus.splitter_ratio", &C::apparatus, &ApparatusParams::splitter_ratio));
    k.push_back(real_key("apparatus.coupling_factor", &C::apparatus, &ApparatusParams::coupling_factor));
    k.push_back(real_key("apparatus.aperture_waists", &C::apparatus, &ApparatusParams::aperture_waists));

    k.push_back(real_key("analysis.bin_width_ns", &C::analysis, &AnalysisConfig::bin_width, to_ns_, from_ns));
    k.push_back(real_key("analysis.max_lag_us", &C::analysis, &AnalysisConfig::max_lag, to_us_, from_us));
    k.push_back(
        real_key("analysis.arrival_bin_ns", &C::analysis, &AnalysisConfig::arrival_bin_width, to_ns_, from_ns));
    k.push_back(
        real_key("analysis.peak_half_width_us", &C::analysis, &AnalysisConfig::peak_half_width, to_us_, from_us));
    k.push_back(int_key("analysis.max_lag_pulses", &C::analysis, &AnalysisConfig::max_lag_pulses));
    k.push_back(int_key("analysis.strong_min_clicks", &C::analysis, &AnalysisConfig::strong_min_clicks));

    k.push_back({"run.duration_s", [](const C& c) { return format_double(c.run_duration); },
                 [](C& c, std::string_view v) { return parse_number(v, c.run_duration); }});
    k.push_back({"run.seed", [](const C& c) { return std::to_string(c.master_seed); },
                 [](C& c, std::string_view v) { return parse_integer(v, c.master_seed); }});
    k.push_back({"run.trajectories", [](const C& c) { return std::to_string(c.trajectory_count); },
                 [](C& c, std::string_view v) { return parse_integer(v, c.trajectory_count); }});
    k.push_back({"run.workers", [](const C& c) { return std::to_string(c.workers); },
                 [](C& c, std::string_view v) { return parse_integer(v, c.workers); }});
    k.push_back({"run.output_directory", [](const C& c) { return c.output_directory; },
                 [](C& c, std::string_view v) {
                   v = trim(v);
                   if (v.empty()) return false;
                   c.output_directory = std::string(v);
                   return true;
                 }});
    return k;
  }();
  return table;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

void RunConfig::validate() const {
  system.validate();
  pulses.validate();
  apparatus.validate();
  if (!(run_duration >= 0)) throw ConfigError("run.duration_s: must be >= 0");
  if (trajectory_count < 0) throw ConfigError("run.trajectories: must be >= 0");
  if (!(analysis.bin_width > 0)) throw ConfigError("analysis.bin_width_ns: must be > 0");
  if (analysis.arrival_bin_width < apparatus.time_resolution * (1 - 1e-9))
    throw ConfigError("analysis.arrival_bin_ns: must be >= apparatus.time_resolution_ns");
  if (!(analysis.max_lag > 0)) throw ConfigError("analysis.max_lag_us: must be > 0");
  if (analysis.peak_half_width < 0) throw ConfigError("analysis.peak_half_width_us: must be >= 0");
  const double half = analysis.peak_half_width > 0 ? analysis.peak_half_width : pulses.pump_duration;
  if (2 * half >= pulses.period)
    throw ConfigError("analysis.peak_half_width_us: peak integration windows overlap");
  if (analysis.max_lag_pulses < 1) throw ConfigError("analysis.max_lag_pulses: must be >= 1");
  if (analysis.strong_min_clicks < 1) throw ConfigError("analysis.strong_min_clicks: must be >= 1");
}

RunConfig parse_config(std::string_view text) {
  static const auto index = [] {
    std::map<std::string, const Key*, std::less<>> m;
    for (const auto& k : keys()) m.emplace(k.name, &k);
    return m;
  }();

  RunConfig c;
  long line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected `key = value`, got `" + std::string(line) + "`");
    const auto name = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = index.find(name);
    if (it == index.end()) throw ConfigError(std::string(name) + ": unknown key (" + where + ")");
    if (!it->second->set(c, value))
      throw ConfigError(std::string(name) + ": malformed value `" + std::string(value) + "` (" + where + ")");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    const auto s = k.name.substr(0, k.name.find('.'));
    if (s != section) {
      if (!section.empty()) out += '\n';
      section = s;
    }
    out += k.name + " = " + k.get(c) + '\n';
  }
  return out;
}

void expect_schema_line(std::istream& is, std::string_view expected, long& line_no) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("missing schema line", line_no + 1);
  ++line_no;
  constexpr std::string_view prefix = "# schema:";
  std::string_view v = trim(line);
  if (!v.starts_with(prefix)) throw SchemaError("first line must be `# schema: <name>/<version>`", line_no);
  v = trim(v.substr(prefix.size()));
  if (v != expected)
    throw SchemaError("unsupported schema `" + std::string(v) + "`, expected `" + std::string(expected) + "`",
                      line_no);
}

void write_clicks(std::ostream& os, const ClickFile& f) {
  os << "# schema: " << kClicksSchema << '\n';
  os << "# acquisition_time_s: " << format_double(f.acquisition_time) << '\n';
  os << (f.has_origin ? "detector,t_ns,origin\n" : "detector,t_ns\n");
  for (const auto& c : f.clicks) {
    os << to_string(c.detector) << ',' << c.t_ns;
    if (f.has_origin) os << ',' << to_string(c.origin);
    os << '\n';
  }
}

ClickFile read_clicks(std::istream& is) {
  ClickFile f;
  long line_no = 0;
  expect_schema_line(is, kClicksSchema, line_no);
  std::string line;
  bool have_time = false;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view v = trim(line);
    if (!v.starts_with("#")) break;
    v = trim(v.substr(1));
    constexpr std::string_view key = "acquisition_time_s:";
    if (v.starts_with(key)) {
      if (!parse_number(v.substr(key.size()), f.acquisition_time) || f.acquisition_time < 0)
        throw SchemaError("malformed acquisition time", line_no);
      have_time = true;
    }
  }
  if (!have_time) throw SchemaError("missing `# acquisition_time_s:` line", line_no);
  const std::string_view header = trim(line);
  if (header == "detector,t_ns,origin") {
    f.has_origin = true;
  } else if (header == "detector,t_ns") {
    f.has_origin = false;
  } else {
    throw SchemaError("expected header `detector,t_ns,origin` or `detector,t_ns`", line_no);
  }

  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view v = trim(line);
    if (v.empty()) continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      const auto comma = v.find(',', start);
      cols.push_back(v.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols.size() != (f.has_origin ? 3u : 2u)) throw SchemaError("wrong number of columns", line_no);
    ClickRecord c;
    if (cols[0] == "D1") {
      c.detector = Detector::D1;
    } else if (cols[0] == "D2") {
      c.detector = Detector::D2;
    } else {
      throw SchemaError("detector must be D1 or D2", line_no);
    }
    if (!parse_integer(cols[1], c.t_ns) || c.t_ns < 0) throw SchemaError("t_ns must be a non-negative integer", line_no);
    if (f.has_origin) {
      if (cols[2] == "signal") {
        c.origin = ClickOrigin::signal;
      } else if (cols[2] == "dark") {
        c.origin = ClickOrigin::dark;
      } else {
        throw SchemaError("origin must be signal or dark", line_no);
      }
    }
    f.clicks.push_back(c);
  }
  return f;
}

void write_clicks(const std::filesystem::path& path, const ClickFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_clicks(out, f);
  if (!out) throw IoError("write failed: " + path.string());
}

ClickFile read_clicks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return read_clicks(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ":" + std::to_string(e.line) + ": " + e.what(), e.line);
  }
}

}  // namespace sps
