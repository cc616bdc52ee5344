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

#include "sps/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <tuple>

namespace sps {

namespace {

// Independent random streams derived from the run seed.
constexpr std::uint64_t kTransitStream = 0x7472616e73697473ULL;
constexpr std::uint64_t kAtomStream = 0x61746f6d73ULL;
constexpr std::uint64_t kDarkStream = 0x6461726bULL;

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string(field) + ": " + what);
}

std::int64_t quantize(double t, std::int64_t res_ns) {
  const auto ticks = static_cast<std::int64_t>(std::floor(t * 1e9 / double(res_ns)));
  return ticks * res_ns;
}

}  // namespace

void ApparatusParams::validate() const {
  require(flux >= 0, "apparatus.flux", "must be >= 0");
  require(waist > 0, "apparatus.waist", "must be > 0");
  require(velocity > 0, "apparatus.velocity", "must be > 0");
  require(interaction_time >= 0, "apparatus.interaction_time", "must be >= 0");
  require(quantum_efficiency >= 0 && quantum_efficiency <= 1, "apparatus.quantum_efficiency",
          "must lie in [0, 1]");
  require(dark_count_rate >= 0, "apparatus.dark_count_rate", "must be >= 0");
  require(time_resolution > 0, "apparatus.time_resolution", "must be > 0");
  const double ns = time_resolution * 1e9;
  require(std::abs(ns - std::round(ns)) < 1e-6 && std::round(ns) >= 1, "apparatus.time_resolution",
          "must be a whole number of nanoseconds");
  require(splitter_ratio >= 0 && splitter_ratio <= 1, "apparatus.splitter_ratio", "must lie in [0, 1]");
  require(coupling_factor >= 0 && coupling_factor <= 1, "apparatus.coupling_factor", "must lie in [0, 1]");
  require(aperture_waists > 0, "apparatus.aperture_waists", "must be > 0");
}

double ApparatusParams::interaction_time_ratio() const { return interaction_time / (waist / velocity); }

std::int64_t ApparatusParams::resolution_ns() const {
  return static_cast<std::int64_t>(std::llround(time_resolution * 1e9));
}

const char* to_string(Detector d) { return d == Detector::D1 ? "D1" : "D2"; }
const char* to_string(ClickOrigin o) { return o == ClickOrigin::signal ? "signal" : "dark"; }

double coupling_profile(double waist, double x, double /*y*/, double z, double g_peak, double factor) {
  if (!(waist > 0)) throw ConfigError("coupling_profile: waist must be > 0");
  return g_peak * factor * std::exp(-(x * x + z * z) / (waist * waist));
}

std::vector<AtomTransit> sample_transits(const ApparatusParams& app, const SystemParams& params,
                                         double run_duration, std::uint64_t seed) {
  app.validate();
  std::vector<AtomTransit> out;
  if (app.flux <= 0 || run_duration <= 0) return out;
  CounterRng rng(derive_seed(seed, kTransitStream));
  const double half = app.aperture_waists * app.waist;
  double t = 0;
  while (true) {
    t += rng.exponential(app.flux);
    if (t >= run_duration) break;
    AtomTransit a;
    a.t_arrival = t;
    a.x_offset = rng.uniform(-half, half);
    a.g_effective = coupling_profile(app.waist, a.x_offset, 0.0, 0.0, params.g, app.coupling_factor);
    out.push_back(a);
  }
  return out;
}

std::vector<PulseSlot> pulse_slots(const AtomTransit& transit, const SystemParams& params, const PulseSequence& seq,
                                   const ApparatusParams& app, double run_duration) {
  const double reach = app.aperture_waists * app.waist / app.velocity;
  const double pump_mid = seq.pump_start_offset + 0.5 * seq.pump_duration;
  // Periods whose pump midpoint lies in [t_arrival - reach, t_arrival + reach].
  const auto first = static_cast<long long>(std::ceil((transit.t_arrival - reach - pump_mid) / seq.period));
  const auto last = static_cast<long long>(std::floor((transit.t_arrival + reach - pump_mid) / seq.period));
  std::vector<PulseSlot> slots;
  for (auto k = std::max(first, 0LL); k <= last; ++k) {
    const double start = double(k) * seq.period;
    if (start + seq.period > run_duration) break;
    if (seq.n_pulses > 0 && k >= seq.n_pulses) break;
    const double z = app.velocity * (start + pump_mid - transit.t_arrival);
    slots.push_back({start, coupling_profile(app.waist, transit.x_offset, transit.y_offset, z, params.g,
                                             app.coupling_factor)});
  }
  return slots;
}

AtomResult simulate_atom(const SystemParams& params, const PulseSequence& seq, const ApparatusParams& app,
                         std::span<const PulseSlot> slots, std::uint64_t seed, const TrajectoryOptions& opts) {
  AtomResult res;
  if (slots.empty()) return res;
  // Trajectories run in local time; slot starts are multiples of the period,
  // so the envelope phase is unchanged.
  const double base = slots.front().start;
  SystemParams p = params;
  p.g = slots.front().g;
  const auto initial = basis_state(p.space(), Atom::u, 0);
  QuantumTrajectory traj(p, seq, initial, 0.0, derive_seed(seed, 0), opts);
  CounterRng detect(derive_seed(seed, 1));
  const auto res_ns = app.resolution_ns();

  std::vector<Jump> jumps;
  for (const auto& slot : slots) {
    p.g = slot.g;
    traj.set_params(p);
    jumps.clear();
    traj.run_until(slot.start - base + seq.period, jumps);
    for (const auto& j : jumps) {
      if (j.channel != JumpChannel::cavity) continue;
      const double t = base + j.time;
      res.emission_times.push_back(t);
      if (!detect.bernoulli(app.quantum_efficiency)) continue;
      const auto d = detect.bernoulli(app.splitter_ratio) ? Detector::D1 : Detector::D2;
      res.clicks.push_back({d, quantize(t, res_ns), ClickOrigin::signal});
    }
  }
  return res;
}

std::vector<ClickRecord> dark_counts(const ApparatusParams& app, Detector d, double run_duration,
                                     std::uint64_t seed) {
  std::vector<ClickRecord> out;
  if (app.dark_count_rate <= 0 || run_duration <= 0) return out;
  CounterRng rng(derive_seed(seed, kDarkStream + static_cast<std::uint64_t>(d)));
  const auto res_ns = app.resolution_ns();
  double t = 0;
  while (true) {
    t += rng.exponential(app.dark_count_rate);
    if (t >= run_duration) break;
    out.push_back({d, quantize(t, res_ns), ClickOrigin::dark});
  }
  return out;
}

RunResult simulate_run(const SystemParams& params, const PulseSequence& seq, const ApparatusParams& app,
                       double run_duration, std::uint64_t seed, const RunOptions& opts) {
  params.validate();
  seq.validate();
  app.validate();
  RunResult run;
  if (run_duration <= 0) return run;

  const auto transits = sample_transits(app, params, run_duration, seed);
  std::vector<std::vector<PulseSlot>> slots(transits.size());
  for (std::size_t i = 0; i < transits.size(); ++i) {
    slots[i] = pulse_slots(transits[i], params, seq, app, run_duration);
  }

  std::vector<AtomResult> results(transits.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed) {
      const auto i = next.fetch_add(1);
      if (i >= transits.size()) return;
      try {
        results[i] = simulate_atom(params, seq, app, slots[i], derive_seed(derive_seed(seed, kAtomStream), i),
                                   opts.trajectory);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const unsigned workers = std::max(1u, opts.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  auto& meta = run.metadata;
  meta.atoms = transits.size();
  const double span = seq.period;
  for (std::size_t i = 0; i < transits.size(); ++i) {
    TransitSummary s{transits[i], int(slots[i].size()), int(results[i].emission_times.size()),
                     int(results[i].clicks.size())};
    run.transits.push_back(s);
    meta.pulses_simulated += slots[i].size();
    meta.emissions += results[i].emission_times.size();
    meta.signal_clicks += results[i].clicks.size();
    run.clicks.insert(run.clicks.end(), results[i].clicks.begin(), results[i].clicks.end());
    // Every atom's slot interval has about the same length, so checking the
    // neighbours in arrival order finds any overlap.
    auto interval = [&](std::size_t j) {
      return std::pair{slots[j].front().start, slots[j].back().start + span};
    };
    bool hit = false;
    if (!slots[i].empty()) {
      const auto [lo, hi] = interval(i);
      for (std::size_t j : {i - 1, i + 1}) {
        if (j >= transits.size() || slots[j].empty()) continue;  // i - 1 wraps for i == 0
        const auto [jlo, jhi] = interval(j);
        hit = hit || (jlo < hi && jhi > lo);
      }
    }
    if (hit) ++meta.overlapping_atoms;
  }

  for (auto d : {Detector::D1, Detector::D2}) {
    const auto dark = dark_counts(app, d, run_duration, seed);
    meta.dark_clicks += dark.size();
    run.clicks.insert(run.clicks.end(), dark.begin(), dark.end());
  }
  std::sort(run.clicks.begin(), run.clicks.end(), [](const ClickRecord& a, const ClickRecord& b) {
    return std::tie(a.t_ns, a.detector, a.origin) < std::tie(b.t_ns, b.detector, b.origin);
  });
  return run;
}

}  // namespace sps
