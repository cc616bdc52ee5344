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

// Monte Carlo model of the atomic-beam experiment: Poissonian atom arrivals
// falling through a Gaussian cavity mode, one quantum trajectory per atom with
// g frozen per pulse period, and a two-detector counting chain.
//
// Geometry: z is vertical (the fall direction), x horizontal and transverse to
// the cavity axis, y along the cavity axis. Standing-wave (y) and Zeeman
// averaging are folded into `coupling_factor`.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sps/dynamics.hpp"

namespace sps {

struct ApparatusParams {
  double flux = 3400.0;             // atoms / s
  double waist = 35e-6;             // m
  double velocity = 2.0;            // m / s, downwards
  double interaction_time = 17.5e-6;
  double quantum_efficiency = 0.5;
  double dark_count_rate = 50.0;    // counts / s per detector; not a measured value
  double time_resolution = 8e-9;    // s, must be a whole number of ns
  double splitter_ratio = 0.5;      // probability a photon goes to D1
  double coupling_factor = 1.0;     // standing-wave / sublevel averaging
  double aperture_waists = 2.0;     // atoms simulated while |x|, |z| <= this * waist

  void validate() const;
  /// interaction_time / (waist / velocity); 1 means the two agree.
  double interaction_time_ratio() const;
  std::int64_t resolution_ns() const;

  friend bool operator==(const ApparatusParams&, const ApparatusParams&) = default;
};

struct AtomTransit {
  double t_arrival = 0;  // instant the atom crosses z = 0
  double x_offset = 0;
  double y_offset = 0;
  double g_effective = 0;  // coupling at z = 0
};

enum class Detector : std::uint8_t { D1 = 1, D2 = 2 };
enum class ClickOrigin : std::uint8_t { signal, dark };

const char* to_string(Detector d);
const char* to_string(ClickOrigin o);

struct ClickRecord {
  Detector detector = Detector::D1;
  std::int64_t t_ns = 0;  // multiple of the time resolution
  ClickOrigin origin = ClickOrigin::signal;

  double seconds() const { return double(t_ns) * 1e-9; }
  friend auto operator<=>(const ClickRecord&, const ClickRecord&) = default;
};

/// g_peak * factor * exp(-(x^2 + z^2) / waist^2). `y` is accepted for
/// completeness; its standing-wave dependence lives in `factor`.
double coupling_profile(double waist, double x, double y, double z, double g_peak, double factor = 1.0);

/// Poisson arrivals at app.flux over [0, run_duration) with the transverse
/// offset x uniform over the aperture. y is left at 0 (not resolved).
std::vector<AtomTransit> sample_transits(const ApparatusParams& app, const SystemParams& params,
                                         double run_duration, std::uint64_t seed);

/// One pulse period during which g is frozen.
struct PulseSlot {
  double start = 0;  // period start, a multiple of seq.period
  double g = 0;
};

/// Slots for which the pump-pulse midpoint lies inside the aperture.
std::vector<PulseSlot> pulse_slots(const AtomTransit& transit, const SystemParams& params, const PulseSequence& seq,
                                   const ApparatusParams& app, double run_duration);

struct AtomResult {
  std::vector<double> emission_times;  // cavity jumps, seconds
  std::vector<ClickRecord> clicks;     // detected signal photons
};

/// Runs one atom through consecutive slots starting in |u,0>, with its
/// internal state carried across slots.
AtomResult simulate_atom(const SystemParams& params, const PulseSequence& seq, const ApparatusParams& app,
                         std::span<const PulseSlot> slots, std::uint64_t seed,
                         const TrajectoryOptions& opts = {});

struct TransitSummary {
  AtomTransit transit;
  int pulses = 0;
  int emissions = 0;
  int detections = 0;
};

struct RunMetadata {
  std::size_t atoms = 0;
  std::size_t overlapping_atoms = 0;  // atoms whose slots overlap another atom's
  std::size_t pulses_simulated = 0;
  std::size_t emissions = 0;
  std::size_t signal_clicks = 0;
  std::size_t dark_clicks = 0;
};

struct RunResult {
  std::vector<ClickRecord> clicks;  // sorted by (t, detector, origin)
  std::vector<TransitSummary> transits;
  RunMetadata metadata;
};

struct RunOptions {
  unsigned workers = 1;
  TrajectoryOptions trajectory{};
};

RunResult simulate_run(const SystemParams& params, const PulseSequence& seq, const ApparatusParams& app,
                       double run_duration, std::uint64_t seed, const RunOptions& opts = {});

/// Dark counts for one detector over [0, run_duration).
std::vector<ClickRecord> dark_counts(const ApparatusParams& app, Detector d, double run_duration,
                                     std::uint64_t seed);

}  // namespace sps
