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

// Three-level atom in a single-mode cavity, driven by a pump laser on
// |u> <-> |e> and a recycling laser on |g> <-> |e>; the cavity couples
// |e, n> <-> |g, n+1>.
//
// All quantities are SI: angular frequencies in rad/s, times in seconds.

#pragma once

#include <numbers>
#include <vector>

#include "sps/quantum.hpp"

namespace sps {

/// 2 pi x f[MHz] in rad/s.
constexpr double mhz(double f) { return 2.0 * std::numbers::pi * f * 1e6; }
constexpr double to_mhz(double omega) { return omega / (2.0 * std::numbers::pi * 1e6); }
constexpr double us(double t) { return t / 1e6; }
constexpr double to_us(double t) { return t * 1e6; }

struct SystemParams {
  double g = mhz(2.5);          // average atom-cavity coupling
  double omega_p0 = mhz(8.0);   // peak pump Rabi frequency
  double omega_r0 = mhz(8.0);   // peak recycle Rabi frequency
  double delta_p = mhz(-20.0);  // pump detuning from |u> <-> |e>
  double delta_c = mhz(-20.0);  // cavity detuning from |g> <-> |e>
  double delta_r = 0.0;         // recycle detuning from |g> <-> |e>
  double gamma = mhz(6.0);      // population decay rate of |e>
  double kappa = mhz(1.25);     // cavity field decay rate
  double branch_u = 0.5;        // fraction of gamma ending in |u>
  int n_max = 2;

  HilbertSpace space() const { return HilbertSpace(n_max); }

  /// Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

enum class PulseShape { sawtooth, constant, sampled };
enum class Laser { pump, recycle };

struct PulseSequence {
  double pump_duration = us(2.0);
  double recycle_duration = us(2.0);
  double period = us(5.0);
  double pump_start_offset = 0.0;
  double recycle_start_offset = us(2.5);
  /// Number of periods; 0 means the sequence repeats indefinitely.
  int n_pulses = 0;
  PulseShape shape = PulseShape::sawtooth;
  /// Envelope samples at evenly spaced fractions [0, 1] of a pulse, used when
  /// shape == sampled. Linear interpolation between samples.
  std::vector<double> samples;

  void validate() const;

  friend bool operator==(const PulseSequence&, const PulseSequence&) = default;
};

/// Envelope as a fraction of the peak Rabi frequency, in [0, 1].
///
/// Pulses occupy the closed interval [start, start + duration], so the value
/// at the last instant of a sawtooth is 1; the drop happens right after.
double envelope_at(const PulseSequence& seq, Laser which, double t);

/// The linear piece of the envelope containing `t_ref`. Pick `t_ref` strictly
/// between two breakpoints; the piece is then exact on the whole segment,
/// including its end points (one-sided limits).
struct EnvelopePiece {
  double value;
  double slope;
  double at(double t, double t_ref) const { return value + slope * (t - t_ref); }
};
EnvelopePiece envelope_piece(const PulseSequence& seq, Laser which, double t_ref);

/// All envelope discontinuities and kinks strictly inside (t0, t1), sorted,
/// with t0 and t1 added at the ends.
std::vector<double> breakpoints(const PulseSequence& seq, double t0, double t1);

/// Hamiltonian split as H = static + omega_p * pump + omega_r * recycle.
///
/// Rotating frame at the pump, recycle and cavity frequencies:
///   H0 = -Dp |e><e| + (Dr - Dp) |g><g| + (Dc - Dr) a^dag a
///        + g (|e><g| a + a^dag |g><e|)
///   pump    = (|e><u| + |u><e|) / 2
///   recycle = (|e><g| + |g><e|) / 2
/// |u,0> and |g,1> differ in energy by Dc - Dp, so Dp = Dc is Raman resonance.
struct HamiltonianParts {
  Operator fixed;
  Operator pump;
  Operator recycle;

  Operator at(double omega_p, double omega_r) const;
};

HamiltonianParts hamiltonian_parts(const SystemParams& p);

Operator hamiltonian(const SystemParams& p, double omega_p, double omega_r);

/// [2g |u,0> - omega_p |g,1>] / sqrt(4 g^2 + omega_p^2)
State dark_state(double g, double omega_p, const HilbertSpace& space);

enum class JumpChannel { cavity = 0, spont_u = 1, spont_g = 2 };

const char* to_string(JumpChannel c);

struct CollapseOperator {
  JumpChannel channel;
  Operator op;
};

/// sqrt(2 kappa) a, sqrt(b Gamma) |u><e|, sqrt((1 - b) Gamma) |g><e|.
/// Only the cavity channel produces output photons.
std::vector<CollapseOperator> collapse_operators(const SystemParams& p);

}  // namespace sps
