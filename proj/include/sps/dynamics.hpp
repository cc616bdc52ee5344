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

// Time evolution of the driven atom-cavity system.
//
// evolve_master integrates the Lindblad equation
//   d rho / dt = -i [H(t), rho] + sum_k (C_k rho C_k^dag - {C_k^dag C_k, rho} / 2)
// and QuantumTrajectory unravels the same equation into pure-state
// trajectories with discrete jumps. Both split integration at every envelope
// breakpoint, so the adaptive stepper never straddles a kink.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sps/integrator.hpp"
#include "sps/model.hpp"
#include "sps/rng.hpp"

namespace sps {

struct TimeSpan {
  double start = 0;
  double end = 0;
  double length() const { return end - start; }
};

/// `count` evenly spaced times covering [span.start, span.end] inclusive.
std::vector<double> uniform_samples(TimeSpan span, int count);

struct MasterEquationOptions {
  IntegratorOptions integrator{};
  /// Population of the top Fock level above which a truncation warning is raised.
  double truncation_limit = 1e-3;
};

struct EvolutionResult {
  std::vector<double> times;
  std::vector<State> states;  // density matrices
  std::vector<double> emission_flux;  // 2 kappa <a^dag a>, photons / s
  double max_top_fock_population = 0;
  std::vector<std::string> warnings;
  long steps = 0;
};

/// Integrates from `sample_times.front()` with `initial` (wavefunctions are
/// promoted to density matrices) and records the state at every sample time.
EvolutionResult evolve_master(const State& initial, const SystemParams& params, const PulseSequence& seq,
                              std::span<const double> sample_times, const MasterEquationOptions& opts = {});

EvolutionResult evolve_master(const State& initial, const SystemParams& params, const PulseSequence& seq,
                              TimeSpan span, int n_samples, const MasterEquationOptions& opts = {});

/// Integral of the output photon flux 2 kappa <a^dag a> over `window`, with
/// `initial` prepared at window.start.
double emission_probability(const SystemParams& params, const PulseSequence& seq, const State& initial,
                            TimeSpan window, const MasterEquationOptions& opts = {});

struct Jump {
  double time;
  JumpChannel channel;
  friend bool operator==(const Jump&, const Jump&) = default;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<Jump> jumps;
  State final_state;
  long steps = 0;

  std::size_t count(JumpChannel c) const;
};

struct TrajectoryOptions {
  IntegratorOptions integrator{1e-6, 1e-8};
  /// Jump instants are bisected to this fraction of the enclosing step.
  double jump_time_rel_tol = 1e-3;
};

/// A single Monte Carlo wavefunction trajectory with jump detection by norm
/// threshold. The driving can be swapped between calls to run_until (the
/// experiment freezes g per pulse period); the stochastic state carries over.
class QuantumTrajectory {
 public:
  QuantumTrajectory(const SystemParams& params, const PulseSequence& seq, const State& initial, double t0,
                    std::uint64_t seed, const TrajectoryOptions& opts = {});
  ~QuantumTrajectory();
  QuantumTrajectory(QuantumTrajectory&&) noexcept;
  QuantumTrajectory& operator=(QuantumTrajectory&&) noexcept;

  /// Rebuilds H and the collapse operators; the wavefunction is kept.
  void set_params(const SystemParams& params);

  /// Propagates to `t_end`, appending any jumps.
  void run_until(double t_end, std::vector<Jump>& jumps);

  double time() const;
  /// Accepted integrator steps so far.
  long steps() const;
  /// Normalized current wavefunction.
  State state() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

TrajectoryRecord run_trajectory(const State& initial, const SystemParams& params, const PulseSequence& seq,
                                TimeSpan span, std::uint64_t seed, const TrajectoryOptions& opts = {});

}  // namespace sps
