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

#include "sps/model.hpp"

#include <algorithm>
#include <cmath>

namespace sps {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string(field) + ": " + what);
}

struct Window {
  double start;
  double duration;
};

Window window_of(const PulseSequence& seq, Laser which) {
  return which == Laser::pump ? Window{seq.pump_start_offset, seq.pump_duration}
                              : Window{seq.recycle_start_offset, seq.recycle_duration};
}

// Envelope value and slope at fraction `x` in [0, 1] of a pulse of length d.
EnvelopePiece shape_at(const PulseSequence& seq, double x, double d) {
  switch (seq.shape) {
    case PulseShape::sawtooth:
      return {x, 1.0 / d};
    case PulseShape::constant:
      return {1.0, 0.0};
    case PulseShape::sampled: {
      const auto& s = seq.samples;
      const double pos = x * double(s.size() - 1);
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), s.size() - 2);
      const double frac = pos - double(k);
      const double slope = (s[k + 1] - s[k]) * double(s.size() - 1) / d;
      return {s[k] + frac * (s[k + 1] - s[k]), slope};
    }
  }
  return {0.0, 0.0};
}

bool past_end(const PulseSequence& seq, double t) {
  return seq.n_pulses > 0 && t > double(seq.n_pulses) * seq.period;
}

}  // namespace

void SystemParams::validate() const {
  require(g >= 0, "system.g", "must be >= 0");
  require(omega_p0 >= 0, "system.omega_p0", "must be >= 0");
  require(omega_r0 >= 0, "system.omega_r0", "must be >= 0");
  require(gamma >= 0, "system.gamma", "must be >= 0");
  require(kappa >= 0, "system.kappa", "must be >= 0");
  require(branch_u >= 0 && branch_u <= 1, "system.branch_u", "must lie in [0, 1]");
  require(n_max >= 1, "system.n_max", "must be >= 1");
  require(std::isfinite(delta_p) && std::isfinite(delta_c) && std::isfinite(delta_r),
          "system.delta", "detunings must be finite");
}

void PulseSequence::validate() const {
  require(period > 0, "pulses.period", "must be > 0");
  require(pump_duration > 0, "pulses.pump_duration", "must be > 0");
  require(recycle_duration > 0, "pulses.recycle_duration", "must be > 0");
  require(pump_start_offset >= 0 && pump_start_offset + pump_duration <= period,
          "pulses.pump_start", "pump window must fit inside one period");
  require(recycle_start_offset >= 0 && recycle_start_offset + recycle_duration <= period,
          "pulses.recycle_start", "recycle window must fit inside one period");
  const bool disjoint = pump_start_offset + pump_duration <= recycle_start_offset ||
                        recycle_start_offset + recycle_duration <= pump_start_offset;
  require(disjoint, "pulses", "pump and recycle windows overlap");
  require(n_pulses >= 0, "pulses.n_pulses", "must be >= 0");
  if (shape == PulseShape::sampled) {
    require(samples.size() >= 2, "pulses.samples", "need at least two samples");
    require(std::all_of(samples.begin(), samples.end(), [](double v) { return v >= 0 && v <= 1; }),
            "pulses.samples", "values must lie in [0, 1]");
  }
}

double envelope_at(const PulseSequence& seq, Laser which, double t) {
  if (t < 0 || past_end(seq, t)) return 0.0;
  const auto w = window_of(seq, which);
  double tau = std::fmod(t, seq.period);
  // Let the final instant of a pulse that ends on the period boundary count.
  if (tau == 0.0 && t > 0 && w.start + w.duration == seq.period) tau = seq.period;
  if (tau < w.start || tau > w.start + w.duration) return 0.0;
  return shape_at(seq, (tau - w.start) / w.duration, w.duration).value;
}

EnvelopePiece envelope_piece(const PulseSequence& seq, Laser which, double t_ref) {
  if (t_ref < 0 || past_end(seq, t_ref)) return {0.0, 0.0};
  const auto w = window_of(seq, which);
  const double tau = std::fmod(t_ref, seq.period);
  if (tau < w.start || tau > w.start + w.duration) return {0.0, 0.0};
  return shape_at(seq, (tau - w.start) / w.duration, w.duration);
}

std::vector<double> breakpoints(const PulseSequence& seq, double t0, double t1) {
  std::vector<double> local;
  for (auto which : {Laser::pump, Laser::recycle}) {
    const auto w = window_of(seq, which);
    local.push_back(w.start);
    local.push_back(w.start + w.duration);
    if (seq.shape == PulseShape::sampled) {
      const auto m = seq.samples.size() - 1;
      for (std::size_t k = 1; k < m; ++k) local.push_back(w.start + w.duration * double(k) / double(m));
    }
  }
  std::vector<double> out{t0};
  const auto first = static_cast<long long>(std::floor(t0 / seq.period));
  const auto last = static_cast<long long>(std::floor(t1 / seq.period));
  for (auto k = first; k <= last; ++k) {
    for (double b : local) {
      const double t = double(k) * seq.period + b;
      if (t > t0 && t < t1) out.push_back(t);
    }
  }
  if (seq.n_pulses > 0) {
    const double end = double(seq.n_pulses) * seq.period;
    if (end > t0 && end < t1) out.push_back(end);
  }
  out.push_back(t1);
  std::sort(out.begin(), out.end());
  // Merge points that coincide up to rounding so no segment is degenerate.
  const double eps = 1e-12 * std::max(std::abs(t1), seq.period);
  std::vector<double> merged;
  for (double t : out) {
    if (merged.empty() || t - merged.back() > eps) merged.push_back(t);
  }
  if (merged.back() != t1) merged.back() = t1;
  return merged;
}

Operator HamiltonianParts::at(double omega_p, double omega_r) const {
  Operator h = fixed;
  h.data() += omega_p * pump.data() + omega_r * recycle.data();
  return h;
}

HamiltonianParts hamiltonian_parts(const SystemParams& p) {
  const auto space = p.space();
  const auto a = annihilation(space);
  const auto num = dagger(a) * a;
  const auto pe = projector(space, Atom::e);
  const auto pg = projector(space, Atom::g);
  const auto e_from_g = atomic_transition(space, Atom::g, Atom::e);
  const auto e_from_u = atomic_transition(space, Atom::u, Atom::e);

  const auto cavity = e_from_g * a;
  Operator fixed = (-p.delta_p) * pe + (p.delta_r - p.delta_p) * pg + (p.delta_c - p.delta_r) * num +
                   p.g * (cavity + dagger(cavity));
  Operator pump = 0.5 * (e_from_u + dagger(e_from_u));
  Operator recycle = 0.5 * (e_from_g + dagger(e_from_g));
  return {std::move(fixed), std::move(pump), std::move(recycle)};
}

Operator hamiltonian(const SystemParams& p, double omega_p, double omega_r) {
  return hamiltonian_parts(p).at(omega_p, omega_r);
}

State dark_state(double g, double omega_p, const HilbertSpace& space) {
  const double norm = std::hypot(2.0 * g, omega_p);
  if (norm == 0.0) throw InvalidStateError("dark state undefined for g = omega_p = 0");
  CVector<double> psi = CVector<double>::Zero(space.dim());
  psi(space.index(Atom::u, 0)) = 2.0 * g / norm;
  psi(space.index(Atom::g, 1)) = -omega_p / norm;
  return {space, std::move(psi)};
}

const char* to_string(JumpChannel c) {
  switch (c) {
    case JumpChannel::cavity: return "cavity";
    case JumpChannel::spont_u: return "spont_u";
    case JumpChannel::spont_g: return "spont_g";
  }
  return "?";
}

std::vector<CollapseOperator> collapse_operators(const SystemParams& p) {
  const auto space = p.space();
  return {
      {JumpChannel::cavity, std::sqrt(2.0 * p.kappa) * annihilation(space)},
      {JumpChannel::spont_u, std::sqrt(p.branch_u * p.gamma) * atomic_transition(space, Atom::e, Atom::u)},
      {JumpChannel::spont_g,
       std::sqrt((1.0 - p.branch_u) * p.gamma) * atomic_transition(space, Atom::e, Atom::g)},
  };
}

}  // namespace sps
