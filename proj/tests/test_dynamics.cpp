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


#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sps/dynamics.hpp"
#include "support.hpp"

using namespace sps;
using doctest::Approx;

namespace {

// Lasers off and the atom decoupled from the cavity mode.
SystemParams drives_off() {
  SystemParams p;
  p.omega_p0 = 0;
  p.omega_r0 = 0;
  p.g = 0;
  return p;
}

// Value computed once with the fixed-step RK4 oracle (dt = 0.1 ns) and frozen.
constexpr double kPinnedEmissionProbability = 0.6373671796;

}  // namespace

TEST_CASE("cavity decay from |g,1> with drives off") {
  const auto p = drives_off();
  const PulseSequence seq;
  const double tau = 1 / (2 * p.kappa);
  const auto r = evolve_master(basis_state(p.space(), Atom::g, 1), p, seq, {0, 5 * tau}, 51);
  const auto num = dagger(annihilation(p.space())) * annihilation(p.space());
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double expect = std::exp(-2 * p.kappa * r.times[i]);
    CHECK(expectation(num, r.states[i]).real() == Approx(expect).epsilon(1e-6));
    CHECK(r.emission_flux[i] == Approx(2 * p.kappa * expect).epsilon(1e-6));
  }
}

TEST_CASE("free decay of |e> is a single exponential at rate gamma") {
  const auto p = drives_off();
  const PulseSequence seq;
  const auto r = evolve_master(basis_state(p.space(), Atom::e, 0), p, seq, {0, 3 / p.gamma}, 31);
  // Least-squares slope of ln P_e(t).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(r.times.size());
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double x = r.times[i], y = std::log(r.states[i].population(Atom::e, 0));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(-slope == Approx(p.gamma).epsilon(1e-6));
  const auto& last = r.states.back();
  CHECK(last.population(Atom::u, 0) == Approx(last.population(Atom::g, 0)));
}

TEST_CASE("dark state is stationary without decay") {
  SystemParams p;
  p.gamma = p.kappa = 0;
  p.omega_r0 = 0;
  PulseSequence seq;
  seq.shape = PulseShape::constant;
  const auto dark = dark_state(p.g, p.omega_p0, p.space());
  const auto r = evolve_master(dark, p, seq, {0.1e-6, 1.9e-6}, 10);
  for (const auto& rho : r.states) {
    const auto f = expectation(Operator(p.space(), dark.density()), rho).real();
    CHECK(f == Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("density matrix invariants hold over two periods at the published parameters") {
  const SystemParams p;
  const PulseSequence seq;
  const auto r = evolve_master(basis_state(p.space(), Atom::u, 0), p, seq, {0, 2 * seq.period}, 201);
  for (const auto& s : r.states) {
    const auto d = diagnose(s);
    CHECK(d.trace_error < 1e-8);
    CHECK(d.hermiticity_error < 1e-9);
    CHECK(d.min_eigenvalue > -1e-7);
  }
  CHECK(r.max_top_fock_population < 1e-4);
  CHECK(r.warnings.empty());
  for (std::size_t i = 1; i < r.times.size(); ++i) CHECK(r.times[i] > r.times[i - 1]);
}

TEST_CASE("a one-photon truncation under drive raises the truncation warning") {
  SystemParams p;
  p.n_max = 1;
  const PulseSequence seq;
  const auto r = evolve_master(basis_state(p.space(), Atom::u, 0), p, seq, {0, seq.period}, 11);
  REQUIRE_FALSE(r.warnings.empty());
  CHECK(r.warnings[0].find("truncation") != std::string::npos);
}

TEST_CASE("integrator exhaustion is a stiffness error") {
  const SystemParams p;
  const PulseSequence seq;
  MasterEquationOptions o;
  o.integrator.max_steps = 5;
  CHECK_THROWS_AS(evolve_master(basis_state(p.space(), Atom::u, 0), p, seq, {0, seq.period}, 3, o),
                  StiffnessError);
  CHECK_THROWS_AS(evolve_master(basis_state(p.space(), Atom::u, 0), p, seq, {1e-6, 0}, 3), Error);
  CHECK_THROWS_AS(evolve_master(basis_state(HilbertSpace(3), Atom::u, 0), p, seq, {0, 1e-6}, 3),
                  SpaceMismatchError);
}

TEST_CASE("emission probability") {
  SystemParams p;
  const PulseSequence seq;
  const auto u0 = basis_state(p.space(), Atom::u, 0);

  SUBCASE("matches the fixed-step oracle and the pinned value") {
    const double lib = emission_probability(p, seq, u0, {0, seq.period});
    const double oracle = test::oracle_emission_probability(p, seq, 1e-10);
    CHECK(lib == Approx(oracle).epsilon(1e-7));
    CHECK(lib == Approx(kPinnedEmissionProbability).epsilon(1e-8));
    CHECK(lib <= 1.0 + 1e-7);
  }
  SUBCASE("zero coupling emits nothing") {
    p.g = 0;
    CHECK(emission_probability(p, seq, u0, {0, seq.period}) == 0.0);
  }
  SUBCASE("non-decreasing in g") {
    double prev_lib = -1, prev_oracle = -1;
    for (int i = 1; i <= 10; ++i) {
      p.g = mhz(0.5 * i);
      const double lib = emission_probability(p, seq, u0, {0, seq.period});
      const double oracle = test::oracle_emission_probability(p, seq, 5e-10);
      CHECK(lib == Approx(oracle).epsilon(1e-6));
      CHECK(lib >= prev_lib);
      CHECK(oracle >= prev_oracle);
      prev_lib = lib;
      prev_oracle = oracle;
    }
  }
}

TEST_CASE("trajectories without decay never jump") {
  SystemParams p;
  p.gamma = p.kappa = 0;
  const PulseSequence seq;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto rec = run_trajectory(basis_state(p.space(), Atom::u, 0), p, seq, {0, 2 * seq.period}, s);
    CHECK(rec.jumps.empty());
    CHECK(norm(rec.final_state) == Approx(1.0));
  }
}

TEST_CASE("cavity decay jump times are exponential at rate 2 kappa") {
  const auto p = drives_off();
  const PulseSequence seq;
  const double rate = 2 * p.kappa;
  const int n = 10000;
  std::vector<double> t;
  for (int i = 0; i < n; ++i) {
    const auto rec =
        run_trajectory(basis_state(p.space(), Atom::g, 1), p, seq, {0, 25 / rate}, derive_seed(99, std::uint64_t(i)));
    REQUIRE(rec.jumps.size() == 1);
    CHECK(rec.jumps[0].channel == JumpChannel::cavity);
    t.push_back(rec.jumps[0].time);
  }
  std::sort(t.begin(), t.end());
  double d = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 1 - std::exp(-rate * t[std::size_t(i)]);
    d = std::max({d, std::abs(cdf - double(i) / n), std::abs(cdf - double(i + 1) / n)});
  }
  // Kolmogorov critical value for p = 0.01 is 1.628 / sqrt(n).
  CHECK(d * std::sqrt(double(n)) < 1.628);
}

TEST_CASE("trajectories are reproducible per seed and jumps are ordered") {
  const SystemParams p;
  const PulseSequence seq;
  const auto u0 = basis_state(p.space(), Atom::u, 0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = run_trajectory(u0, p, seq, {0, 4 * seq.period}, s);
    const auto b = run_trajectory(u0, p, seq, {0, 4 * seq.period}, s);
    CHECK(a.jumps == b.jumps);
    CHECK(a.final_state.data() == b.final_state.data());
    for (std::size_t i = 0; i < a.jumps.size(); ++i) {
      CHECK(a.jumps[i].time > 0);
      CHECK(a.jumps[i].time <= 4 * seq.period);
      if (i) CHECK(a.jumps[i].time > a.jumps[i - 1].time);
    }
  }
  CHECK_THROWS_AS(run_trajectory(u0.to_density(), p, seq, {0, 1e-6}, 1), InvalidStateError);
}

TEST_CASE("trajectory cavity-jump rate matches the master-equation flux") {
  const SystemParams p;
  const PulseSequence seq;
  const auto u0 = basis_state(p.space(), Atom::u, 0);
  const int n = 10000, bins = 25;
  const double width = seq.period / bins;
  std::vector<double> counts(bins, 0);
  for (int i = 0; i < n; ++i) {
    const auto rec = run_trajectory(u0, p, seq, {0, seq.period}, derive_seed(5, std::uint64_t(i)));
    for (const auto& j : rec.jumps)
      if (j.channel == JumpChannel::cavity) counts[std::min(bins - 1, int(j.time / width))] += 1;
  }
  // Expected jumps per bin from the master equation, integrated per bin.
  int failures = 0;
  for (int b = 0; b < bins; ++b) {
    const double expect = n * emission_probability(p, seq, u0, {0, (b + 1) * width}) -
                          n * (b ? emission_probability(p, seq, u0, {0, b * width}) : 0.0);
    const double se = std::sqrt(std::max(expect, 1.0));
    if (std::abs(counts[std::size_t(b)] - expect) > 3 * se) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("without recycling and with all decay into |g>, at most one photon per trajectory") {
  SystemParams p;
  p.omega_r0 = 0;
  p.branch_u = 0;
  const PulseSequence seq;
  for (int i = 0; i < 2000; ++i) {
    const auto rec = run_trajectory(basis_state(p.space(), Atom::u, 0), p, seq, {0, 2 * seq.period},
                                    derive_seed(17, std::uint64_t(i)));
    CHECK(rec.count(JumpChannel::cavity) <= 1);
  }
}

TEST_CASE("QuantumTrajectory carries its state across parameter changes") {
  SystemParams p;
  const PulseSequence seq;
  QuantumTrajectory q(p, seq, basis_state(p.space(), Atom::u, 0), 0, 3);
  std::vector<Jump> jumps;
  q.run_until(seq.period, jumps);
  CHECK(q.time() == seq.period);
  p.g = mhz(1.0);
  q.set_params(p);
  q.run_until(2 * seq.period, jumps);
  CHECK(q.time() == 2 * seq.period);
  CHECK(norm(q.state()) == Approx(1.0));
  CHECK(q.steps() > 0);
  SystemParams bigger = p;
  bigger.n_max = 3;
  CHECK_THROWS_AS(q.set_params(bigger), SpaceMismatchError);
}
