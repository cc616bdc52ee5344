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

// Test-only oracles. Nothing here calls into the model or dynamics code; the
// master-equation oracle assembles its operators from Kronecker products and
// steps them with classical fixed-step RK4.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include "sps/experiment.hpp"
#include "sps/rng.hpp"

namespace sps::test {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;

struct OracleParams {
  double g, omega_p, omega_r, delta_p, delta_c, delta_r, gamma, kappa, branch_u;
  int n_max;
  double pump_start, pump_dur, recycle_start, recycle_dur, period;
};

inline OracleParams oracle_params(const SystemParams& p, const PulseSequence& s) {
  return {p.g, p.omega_p0, p.omega_r0, p.delta_p, p.delta_c, p.delta_r, p.gamma, p.kappa, p.branch_u, p.n_max,
          s.pump_start_offset, s.pump_duration, s.recycle_start_offset, s.recycle_duration, s.period};
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Atomic |to><from| with u = 0, e = 1, g = 2.
inline Mat sigma(int to, int from) {
  Mat m = Mat::Zero(3, 3);
  m(to, from) = 1;
  return m;
}

class MasterOracle {
 public:
  explicit MasterOracle(const OracleParams& p) : p_(p) {
    const int f = p.n_max + 1;
    Mat a = Mat::Zero(f, f);
    for (int n = 1; n < f; ++n) a(n - 1, n) = std::sqrt(double(n));
    const Mat If = Mat::Identity(f, f);
    const Mat I3 = Mat::Identity(3, 3);
    A_ = kron(I3, a);
    const Mat num = kron(I3, a.adjoint() * a);
    H0_ = -p.delta_p * kron(sigma(1, 1), If) + (p.delta_r - p.delta_p) * kron(sigma(2, 2), If) +
          (p.delta_c - p.delta_r) * num;
    const Mat cav = kron(sigma(1, 2), a);
    H0_ += p.g * (cav + cav.adjoint());
    Hp_ = 0.5 * kron(sigma(1, 0) + sigma(0, 1), If);
    Hr_ = 0.5 * kron(sigma(1, 2) + sigma(2, 1), If);
    L_.push_back(std::sqrt(2 * p.kappa) * A_);
    L_.push_back(std::sqrt(p.branch_u * p.gamma) * kron(sigma(0, 1), If));
    L_.push_back(std::sqrt((1 - p.branch_u) * p.gamma) * kron(sigma(2, 1), If));
    N_ = A_.adjoint() * A_;
  }

  // Sawtooth ramp of a window, with the segment chosen by `ref`.
  static double ramp(double t, double ref, double start, double dur, double period) {
    const double k = std::floor(ref / period);
    const double tau_ref = ref - k * period;
    if (tau_ref < start || tau_ref > start + dur) return 0.0;
    return (t - k * period - start) / dur;
  }

  Mat rhs(double t, double ref, const Mat& rho) const {
    const Mat H = H0_ + p_.omega_p * ramp(t, ref, p_.pump_start, p_.pump_dur, p_.period) * Hp_ +
                  p_.omega_r * ramp(t, ref, p_.recycle_start, p_.recycle_dur, p_.period) * Hr_;
    Mat d = cd(0, -1) * (H * rho - rho * H);
    for (const auto& L : L_) {
      const Mat LdL = L.adjoint() * L;
      d += L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
    }
    return d;
  }

  /// Integrates from t0 to t1 with step dt, returning the final state and the
  /// trapezoid integral of 2 kappa <a^dag a>.
  std::pair<Mat, double> run(Mat rho, double t0, double t1, double dt) const {
    const auto steps = static_cast<long>(std::llround((t1 - t0) / dt));
    const double h = (t1 - t0) / double(steps);
    double integral = 0;
    double prev = flux(rho);
    for (long i = 0; i < steps; ++i) {
      const double t = t0 + double(i) * h;
      const double ref = t + 0.5 * h;
      const Mat k1 = rhs(t, ref, rho);
      const Mat k2 = rhs(t + 0.5 * h, ref, rho + 0.5 * h * k1);
      const Mat k3 = rhs(t + 0.5 * h, ref, rho + 0.5 * h * k2);
      const Mat k4 = rhs(t + h, ref, rho + h * k3);
      rho += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
      const double cur = flux(rho);
      integral += 0.5 * h * (prev + cur);
      prev = cur;
    }
    return {rho, integral};
  }

  double flux(const Mat& rho) const { return 2 * p_.kappa * (N_ * rho).trace().real(); }

  Eigen::Index index(int atom, int n) const { return Eigen::Index(atom) * (p_.n_max + 1) + n; }

  Mat pure(int atom, int n) const {
    const auto d = 3 * (p_.n_max + 1);
    Mat rho = Mat::Zero(d, d);
    rho(index(atom, n), index(atom, n)) = 1;
    return rho;
  }

 private:
  OracleParams p_;
  Mat A_, N_, H0_, Hp_, Hr_;
  std::vector<Mat> L_;
};

/// Emission probability over one period starting in |u,0> at t = 0.
inline double oracle_emission_probability(const SystemParams& p, const PulseSequence& s, double dt = 1e-10) {
  MasterOracle m(oracle_params(p, s));
  return m.run(m.pure(0, 0), 0.0, s.period, dt).second;
}

/// Synthetic click stream from well separated atoms. Each atom sees `pulses`
/// consecutive periods; in period j it yields at most one photon, detected
/// with probability p_j, at a time jittered inside the first `spread` seconds
/// after the period start. `ground_truth[k]` counts ordered pairs of photons
/// from the same atom k periods apart, over both detectors.
struct SyntheticStream {
  std::vector<ClickRecord> clicks;
  double duration = 0;
  std::size_t photons = 0;
  std::map<int, std::size_t> ground_truth;

  double conditional(int k) const {
    const auto it = ground_truth.find(k);
    return it == ground_truth.end() ? 0.0 : double(it->second) / double(photons);
  }
};

template <class Profile>
SyntheticStream synthetic_stream(int atoms, int pulses, double period, double gap, Profile profile,
                                 std::uint64_t seed, double splitter = 0.5, double spread = 1e-6,
                                 double offset = 0.5e-6) {
  SyntheticStream s;
  CounterRng rng(seed);
  double t0 = 0;
  for (int a = 0; a < atoms; ++a) {
    std::vector<int> hit;
    for (int j = 0; j < pulses; ++j) {
      if (!rng.bernoulli(profile(j))) continue;
      hit.push_back(j);
      const double t = t0 + j * period + offset + rng.uniform() * spread;
      const auto ns = static_cast<std::int64_t>(std::floor(t * 1e9 / 8)) * 8;
      s.clicks.push_back({rng.bernoulli(splitter) ? Detector::D1 : Detector::D2, ns, ClickOrigin::signal});
    }
    s.photons += hit.size();
    for (std::size_t i = 0; i < hit.size(); ++i)
      for (std::size_t j = i + 1; j < hit.size(); ++j) s.ground_truth[hit[j] - hit[i]] += 1;
    t0 += pulses * period + gap;
  }
  s.duration = t0;
  std::sort(s.clicks.begin(), s.clicks.end());
  return s;
}

/// Homogeneous Poisson clicks on one detector over [0, duration).
inline std::vector<ClickRecord> poisson_clicks(double rate, double duration, Detector d, std::uint64_t seed,
                                               ClickOrigin origin = ClickOrigin::signal) {
  std::vector<ClickRecord> out;
  CounterRng rng(seed);
  for (double t = rng.exponential(rate); t < duration; t += rng.exponential(rate))
    out.push_back({d, static_cast<std::int64_t>(std::floor(t * 1e9 / 8)) * 8, origin});
  return out;
}

/// Number of D1 x D2 pairs with lag t1 - t2 in [lo, hi), by exhaustive search.
inline std::size_t brute_force_pairs(const std::vector<ClickRecord>& clicks, std::int64_t lo, std::int64_t hi) {
  std::size_t n = 0;
  for (const auto& a : clicks)
    if (a.detector == Detector::D1)
      for (const auto& b : clicks)
        if (b.detector == Detector::D2) {
          const auto lag = a.t_ns - b.t_ns;
          if (lag >= lo && lag < hi) ++n;
        }
  return n;
}

}  // namespace sps::test
