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

// Dormand-Prince 5(4) with FSAL and the 4th-order continuous extension
// (Hairer, Norsett & Wanner, "Solving ODEs I", dopri5).
//
// The state is any dense Eigen matrix or vector; the right-hand side is a
// callable `void(double t, const State& y, State& dydt)`.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "sps/errors.hpp"

namespace sps {

struct IntegratorOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  /// Steps shorter than this (relative to |t| + span) mean the problem is stiff.
  double min_relative_step = 1e-14;
  long max_steps = 50'000'000;
};

template <typename State, typename Rhs>
class DormandPrince45 {
 public:
  DormandPrince45(Rhs rhs, IntegratorOptions opts = {}) : rhs_(std::move(rhs)), opts_(opts) {}

  /// Start (or restart after a discontinuity) at (t0, y0).
  void reset(double t0, const State& y0) {
    t_ = t_prev_ = t0;
    y_ = y0;
    y_prev_ = y0;
    rhs_(t_, y_, k1_);
  }

  /// Replace the right-hand side; the next step re-evaluates k1.
  void set_rhs(Rhs rhs) {
    rhs_ = std::move(rhs);
    rhs_(t_, y_, k1_);
  }

  Rhs& rhs() { return rhs_; }

  double t() const { return t_; }
  double t_prev() const { return t_prev_; }
  const State& y() const { return y_; }
  const State& y_prev() const { return y_prev_; }
  long steps() const { return steps_; }
  double last_step() const { return h_; }

  /// One accepted step, never past `t_limit`. Returns the new time.
  double step(double t_limit) {
    const double span = t_limit - t_;
    if (span <= 0) return t_;
    if (h_ <= 0) h_ = initial_step(span);
    const double h_min = opts_.min_relative_step * (std::abs(t_) + std::abs(span));

    while (true) {
      double h = std::min(h_, span);
      const bool last = h >= span * (1 - 1e-12);
      if (last) h = span;
      if (h < h_min && !last) throw StiffnessError("step size underflow", t_);
      if (++steps_ > opts_.max_steps) throw StiffnessError("step budget exhausted", t_);

      attempt(h);
      const double err = error_norm();
      if (err <= 1.0) {
        t_prev_ = t_;
        y_prev_ = y_;
        t_ = last ? t_limit : t_ + h;
        y_ = y_new_;
        k1_prev_ = k1_;
        k1_.swap(k7_);
        h_used_ = h;
        const double fac = err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        // A step clipped to hit t_limit says little about the natural step size.
        h_ = (last && h < h_) ? std::max(h_, h * fac) : h * fac;
        build_dense();
        return t_;
      }
      h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
    }
  }

  /// Integrate to `t_end` exactly, invoking `observe(*this)` after each step.
  template <typename Observer>
  void advance_to(double t_end, Observer&& observe) {
    while (t_ < t_end) {
      step(t_end);
      observe(*this);
    }
  }
  void advance_to(double t_end) {
    advance_to(t_end, [](const auto&) {});
  }

  /// Dense output on the last accepted step, t in [t_prev(), t()].
  State dense(double t) const {
    const double h = h_used_;
    if (h == 0) return y_;
    const double th = (t - t_prev_) / h;
    const double th1 = 1.0 - th;
    return r1_ + th * (r2_ + th1 * (r3_ + th * (r4_ + th1 * r5_)));
  }

 private:
  using Scalar = typename State::Scalar;

  double initial_step(double span) {
    // Hairer's heuristic, clipped to the requested span.
    const double d0 = scaled_norm(y_, y_);
    const double d1 = scaled_norm(k1_, y_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    State y1 = y_ + h0 * k1_;
    State f1;
    rhs_(t_ + h0, y1, f1);
    const double d2 = scaled_norm(State(f1 - k1_), y_) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6 * span, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100 * h0, h1, span});
  }

  // |z| via sqrt(|z|^2): std::abs on complex goes through hypot, which is slow.
  template <typename Expr>
  static auto magnitude(const Expr& v) {
    return v.array().abs2().sqrt();
  }

  double scaled_norm(const State& v, const State& ref) const {
    const auto sc = (opts_.abs_tol + opts_.rel_tol * magnitude(ref)).eval();
    return std::sqrt((v.array().abs2() / sc.square()).mean());
  }

  void attempt(double h) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                     a76 = 11.0 / 84;

    tmp_ = y_ + (h * a21) * k1_;
    rhs_(t_ + c2 * h, tmp_, k2_);
    tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    rhs_(t_ + c3 * h, tmp_, k3_);
    tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t_ + c4 * h, tmp_, k4_);
    tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t_ + c5 * h, tmp_, k5_);
    tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t_ + h, tmp_, k6_);
    y_new_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t_ + h, y_new_, k7_);
    h_try_ = h;
  }

  double error_norm() {
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    err_ = h_try_ * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    const auto sc = (opts_.abs_tol + opts_.rel_tol * magnitude(y_).max(magnitude(y_new_))).eval();
    return std::sqrt((err_.array().abs2() / sc.square()).mean());
  }

  // Called after acceptance: y_prev_/k1_prev_ hold the step start, k1_ the end slope.
  void build_dense() {
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
    const double h = h_used_;
    r1_ = y_prev_;
    r2_ = y_ - y_prev_;
    r3_ = h * k1_prev_ - r2_;
    r4_ = r2_ - h * k1_ - r3_;
    r5_ = h * (d1 * k1_prev_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k1_);
  }

  Rhs rhs_;
  IntegratorOptions opts_;
  double t_ = 0, t_prev_ = 0, h_ = 0, h_try_ = 0, h_used_ = 0;
  long steps_ = 0;
  State y_, y_prev_, y_new_, tmp_, err_;
  State k1_, k1_prev_, k2_, k3_, k4_, k5_, k6_, k7_;
  State r1_, r2_, r3_, r4_, r5_;
};

}  // namespace sps
