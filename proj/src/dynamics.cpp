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

#include "sps/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <variant>

namespace sps {

namespace {

using Matrix = CMatrix<double>;
// Trajectory wavefunctions stay off the heap for n_max <= kMaxFock.
constexpr int kMaxFock = 8;
constexpr int kMaxDim = 3 * (kMaxFock + 1);
using Vector = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
constexpr std::complex<double> kMinusI{0.0, -1.0};

// -i H_eff(t) = fixed + fp(t) * pump + fr(t) * recycle, with the peak Rabi
// frequencies folded into `pump` and `recycle`.
struct Generator {
  Matrix fixed;
  Matrix pump;
  Matrix recycle;
  std::vector<Matrix> jumps;
  std::vector<JumpChannel> channels;
  Matrix number;  // a^dag a
  double kappa = 0;

  static Generator build(const SystemParams& p) {
    const auto h = hamiltonian_parts(p);
    const auto cs = collapse_operators(p);
    Generator gen;
    Matrix decay = Matrix::Zero(h.fixed.data().rows(), h.fixed.data().cols());
    for (const auto& c : cs) {
      decay += c.op.data().adjoint() * c.op.data();
      gen.jumps.push_back(c.op.data());
      gen.channels.push_back(c.channel);
    }
    gen.fixed = kMinusI * h.fixed.data() - 0.5 * decay;
    gen.pump = (kMinusI * p.omega_p0) * h.pump.data();
    gen.recycle = (kMinusI * p.omega_r0) * h.recycle.data();
    const auto a = annihilation(p.space()).data();
    gen.number = a.adjoint() * a;
    gen.kappa = p.kappa;
    return gen;
  }
};

// Envelope pieces valid on one breakpoint-free segment.
struct Segment {
  EnvelopePiece pump{0, 0};
  EnvelopePiece recycle{0, 0};
  double t_ref = 0;

  static Segment between(const PulseSequence& seq, double t0, double t1) {
    const double mid = 0.5 * (t0 + t1);
    return {envelope_piece(seq, Laser::pump, mid), envelope_piece(seq, Laser::recycle, mid), mid};
  }
};

struct MasterRhs {
  const Generator* gen;
  Segment seg;
  Matrix m;
  Matrix x;

  void operator()(double t, const Matrix& rho, Matrix& drho) {
    m = gen->fixed;
    const double fp = seg.pump.at(t, seg.t_ref);
    const double fr = seg.recycle.at(t, seg.t_ref);
    if (fp != 0) m += fp * gen->pump;
    if (fr != 0) m += fr * gen->recycle;
    x.noalias() = m * rho;
    drho = x + x.adjoint();
    for (const auto& c : gen->jumps) drho.noalias() += c * rho * c.adjoint();
  }
};

double top_fock_population(const HilbertSpace& space, const Matrix& rho) {
  double p = 0;
  for (int a = 0; a < space.atom_dim(); ++a) {
    const auto i = space.index(static_cast<Atom>(a), space.n_max());
    p += rho(i, i).real();
  }
  return p;
}

// Drives a master-equation solve over [times.front(), t_end], calling
// `on_step(stepper)` after every accepted step.
template <typename OnStep>
void integrate_master(const Generator& gen, const PulseSequence& seq, Matrix& rho, double t0, double t1,
                      const IntegratorOptions& opts, OnStep&& on_step, long& steps) {
  using Stepper = DormandPrince45<Matrix, MasterRhs>;
  Stepper stepper(MasterRhs{&gen, {}, {}, {}}, opts);
  const auto cuts = breakpoints(seq, t0, t1);
  bool first = true;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    stepper.rhs().seg = Segment::between(seq, cuts[s], cuts[s + 1]);
    if (first) {
      stepper.reset(cuts[s], rho);
      first = false;
    } else {
      stepper.reset(cuts[s], stepper.y());
    }
    stepper.advance_to(cuts[s + 1], on_step);
  }
  if (!first) rho = stepper.y();
  steps += stepper.steps();
}

}  // namespace

std::vector<double> uniform_samples(TimeSpan span, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {span.start};
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(i + 1 == count ? span.end : span.start + span.length() * double(i) / double(count - 1));
  }
  return out;
}

EvolutionResult evolve_master(const State& initial, const SystemParams& params, const PulseSequence& seq,
                              std::span<const double> sample_times, const MasterEquationOptions& opts) {
  params.validate();
  seq.validate();
  if (sample_times.empty()) throw Error("evolve_master: no sample times");
  if (!std::is_sorted(sample_times.begin(), sample_times.end()) ||
      sample_times.back() <= sample_times.front()) {
    throw Error("evolve_master: sample times must be increasing with positive span");
  }
  const auto space = params.space();
  if (!(initial.space() == space)) throw SpaceMismatchError("evolve_master: initial state space mismatch");
  validate(initial);

  const auto gen = Generator::build(params);
  Matrix rho = initial.density();

  EvolutionResult res;
  auto record = [&](double t, const Matrix& r) {
    res.times.push_back(t);
    res.emission_flux.push_back(2.0 * gen.kappa * (gen.number * r).trace().real());
    res.states.emplace_back(space, r, StateKind::density_matrix);
  };

  double top = top_fock_population(space, rho);
  auto watch = [&](const auto& stepper) { top = std::max(top, top_fock_population(space, stepper.y())); };

  record(sample_times.front(), rho);
  for (std::size_t k = 1; k < sample_times.size(); ++k) {
    if (sample_times[k] > sample_times[k - 1]) {
      integrate_master(gen, seq, rho, sample_times[k - 1], sample_times[k], opts.integrator, watch, res.steps);
    }
    // Exact Hermitian projection removes rounding drift without touching the trace.
    rho = 0.5 * (rho + rho.adjoint()).eval();
    record(sample_times[k], rho);
  }

  res.max_top_fock_population = top;
  if (top > opts.truncation_limit) {
    std::ostringstream msg;
    msg << "truncation: population of n = " << space.n_max() << " reached " << top;
    res.warnings.push_back(msg.str());
  }
  return res;
}

EvolutionResult evolve_master(const State& initial, const SystemParams& params, const PulseSequence& seq,
                              TimeSpan span, int n_samples, const MasterEquationOptions& opts) {
  const auto times = uniform_samples(span, std::max(n_samples, 2));
  return evolve_master(initial, params, seq, times, opts);
}

double emission_probability(const SystemParams& params, const PulseSequence& seq, const State& initial,
                            TimeSpan window, const MasterEquationOptions& opts) {
  params.validate();
  seq.validate();
  if (window.length() <= 0) throw Error("emission_probability: empty window");
  validate(initial);
  const auto gen = Generator::build(params);
  Matrix rho = initial.density();

  // Three-point Gauss-Legendre on each step's dense output.
  const double x = std::sqrt(0.6);
  const std::array<double, 3> nodes{-x, 0.0, x};
  const std::array<double, 3> weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double integral = 0;
  auto accumulate = [&](const auto& stepper) {
    const double a = stepper.t_prev();
    const double b = stepper.t();
    const double half = 0.5 * (b - a);
    for (int i = 0; i < 3; ++i) {
      const Matrix r = stepper.dense(a + half * (1.0 + nodes[i]));
      integral += weights[i] * half * (gen.number * r).trace().real();
    }
  };
  long steps = 0;
  integrate_master(gen, seq, rho, window.start, window.end, opts.integrator, accumulate, steps);
  return 2.0 * gen.kappa * integral;
}

std::size_t TrajectoryRecord::count(JumpChannel c) const {
  return static_cast<std::size_t>(
      std::count_if(jumps.begin(), jumps.end(), [c](const Jump& j) { return j.channel == c; }));
}

namespace {

// Trajectory propagation with compile-time dimension where it pays off.
template <int Dim>
class TrajectoryEngine {
 public:
  static constexpr int kCap = Dim == Eigen::Dynamic ? kMaxDim : Dim;
  using Vec = Eigen::Matrix<std::complex<double>, Dim, 1, 0, kCap, 1>;
  using Mat = Eigen::Matrix<std::complex<double>, Dim, Dim, 0, kCap, kCap>;

  // -i H_eff(t) is very sparse (about 25 of 81 entries at n_max = 2), so the
  // right-hand side walks a coordinate list instead of a dense product.
  struct Entry {
    int row;
    int col;
    std::complex<double> fixed;
    std::complex<double> pump;
    std::complex<double> recycle;
  };

  struct Ops {
    std::vector<Entry> entries;
    std::vector<Mat> jumps;
    std::vector<JumpChannel> channels;

    explicit Ops(const SystemParams& p) {
      const auto g = Generator::build(p);
      for (Eigen::Index c = 0; c < g.fixed.cols(); ++c) {
        for (Eigen::Index r = 0; r < g.fixed.rows(); ++r) {
          const auto f = g.fixed(r, c), pu = g.pump(r, c), re = g.recycle(r, c);
          if (f != 0.0 || pu != 0.0 || re != 0.0) entries.push_back({int(r), int(c), f, pu, re});
        }
      }
      for (const auto& j : g.jumps) jumps.emplace_back(j);
      channels = g.channels;
    }
  };

  struct Rhs {
    const Ops* ops;
    Segment seg;

    void operator()(double t, const Vec& psi, Vec& dpsi) const {
      const double fp = seg.pump.at(t, seg.t_ref);
      const double fr = seg.recycle.at(t, seg.t_ref);
      dpsi.setZero(psi.size());
      for (const auto& e : ops->entries) {
        dpsi[e.row] += (e.fixed + fp * e.pump + fr * e.recycle) * psi[e.col];
      }
    }
  };

  TrajectoryEngine(const SystemParams& p, const PulseSequence& s, const CVector<double>& psi0, double t0,
                   std::uint64_t seed, const TrajectoryOptions& o)
      : seq_(s), opts_(o), ops_(p), rng_(seed), t_(t0), psi_(psi0), stepper_(Rhs{&ops_, {}}, o.integrator) {
    threshold_ = rng_.uniform_open0();
  }

  void set_params(const SystemParams& p) { ops_ = Ops(p); }
  double time() const { return t_; }
  long steps() const { return stepper_.steps(); }
  CVector<double> state() const { return CVector<double>(psi_ / psi_.norm()); }

  void run_until(double t_end, std::vector<Jump>& out) {
    if (t_end <= t_) return;
    const auto cuts = breakpoints(seq_, t_, t_end);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double seg_end = cuts[s + 1];
      stepper_.rhs().seg = Segment::between(seq_, cuts[s], seg_end);
      stepper_.reset(t_, psi_);
      while (t_ < seg_end) {
        stepper_.step(seg_end);
        if (stepper_.y().squaredNorm() > threshold_) {
          t_ = stepper_.t();
          psi_ = stepper_.y();
          continue;
        }
        // The norm is non-increasing, so the crossing is bracketed by the step.
        double lo = stepper_.t_prev();
        double hi = stepper_.t();
        const double tol = opts_.jump_time_rel_tol * (hi - lo);
        while (hi - lo > tol) {
          const double mid = 0.5 * (lo + hi);
          if (stepper_.dense(mid).squaredNorm() > threshold_) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        jump(hi, stepper_.dense(hi), out);
        t_ = hi;
        stepper_.reset(t_, psi_);
      }
      t_ = seg_end;
    }
    // Renormalize between calls so parameter changes never see a tiny norm.
    const double norm2 = psi_.squaredNorm();
    threshold_ /= norm2;
    psi_ /= std::sqrt(norm2);
  }

 private:
  void jump(double at, const Vec& pre, std::vector<Jump>& out) {
    const auto n = ops_.jumps.size();
    std::array<double, 8> w{};
    double total = 0;
    for (std::size_t k = 0; k < n; ++k) {
      w[k] = (ops_.jumps[k] * pre).squaredNorm();
      total += w[k];
    }
    threshold_ = rng_.uniform_open0();
    if (total == 0) {
      // No channel can fire (only reachable through rounding); keep the state.
      psi_ = pre / pre.norm();
      return;
    }
    const double pick = rng_.uniform() * total;
    std::size_t k = 0;
    double acc = w[0];
    while (k + 1 < n && pick >= acc) acc += w[++k];
    while (w[k] == 0 && k > 0) --k;
    const Vec post = ops_.jumps[k] * pre;
    psi_ = post / post.norm();
    out.push_back({at, ops_.channels[k]});
  }

  PulseSequence seq_;
  TrajectoryOptions opts_;
  Ops ops_;
  CounterRng rng_;
  double t_;
  Vec psi_;
  double threshold_ = 1;
  DormandPrince45<Vec, Rhs> stepper_;
};

}  // namespace

struct QuantumTrajectory::Impl {
  HilbertSpace space;
  std::variant<TrajectoryEngine<9>, TrajectoryEngine<Eigen::Dynamic>> engine;

  static decltype(engine) make(const SystemParams& p, const PulseSequence& s, const State& initial, double t0,
                               std::uint64_t seed, const TrajectoryOptions& o) {
    p.validate();
    s.validate();
    if (!initial.is_wavefunction()) throw InvalidStateError("trajectory needs a wavefunction");
    if (!(initial.space() == p.space())) throw SpaceMismatchError("trajectory: initial state space mismatch");
    if (p.n_max > kMaxFock) throw TruncationError("trajectory: n_max above supported maximum");
    validate(initial);
    const CVector<double> psi = initial.ket();
    if (p.space().dim() == 9) {
      return decltype(engine)(std::in_place_index<0>, p, s, psi, t0, seed, o);
    }
    return decltype(engine)(std::in_place_index<1>, p, s, psi, t0, seed, o);
  }
};

QuantumTrajectory::QuantumTrajectory(const SystemParams& params, const PulseSequence& seq, const State& initial,
                                     double t0, std::uint64_t seed, const TrajectoryOptions& opts)
    : impl_(new Impl{params.space(), Impl::make(params, seq, initial, t0, seed, opts)}) {}

QuantumTrajectory::~QuantumTrajectory() = default;
QuantumTrajectory::QuantumTrajectory(QuantumTrajectory&&) noexcept = default;
QuantumTrajectory& QuantumTrajectory::operator=(QuantumTrajectory&&) noexcept = default;

void QuantumTrajectory::set_params(const SystemParams& params) {
  params.validate();
  if (!(params.space() == impl_->space)) {
    throw SpaceMismatchError("set_params: Fock truncation cannot change mid-trajectory");
  }
  std::visit([&](auto& e) { e.set_params(params); }, impl_->engine);
}

void QuantumTrajectory::run_until(double t_end, std::vector<Jump>& jumps) {
  std::visit([&](auto& e) { e.run_until(t_end, jumps); }, impl_->engine);
}

double QuantumTrajectory::time() const {
  return std::visit([](const auto& e) { return e.time(); }, impl_->engine);
}

long QuantumTrajectory::steps() const {
  return std::visit([](const auto& e) { return e.steps(); }, impl_->engine);
}

State QuantumTrajectory::state() const {
  return {impl_->space, std::visit([](const auto& e) { return e.state(); }, impl_->engine)};
}

TrajectoryRecord run_trajectory(const State& initial, const SystemParams& params, const PulseSequence& seq,
                                TimeSpan span, std::uint64_t seed, const TrajectoryOptions& opts) {
  if (span.length() <= 0) throw Error("run_trajectory: empty time span");
  QuantumTrajectory traj(params, seq, initial, span.start, seed, opts);
  std::vector<Jump> jumps;
  traj.run_until(span.end, jumps);
  return {seed, std::move(jumps), traj.state(), traj.steps()};
}

}  // namespace sps
