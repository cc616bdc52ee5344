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

// Dense linear algebra on the atom (x) cavity product space.
//
// Basis ordering is atom-major: |a, n> lives at index a * fock_dim + n with
// atom labels ordered u = 0, e = 1, g = 2 and Fock levels 0..n_max. Every
// other module relies on this layout.

#pragma once

#include <complex>
#include <string>

#include <Eigen/Dense>

#include "sps/errors.hpp"

namespace sps {

enum class Atom : int { u = 0, e = 1, g = 2 };

inline const char* to_string(Atom a) {
  switch (a) {
    case Atom::u: return "u";
    case Atom::e: return "e";
    case Atom::g: return "g";
  }
  return "?";
}

class HilbertSpace {
 public:
  static constexpr int kAtomDim = 3;

  explicit HilbertSpace(int n_max = 2) : n_max_(n_max) {
    if (n_max < 1) throw TruncationError("HilbertSpace: n_max must be >= 1");
  }

  int atom_dim() const { return kAtomDim; }
  int fock_dim() const { return n_max_ + 1; }
  int n_max() const { return n_max_; }
  Eigen::Index dim() const { return Eigen::Index(kAtomDim) * fock_dim(); }

  Eigen::Index index(Atom a, int n) const {
    if (n < 0 || n >= fock_dim()) {
      throw TruncationError("photon number " + std::to_string(n) +
                            " outside truncated Fock space (n_max = " +
                            std::to_string(n_max_) + ")");
    }
    return Eigen::Index(static_cast<int>(a)) * fock_dim() + n;
  }

  Atom atom_of(Eigen::Index i) const { return static_cast<Atom>(i / fock_dim()); }
  int photons_of(Eigen::Index i) const { return static_cast<int>(i % fock_dim()); }

  friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;

 private:
  int n_max_;
};

template <typename Real>
using CVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

enum class StateKind { wavefunction, density_matrix };

/// A wavefunction (dim x 1) or density matrix (dim x dim) on a HilbertSpace.
template <typename Real = double>
class BasicState {
 public:
  using Scalar = std::complex<Real>;
  using Matrix = CMatrix<Real>;

  BasicState(HilbertSpace space, CVector<Real> psi)
      : space_(space), kind_(StateKind::wavefunction), data_(std::move(psi)) {
    if (data_.rows() != space_.dim() || data_.cols() != 1) {
      throw SpaceMismatchError("wavefunction length does not match space");
    }
  }

  BasicState(HilbertSpace space, Matrix rho, StateKind kind)
      : space_(space), kind_(kind), data_(std::move(rho)) {
    const auto cols = kind_ == StateKind::wavefunction ? 1 : space_.dim();
    if (data_.rows() != space_.dim() || data_.cols() != cols) {
      throw SpaceMismatchError("state data does not match space");
    }
  }

  const HilbertSpace& space() const { return space_; }
  StateKind kind() const { return kind_; }
  bool is_wavefunction() const { return kind_ == StateKind::wavefunction; }
  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  Eigen::Ref<const CVector<Real>> ket() const {
    if (!is_wavefunction()) throw InvalidStateError("state is not a wavefunction");
    return data_.col(0);
  }

  /// |psi><psi| for wavefunctions, the stored matrix otherwise.
  Matrix density() const {
    if (is_wavefunction()) return data_ * data_.adjoint();
    return data_;
  }

  BasicState to_density() const { return {space_, density(), StateKind::density_matrix}; }

  Scalar amplitude(Atom a, int n) const { return ket()(space_.index(a, n)); }

  /// Occupation probability of basis state |a, n>.
  Real population(Eigen::Index i) const {
    if (is_wavefunction()) return std::norm(data_(i, 0));
    return data_(i, i).real();
  }
  Real population(Atom a, int n) const { return population(space_.index(a, n)); }

 private:
  HilbertSpace space_;
  StateKind kind_;
  Matrix data_;
};

template <typename Real = double>
class BasicOperator {
 public:
  using Scalar = std::complex<Real>;
  using Matrix = CMatrix<Real>;

  explicit BasicOperator(HilbertSpace space)
      : space_(space), data_(Matrix::Zero(space.dim(), space.dim())) {}

  BasicOperator(HilbertSpace space, Matrix m) : space_(space), data_(std::move(m)) {
    if (data_.rows() != space_.dim() || data_.cols() != space_.dim()) {
      throw SpaceMismatchError("operator dimensions do not match space");
    }
  }

  static BasicOperator identity(HilbertSpace space) {
    return {space, Matrix::Identity(space.dim(), space.dim())};
  }

  const HilbertSpace& space() const { return space_; }
  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  BasicOperator& operator+=(const BasicOperator& o) {
    check(o);
    data_ += o.data_;
    return *this;
  }
  BasicOperator& operator-=(const BasicOperator& o) {
    check(o);
    data_ -= o.data_;
    return *this;
  }
  BasicOperator& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend BasicOperator operator+(BasicOperator a, const BasicOperator& b) { return a += b; }
  friend BasicOperator operator-(BasicOperator a, const BasicOperator& b) { return a -= b; }
  friend BasicOperator operator*(Scalar s, BasicOperator a) { return a *= s; }
  friend BasicOperator operator*(BasicOperator a, Scalar s) { return a *= s; }
  friend BasicOperator operator*(const BasicOperator& a, const BasicOperator& b) {
    a.check(b);
    return {a.space_, a.data_ * b.data_};
  }

  void check(const BasicOperator& o) const {
    if (!(space_ == o.space_)) throw SpaceMismatchError("operator spaces differ");
  }

 private:
  HilbertSpace space_;
  Matrix data_;
};

using State = BasicState<double>;
using Operator = BasicOperator<double>;

template <typename Real = double>
BasicState<Real> basis_state(const HilbertSpace& space, Atom a, int n) {
  CVector<Real> psi = CVector<Real>::Zero(space.dim());
  psi(space.index(a, n)) = Real(1);
  return {space, std::move(psi)};
}

/// Cavity annihilation operator a (identity on the atom).
template <typename Real = double>
BasicOperator<Real> annihilation(const HilbertSpace& space) {
  BasicOperator<Real> op(space);
  for (int a = 0; a < space.atom_dim(); ++a) {
    for (int n = 1; n < space.fock_dim(); ++n) {
      const auto atom = static_cast<Atom>(a);
      op.data()(space.index(atom, n - 1), space.index(atom, n)) = std::sqrt(Real(n));
    }
  }
  return op;
}

/// |to><from| (identity on the cavity).
template <typename Real = double>
BasicOperator<Real> atomic_transition(const HilbertSpace& space, Atom from, Atom to) {
  BasicOperator<Real> op(space);
  for (int n = 0; n < space.fock_dim(); ++n) {
    op.data()(space.index(to, n), space.index(from, n)) = Real(1);
  }
  return op;
}

template <typename Real = double>
BasicOperator<Real> projector(const HilbertSpace& space, Atom a) {
  return atomic_transition<Real>(space, a, a);
}

template <typename Real>
BasicOperator<Real> dagger(const BasicOperator<Real>& op) {
  return {op.space(), op.data().adjoint()};
}

template <typename Real>
BasicOperator<Real> commutator(const BasicOperator<Real>& x, const BasicOperator<Real>& y) {
  return x * y - y * x;
}

/// op|psi> for wavefunctions (unnormalized), op rho op^dagger for density matrices.
template <typename Real>
BasicState<Real> apply(const BasicOperator<Real>& op, const BasicState<Real>& s) {
  if (!(op.space() == s.space())) throw SpaceMismatchError("apply: operator and state spaces differ");
  if (s.is_wavefunction()) return {s.space(), CVector<Real>(op.data() * s.data())};
  return {s.space(), op.data() * s.data() * op.data().adjoint(), StateKind::density_matrix};
}

template <typename Real>
std::complex<Real> expectation(const BasicOperator<Real>& op, const BasicState<Real>& s) {
  if (!(op.space() == s.space())) throw SpaceMismatchError("expectation: operator and state spaces differ");
  if (s.is_wavefunction()) return s.ket().dot(op.data() * s.ket());
  return (op.data() * s.data()).trace();
}

template <typename Real>
std::complex<Real> overlap(const BasicState<Real>& bra, const BasicState<Real>& ket) {
  if (!(bra.space() == ket.space())) throw SpaceMismatchError("overlap: spaces differ");
  return bra.ket().dot(ket.ket());
}

template <typename Real>
Real norm(const BasicState<Real>& s) {
  return s.is_wavefunction() ? s.data().norm() : s.data().trace().real();
}

struct StateDiagnostics {
  double trace_error = 0;        // |tr rho - 1| or |<psi|psi> - 1|
  double hermiticity_error = 0;  // max |rho - rho^dagger|
  double min_eigenvalue = 1;
};

template <typename Real>
StateDiagnostics diagnose(const BasicState<Real>& s) {
  StateDiagnostics d;
  if (s.is_wavefunction()) {
    d.trace_error = std::abs(double(s.data().squaredNorm()) - 1.0);
    d.min_eigenvalue = 0;
    return d;
  }
  const auto& rho = s.data();
  d.trace_error = std::abs(double(rho.trace().real()) - 1.0);
  d.hermiticity_error = double((rho - rho.adjoint()).cwiseAbs().maxCoeff());
  const CMatrix<Real> herm = (rho + rho.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(herm, Eigen::EigenvaluesOnly);
  d.min_eigenvalue = double(es.eigenvalues().minCoeff());
  return d;
}

/// Throws InvalidStateError unless the state meets the documented invariants.
template <typename Real>
void validate(const BasicState<Real>& s) {
  const auto d = diagnose(s);
  if (s.is_wavefunction()) {
    if (std::abs(double(s.data().norm()) - 1.0) > 1e-9) {
      throw InvalidStateError("wavefunction is not normalized");
    }
    return;
  }
  if (d.hermiticity_error > 1e-10) throw InvalidStateError("density matrix is not Hermitian");
  if (d.trace_error > 1e-8) throw InvalidStateError("density matrix trace differs from 1");
  if (d.min_eigenvalue < -1e-8) throw InvalidStateError("density matrix has a negative eigenvalue");
}

}  // namespace sps
