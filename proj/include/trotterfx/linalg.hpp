#pragma once

// Dense complex kernels shared by every other module. Operators are plain
// Eigen matrices; the invariants (Hermitian, unitary, normalized) are checked
// at the entry of each routine that relies on them.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>

#include "trotterfx/error.hpp"

namespace trotterfx {

using complex = std::complex<double>;
using DenseOperator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr complex I_unit{0.0, 1.0};

/// Numerical thresholds used across the library. The defaults sit roughly two
/// orders of magnitude above double-precision accumulation error for
/// dimensions up to 4096.
struct Tolerances {
  double hermitian = 1e-10;      // max |A - A^dagger| entry
  double unitary = 1e-10;        // max |U^dagger U - I| entry
  double normalization = 1e-10;  // | ||psi|| - 1 |
  double branch = 1e-6;          // distance of an eigenphase from +-pi
  double round_trip = 1e-8;      // exp(-i log(U)) reconstruction
  double degeneracy = 1e-8;      // minimum level spacing treated as distinct
  double pairing = 1e-6;         // overlap separation needed to match eigenpairs
  double gap_collapse = 1e-8;    // smallest admissible adiabatic gap
  double quadrant = 1e-8;        // |2 P_alpha - 1| floor for phase extraction
};

/// Eigenvalues ascending; eigenvectors are the matching orthonormal columns.
struct Spectrum {
  RealVector eigenvalues;
  DenseOperator eigenvectors;

  Eigen::Index dim() const { return eigenvalues.size(); }
  StateVector vector(Eigen::Index k) const { return eigenvectors.col(k); }
};

namespace detail {

inline std::string describe(double value) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << value;
  return out.str();
}

inline bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

inline void require_square(const DenseOperator& a, const char* where) {
  if (a.rows() != a.cols() || !is_power_of_two(a.rows())) {
    throw Error(ErrorKind::dimension_mismatch,
                std::string(where) + ": operator must be square with power-of-two dimension, got " +
                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

inline double max_abs(const DenseOperator& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermitian_defect(const DenseOperator& a) { return max_abs(a - a.adjoint()); }

inline double unitary_defect(const DenseOperator& u) {
  return max_abs(u.adjoint() * u - DenseOperator::Identity(u.rows(), u.cols()));
}

inline void require_hermitian(const DenseOperator& a, const Tolerances& tol, const char* where) {
  require_square(a, where);
  const double defect = hermitian_defect(a);
  if (defect > tol.hermitian) {
    throw Error(ErrorKind::not_hermitian,
                std::string(where) + ": max |A - A^dagger| = " + describe(defect));
  }
}

inline void require_unitary(const DenseOperator& u, const Tolerances& tol, const char* where) {
  require_square(u, where);
  const double defect = unitary_defect(u);
  if (defect > tol.unitary) {
    throw Error(ErrorKind::not_unitary,
                std::string(where) + ": max |U^dagger U - I| = " + describe(defect));
  }
}

inline void require_normalized(const StateVector& psi, const Tolerances& tol, const char* where) {
  const double deviation = std::abs(psi.norm() - 1.0);
  if (deviation > tol.normalization) {
    throw Error(ErrorKind::not_normalized,
                std::string(where) + ": | ||psi|| - 1 | = " + describe(deviation));
  }
}

// Largest-magnitude component of every column made real and positive. Ties
// within a relative 1e-9 go to the lowest index so rounding cannot flip the
// choice between symmetric components.
inline void fix_phases(DenseOperator& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    auto column = vectors.col(c);
    const double largest = column.cwiseAbs().maxCoeff();
    Eigen::Index pivot = 0;
    for (Eigen::Index r = 0; r < column.size(); ++r) {
      if (std::abs(column(r)) >= largest * (1.0 - 1e-9)) {
        pivot = r;
        break;
      }
    }
    const complex entry = column(pivot);
    if (std::abs(entry) > 0.0) column *= std::conj(entry) / std::abs(entry);
  }
}

// Principal argument mapped to (-pi, pi].
inline double principal_arg(complex z) {
  const double phase = std::arg(z);
  return phase <= -pi ? phase + 2.0 * pi : phase;
}

}  // namespace detail

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double angle) {
  double wrapped = std::remainder(angle, 2.0 * pi);
  if (wrapped <= -pi) wrapped += 2.0 * pi;
  return wrapped;
}

/// Hermitian eigendecomposition with a reproducible phase convention: in each
/// eigenvector the largest-magnitude entry is real and positive. Purely real
/// input is routed through the real symmetric solver.
inline Spectrum hermitian_eig(const DenseOperator& a, const Tolerances& tol = {}) {
  detail::require_hermitian(a, tol, "hermitian_eig");
  const DenseOperator sym = 0.5 * (a + a.adjoint());

  Spectrum out;
  if (sym.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym.real());
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::invalid_argument, "hermitian_eig: real eigensolver did not converge");
    }
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors().cast<complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(sym);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::invalid_argument, "hermitian_eig: eigensolver did not converge");
    }
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
  }
  detail::fix_phases(out.eigenvectors);
  return out;
}

/// V diag(exp(-i t E)) V^dagger from an existing decomposition.
inline DenseOperator evolve_unitary(const Spectrum& spectrum, double t) {
  const Eigen::VectorXcd phases =
      (spectrum.eigenvalues.cast<complex>() * complex(0.0, -t)).array().exp().matrix();
  return spectrum.eigenvectors * phases.asDiagonal() * spectrum.eigenvectors.adjoint();
}

/// exp(-i t A) for Hermitian A.
inline DenseOperator evolve_unitary(const DenseOperator& a, double t, const Tolerances& tol = {}) {
  if (t == 0.0) {
    detail::require_hermitian(a, tol, "evolve_unitary");
    return DenseOperator::Identity(a.rows(), a.cols());
  }
  return evolve_unitary(hermitian_eig(a, tol), t);
}

/// Hermitian generator of a unitary on the principal branch:
/// returns H with exp(-i dt H) = U and every dt * eigenvalue in (-pi, pi).
///
/// The unitary is brought to complex Schur form; for a normal matrix the
/// triangular factor is diagonal up to rounding and the Schur vectors form an
/// orthonormal eigenbasis even inside eigenvalue clusters.
inline DenseOperator unitary_log(const DenseOperator& u, double dt, const Tolerances& tol = {}) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "unitary_log: dt must be positive");
  detail::require_unitary(u, tol, "unitary_log");

  Eigen::ComplexSchur<DenseOperator> schur(u);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorKind::invalid_argument, "unitary_log: Schur decomposition did not converge");
  }
  const DenseOperator& q = schur.matrixU();
  const DenseOperator& tri = schur.matrixT();

  const Eigen::Index n = u.rows();
  RealVector energies(n);
  Eigen::VectorXcd unit_eigs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const complex lambda = tri(j, j);
    const double phase = std::arg(lambda);
    if (pi - std::abs(phase) < tol.branch) {
      throw Error(ErrorKind::branch_ambiguity,
                  "unitary_log: eigenphase " + detail::describe(phase) +
                      " within branch tolerance of +-pi; reduce dt");
    }
    energies(j) = -phase / dt;
    unit_eigs(j) = lambda / std::abs(lambda);
  }

  const DenseOperator rebuilt = q * unit_eigs.asDiagonal() * q.adjoint();
  const double residual = detail::max_abs(rebuilt - u);
  if (residual > tol.round_trip) {
    throw Error(ErrorKind::not_unitary,
                "unitary_log: eigenbasis reconstruction residual " + detail::describe(residual));
  }

  DenseOperator h = q * energies.cast<complex>().asDiagonal() * q.adjoint();
  return 0.5 * (h + h.adjoint());
}

/// Largest singular value. Hermitian input takes the eigenvalue route.
inline double operator_norm(const DenseOperator& a) {
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, detail::max_abs(a));
  if (a.rows() == a.cols() && detail::hermitian_defect(a) <= 1e-14 * scale) {
    const DenseOperator sym = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::BDCSVD<DenseOperator> svd(a);
  return svd.singularValues()(0);
}

inline complex state_overlap(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::dimension_mismatch,
                "state_overlap: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  return a.dot(b);  // conjugates a
}

inline DenseOperator commutator(const DenseOperator& a, const DenseOperator& b) {
  return a * b - b * a;
}

/// U^power by repeated squaring.
inline DenseOperator matrix_power(const DenseOperator& u, long long power) {
  if (power < 0) throw Error(ErrorKind::invalid_argument, "matrix_power: negative power");
  DenseOperator result = DenseOperator::Identity(u.rows(), u.cols());
  DenseOperator base = u;
  while (power > 0) {
    if (power & 1) result = result * base;
    power >>= 1;
    if (power > 0) base = base * base;
  }
  return result;
}

/// sqrt(1 - |<a|b>|^2) for unit vectors; the projector distance ||P_a - P_b||.
inline double projector_distance(const StateVector& a, const StateVector& b) {
  const double fidelity = std::norm(state_overlap(a, b));
  return std::sqrt(std::clamp(1.0 - fidelity, 0.0, 1.0));
}

/// Computational basis state |index>.
inline StateVector basis_state(Eigen::Index dim, Eigen::Index index) {
  StateVector psi = StateVector::Zero(dim);
  psi(index) = 1.0;
  return psi;
}

}  // namespace trotterfx
