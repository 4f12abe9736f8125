#pragma once

// Digital adiabatic simulation along H(s) = (1-s) H_i + s H_f.
//
// A_d = U_M ... U_1 with U_a = exp(-i H(a/M) T/M) uses exact exponentials of
// the interpolated Hamiltonian; A_t replaces each factor by the two-layer step
// U^t(s) = exp(-i dt (1-s) H_i) exp(-i dt s H_f), with H_f acting first.
// Sweeps propagate one state column per schedule time so that every
// eigendecomposition along the path is shared by all T values.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "trotterfx/bounds.hpp"
#include "trotterfx/fit.hpp"
#include "trotterfx/hamiltonian.hpp"
#include "trotterfx/linalg.hpp"
#include "trotterfx/parallel.hpp"

namespace trotterfx {

struct DASRecord {
  double T = 0.0;
  long long M = 0;
  double eps_adb_d = 0.0;
  double eps_tro = 0.0;
  double eps_tot_d = 0.0;
  double eps_dis_proxy = 0.0;
};

struct SweepResult {
  std::vector<DASRecord> records;
  double turning_point_T = 0.0;
  std::size_t turning_index = 0;
  double slope_adb = 0.0;
  double slope_r2 = 0.0;
};

struct DASOptions {
  long long M_ref = 0;                  // 0 selects 4M
  std::size_t tracking_points = 64;     // grid used to continue psi_i into psi_f
  Tolerances tol{};
};

namespace detail {

// Left multiplication by a fixed matrix; real matrices go through two real
// products instead of one complex one.
class BasisChange {
 public:
  explicit BasisChange(const DenseOperator& m) : full_(m) {
    real_ = m.imag().cwiseAbs().maxCoeff() == 0.0;
    if (real_) re_ = m.real();
  }

  DenseOperator apply(const DenseOperator& s) const {
    if (!real_) return full_ * s;
    DenseOperator out(re_.rows(), s.cols());
    out.real() = re_ * s.real();
    out.imag() = re_ * s.imag();
    return out;
  }

  DenseOperator apply_adjoint(const DenseOperator& s) const {
    if (!real_) return full_.adjoint() * s;
    DenseOperator out(re_.cols(), s.cols());
    out.real() = re_.transpose() * s.real();
    out.imag() = re_.transpose() * s.imag();
    return out;
  }

 private:
  DenseOperator full_;
  Eigen::MatrixXd re_;
  bool real_ = false;
};

// S(i, j) *= exp(-i E_i scale_j)
inline void apply_phases(DenseOperator& s, const RealVector& energies, const RealVector& scale) {
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const double angle = -energies(i) * scale(j);
      s(i, j) *= complex(std::cos(angle), std::sin(angle));
    }
  }
}

inline void require_schedule(double T, long long M, const char* where) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::invalid_argument, std::string(where) + ": T must be positive");
  if (M < 1) throw Error(ErrorKind::invalid_argument, std::string(where) + ": M must be >= 1");
}

inline void require_pair(const DenseOperator& hi, const DenseOperator& hf, const Tolerances& tol, const char* where) {
  require_hermitian(hi, tol, where);
  require_hermitian(hf, tol, where);
  if (hi.rows() != hf.rows()) throw Error(ErrorKind::dimension_mismatch, std::string(where) + ": H_i and H_f differ in size");
}

/// Applies A_d column by column; column j uses step T_j / M.
inline DenseOperator propagate_discretized(const DenseOperator& hi, const DenseOperator& hf, long long M,
                                           const RealVector& steps, DenseOperator states, const Tolerances& tol) {
  // eigendecompositions are independent, so they are computed in blocks
  const long long block = 16;
  std::vector<Spectrum> spectra(static_cast<std::size_t>(std::min<long long>(block, M)));
  for (long long start = 1; start <= M; start += block) {
    const long long count = std::min(block, M - start + 1);
    parallel_chunks(static_cast<std::size_t>(count), 1, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double s = static_cast<double>(start + static_cast<long long>(i)) / static_cast<double>(M);
        spectra[i] = hermitian_eig((1.0 - s) * hi + s * hf, tol);
      }
    });
    for (long long i = 0; i < count; ++i) {
      const Spectrum& spec = spectra[static_cast<std::size_t>(i)];
      const BasisChange basis(spec.eigenvectors);
      DenseOperator coeffs = basis.apply_adjoint(states);
      apply_phases(coeffs, spec.eigenvalues, steps);
      states = basis.apply(coeffs);
    }
  }
  return states;
}

/// Applies A_t column by column; column j uses step T_j / M. The state is
/// held in the H_f eigenbasis between factors.
inline DenseOperator propagate_trotterized(const DenseOperator& hi, const DenseOperator& hf, long long M,
                                           const RealVector& steps, const DenseOperator& states,
                                           const Tolerances& tol) {
  const Spectrum si = hermitian_eig(hi, tol);
  const Spectrum sf = hermitian_eig(hf, tol);
  const BasisChange to_f(sf.eigenvectors);
  const BasisChange f_to_i(si.eigenvectors.adjoint() * sf.eigenvectors);

  DenseOperator c = to_f.apply_adjoint(states);
  for (long long a = 1; a <= M; ++a) {
    const double s = static_cast<double>(a) / static_cast<double>(M);
    apply_phases(c, sf.eigenvalues, s * steps);
    DenseOperator d = f_to_i.apply(c);
    apply_phases(d, si.eigenvalues, (1.0 - s) * steps);
    c = f_to_i.apply_adjoint(d);
  }
  return to_f.apply(c);
}

}  // namespace detail

inline DenseOperator discretized_evolution(const DenseOperator& hi, const DenseOperator& hf, double T, long long M,
                                           const Tolerances& tol = {}) {
  detail::require_schedule(T, M, "discretized_evolution");
  detail::require_pair(hi, hf, tol, "discretized_evolution");
  const RealVector steps = RealVector::Constant(hi.rows(), T / static_cast<double>(M));
  return detail::propagate_discretized(hi, hf, M, steps, DenseOperator::Identity(hi.rows(), hi.cols()), tol);
}

inline DenseOperator discretized_evolution(const LayeredHamiltonian& hi, const LayeredHamiltonian& hf, double T,
                                           long long M, const Tolerances& tol = {}) {
  return discretized_evolution(dense_total(hi), dense_total(hf), T, M, tol);
}

inline DenseOperator trotterized_evolution(const DenseOperator& hi, const DenseOperator& hf, double T, long long M,
                                           const Tolerances& tol = {}) {
  detail::require_schedule(T, M, "trotterized_evolution");
  detail::require_pair(hi, hf, tol, "trotterized_evolution");
  const RealVector steps = RealVector::Constant(hi.rows(), T / static_cast<double>(M));
  return detail::propagate_trotterized(hi, hf, M, steps, DenseOperator::Identity(hi.rows(), hi.cols()), tol);
}

inline DenseOperator trotterized_evolution(const LayeredHamiltonian& hi, const LayeredHamiltonian& hf, double T,
                                           long long M, const Tolerances& tol = {}) {
  return trotterized_evolution(dense_total(hi), dense_total(hf), T, M, tol);
}

/// i log(U^t(s)) / dtbar on the principal branch.
inline DenseOperator effective_h_of_s(const DenseOperator& hi, const DenseOperator& hf, double s, double dtbar,
                                      const Tolerances& tol = {}) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::invalid_argument, "effective_h_of_s: s must lie in [0, 1]");
  if (!(dtbar > 0.0)) throw Error(ErrorKind::invalid_argument, "effective_h_of_s: dtbar must be positive");
  detail::require_pair(hi, hf, tol, "effective_h_of_s");
  const DenseOperator step = evolve_unitary(hi, dtbar * (1.0 - s), tol) * evolve_unitary(hf, dtbar * s, tol);
  return unitary_log(step, dtbar, tol);
}

inline DenseOperator effective_h_of_s(const LayeredHamiltonian& hi, const LayeredHamiltonian& hf, double s,
                                      double dtbar, const Tolerances& tol = {}) {
  return effective_h_of_s(dense_total(hi), dense_total(hf), s, dtbar, tol);
}

/// Path s -> H_eff(s) at fixed step, with the derivative norms replaced by
/// the constant derivative bounds at t = dtbar.
inline AdiabaticPath effective_path(const DenseOperator& hi, const DenseOperator& hf, double dtbar,
                                    const InteractionConstants& c, const Tolerances& tol = {}) {
  const DerivativeBounds db = appF_derivative_bounds(c, dtbar);
  return {[hi, hf, dtbar, tol](double s) { return effective_h_of_s(hi, hf, s, dtbar, tol); },
          [d1 = db.d1](double) { return d1; }, [d2 = db.d2](double) { return d2; }};
}

/// Smallest gap of the continued eigenstate k along both H(s) and H_eff(s).
inline double das_gap(const DenseOperator& hi, const DenseOperator& hf, double dtbar, Eigen::Index k,
                      std::size_t grid_points, const Tolerances& tol = {}) {
  const std::vector<double> grid = uniform_grid(grid_points);
  const AdiabaticPath exact = linear_path(hi, hf);
  double gap = track_eigenstate(exact.hamiltonian, k, grid, tol).min_gap();
  const auto heff = [&](double s) { return effective_h_of_s(hi, hf, s, dtbar, tol); };
  gap = std::min(gap, track_eigenstate(heff, k, grid, tol).min_gap());
  return gap;
}

namespace detail {

inline std::vector<DASRecord> das_records(const DenseOperator& hi, const DenseOperator& hf, long long M,
                                          std::span<const double> T_values, Eigen::Index k, const DASOptions& opt) {
  require_pair(hi, hf, opt.tol, "das");
  if (T_values.empty()) throw Error(ErrorKind::invalid_argument, "das: no schedule times");
  for (std::size_t j = 0; j < T_values.size(); ++j) {
    require_schedule(T_values[j], M, "das");
    if (j > 0 && !(T_values[j] > T_values[j - 1])) {
      throw Error(ErrorKind::invalid_argument, "das: schedule times must be strictly increasing");
    }
  }
  const long long M_ref = opt.M_ref > 0 ? opt.M_ref : 4 * M;

  const std::vector<double> grid = uniform_grid(std::max<std::size_t>(opt.tracking_points, 2));
  const AdiabaticPath path = linear_path(hi, hf);
  const EigenTrack track = track_eigenstate(path.hamiltonian, k, grid, opt.tol);
  const StateVector psi_i = hermitian_eig(hi, opt.tol).vector(k);
  const StateVector& psi_f = track.final_state;

  const Eigen::Index n = static_cast<Eigen::Index>(T_values.size());
  RealVector steps(n), steps_ref(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    steps(j) = T_values[static_cast<std::size_t>(j)] / static_cast<double>(M);
    steps_ref(j) = T_values[static_cast<std::size_t>(j)] / static_cast<double>(M_ref);
  }
  const DenseOperator start = psi_i.replicate(1, n);
  const DenseOperator disc = propagate_discretized(hi, hf, M, steps, start, opt.tol);
  const DenseOperator trot = propagate_trotterized(hi, hf, M, steps, start, opt.tol);
  const DenseOperator disc_ref = propagate_discretized(hi, hf, M_ref, steps_ref, start, opt.tol);

  std::vector<DASRecord> out;
  out.reserve(T_values.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    DASRecord r;
    r.T = T_values[static_cast<std::size_t>(j)];
    r.M = M;
    r.eps_adb_d = projector_distance(psi_f, disc.col(j));
    r.eps_tro = projector_distance(disc.col(j), trot.col(j));
    r.eps_tot_d = projector_distance(psi_f, trot.col(j));
    r.eps_dis_proxy = std::abs(r.eps_adb_d - projector_distance(psi_f, disc_ref.col(j)));
    out.push_back(r);
  }
  return out;
}

}  // namespace detail

inline DASRecord das_error_suite(const DenseOperator& hi, const DenseOperator& hf, double T, long long M,
                                 Eigen::Index k = 0, const DASOptions& opt = {}) {
  const double times[] = {T};
  return detail::das_records(hi, hf, M, times, k, opt).front();
}

inline DASRecord das_error_suite(const LayeredHamiltonian& hi, const LayeredHamiltonian& hf, double T, long long M,
                                 Eigen::Index k = 0, const DASOptions& opt = {}) {
  return das_error_suite(dense_total(hi), dense_total(hf), T, M, k, opt);
}

/// One record per schedule time; the turning point is the record with the
/// smallest eps_tot_d and the eps_adb_d slope is fitted up to and including it.
inline SweepResult das_sweep(const DenseOperator& hi, const DenseOperator& hf, long long M,
                             std::span<const double> T_values, Eigen::Index k = 0, const DASOptions& opt = {}) {
  SweepResult out;
  out.records = detail::das_records(hi, hf, M, T_values, k, opt);
  const auto best = std::min_element(out.records.begin(), out.records.end(),
                                     [](const DASRecord& a, const DASRecord& b) { return a.eps_tot_d < b.eps_tot_d; });
  out.turning_index = static_cast<std::size_t>(best - out.records.begin());
  out.turning_point_T = best->T;
  if (out.turning_index + 1 < 3) {
    throw Error(ErrorKind::invalid_argument, "das_sweep: fewer than 3 points before the turning point for the slope fit");
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i <= out.turning_index; ++i) {
    xs.push_back(out.records[i].T);
    ys.push_back(out.records[i].eps_adb_d);
  }
  const ScalingFit fit = scaling_fit(xs, ys);
  out.slope_adb = fit.exponent;
  out.slope_r2 = fit.r2;
  return out;
}

inline SweepResult das_sweep(const LayeredHamiltonian& hi, const LayeredHamiltonian& hf, long long M,
                             std::span<const double> T_values, Eigen::Index k = 0, const DASOptions& opt = {}) {
  return das_sweep(dense_total(hi), dense_total(hf), M, T_values, k, opt);
}

/// count evenly spaced values from lo to hi inclusive.
inline std::vector<double> even_grid(std::size_t count, double lo, double hi) {
  if (count < 2 || !(hi > lo)) throw Error(ErrorKind::invalid_argument, "even_grid: need count >= 2 and hi > lo");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

}  // namespace trotterfx
