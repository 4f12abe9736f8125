#pragma once

// First-order product formula and its effective Hamiltonian
// H_eff = i log(T(dt)) / dt, together with the state-level error
// decomposition (fidelity error f, phase error theta) and spectral
// comparisons between H and H_eff.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "trotterfx/hamiltonian.hpp"
#include "trotterfx/linalg.hpp"

namespace trotterfx {

/// exp(-i H_last dt) ... exp(-i H_0 dt), layers in stored (application) order.
inline DenseOperator trotter_step(const DenseModel& model, double dt, const Tolerances& tol = {}) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "trotter_step: dt must be positive");
  DenseOperator step = DenseOperator::Identity(model.total.rows(), model.total.cols());
  for (const auto& layer : model.per_layer) step = evolve_unitary(layer, dt, tol) * step;
  return step;
}

inline DenseOperator trotter_step(const LayeredHamiltonian& h, double dt, const Tolerances& tol = {}) {
  return trotter_step(build_dense(h), dt, tol);
}

/// Leading dt-independent correction V with H_eff = H + dt V + O(dt^2):
/// V = (i/2) sum_{m<n} [H_m, H_n], m applied before n.
inline DenseOperator leading_correction(const DenseModel& model) {
  const auto& layers = model.per_layer;
  DenseOperator v = DenseOperator::Zero(model.total.rows(), model.total.cols());
  for (std::size_t n = 0; n < layers.size(); ++n) {
    for (std::size_t m = 0; m < n; ++m) v += commutator(layers[m], layers[n]);
  }
  return complex(0.0, 0.5) * v;
}

inline DenseOperator leading_correction(const LayeredHamiltonian& h) { return leading_correction(build_dense(h)); }

inline DenseOperator effective_hamiltonian(const DenseModel& model, double dt, const Tolerances& tol = {}) {
  return unitary_log(trotter_step(model, dt, tol), dt, tol);
}

inline DenseOperator effective_hamiltonian(const LayeredHamiltonian& h, double dt, const Tolerances& tol = {}) {
  return effective_hamiltonian(build_dense(h), dt, tol);
}

// ---------------------------------------------------------------------------
// Error decomposition

struct TrotterErrorReport {
  double f = 0.0;       // 1 - |<psi|U(t)^dagger T^L|psi>|^2
  double theta = 0.0;   // Arg <psi|U(t)^dagger T^L|psi>, in (-pi, pi]
  double delta = 0.0;   // ||T^L - U(t)||
  double euclid = 0.0;  // ||(T^L - U(t)) psi||_2
  long long L = 0;
  double dt = 0.0;
  double t = 0.0;
  /// Set when delta > 1/sqrt(2); below that |theta| <= pi/4 and theta cannot
  /// have wound past the branch cut. theta is never unwrapped.
  bool phase_may_wrap = false;
};

namespace detail {

inline TrotterErrorReport decompose(const DenseOperator& step, const Spectrum& h_spectrum, double dt, long long L,
                                    const StateVector& psi) {
  TrotterErrorReport r;
  r.L = L;
  r.dt = dt;
  r.t = static_cast<double>(L) * dt;
  if (L == 0) return r;

  const DenseOperator trotterized = matrix_power(step, L);
  const DenseOperator exact = evolve_unitary(h_spectrum, r.t);
  const DenseOperator difference = trotterized - exact;
  const StateVector evolved = trotterized * psi;
  const StateVector reference = exact * psi;
  const complex amplitude = state_overlap(reference, evolved);

  r.f = std::clamp(1.0 - std::norm(amplitude), 0.0, 1.0);
  r.theta = std::abs(amplitude) > 0.0 ? principal_arg(amplitude) : 0.0;
  r.delta = operator_norm(difference);
  r.euclid = (evolved - reference).norm();
  r.phase_may_wrap = r.delta > 1.0 / std::sqrt(2.0);
  return r;
}

}  // namespace detail

inline TrotterErrorReport error_decomposition(const LayeredHamiltonian& h, double dt, long long L,
                                              const StateVector& psi, const Tolerances& tol = {}) {
  if (L < 0) throw Error(ErrorKind::invalid_argument, "error_decomposition: L must be >= 0");
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "error_decomposition: dt must be positive");
  if (psi.size() != h.dim()) throw Error(ErrorKind::dimension_mismatch, "error_decomposition: state dimension");
  detail::require_normalized(psi, tol, "error_decomposition");
  const DenseModel model = build_dense(h);
  return detail::decompose(trotter_step(model, dt, tol), hermitian_eig(model.total, tol), dt, L, psi);
}

/// One report per entry of `Ls`, sharing the step operator and spectrum.
inline std::vector<TrotterErrorReport> error_decomposition_series(const LayeredHamiltonian& h, double dt,
                                                                  const std::vector<long long>& Ls,
                                                                  const StateVector& psi,
                                                                  const Tolerances& tol = {}) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "error_decomposition: dt must be positive");
  if (psi.size() != h.dim()) throw Error(ErrorKind::dimension_mismatch, "error_decomposition: state dimension");
  detail::require_normalized(psi, tol, "error_decomposition");
  const DenseModel model = build_dense(h);
  const DenseOperator step = trotter_step(model, dt, tol);
  const Spectrum spectrum = hermitian_eig(model.total, tol);
  std::vector<TrotterErrorReport> out;
  out.reserve(Ls.size());
  for (long long L : Ls) {
    if (L < 0) throw Error(ErrorKind::invalid_argument, "error_decomposition: L must be >= 0");
    out.push_back(detail::decompose(step, spectrum, dt, L, psi));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral comparison

struct EigenPair {
  double energy = 0.0;            // E_k
  double effective_energy = 0.0;  // matched eigenvalue of the perturbed operator
  double overlap = 0.0;           // |<psi_k|psi~_j>|
  double gap = 0.0;               // min distance of E_k to its neighbours
};

struct SpectralComparison {
  std::vector<EigenPair> pairs;
  std::vector<Eigen::Index> matching;  // H eigen-index -> perturbed eigen-index
  Spectrum reference;
  Spectrum perturbed;

  bool identity_matching() const {
    for (std::size_t k = 0; k < matching.size(); ++k) {
      if (matching[k] != static_cast<Eigen::Index>(k)) return false;
    }
    return true;
  }

  double max_shift() const {
    double shift = 0.0;
    for (const auto& p : pairs) shift = std::max(shift, std::abs(p.effective_energy - p.energy));
    return shift;
  }
};

namespace detail {

inline RealVector level_gaps(const RealVector& energies) {
  const Eigen::Index n = energies.size();
  RealVector gaps = RealVector::Constant(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k > 0) gaps(k) = std::min(gaps(k), energies(k) - energies(k - 1));
    if (k + 1 < n) gaps(k) = std::min(gaps(k), energies(k + 1) - energies(k));
  }
  return gaps;
}

inline void require_nondegenerate(const RealVector& energies, const Tolerances& tol, const char* where) {
  for (Eigen::Index k = 1; k < energies.size(); ++k) {
    if (energies(k) - energies(k - 1) < tol.degeneracy) {
      throw Error(ErrorKind::degenerate_spectrum,
                  std::string(where) + ": levels " + std::to_string(k - 1) + " and " + std::to_string(k) +
                      " are separated by " + describe(energies(k) - energies(k - 1)));
    }
  }
}

// Greedy bijection on squared overlaps, largest first. A choice is rejected
// as ambiguous when a still-free competitor in the same row or column comes
// within tol.pairing of it.
inline std::vector<Eigen::Index> match_by_overlap(const Eigen::MatrixXd& weights, const Tolerances& tol) {
  const Eigen::Index n = weights.rows();
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> entries;
  entries.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) entries.emplace_back(weights(k, j), k, j);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });

  std::vector<Eigen::Index> matching(static_cast<std::size_t>(n), -1);
  std::vector<bool> column_used(static_cast<std::size_t>(n), false);
  Eigen::Index assigned = 0;
  for (const auto& [w, k, j] : entries) {
    if (assigned == n) break;
    if (matching[static_cast<std::size_t>(k)] >= 0 || column_used[static_cast<std::size_t>(j)]) continue;
    for (Eigen::Index other = 0; other < n; ++other) {
      const bool row_rival = other != j && !column_used[static_cast<std::size_t>(other)] && weights(k, other) > w - tol.pairing;
      const bool col_rival = other != k && matching[static_cast<std::size_t>(other)] < 0 && weights(other, j) > w - tol.pairing;
      if (row_rival || col_rival) {
        throw Error(ErrorKind::pairing_ambiguity,
                    "eigenvector " + std::to_string(k) + " has two candidate partners with overlap " + describe(w));
      }
    }
    matching[static_cast<std::size_t>(k)] = j;
    column_used[static_cast<std::size_t>(j)] = true;
    ++assigned;
  }
  return matching;
}

}  // namespace detail

/// Pairs each eigenvector of H with the eigenvector of H_tilde it overlaps
/// most, and reports energy shifts, overlaps and level gaps of H.
inline SpectralComparison spectral_comparison(const DenseOperator& h, const DenseOperator& h_tilde,
                                              const Tolerances& tol = {}) {
  if (h.rows() != h_tilde.rows() || h.cols() != h_tilde.cols()) {
    throw Error(ErrorKind::dimension_mismatch, "spectral_comparison: operators differ in shape");
  }
  SpectralComparison out;
  out.reference = hermitian_eig(h, tol);
  out.perturbed = hermitian_eig(h_tilde, tol);
  detail::require_nondegenerate(out.reference.eigenvalues, tol, "spectral_comparison");

  const Eigen::MatrixXd weights =
      (out.reference.eigenvectors.adjoint() * out.perturbed.eigenvectors).cwiseAbs2();
  out.matching = detail::match_by_overlap(weights, tol);

  const RealVector gaps = detail::level_gaps(out.reference.eigenvalues);
  out.pairs.reserve(out.matching.size());
  for (std::size_t k = 0; k < out.matching.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    const Eigen::Index j = out.matching[k];
    out.pairs.push_back({out.reference.eigenvalues(idx), out.perturbed.eigenvalues(j),
                         std::sqrt(std::min(1.0, weights(idx, j))), gaps(idx)});
  }
  return out;
}

/// max_k |<psi_k|V|psi_k>| for the leading correction V in the eigenbasis of
/// H. Values at rounding level certify that the first-order energy shift
/// vanishes for every level.
inline double off_diagonal_residual(const LayeredHamiltonian& h, const Tolerances& tol = {}) {
  const DenseModel model = build_dense(h);
  const Spectrum spectrum = hermitian_eig(model.total, tol);
  detail::require_nondegenerate(spectrum.eigenvalues, tol, "off_diagonal_residual");
  const DenseOperator v = leading_correction(model);
  const DenseOperator in_basis = spectrum.eigenvectors.adjoint() * v * spectrum.eigenvectors;
  return in_basis.diagonal().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Leakage

struct LeakageReport {
  long long L = 0;
  double leakage = 0.0;              // 1 - Tr(P T^L rho T^-L)
  double projector_distance = 0.0;   // ||P - P~||
  double ceiling = 0.0;              // 4 ||P - P~||^2
  double subspace_gap = 0.0;         // gap between the subspace and the rest of spec(H)
};

/// Leakage out of the span of the H eigenvectors listed in `subspace`
/// under T(dt)^L, for each L in `Ls`. The initial state is the maximally mixed
/// state on the subspace unless a pure state inside it is supplied.
inline std::vector<LeakageReport> leakage_series(const LayeredHamiltonian& h, double dt,
                                                 const std::vector<long long>& Ls,
                                                 const std::vector<Eigen::Index>& subspace,
                                                 const std::optional<StateVector>& initial = std::nullopt,
                                                 const Tolerances& tol = {}) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "leakage_rate: dt must be positive");
  if (subspace.empty()) throw Error(ErrorKind::invalid_argument, "leakage_rate: empty subspace");
  const DenseModel model = build_dense(h);
  const Eigen::Index dim = model.total.rows();
  std::set<Eigen::Index> members(subspace.begin(), subspace.end());
  if (members.size() != subspace.size() || *members.begin() < 0 || *members.rbegin() >= dim) {
    throw Error(ErrorKind::invalid_argument, "leakage_rate: subspace indices must be distinct and in range");
  }

  const DenseOperator step = trotter_step(model, dt, tol);
  const bool full_space = static_cast<Eigen::Index>(members.size()) == dim;

  Spectrum spectrum;
  double distance = 0.0;
  if (full_space) {
    spectrum = hermitian_eig(model.total, tol);
  } else {
    const SpectralComparison cmp = spectral_comparison(model.total, unitary_log(step, dt, tol), tol);
    spectrum = cmp.reference;
    DenseOperator p = DenseOperator::Zero(dim, dim);
    DenseOperator p_tilde = DenseOperator::Zero(dim, dim);
    for (Eigen::Index k : members) {
      const StateVector v = spectrum.vector(k);
      const StateVector w = cmp.perturbed.vector(cmp.matching[static_cast<std::size_t>(k)]);
      p += v * v.adjoint();
      p_tilde += w * w.adjoint();
    }
    distance = operator_norm(p - p_tilde);
    if (distance >= 1.0) {
      throw Error(ErrorKind::subspace_tracking,
                  "leakage_rate: ||P - P~|| = " + detail::describe(distance) + " is not below 1");
    }
  }

  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index k : members) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (!members.count(j)) gap = std::min(gap, std::abs(spectrum.eigenvalues(k) - spectrum.eigenvalues(j)));
    }
  }
  if (full_space) {
    gap = 0.0;  // no complement
  } else if (!(gap > 0.0)) {
    throw Error(ErrorKind::degenerate_spectrum, "leakage_rate: subspace is not separated from the rest");
  }

  // Columns spanning the initial state: the subspace basis (mixed state) or
  // the single pure state.
  DenseOperator basis(dim, static_cast<Eigen::Index>(members.size()));
  Eigen::Index col = 0;
  for (Eigen::Index k : members) basis.col(col++) = spectrum.vector(k);
  DenseOperator columns = basis;
  double weight = 1.0 / static_cast<double>(members.size());
  if (initial) {
    if (initial->size() != dim) throw Error(ErrorKind::dimension_mismatch, "leakage_rate: initial state dimension");
    detail::require_normalized(*initial, tol, "leakage_rate");
    const double inside = (basis.adjoint() * *initial).squaredNorm();
    if (std::abs(inside - 1.0) > 1e-8) {
      throw Error(ErrorKind::invalid_argument, "leakage_rate: initial state is not inside the subspace");
    }
    columns = *initial;
    weight = 1.0;
  }

  std::vector<LeakageReport> out;
  out.reserve(Ls.size());
  for (long long L : Ls) {
    if (L < 0) throw Error(ErrorKind::invalid_argument, "leakage_rate: L must be >= 0");
    LeakageReport r;
    r.L = L;
    r.projector_distance = distance;
    r.ceiling = 4.0 * distance * distance;
    r.subspace_gap = gap;
    if (L > 0 && !full_space) {
      const DenseOperator evolved = matrix_power(step, L) * columns;
      const double retained = weight * (basis.adjoint() * evolved).squaredNorm();
      r.leakage = std::clamp(1.0 - retained, 0.0, 1.0);
    }
    out.push_back(r);
  }
  return out;
}

inline LeakageReport leakage_rate(const LayeredHamiltonian& h, double dt, long long L,
                                  const std::vector<Eigen::Index>& subspace,
                                  const std::optional<StateVector>& initial = std::nullopt,
                                  const Tolerances& tol = {}) {
  return leakage_series(h, dt, {L}, subspace, initial, tol).front();
}

}  // namespace trotterfx
