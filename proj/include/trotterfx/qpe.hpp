#pragma once

// Ideal phase-estimation statistics and the phase bias a Trotterized
// controlled unitary introduces. Phases handed to qpe_distribution are in
// cycles (phi in [0, 1)); everything else is in radians.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "trotterfx/hamiltonian.hpp"
#include "trotterfx/linalg.hpp"
#include "trotterfx/trotter.hpp"

namespace trotterfx {

struct QPEOutcome {
  int register_bits = 0;
  std::vector<double> distribution;  // P(a), a = 0 .. 2^l - 1
  std::vector<double> true_phases;   // cycles, one per eigenstate

  double outcome_phase(std::size_t a) const { return std::ldexp(static_cast<double>(a), -register_bits); }

  std::size_t most_likely() const {
    return static_cast<std::size_t>(std::max_element(distribution.begin(), distribution.end()) - distribution.begin());
  }
};

/// |K_l(a, phi)|^2 = sin^2(pi 2^l d) / (2^{2l} sin^2(pi d)), d = phi - a/2^l.
inline double qpe_kernel(double phi, std::size_t a, int l) {
  const double grid = std::ldexp(1.0, l);
  double d = phi - static_cast<double>(a) / grid;
  d -= std::round(d);  // the kernel has period 1 in d
  const double den = std::sin(pi * d);
  if (std::abs(den) < 1e-15) return 1.0;
  const double num = std::sin(pi * grid * d);
  return (num * num) / (grid * grid * den * den);
}

inline QPEOutcome qpe_distribution(std::span<const double> eigenphases, std::span<const double> weights, int l) {
  if (l < 1 || l > 20) throw Error(ErrorKind::invalid_argument, "qpe_distribution: register bits must be in [1, 20]");
  if (eigenphases.size() != weights.size() || weights.empty()) {
    throw Error(ErrorKind::invalid_argument, "qpe_distribution: need one weight per eigenphase");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::invalid_argument, "qpe_distribution: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10) throw Error(ErrorKind::invalid_argument, "qpe_distribution: weights must sum to 1");

  QPEOutcome out;
  out.register_bits = l;
  out.true_phases.assign(eigenphases.begin(), eigenphases.end());
  const std::size_t outcomes = std::size_t{1} << l;
  out.distribution.assign(outcomes, 0.0);
  for (std::size_t k = 0; k < eigenphases.size(); ++k) {
    const double phi = eigenphases[k] - std::floor(eigenphases[k]);
    for (std::size_t a = 0; a < outcomes; ++a) out.distribution[a] += weights[k] * qpe_kernel(phi, a, l);
  }
  double sum = 0.0;
  for (double p : out.distribution) sum += p;
  for (double& p : out.distribution) p /= sum;
  return out;
}

/// Index of the register value nearest to phi (cycles), with wrap-around.
inline std::size_t nearest_outcome(double phi, int l) {
  const double grid = std::ldexp(1.0, l);
  const double x = (phi - std::floor(phi)) * grid;
  return static_cast<std::size_t>(std::llround(x)) % static_cast<std::size_t>(grid);
}

struct QPEShift {
  double theta_exact = 0.0;  // E_k t  wrapped to (-pi, pi]
  double theta_eff = 0.0;    // E~_k t wrapped
  double energy_shift = 0.0; // E~_k - E_k
  double overlap_penalty = 0.0;
  long long L = 0;
  double t = 0.0;            // L dt, the evolution time actually used
  bool may_wind = false;     // |E~_k - E_k| t >= pi
};

/// Phase recorded by ideal QPE on T(dt)^L versus exp(-i H t) for level k.
/// L = round(t0/dt); the returned t is L*dt.
inline QPEShift qpe_trotter_shift(const LayeredHamiltonian& h, double dt, double t0, Eigen::Index k,
                                  const Tolerances& tol = {}) {
  if (!(dt > 0.0) || !(t0 > 0.0)) throw Error(ErrorKind::invalid_argument, "qpe_trotter_shift: dt and t0 must be positive");
  const long long L = std::llround(t0 / dt);
  if (L < 1) throw Error(ErrorKind::invalid_argument, "qpe_trotter_shift: t0/dt rounds to zero steps");
  const DenseModel model = build_dense(h);
  if (k < 0 || k >= model.total.rows()) throw Error(ErrorKind::invalid_argument, "qpe_trotter_shift: level out of range");

  const SpectralComparison cmp = spectral_comparison(model.total, effective_hamiltonian(model, dt, tol), tol);
  const EigenPair& pair = cmp.pairs[static_cast<std::size_t>(k)];
  QPEShift out;
  out.L = L;
  out.t = static_cast<double>(L) * dt;
  out.energy_shift = pair.effective_energy - pair.energy;
  out.theta_exact = wrap_phase(pair.energy * out.t);
  out.theta_eff = wrap_phase(pair.effective_energy * out.t);
  out.overlap_penalty = std::max(0.0, 1.0 - pair.overlap * pair.overlap);
  out.may_wind = std::abs(out.energy_shift) * out.t >= pi;
  return out;
}

struct RPEReading {
  double P_alpha = 0.0;
  double P_beta = 0.0;
  double extracted_phase = 0.0;
  double predicted_phase = 0.0;
  double f_max = 0.0;  // larger fidelity error of the two eigenstates under the same evolution
  double t = 0.0;
};

namespace detail {

inline void rpe_measure(const DenseOperator& u, const StateVector& psi0, const StateVector& psi1,
                        const Tolerances& tol, RPEReading& r) {
  const StateVector alpha = (psi0 + psi1) / std::sqrt(2.0);
  const StateVector beta = (psi0 + I_unit * psi1) / std::sqrt(2.0);
  r.P_alpha = std::clamp(std::norm(state_overlap(alpha, u * alpha)), 0.0, 1.0);
  r.P_beta = std::clamp(std::norm(state_overlap(alpha, u * beta)), 0.0, 1.0);
  const double x = 2.0 * r.P_alpha - 1.0;
  if (std::abs(x) < tol.quadrant) {
    throw Error(ErrorKind::quadrant_ambiguity,
                "rpe_extract: 2 P_alpha - 1 = " + describe(x) + " leaves the quadrant undetermined");
  }
  r.extracted_phase = std::atan2(2.0 * r.P_beta - 1.0, x);
}

inline void require_levels(Eigen::Index dim, Eigen::Index i0, Eigen::Index i1) {
  if (i0 == i1) throw Error(ErrorKind::invalid_argument, "rpe_extract: the two levels must differ");
  if (i0 < 0 || i1 < 0 || i0 >= dim || i1 >= dim) throw Error(ErrorKind::invalid_argument, "rpe_extract: level out of range");
}

}  // namespace detail

/// Robust phase estimation of (E~_1 - E~_0) t with t = L dt using the
/// Trotterized unitary T(dt)^L.
inline RPEReading rpe_extract(const LayeredHamiltonian& h, double dt, long long L, Eigen::Index idx0,
                              Eigen::Index idx1, const Tolerances& tol = {}) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "rpe_extract: dt must be positive");
  if (L < 1) throw Error(ErrorKind::invalid_argument, "rpe_extract: L must be >= 1");
  const DenseModel model = build_dense(h);
  detail::require_levels(model.total.rows(), idx0, idx1);

  const DenseOperator step = trotter_step(model, dt, tol);
  const SpectralComparison cmp = spectral_comparison(model.total, unitary_log(step, dt, tol), tol);
  const StateVector psi0 = cmp.reference.vector(idx0);
  const StateVector psi1 = cmp.reference.vector(idx1);

  RPEReading r;
  r.t = static_cast<double>(L) * dt;
  detail::rpe_measure(matrix_power(step, L), psi0, psi1, tol, r);
  const double gap_eff = cmp.pairs[static_cast<std::size_t>(idx1)].effective_energy -
                         cmp.pairs[static_cast<std::size_t>(idx0)].effective_energy;
  r.predicted_phase = wrap_phase(gap_eff * r.t);
  for (const StateVector* psi : {&psi0, &psi1}) {
    r.f_max = std::max(r.f_max, detail::decompose(step, cmp.reference, dt, L, *psi).f);
  }
  return r;
}

/// Same measurement with the exact evolution exp(-i H t).
inline RPEReading rpe_extract_exact(const LayeredHamiltonian& h, double t, Eigen::Index idx0, Eigen::Index idx1,
                                    const Tolerances& tol = {}) {
  const DenseOperator total = dense_total(h);
  detail::require_levels(total.rows(), idx0, idx1);
  const Spectrum spec = hermitian_eig(total, tol);
  detail::require_nondegenerate(spec.eigenvalues, tol, "rpe_extract_exact");

  RPEReading r;
  r.t = t;
  detail::rpe_measure(evolve_unitary(spec, t), spec.vector(idx0), spec.vector(idx1), tol, r);
  r.predicted_phase = wrap_phase((spec.eigenvalues(idx1) - spec.eigenvalues(idx0)) * t);
  return r;
}

/// a - b reduced to (-pi, pi].
inline double phase_difference(double a, double b) { return wrap_phase(a - b); }

}  // namespace trotterfx
