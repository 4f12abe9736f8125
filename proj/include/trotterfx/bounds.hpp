#pragma once

// Closed-form error bounds for first-order Trotterization, the adiabatic
// error functional G(T, H) and the digital-adiabatic budget.
//
// Every evaluator returns a BoundReport. Expressions that come with explicit
// constants are tagged certified; asymptotic statements are evaluated with
// unit constants and tagged big_o. Violated preconditions never suppress the
// value, they are listed next to it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trotterfx/hamiltonian.hpp"
#include "trotterfx/linalg.hpp"

namespace trotterfx {

enum class Rigor { certified, big_o };

inline const char* to_string(Rigor r) { return r == Rigor::certified ? "certified" : "big_o"; }

struct BoundReport {
  std::string name;
  double value = 0.0;
  std::map<std::string, double> inputs;
  Rigor rigor = Rigor::certified;
  std::vector<std::string> violated;

  bool preconditions_met() const { return violated.empty(); }
  bool rigorous() const { return rigor == Rigor::certified && preconditions_met(); }

  void require(bool holds, std::string description) {
    if (!holds) violated.push_back(std::move(description));
  }
};

namespace detail {

inline void require_positive(double x, const char* what, const char* where) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw Error(ErrorKind::invalid_argument, std::string(where) + ": " + what + " must be positive and finite");
  }
}

inline void require_non_negative(double x, const char* what, const char* where) {
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw Error(ErrorKind::invalid_argument, std::string(where) + ": " + what + " must be non-negative and finite");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Magnus-expansion bounds

/// h = alpha/2 + (4/3)(beta + 128 alpha ||H||) dt, the derivative scale of
/// H_eff along the step interpolation. Derived in the regime dt ||H|| < 1/4.
inline BoundReport magnus_h(const InteractionConstants& c, double dt) {
  detail::require_non_negative(dt, "dt", "magnus_h");
  BoundReport r{"magnus_h"};
  r.value = c.alpha / 2.0 + (4.0 / 3.0) * (c.beta + 128.0 * c.alpha * c.normH) * dt;
  r.inputs = {{"alpha", c.alpha}, {"beta", c.beta}, {"normH", c.normH}, {"dt", dt}};
  r.rigor = Rigor::certified;
  r.require(dt * c.normH < 0.25, "dt*||H|| < 1/4");
  return r;
}

/// ||H_eff - H|| <= alpha dt / 2 + dt^2 (beta + 32 alpha ||H||).
inline BoundReport magnus_static_bound(const InteractionConstants& c, double dt) {
  detail::require_non_negative(dt, "dt", "magnus_static_bound");
  BoundReport r{"magnus_static_bound"};
  r.value = c.alpha * dt / 2.0 + dt * dt * (c.beta + 32.0 * c.alpha * c.normH);
  r.inputs = {{"alpha", c.alpha}, {"beta", c.beta}, {"normH", c.normH}, {"dt", dt}};
  r.rigor = Rigor::certified;
  r.require(dt * c.normH < 0.25, "dt*||H|| < 1/4");
  return r;
}

struct EigenstateBounds {
  BoundReport theta;
  BoundReport f;
};

/// Phase and fidelity error envelopes for an eigenstate input, unit constants:
/// |theta| ~ L h dt^2 and f ~ min{(h dt / lambda)^2, (L h dt^2)^2}.
inline EigenstateBounds corollary1_bounds(double h, double lambda, double dt, long long L) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "corollary1_bounds: lambda must be positive");
  detail::require_non_negative(h, "h", "corollary1_bounds");
  detail::require_non_negative(dt, "dt", "corollary1_bounds");
  if (L < 0) throw Error(ErrorKind::invalid_argument, "corollary1_bounds: L must be >= 0");

  const double Ld = static_cast<double>(L);
  const std::map<std::string, double> inputs{{"h", h}, {"lambda", lambda}, {"dt", dt}, {"L", Ld}};
  EigenstateBounds out;
  out.theta = {"corollary1_theta", Ld * h * dt * dt, inputs, Rigor::big_o, {}};
  const double saturated = std::pow(h * dt / lambda, 2);
  const double growing = std::pow(Ld * h * dt * dt, 2);
  out.f = {"corollary1_f", L == 0 ? 0.0 : std::min(saturated, growing), inputs, Rigor::big_o, {}};
  out.f.inputs["saturated_branch"] = saturated;
  out.f.inputs["growing_branch"] = growing;
  return out;
}

/// Energy shift of a level whose first-order correction vanishes:
/// ||V||^2 ||H|| dt^2 / lambda^2 + 2 ||V||^2 dt^2 / lambda + ||V||^3 dt^3 / lambda^2
/// plus the second-order remainder dt^2 (beta + 32 alpha ||H||).
inline BoundReport lemma3_energy_bound(const InteractionConstants& c, double v_norm, double lambda, double dt) {
  detail::require_positive(lambda, "lambda", "lemma3_energy_bound");
  detail::require_non_negative(v_norm, "||V||", "lemma3_energy_bound");
  detail::require_non_negative(dt, "dt", "lemma3_energy_bound");
  BoundReport r{"lemma3_energy_bound"};
  const double v2 = v_norm * v_norm;
  const double s2 = dt * dt;
  const double chain = v2 * c.normH * s2 / (lambda * lambda) + 2.0 * v2 * s2 / lambda +
                       v2 * v_norm * s2 * dt / (lambda * lambda);
  const double remainder = s2 * (c.beta + 32.0 * c.alpha * c.normH);
  r.value = chain + remainder;
  r.inputs = {{"V_norm", v_norm}, {"lambda", lambda}, {"dt", dt}, {"normH", c.normH},
              {"alpha", c.alpha}, {"beta", c.beta}, {"chain", chain}, {"remainder", remainder}};
  r.rigor = Rigor::certified;
  r.require(v_norm * dt < lambda, "||V||*dt < lambda");
  r.require(dt * c.normH < 0.25, "dt*||H|| < 1/4");
  return r;
}

// ---------------------------------------------------------------------------
// Series helpers for the derivative bounds of H_eff(s)

/// F0(x) = sum_{j>=0} x^j = 1/(1-x).
inline double series_f0(double x) { return 1.0 / (1.0 - x); }

/// F1(x) = sum_{j>=1} x^{j-1}/j = -ln(1-x)/x.
inline double series_f1(double x) { return x == 0.0 ? 1.0 : -std::log1p(-x) / x; }

/// F2(x) = int_0^x -ln(1-y) dy = x + (1-x) ln(1-x).
inline double series_f2(double x) { return x + (1.0 - x) * std::log1p(-x); }

/// Envelopes valid for 0 <= x <= 1/2.
inline double series_f0_envelope(double x) { return 1.0 + 2.0 * x; }
inline double series_f1_envelope(double x) { return 1.0 + x; }
inline double series_f2_envelope(double x) { return 0.5 * x * x * (1.0 + x); }

struct DerivativeBounds {
  double d1 = 0.0;  // bound on ||H_eff'(s)||
  double d2 = 0.0;  // bound on ||H_eff''(s)||
  BoundReport report;
};

/// Bounds on the first two s-derivatives of H_eff(s) = i log(U^t(s)) / t for
/// the two-factor step U^t(s) = exp(-i t (1-s) H_i) exp(-i t s H_f).
inline DerivativeBounds appF_derivative_bounds(const InteractionConstants& c, double t) {
  detail::require_non_negative(t, "t", "appF_derivative_bounds");
  if (!c.has_pair) {
    throw Error(ErrorKind::invalid_argument, "appF_derivative_bounds: constants need an initial/final pair");
  }
  const double growth = (2.0 * c.C0 + 3.0 * c.D) * t;
  const double lead = c.D + c.C1 * t * (1.0 + 2.0 * c.D * t);

  DerivativeBounds out;
  out.d1 = lead * (1.0 + growth);
  out.d2 = (c.C1 * t + 4.0 * c.C1 * c.C1 * t * t * t + 2.0 * c.D * c.C2 * t * t * t) * (1.0 + growth) +
           (t == 0.0 ? 0.0 : 2.0 * t * lead * lead / (1.0 - growth));

  // ||G(s)|| <= s D + F2(2 s t D) / (2t), largest at s = 1.
  const double g_max = t == 0.0 ? c.D : c.D + series_f2(std::min(2.0 * t * c.D, 1.0 - 1e-15)) / (2.0 * t);

  BoundReport& r = out.report;
  r.name = "appF_derivative_bounds";
  r.value = out.d1;
  r.inputs = {{"C0", c.C0}, {"C1", c.C1}, {"C2", c.C2}, {"D", c.D}, {"t", t}, {"d1", out.d1}, {"d2", out.d2}};
  r.rigor = Rigor::certified;
  r.require(t * c.D < 0.25, "t*D < 1/4");
  r.require(growth < 1.0, "(2*C0 + 3*D)*t < 1");
  r.require((c.C0 + g_max) * t < 0.25, "(||H_i|| + max||G||)*t < 1/4");
  return out;
}

// ---------------------------------------------------------------------------
// Adiabatic error functional

/// A Hamiltonian family on s in [0, 1] together with norms (or bounds) of its
/// first two derivatives.
struct AdiabaticPath {
  std::function<DenseOperator(double)> hamiltonian;
  std::function<double(double)> first_derivative_norm;
  std::function<double(double)> second_derivative_norm;
};

/// H(s) = (1-s) H_i + s H_f, H' = H_f - H_i, H'' = 0.
inline AdiabaticPath linear_path(const DenseOperator& initial, const DenseOperator& final) {
  const double slope = operator_norm(final - initial);
  return {[initial, final](double s) -> DenseOperator { return (1.0 - s) * initial + s * final; },
          [slope](double) { return slope; }, [](double) { return 0.0; }};
}

inline std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) throw Error(ErrorKind::invalid_argument, "uniform_grid: need at least 2 points");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

struct EigenTrack {
  std::vector<double> s;
  std::vector<double> energy;
  std::vector<double> gap;
  std::vector<Eigen::Index> index;
  StateVector final_state;

  double min_gap() const { return *std::min_element(gap.begin(), gap.end()); }
};

/// Follows eigenvector `k` of hamiltonian(grid[0]) along the grid by maximal
/// overlap with the previous point, recording its level gap.
inline EigenTrack track_eigenstate(const std::function<DenseOperator(double)>& hamiltonian, Eigen::Index k,
                                   std::span<const double> grid, const Tolerances& tol = {}) {
  if (grid.empty()) throw Error(ErrorKind::invalid_argument, "track_eigenstate: empty grid");
  EigenTrack track;
  StateVector previous;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Spectrum spec = hermitian_eig(hamiltonian(grid[i]), tol);
    const Eigen::Index n = spec.dim();
    if (k < 0 || k >= n) throw Error(ErrorKind::invalid_argument, "track_eigenstate: eigen-index out of range");
    Eigen::Index chosen = k;
    if (i > 0) {
      const Eigen::VectorXd weights = (spec.eigenvectors.adjoint() * previous).cwiseAbs2();
      Eigen::Index best = 0;
      weights.maxCoeff(&best);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != best && weights(j) > weights(best) - tol.pairing) {
          throw Error(ErrorKind::pairing_ambiguity,
                      "track_eigenstate: two continuations at s = " + detail::describe(grid[i]));
        }
      }
      chosen = best;
    }
    double gap = std::numeric_limits<double>::infinity();
    if (chosen > 0) gap = std::min(gap, spec.eigenvalues(chosen) - spec.eigenvalues(chosen - 1));
    if (chosen + 1 < n) gap = std::min(gap, spec.eigenvalues(chosen + 1) - spec.eigenvalues(chosen));
    if (gap < tol.gap_collapse) {
      throw Error(ErrorKind::gap_collapse, "track_eigenstate: gap " + detail::describe(gap) + " at s = " +
                                               detail::describe(grid[i]));
    }
    previous = spec.vector(chosen);
    track.s.push_back(grid[i]);
    track.energy.push_back(spec.eigenvalues(chosen));
    track.gap.push_back(gap);
    track.index.push_back(chosen);
  }
  track.final_state = previous;
  return track;
}

/// G(T, H) = (1/T)(||H'(0)||/lambda(0)^2 + ||H'(1)||/lambda(1)^2)
///         + (1/T) int_0^1 ||H''||/lambda^2 + 7 ||H'||^2/lambda^3 ds,
/// with lambda(s) the gap of the continued eigenstate `k`; trapezoid rule on a
/// uniform grid of `grid_points` points.
inline BoundReport adiabatic_G(const AdiabaticPath& path, double T, std::size_t grid_points, Eigen::Index k = 0,
                               const Tolerances& tol = {}) {
  detail::require_positive(T, "T", "adiabatic_G");
  const std::vector<double> grid = uniform_grid(grid_points);
  const EigenTrack track = track_eigenstate(path.hamiltonian, k, grid, tol);

  const auto integrand = [&](std::size_t i) {
    const double s = grid[i];
    const double lam = track.gap[i];
    const double d1 = path.first_derivative_norm(s);
    const double d2 = path.second_derivative_norm(s);
    return d2 / (lam * lam) + 7.0 * d1 * d1 / (lam * lam * lam);
  };
  const double h = 1.0 / static_cast<double>(grid_points - 1);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) integral += 0.5 * h * (integrand(i) + integrand(i + 1));

  const double lam0 = track.gap.front();
  const double lam1 = track.gap.back();
  const double boundary = path.first_derivative_norm(0.0) / (lam0 * lam0) + path.first_derivative_norm(1.0) / (lam1 * lam1);

  BoundReport r{"adiabatic_G"};
  r.value = (boundary + integral) / T;
  r.inputs = {{"T", T}, {"grid_points", static_cast<double>(grid_points)}, {"min_gap", track.min_gap()},
              {"boundary_term", boundary}, {"integral_term", integral}};
  r.rigor = Rigor::certified;
  return r;
}

// ---------------------------------------------------------------------------
// Digital adiabatic budget

/// Ceiling on the total digital-adiabatic error at schedule time T and depth M:
/// 7 (D + 3 C1 T / (2M))^2 [1 + (2 C0 + 3 D) T/M]^2 / (T lambda^3).
/// The two asymptotic pieces D^2/(T lambda^3) and C1^2 T/(M^2 lambda^3) and the
/// leading factor without the growth correction are listed in `inputs`.
inline BoundReport das_bound_report(const InteractionConstants& c, double T, long long M, double lambda) {
  detail::require_positive(T, "T", "das_bound_report");
  detail::require_positive(lambda, "lambda", "das_bound_report");
  if (M <= 0) throw Error(ErrorKind::invalid_argument, "das_bound_report: M must be positive");
  if (!c.has_pair) throw Error(ErrorKind::invalid_argument, "das_bound_report: constants need an initial/final pair");

  const double Md = static_cast<double>(M);
  const double lam3 = lambda * lambda * lambda;
  const double lead = c.D + 3.0 * c.C1 * T / (2.0 * Md);
  const double growth = 1.0 + (2.0 * c.C0 + 3.0 * c.D) * T / Md;

  BoundReport r{"das_bound_report"};
  r.value = 7.0 * lead * lead * growth * growth / (T * lam3);
  r.inputs = {{"C0", c.C0},
              {"C1", c.C1},
              {"D", c.D},
              {"T", T},
              {"M", Md},
              {"lambda", lambda},
              {"leading", 7.0 * lead * lead / (T * lam3)},
              {"adiabatic_term", c.D * c.D / (T * lam3)},
              {"trotter_term", c.C1 * c.C1 * T / (Md * Md * lam3)}};
  r.rigor = Rigor::big_o;
  r.require((c.C0 + 1.5 * c.D) * T < Md / 4.0, "(C0 + 3D/2)*T < M/4");
  r.require(c.D > lambda, "D/lambda >> 1");
  return r;
}

struct OptimalSchedule {
  double T_c = 0.0;
  BoundReport eps_opt;
};

/// T_c = 2 M D / (3 C1), the minimiser of the leading DAS error term
/// (D + 3 C1 T/(2M))^2 / T; eps_opt is das_bound_report evaluated there.
inline OptimalSchedule tc_optimal(const InteractionConstants& c, long long M, double lambda) {
  if (M <= 0) throw Error(ErrorKind::invalid_argument, "tc_optimal: M must be positive");
  if (!c.has_pair) throw Error(ErrorKind::invalid_argument, "tc_optimal: constants need an initial/final pair");
  if (!(c.C1 > 0.0)) throw Error(ErrorKind::invalid_argument, "tc_optimal: C1 = 0, the Trotter term vanishes");
  if (!(c.D > 0.0)) throw Error(ErrorKind::invalid_argument, "tc_optimal: D = 0, nothing to interpolate");

  OptimalSchedule out;
  out.T_c = 2.0 * static_cast<double>(M) * c.D / (3.0 * c.C1);
  out.eps_opt = das_bound_report(c, out.T_c, M, lambda);
  out.eps_opt.name = "tc_optimal";
  out.eps_opt.inputs["T_c"] = out.T_c;
  out.eps_opt.require((8.0 * c.C0 + 12.0 * c.D) * c.D <= 3.0 * c.C1, "(8*C0 + 12*D)*D <= 3*C1");
  return out;
}

// ---------------------------------------------------------------------------
// Phase estimation budget

struct QPERequirements {
  BoundReport dt;
  BoundReport L;
  BoundReport depth;
};

/// Step size, step count and depth needed to keep the Trotter phase error
/// below the register resolution xi at evolution time t0, unit constants.
/// With `condition_holds` (first-order energy shift vanishes):
///   dt = sqrt(xi/t0) min{1, lambda} / N, L = N sqrt(t0^3/xi) max{1, 1/lambda},
///   depth = sqrt(N^3 t0^3 / xi^3) max{1, 1/lambda};
/// otherwise dt = xi / (N t0), L = t0/dt, depth = N^2 t0^2 / xi^2.
inline QPERequirements qpe_requirements(double xi, double t0, int n_sites, double lambda, bool condition_holds) {
  detail::require_positive(xi, "xi", "qpe_requirements");
  detail::require_positive(t0, "t0", "qpe_requirements");
  detail::require_positive(lambda, "lambda", "qpe_requirements");
  if (n_sites <= 0) throw Error(ErrorKind::invalid_argument, "qpe_requirements: n_sites must be positive");

  const double N = n_sites;
  const std::map<std::string, double> inputs{
      {"xi", xi}, {"t0", t0}, {"N", N}, {"lambda", lambda}, {"condition_holds", condition_holds ? 1.0 : 0.0}};
  QPERequirements out;
  out.dt = {"qpe_dt", 0.0, inputs, Rigor::big_o, {}};
  out.L = {"qpe_L", 0.0, inputs, Rigor::big_o, {}};
  out.depth = {"qpe_depth", 0.0, inputs, Rigor::big_o, {}};
  if (condition_holds) {
    const double widen = std::max(1.0, 1.0 / lambda);
    out.dt.value = std::sqrt(xi / t0) * std::min(1.0, lambda) / N;
    out.L.value = N * std::sqrt(t0 * t0 * t0 / xi) * widen;
    out.depth.value = std::sqrt(N * N * N * t0 * t0 * t0 / (xi * xi * xi)) * widen;
  } else {
    out.dt.value = xi / (N * t0);
    out.L.value = t0 / out.dt.value;
    out.depth.value = N * N * t0 * t0 / (xi * xi);
  }
  return out;
}

}  // namespace trotterfx
