#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "trotterfx/bounds.hpp"
#include "trotterfx/fit.hpp"
#include "trotterfx/trotter.hpp"

using namespace trotterfx;

namespace {

std::vector<oracle::Mat> oracle_layers(const LayeredHamiltonian& h) {
  std::vector<oracle::Mat> out;
  for (const auto& layer : h.layers()) {
    std::vector<oracle::Term> terms;
    for (const auto& t : layer.terms) terms.push_back({t.coefficient, t.letters});
    out.push_back(oracle::sum_terms(terms));
  }
  return out;
}

oracle::Vec ground(const oracle::Mat& h) { return oracle::eig(h).eigenvectors().col(0); }

}  // namespace

TEST(Trotter, StepBasics) {
  const LayeredHamiltonian one(2, {Layer{{{0.7, "XZ"}, {0.2, "ZX"}}}});
  EXPECT_LE((trotter_step(one, 0.3) - evolve_unitary(dense_total(one), 0.3)).cwiseAbs().maxCoeff(), 1e-12);

  const LayeredHamiltonian commuting(3, {Layer{{{1.0, "ZII"}}}, Layer{{{0.5, "ZZI"}}}, Layer{{{-0.4, "IZZ"}}}});
  EXPECT_LE((trotter_step(commuting, 0.7) - evolve_unitary(dense_total(commuting), 0.7)).cwiseAbs().maxCoeff(), 1e-10);

  // 1 qubit X then Z: T = e^{-i dt Z} e^{-i dt X}
  const LayeredHamiltonian xz(1, {Layer{{{1.0, "X"}}}, Layer{{{1.0, "Z"}}}});
  const double dt = 0.1;
  oracle::Mat rx(2, 2), rz(2, 2);
  rx << std::cos(dt), oracle::cd(0, -std::sin(dt)), oracle::cd(0, -std::sin(dt)), std::cos(dt);
  rz << std::exp(oracle::cd(0, -dt)), 0, 0, std::exp(oracle::cd(0, dt));
  EXPECT_LE((trotter_step(xz, dt) - rz * rx).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Trotter, StepMatchesOracleOnModels) {
  for (const auto& h : {tfim_chain(3), heisenberg_ff(3), counterexample_model(), random_nn_chain(3, 2)}) {
    EXPECT_LE((trotter_step(h, 0.13) - oracle::trotter_step(oracle_layers(h), 0.13)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Trotter, EffectiveHamiltonian) {
  const LayeredHamiltonian commuting(2, {Layer{{{1.0, "ZI"}}}, Layer{{{0.5, "ZZ"}}}});
  EXPECT_LE((effective_hamiltonian(commuting, 0.2) - dense_total(commuting)).cwiseAbs().maxCoeff(), 1e-10);

  const auto h = tfim_chain(3);
  const DenseOperator ht = effective_hamiltonian(h, 0.05);
  EXPECT_LE((evolve_unitary(ht, 0.05) - trotter_step(h, 0.05)).cwiseAbs().maxCoeff(), 1e-8);
  const oracle::Mat via_logm = (oracle::cd(0, 1) / 0.05) * oracle::logm(oracle::trotter_step(oracle_layers(h), 0.05));
  EXPECT_LE((ht - via_logm).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Trotter, LeadingBchResidualIsSecondOrder) {
  const LayeredHamiltonian ab(2, {Layer{{{0.8, "XI"}, {0.3, "IX"}}}, Layer{{{1.0, "ZZ"}, {0.4, "ZI"}}}});
  const DenseModel m = build_dense(ab);
  const DenseOperator a = m.per_layer[0], b = m.per_layer[1];
  std::vector<double> dts, res;
  for (double dt : {1e-3, 2e-3, 4e-3, 7e-3, 1e-2}) {
    // T = e^{-iB dt} e^{-iA dt}  =>  H_eff = H + (i dt/2)[A, B] + O(dt^2)
    const DenseOperator lead = m.total + (I_unit * dt / 2.0) * commutator(a, b);
    dts.push_back(dt);
    res.push_back(operator_norm(effective_hamiltonian(m, dt) - lead));
  }
  const auto fit = scaling_fit(dts, res);
  EXPECT_NEAR(fit.exponent, 2.0, 0.1);
  EXPECT_LE((leading_correction(m) - (I_unit / 2.0) * commutator(a, b)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Trotter, MagnusCeilingSmallTfim) {
  const auto h = tfim_chain(2);
  const auto c = interaction_constants(h);
  const double measured = operator_norm(effective_hamiltonian(h, 0.05) - dense_total(h));
  EXPECT_LE(measured, magnus_static_bound(c, 0.05).value);
}

TEST(Trotter, ErrorDecompositionTrivial) {
  const auto h = tfim_chain(3);
  const StateVector psi = basis_state(8, 3);
  const auto r0 = error_decomposition(h, 0.1, 0, psi);
  EXPECT_EQ(r0.f, 0.0);
  EXPECT_EQ(r0.theta, 0.0);
  EXPECT_EQ(r0.delta, 0.0);
  EXPECT_EQ(r0.euclid, 0.0);

  const LayeredHamiltonian commuting(2, {Layer{{{1.0, "ZI"}}}, Layer{{{0.5, "ZZ"}}}});
  StateVector plus = StateVector::Constant(4, 0.5);
  const auto rc = error_decomposition(commuting, 0.3, 57, plus);
  EXPECT_LE(rc.f, 1e-12);
  EXPECT_LE(std::abs(rc.theta), 1e-10);

  EXPECT_THROW(error_decomposition(h, 0.1, -1, psi), Error);
  EXPECT_THROW(error_decomposition(h, 0.1, 2, StateVector(2.0 * psi)), Error);
}

TEST(Trotter, ErrorDecompositionOracleTfim4) {
  const int n = 4;
  const auto h = tfim_chain(n);
  const auto layers = oracle_layers(h);
  const oracle::Mat H = layers[0] + layers[1];
  const oracle::Vec psi = ground(H);
  const double dt = 0.01;
  const int L = 100;

  const oracle::Mat step = oracle::trotter_step(layers, dt);
  oracle::Vec state = psi;
  for (int i = 0; i < L; ++i) state = step * state;  // naive propagation
  const oracle::Mat exact = oracle::expm_minus_i(H, L * dt);
  const oracle::Vec ref = exact * psi;
  const oracle::cd amp = ref.dot(state);

  oracle::Mat power = oracle::Mat::Identity(16, 16);
  for (int i = 0; i < L; ++i) power = step * power;

  const auto r = error_decomposition(h, dt, L, psi);
  EXPECT_NEAR(r.f, 1 - std::norm(amp), 1e-9);
  EXPECT_NEAR(r.theta, std::arg(amp), 1e-9);
  EXPECT_NEAR(r.euclid, (state - ref).norm(), 1e-9);
  EXPECT_NEAR(r.delta, oracle::opnorm(power - exact), 1e-9);
  EXPECT_NEAR(r.t, 1.0, 1e-15);
}

TEST(Trotter, ReportInvariantsRandom) {
  std::mt19937_64 g(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_real_local(3, g());
    StateVector psi(8);
    std::normal_distribution<double> d;
    for (int i = 0; i < 8; ++i) psi(i) = complex(d(g), d(g));
    psi.normalize();
    const auto r = error_decomposition(h, 0.05 + 0.01 * trial, 1 + trial * 3, psi);
    EXPECT_LE(r.euclid, r.delta + 1e-9);
    EXPECT_GE(r.f, 0.0);
    EXPECT_LE(r.f, 1.0);
    EXPECT_GT(r.theta, -pi);
    EXPECT_LE(r.theta, pi);
    if (r.delta <= 1 / std::sqrt(2.0)) {
      EXPECT_LE(r.f + r.theta * r.theta / 4, r.euclid * r.euclid + 1e-9);
      EXPECT_LE(r.euclid * r.euclid, 2 * r.f + r.theta * r.theta + 1e-9);
      EXPECT_FALSE(r.phase_may_wrap);
    }
  }
}

TEST(Trotter, SeriesMatchesSingle) {
  const auto h = heisenberg_ff(3);
  const StateVector psi = StateVector::Constant(8, 1 / std::sqrt(8.0));
  const auto series = error_decomposition_series(h, 0.2, {0, 3, 17}, psi);
  ASSERT_EQ(series.size(), 3u);
  const auto single = error_decomposition(h, 0.2, 17, psi);
  EXPECT_EQ(series[2].f, single.f);
  EXPECT_EQ(series[2].theta, single.theta);
}

TEST(Trotter, SpectralComparisonTrivial) {
  const DenseOperator h = dense_total(tfim_chain(3));
  const auto same = spectral_comparison(h, h);
  EXPECT_TRUE(same.identity_matching());
  for (const auto& p : same.pairs) {
    EXPECT_NEAR(p.effective_energy, p.energy, 1e-12);
    EXPECT_NEAR(p.overlap, 1.0, 1e-12);
  }
  const auto shifted = spectral_comparison(h, h + 0.01 * DenseOperator::Identity(8, 8));
  for (const auto& p : shifted.pairs) {
    EXPECT_NEAR(p.effective_energy - p.energy, 0.01, 1e-12);
    EXPECT_NEAR(p.overlap, 1.0, 1e-12);
  }
}

TEST(Trotter, SpectralComparisonWeyl) {
  const auto h = tfim_chain(3);
  const DenseOperator H = dense_total(h);
  const DenseOperator Ht = effective_hamiltonian(h, 0.02);
  const auto cmp = spectral_comparison(H, Ht);
  EXPECT_TRUE(cmp.identity_matching());
  const double weyl = oracle::opnorm(Ht - H);
  EXPECT_LE(cmp.max_shift(), weyl + 1e-9);
  // overlap ceiling with safety factor 2
  for (const auto& p : cmp.pairs) {
    const double rhs = weyl / p.gap;
    if (rhs < 1) EXPECT_LE(std::sqrt(std::max(0.0, 1 - p.overlap * p.overlap)), 2 * rhs);
  }
  // independent oracle: sorted eigenvalues of logm-based H_eff
  const oracle::Mat ho = (oracle::cd(0, 1) / 0.02) * oracle::logm(oracle::trotter_step(oracle_layers(h), 0.02));
  const auto eo = oracle::eig(0.5 * (ho + ho.adjoint())).eigenvalues();
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(cmp.pairs[k].effective_energy, eo(k), 1e-9);
}

TEST(Trotter, SpectralComparisonErrors) {
  EXPECT_THROW(spectral_comparison(DenseOperator::Identity(4, 4), DenseOperator::Identity(4, 4)), Error);
  EXPECT_THROW(spectral_comparison(DenseOperator::Identity(4, 4), DenseOperator::Identity(2, 2)), Error);
}

TEST(Trotter, OffDiagonalResidual) {
  EXPECT_LE(off_diagonal_residual(random_real_local(4, 1)), 1e-10);
  EXPECT_LE(off_diagonal_residual(tfim_chain(4)), 1e-10);
  EXPECT_GE(off_diagonal_residual(counterexample_model()), 0.5);

  // direct 4x4 evaluation for the counterexample
  const auto layers = oracle_layers(counterexample_model());
  oracle::Mat v = oracle::Mat::Zero(4, 4);
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t m = 0; m < l; ++m) v += oracle::cd(0, 0.5) * (layers[l] * layers[m] - layers[m] * layers[l]);
  double worst = 0;
  for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(v(k, k)));
  EXPECT_NEAR(off_diagonal_residual(counterexample_model()), worst, 1e-12);
}

TEST(Trotter, LeakageTrivial) {
  const LayeredHamiltonian commuting(2, {Layer{{{1.0, "ZI"}}}, Layer{{{0.5, "ZZ"}, {0.2, "IZ"}}}});
  EXPECT_LE(leakage_rate(commuting, 0.3, 40, {0, 1}).leakage, 1e-12);
  const auto full = leakage_rate(tfim_chain(2), 0.3, 40, {0, 1, 2, 3});
  EXPECT_EQ(full.leakage, 0.0);
  EXPECT_EQ(full.subspace_gap, 0.0);
}

TEST(Trotter, LeakageOracleTfim4) {
  const auto h = tfim_chain(4);
  const auto layers = oracle_layers(h);
  const oracle::Mat H = layers[0] + layers[1];
  const double dt = 0.02;
  const int L = 200;
  const auto es = oracle::eig(H);
  const oracle::Mat ht = (oracle::cd(0, 1) / dt) * oracle::logm(oracle::trotter_step(layers, dt));
  const auto et = oracle::eig(0.5 * (ht + ht.adjoint()));
  oracle::Mat P = oracle::Mat::Zero(16, 16), Pt = P;
  for (int k = 0; k < 3; ++k) {
    P += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
    Pt += et.eigenvectors().col(k) * et.eigenvectors().col(k).adjoint();
  }
  oracle::Mat U = oracle::Mat::Identity(16, 16);
  const oracle::Mat step = oracle::trotter_step(layers, dt);
  for (int i = 0; i < L; ++i) U = step * U;
  const oracle::Mat rho = P / 3.0;
  const double leak = 1 - (P * U * rho * U.adjoint()).trace().real();

  const auto r = leakage_rate(h, dt, L, {0, 1, 2});
  EXPECT_NEAR(r.leakage, leak, 1e-9);
  EXPECT_NEAR(r.projector_distance, oracle::opnorm(P - Pt), 1e-9);
  EXPECT_LE(r.leakage, r.ceiling + 1e-9);

  const StateVector psi = es.eigenvectors().col(1);
  const auto pure = leakage_rate(h, dt, L, {0, 1, 2}, psi);
  const oracle::Vec ev = U * psi;
  EXPECT_NEAR(pure.leakage, 1 - (P * ev).squaredNorm(), 1e-9);
}

TEST(Fit, ScalingFit) {
  std::vector<double> xs{1, 2, 3, 5, 8}, sq, inv, noisy;
  for (double x : xs) {
    sq.push_back(x * x);
    inv.push_back(3 / x);
  }
  EXPECT_NEAR(scaling_fit(xs, sq).exponent, 2.0, 1e-12);
  EXPECT_NEAR(scaling_fit(xs, sq).r2, 1.0, 1e-12);
  EXPECT_NEAR(scaling_fit(xs, inv).exponent, -1.0, 1e-12);

  std::mt19937 g(5);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  std::vector<double> lx, ly;
  for (int i = 1; i <= 20; ++i) {
    lx.push_back(i);
    ly.push_back(std::pow(i, 1.5) * (1 + u(g)));
  }
  // closed-form regression
  double mx = 0, my = 0;
  for (int i = 0; i < 20; ++i) { mx += std::log(lx[i]) / 20; my += std::log(ly[i]) / 20; }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 20; ++i) {
    sxy += (std::log(lx[i]) - mx) * (std::log(ly[i]) - my);
    sxx += (std::log(lx[i]) - mx) * (std::log(lx[i]) - mx);
  }
  const double e = scaling_fit(lx, ly).exponent;
  EXPECT_NEAR(e, sxy / sxx, 1e-12);
  EXPECT_GE(e, 1.45);
  EXPECT_LE(e, 1.55);

  std::vector<double> bad{1, -1, 2};
  EXPECT_THROW(scaling_fit(xs, bad), Error);
  std::vector<double> two{1, 2};
  EXPECT_THROW(scaling_fit(two, two), Error);
}
