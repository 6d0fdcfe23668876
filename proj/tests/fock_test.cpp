#include "cvqt/fock.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_complex.hpp>
#include <gtest/gtest.h>

using namespace cvqt;

namespace {

double variance(const FockVector& v, double theta) {
  const Complex m1 = expectation(v, ModeOp::quadrature(0, theta));
  const CMatrix x = ModeOp::quadrature(0, theta).matrix(v.dim());
  const Complex m2 = v.amplitudes().dot(x * x * v.amplitudes());
  return (m2 - m1 * m1).real();
}

FockVector random_state(std::size_t modes, std::size_t dim, std::size_t max_total, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  FockVector v(modes, dim);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto occ = occupation_of(i, modes, dim);
    std::size_t total = 0;
    for (auto n : occ) total += n;
    if (total <= max_total) v.amplitudes()[static_cast<Eigen::Index>(i)] = Complex(g(rng), g(rng));
  }
  return v.normalized();
}

}  // namespace

TEST(Layout, ModeZeroIsSlowest) {
  const std::vector<std::size_t> occ{1, 2, 3};
  EXPECT_EQ(flat_index(occ, 5), 1u * 25 + 2 * 5 + 3);
  EXPECT_EQ(occupation_of(38, 3, 5), occ);
}

TEST(CoherentState, ZeroAmplitudeIsVacuum) {
  const auto v = coherent_state(0.0, 10);
  EXPECT_EQ(v[0], Complex(1.0));
  for (std::size_t n = 1; n < 10; ++n) EXPECT_EQ(v[n], Complex(0.0));
  EXPECT_EQ(v.tail_mass(), 0.0);
}

TEST(CoherentState, PoissonMeanAndNorm) {
  const auto v = coherent_state(2.0, 40);
  double mean = 0.0;
  for (std::size_t n = 0; n < 40; ++n) mean += double(n) * std::norm(v[n]);
  EXPECT_NEAR(mean, 4.0, 1e-10);
  EXPECT_NEAR(v.norm_squared(), 1.0, 1e-12);
}

TEST(CoherentState, TailMatchesIncompleteGamma) {
  for (auto [alpha, N] : {std::pair{2.0, 40}, std::pair{3.0, 30}, std::pair{1.5, 25}}) {
    const auto v = coherent_state(alpha, N, 1.0);
    // P(Poisson(lambda) >= N) = regularized lower incomplete gamma P(N, lambda)
    const double ref = boost::math::gamma_p(double(N), alpha * alpha);
    // independent direct summation of the Poisson tail
    double direct = 0.0;
    for (int n = N; n < N + 400; ++n)
      direct += std::exp(-alpha * alpha + n * std::log(alpha * alpha) - std::lgamma(n + 1.0));
    EXPECT_NEAR(v.tail_mass() / ref, 1.0, 1e-10);
    EXPECT_NEAR(direct / ref, 1.0, 1e-10);
  }
}

TEST(CoherentState, UnderTruncationRejected) {
  EXPECT_THROW(coherent_state(5.0, 10), TruncationError);
  EXPECT_NO_THROW(coherent_state(5.0, 10, 1.0));
}

TEST(CoherentState, EigenvectorOfAnnihilation) {
  const Complex alpha(1.2, -0.7);
  const auto v = coherent_state(alpha, 40);
  const auto av = apply(v, ModeOp::annihilate(0));
  for (std::size_t n = 0; n + 2 <= 40; ++n) EXPECT_LE(std::abs(av[n] - alpha * v[n]), 1e-14 + v.tail_mass());
}

TEST(SqueezedVacuum, ZeroSqueezeIsVacuum) {
  const auto v = squeezed_vacuum(0.0, 12);
  EXPECT_EQ(v[0], Complex(1.0));
  EXPECT_NEAR(v.norm_squared(), 1.0, 0.0);
}

TEST(SqueezedVacuum, OddAmplitudesVanish) {
  const auto v = squeezed_vacuum(0.5, 40);
  for (std::size_t n = 1; n < 40; n += 2) EXPECT_EQ(v[n], Complex(0.0));
}

TEST(SqueezedVacuum, QuadratureVariance) {
  const auto v = squeezed_vacuum(0.5, 40);
  EXPECT_NEAR(variance(v, 0.0), std::exp(-1.0), 1e-6);
  EXPECT_NEAR(variance(v, std::numbers::pi / 2), std::exp(1.0), 1e-6);
}

TEST(SqueezedVacuum, MinimumUncertainty) {
  for (double s : {0.1, 0.3, 0.6}) {
    const auto v = squeezed_vacuum(s, 60);
    EXPECT_NEAR(variance(v, 0.0) * variance(v, std::numbers::pi / 2), 1.0, 1e-6) << s;
  }
}

TEST(SqueezedVacuum, MatchesSqueezeOperatorConvention) {
  // S(eps) = exp((eps* a^2 - eps a^dag^2)/2) applied to |0> in a padded basis.
  const Complex eps = std::polar(0.4, 0.9);
  const auto v = squeezed_vacuum(eps, 30);
  const auto ref = apply(FockVector::basis(30, {0}), ModeOp::squeeze(0, eps));
  EXPECT_LE((v.amplitudes() - ref.amplitudes()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SqueezedVacuum, HermiteSeriesForm) {
  // <n|0,eps> = (2^n n! cosh s)^{-1/2} (e^{i psi} tanh s)^{n/2} H_n(0)
  const double s = 0.5, psi = 0.8;
  const auto v = squeezed_vacuum(std::polar(s, psi), 30);
  const auto h0 = specfun::hermite_sequence(0.0, 29);
  for (std::size_t n = 0; n < 30; n += 2) {
    const Complex half_power = std::polar(std::pow(std::tanh(s), n / 2.0), psi * double(n) / 2.0);
    const Complex ref = half_power * h0[n] / std::sqrt(std::pow(2.0, double(n)) * std::tgamma(n + 1.0) * std::cosh(s));
    EXPECT_LE(std::abs(v[n] - ref), 1e-13);
  }
}

TEST(SqueezedVacuum, UnderTruncationRejected) { EXPECT_THROW(squeezed_vacuum(2.0, 20), TruncationError); }

TEST(TwoModeSqueezed, ZeroEtaIsVacuum) {
  const auto v = two_mode_squeezed(0.0, 0.3, 8);
  EXPECT_NEAR(std::abs(v.at({0, 0})), 1.0, 0.0);
  EXPECT_NEAR(v.norm_squared(), 1.0, 1e-15);
}

TEST(TwoModeSqueezed, MeanPhotonNumberAndCorrelation) {
  const double eta = 0.6;
  const auto v = two_mode_squeezed(eta, 1.1, 30);
  const double n1 = expectation(v, ModeOp::number(0)).real();
  const double n2 = expectation(v, ModeOp::number(1)).real();
  // geometric series oracle: sum_n n (1 - eta^2) eta^{2n}
  double oracle = 0.0;
  for (int n = 0; n < 2000; ++n) oracle += n * (1 - eta * eta) * std::pow(eta, 2.0 * n);
  EXPECT_NEAR(oracle, 0.5625, 1e-12);
  EXPECT_NEAR(n1, oracle, 1e-8);
  EXPECT_NEAR(n2, oracle, 1e-8);
  for (std::size_t a = 0; a < 30; ++a)
    for (std::size_t b = 0; b < 30; ++b)
      if (a != b) {
        EXPECT_EQ(v.at({a, b}), Complex(0.0));
      }
}

TEST(TwoModeSqueezed, RejectsUnnormalizable) {
  EXPECT_THROW(two_mode_squeezed(1.0, 0.0, 10), std::invalid_argument);
  EXPECT_THROW(two_mode_squeezed(0.99, 0.0, 10), TruncationError);
}

TEST(QuadratureEigenvector, GroundComponent) {
  for (double theta : {0.0, 1.3, -2.0}) {
    const auto q = quadrature_eigenvector(0.7, theta, 10);
    EXPECT_TRUE(q.is_improper());
    EXPECT_NEAR(q[0].real(), std::pow(2 * std::numbers::pi, -0.25) * std::exp(-0.49 / 4), 1e-15);
    EXPECT_NEAR(q[0].imag(), 0.0, 1e-15);
  }
}

TEST(QuadratureEigenvector, NumericalCompleteness) {
  const std::size_t N = 40;
  const double theta = 0.37;
  CMatrix acc = CMatrix::Zero(11, 11);
  for (int i = -1200; i <= 1200; ++i) {
    const CVector q = quadrature_amplitudes(0.01 * i, theta, N).head(11);
    acc += 0.01 * q * q.adjoint();
  }
  EXPECT_LE((acc - CMatrix::Identity(11, 11)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(QuadratureEigenvector, EigenResidualOnLowSubspace) {
  const std::size_t N = 60;
  for (double theta : {0.0, 0.8}) {
    const auto q = quadrature_eigenvector(1.0, theta, N);
    const auto xq = apply(q, ModeOp::quadrature(0, theta));
    const CVector r = (xq.amplitudes() - 1.0 * q.amplitudes()).head(N - 1);
    EXPECT_LE(r.norm(), 1e-8);
  }
}

TEST(QuadratureEigenvector, SmearedGramApproachesIdentity) {
  // sum_j dx G(x_i, x_j) f(x_j) with G the truncated Gram kernel should
  // reproduce a smooth f better as N grows.
  const double dx = 0.01;
  auto f = [](double x) { return std::exp(-0.5 * (x - 0.3) * (x - 0.3)); };
  auto smear_error = [&](std::size_t N) {
    CVector acc = CVector::Zero(static_cast<Eigen::Index>(N));
    for (int j = -1200; j <= 1200; ++j) acc += dx * f(dx * j) * quadrature_amplitudes(dx * j, 0.4, N);
    double worst = 0.0;
    for (double x : {-1.0, 0.0, 0.5, 1.5}) worst = std::max(worst, std::abs(quadrature_amplitudes(x, 0.4, N).dot(acc) - f(x)));
    return worst;
  };
  const double e40 = smear_error(40), e60 = smear_error(60);
  EXPECT_LT(e60, e40);
  EXPECT_LT(e60, 1e-3);
}

TEST(ModeOps, QuadratureIdentity) {
  const std::size_t N = 20;
  const double th = 0.77;
  const CMatrix a = ModeOp::annihilate(0).matrix(N);
  const CMatrix ad = ModeOp::create(0).matrix(N);
  const CMatrix x = ModeOp::quadrature(0, th).matrix(N);
  EXPECT_LE((x - (a * std::polar(1.0, -th) + ad * std::polar(1.0, th))).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ModeOps, CommutatorOnLowSubspace) {
  const std::size_t N = 25;
  const CMatrix a = ModeOp::annihilate(0).matrix(N);
  const CMatrix c = a * a.adjoint() - a.adjoint() * a;
  EXPECT_LE((c.topLeftCorner(N - 1, N - 1) - CMatrix::Identity(N - 1, N - 1)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ModeOps, DisplacementMatchesExponentialAndIsUnitary) {
  const std::size_t N = 40;
  const Complex alpha(0.9, -1.4);
  const CMatrix D = displacement_matrix(alpha, N);
  const std::size_t pad = N + 80;
  const CMatrix a = ModeOp::annihilate(0).matrix(pad);
  const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  const CMatrix ref = gen.exp().topLeftCorner(N, N);
  EXPECT_LE((D - ref).cwiseAbs().maxCoeff(), 1e-8);
  // columns whose support fits inside the truncation are orthonormal
  const CMatrix low = D.leftCols(10);
  EXPECT_LE((low.adjoint() * low - CMatrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ModeOps, DisplacementMatchesExtendedPrecisionRecurrence) {
  // D|n> = (a^dag - conj(alpha))^n D|0> / sqrt(n!), run in 50-digit arithmetic.
  using boost::multiprecision::cpp_bin_float_50;
  using mc = boost::multiprecision::cpp_complex_50;
  const int N = 40;
  const Complex alpha(0.9, -1.4);
  const mc al(0.9, -1.4);
  std::vector<std::vector<mc>> M(N, std::vector<mc>(N));
  mc t = exp(-cpp_bin_float_50(std::norm(alpha)) / 2);
  for (int m = 0; m < N; ++m) {
    M[m][0] = t;
    t = t * al / sqrt(cpp_bin_float_50(m + 1));
  }
  for (int n = 1; n < N; ++n)
    for (int m = 0; m < N; ++m) {
      mc v = -conj(al) * M[m][n - 1];
      if (m > 0) v += sqrt(cpp_bin_float_50(m)) * M[m - 1][n - 1];
      M[m][n] = v / sqrt(cpp_bin_float_50(n));
    }
  const CMatrix D = displacement_matrix(alpha, N);
  for (int m = 0; m < N; ++m)
    for (int n = 0; n < N; ++n)
      EXPECT_LE(std::abs(D(m, n) - Complex(double(M[m][n].real()), double(M[m][n].imag()))), 1e-13);
}

TEST(ModeOps, TriangularExponentialsAreExact) {
  const std::size_t N = 15;
  const Complex mu(0.4, 0.3);
  const CMatrix a = ModeOp::annihilate(0).matrix(N);
  const CMatrix ref = (mu * a).exp();
  EXPECT_LE((detail::exp_annihilation(mu, N) - ref).cwiseAbs().maxCoeff(), 1e-13);
  std::mt19937_64 rng(3);
  const auto v = random_state(1, N, N - 1, rng);
  EXPECT_LE((apply_exp_annihilation(mu, v.amplitudes()) - ref * v.amplitudes()).cwiseAbs().maxCoeff(), 1e-13);
  const CMatrix refc = (mu * a.adjoint()).exp();
  EXPECT_LE((apply_exp_creation(mu, v.amplitudes()) - refc * v.amplitudes()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Beamsplitter, BlocksAreUnitary) {
  const auto blocks = beamsplitter_blocks(58);
  for (const auto& b : blocks) {
    const auto n = b.rows();
    EXPECT_LE((b.adjoint() * b - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12) << n;
  }
}

TEST(Beamsplitter, CoherentInputs) {
  const Complex alpha(1.0, 0.2), beta(-0.3, 0.5);
  const std::size_t N = 30;
  const auto in = tensor(coherent_state(alpha, N), coherent_state(beta, N));
  const auto out = beamsplitter_5050(in, 0, 1);
  const auto expected = tensor(coherent_state((alpha - beta) / std::numbers::sqrt2, N),
                               coherent_state((alpha + beta) / std::numbers::sqrt2, N));
  EXPECT_NEAR(state_fidelity(out, expected), 1.0, 1e-10);
}

TEST(Beamsplitter, VacuumAndSinglePhoton) {
  const auto vac = beamsplitter_5050(FockVector::basis(5, {0, 0}), 0, 1);
  EXPECT_NEAR(std::abs(vac.at({0, 0}) - 1.0), 0.0, 1e-15);
  const auto one = beamsplitter_5050(FockVector::basis(5, {1, 0}), 0, 1);
  EXPECT_NEAR(one.at({1, 0}).real(), 1 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(one.at({0, 1}).real(), 1 / std::numbers::sqrt2, 1e-15);
  const auto other = beamsplitter_5050(FockVector::basis(5, {0, 1}), 0, 1);
  EXPECT_NEAR(other.at({1, 0}).real(), -1 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(other.at({0, 1}).real(), 1 / std::numbers::sqrt2, 1e-15);
}

TEST(Beamsplitter, ConservesEnergyAndNorm) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_state(3, 8, 7, rng);
    const auto out = beamsplitter_5050(in, 2, 0);
    EXPECT_NEAR(out.norm_squared(), 1.0, 1e-12);
    const double e_in = expectation(in, ModeOp::number(0)).real() + expectation(in, ModeOp::number(2)).real();
    const double e_out = expectation(out, ModeOp::number(0)).real() + expectation(out, ModeOp::number(2)).real();
    EXPECT_NEAR(e_in, e_out, 1e-10);
    EXPECT_NEAR(expectation(in, ModeOp::number(1)).real(), expectation(out, ModeOp::number(1)).real(), 1e-12);
  }
}

TEST(Beamsplitter, RejectsIdenticalModes) {
  EXPECT_THROW(beamsplitter_5050(FockVector::basis(4, {0, 0}), 1, 1), std::invalid_argument);
}

TEST(PartialTrace, ProductState) {
  std::mt19937_64 rng(9);
  const auto a = random_state(1, 6, 5, rng);
  const auto b = random_state(1, 6, 5, rng);
  const auto rho_a = DensityMatrix::from_pure(a);
  const auto rho = tensor(rho_a, DensityMatrix::from_pure(b));
  const auto red = partial_trace(rho, {0});
  EXPECT_LE((red.entries() - rho_a.entries()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(red.hermiticity_error(), 1e-12);
  EXPECT_NEAR(red.trace(), 1.0, 1e-12);
}

TEST(PartialTrace, TwoModeSqueezedMarginalIsThermal) {
  const double eta = 0.6;
  const auto v = two_mode_squeezed(eta, 0.4, 20);
  const auto red = partial_trace(DensityMatrix::from_pure(v), {0});
  const auto red2 = reduced_density(v, {0});
  for (int m = 0; m < 20; ++m)
    for (int n = 0; n < 20; ++n) {
      const double expected = (m == n) ? (1 - eta * eta) * std::pow(eta, 2.0 * n) : 0.0;
      EXPECT_NEAR(std::abs(red.entries()(m, n) - expected), 0.0, 1e-14);
      EXPECT_NEAR(std::abs(red2.entries()(m, n) - red.entries()(m, n)), 0.0, 1e-15);
    }
}

TEST(PartialTrace, MaximallyMixedFactor) {
  const DensityMatrix mixed(1, 2, CMatrix::Identity(2, 2) * 0.5);
  const auto other = DensityMatrix::from_pure(FockVector::basis(2, {1}));
  const auto red = partial_trace(tensor(mixed, other), {0});
  EXPECT_NEAR(red.trace(), 1.0, 1e-15);
}

TEST(PartialTrace, RejectsEmptyKeepSet) {
  const auto rho = DensityMatrix::from_pure(FockVector::basis(3, {0, 0}));
  EXPECT_THROW(partial_trace(rho, {}), std::invalid_argument);
}

TEST(PermuteModes, SwapsFactors) {
  const auto a = DensityMatrix::from_pure(coherent_state(0.5, 6, 1.0));
  const auto b = DensityMatrix::from_pure(FockVector::basis(6, {2}));
  const std::vector<std::size_t> swap{1, 0};
  const auto p = permute_modes(tensor(a, b), swap);
  EXPECT_LE((p.entries() - tensor(b, a).entries()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fidelity, PureCases) {
  const auto a = coherent_state(1.0, 30);
  EXPECT_NEAR(state_fidelity(a, a), 1.0, 1e-14);
  EXPECT_EQ(state_fidelity(FockVector::basis(4, {0}), FockVector::basis(4, {1})), 0.0);
  EXPECT_NEAR(state_fidelity(a, coherent_state(1.5, 30)), std::exp(-0.25), 1e-8);
}

TEST(Fidelity, UhlmannAgreesWithPureFormula) {
  const auto a = coherent_state(Complex(0.3, 0.4), 20);
  const auto b = coherent_state(Complex(-0.2, 0.1), 20);
  const double pure = state_fidelity(a, b);
  EXPECT_NEAR(state_fidelity(DensityMatrix::from_pure(a), DensityMatrix::from_pure(b)), pure, 1e-8);
  EXPECT_NEAR(state_fidelity(a, DensityMatrix::from_pure(b)), pure, 1e-13);
}

TEST(Fidelity, RejectsMismatchAndImproper) {
  EXPECT_THROW(state_fidelity(FockVector::basis(4, {0}), FockVector::basis(5, {0})), std::invalid_argument);
  EXPECT_THROW(state_fidelity(quadrature_eigenvector(0.0, 0.0, 4), FockVector::basis(4, {0})), std::invalid_argument);
}

TEST(ProjectMode, ContractsOneFactor) {
  const auto a = coherent_state(0.4, 12);
  const auto b = FockVector::basis(12, {3});
  const auto q = quadrature_amplitudes(0.3, 0.2, 12);
  const auto proj = project_mode(tensor(a, b), 0, q);
  const Complex scale = q.dot(a.amplitudes());
  EXPECT_TRUE(proj.is_improper());
  EXPECT_LE((proj.amplitudes() - scale * b.amplitudes()).cwiseAbs().maxCoeff(), 1e-15);
}
