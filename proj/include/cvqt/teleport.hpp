#pragma once

// Continuous-variable teleportation with a phase-unknown pump.
//
// Alice mixes the input with mode 1 of the two-mode squeezed state on a
// 50/50 beamsplitter and reads x1 (LO phase phi) and x2 (LO phase
// phi + pi/2); gamma = (x1 + i x2) / sqrt2. Projecting gives the map
//
//   T8 = c0 exp(-beta a2^dag) P exp(gamma* e^{-i phi} a_in),
//   c0 = e^{-|gamma|^2/2} sqrt((1 - eta^2) / 2 pi),
//   P = sum_n eta'^n |n>_2 <n|_in,  eta' = eta e^{i(psi - 2 phi)},
//   beta = eta' gamma e^{i phi},
//
// with psi the pump phase of the squeezed state. Bob then displaces mode 2
// by D(eta gamma e^{i phi_B}). All three factors are triangular in the Fock
// basis, so every matrix element below the truncation is computed exactly.
//
// Outcome densities are with respect to dx1 dx2 (= 2 d^2 gamma).

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "cvqt/fock.hpp"
#include "cvqt/laser.hpp"
#include "cvqt/obpm.hpp"

namespace cvqt::teleport {

using laser::PhaseEnsemble;

struct DualOutcome {
  double x1 = 0.0;
  double x2 = 0.0;

  Complex gamma() const { return Complex(x1, x2) / std::numbers::sqrt2; }
  static DualOutcome from_gamma(Complex g) { return {std::numbers::sqrt2 * g.real(), std::numbers::sqrt2 * g.imag()}; }
};

/// Matrix from the input mode (columns) to mode 2 (rows).
struct TransferOp {
  double eta = 0.0;
  Complex gamma{};
  double phi = 0.0;
  CMatrix matrix;
};

namespace detail {

inline void check_eta(double eta) {
  if (!(eta >= 0.0) || !(eta < 1.0)) throw std::invalid_argument("teleport: eta must lie in [0, 1)");
}

inline CMatrix exp_creation(Complex nu, std::size_t N) { return cvqt::detail::exp_annihilation(nu, N).transpose(); }

inline CVector eta_powers(Complex eta_p, std::size_t N) {
  CVector d(static_cast<Eigen::Index>(N));
  Complex c = 1.0;
  for (std::size_t n = 0; n < N; ++n) {
    d[Eigen::Index(n)] = c;
    c *= eta_p;
  }
  return d;
}

struct Params {
  double eta;
  Complex eta_p;  // eta e^{i(psi - 2 phi)}
  Complex mu;     // gamma* e^{-i phi}
  Complex beta;   // eta' gamma e^{i phi}
  double log_c0;  // log of e^{-|gamma|^2/2} sqrt((1 - eta^2) / 2 pi)
};

inline Params params(double eta, double phase2, Complex gamma, double phi) {
  check_eta(eta);
  const Complex eta_p = eta * std::polar(1.0, phase2 - 2.0 * phi);
  return {eta, eta_p, std::conj(gamma) * std::polar(1.0, -phi), eta_p * gamma * std::polar(1.0, phi),
          -0.5 * std::norm(gamma) + 0.5 * std::log((1.0 - eta * eta) / (2.0 * std::numbers::pi))};
}

/// P exp(mu a_in) psi.
inline CVector middle(const Params& p, const CVector& psi) {
  return eta_powers(p.eta_p, std::size_t(psi.size())).cwiseProduct(apply_exp_annihilation(p.mu, psi));
}

/// log || T8 psi ||^2, exact: ||e^{-beta a^dag} v||^2 = e^{|beta|^2} ||e^{-beta* a} v||^2.
inline double log_norm2(const Params& p, const CVector& v) {
  const double n2 = apply_exp_annihilation(-std::conj(p.beta), v).squaredNorm();
  if (n2 == 0.0) return -std::numeric_limits<double>::infinity();
  return 2.0 * p.log_c0 + std::norm(p.beta) + std::log(n2);
}

/// D(beta_b) T8 psi below the truncation, given v = P exp(mu a) psi:
///   c0 e^{-|beta_b|^2/2 + beta_b* beta} e^{(beta_b - beta) a^dag} e^{-beta_b* a} v.
inline CVector corrected(const Params& p, Complex beta_b, const CVector& v) {
  const Complex log_pref = p.log_c0 - 0.5 * std::norm(beta_b) + std::conj(beta_b) * p.beta;
  return std::exp(log_pref) * apply_exp_creation(beta_b - p.beta, apply_exp_annihilation(-std::conj(beta_b), v));
}

}  // namespace detail

/// Alice's dual projection of the two-mode squeezed state, as a map from the
/// input mode to mode 2 (no correction applied).
inline TransferOp dual_homodyne_project(double eta, double phase2, Complex gamma, double phi, std::size_t N) {
  const auto p = detail::params(eta, phase2, gamma, phi);
  const CMatrix m = std::exp(p.log_c0) * detail::exp_creation(-p.beta, N) * detail::eta_powers(p.eta_p, N).asDiagonal() *
                    cvqt::detail::exp_annihilation(p.mu, N);
  return {eta, gamma, phi, m};
}

/// Transfer operator after Bob's shared-phase correction, pump phase 2 phi:
///   e^{-|gamma|^2 (1 - eta^2)/2} sqrt((1 - eta^2)/2 pi) exp(-eta gamma* e^{-i phi} a2) P exp(gamma* e^{-i phi} a_in).
inline TransferOp transfer_operator(double eta, Complex gamma, double phi, std::size_t N) {
  detail::check_eta(eta);
  const double pref = std::exp(-0.5 * std::norm(gamma) * (1 - eta * eta)) * std::sqrt((1 - eta * eta) / (2 * std::numbers::pi));
  const Complex mu = std::conj(gamma) * std::polar(1.0, -phi);
  const CMatrix m = pref * cvqt::detail::exp_annihilation(-eta * mu, N) * detail::eta_powers(eta, N).asDiagonal() *
                    cvqt::detail::exp_annihilation(mu, N);
  return {eta, gamma, phi, m};
}

/// Bob's unitary in the strong-LO limit: a displacement of mode 2.
inline CMatrix bob_correction(Complex gamma, double eta, double phi, std::size_t N) {
  return displacement_matrix(eta * (gamma * std::polar(1.0, phi)), N);
}

/// D(beta_b) T8 as a matrix, rows exact below the truncation.
inline CMatrix corrected_transfer(double eta, double phase2, Complex gamma, double phi, Complex beta_b, std::size_t N) {
  const auto p = detail::params(eta, phase2, gamma, phi);
  CMatrix m(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (std::size_t n = 0; n < N; ++n) {
    CVector e = CVector::Zero(Eigen::Index(N));
    e[Eigen::Index(n)] = 1.0;
    m.col(Eigen::Index(n)) = detail::corrected(p, beta_b, detail::middle(p, e));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Ensemble-level pipeline

/// Spectral decomposition of the input state (eigenvalues below 1e-14 dropped).
struct InputStates {
  std::vector<double> weights;
  std::vector<CVector> vectors;
  std::size_t dim = 0;

  static InputStates from(const DensityMatrix& rho) {
    if (rho.num_modes() != 1) throw std::invalid_argument("teleport: input must be a single mode");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.hermitian_part());
    InputStates s;
    s.dim = rho.dim();
    for (Eigen::Index i = es.eigenvalues().size(); i-- > 0;) {
      const double l = es.eigenvalues()[i];
      if (l <= 1e-14) continue;
      s.weights.push_back(l);
      s.vectors.push_back(es.eigenvectors().col(i));
    }
    if (s.weights.empty()) throw std::invalid_argument("teleport: input state has no positive spectrum");
    return s;
  }
  static InputStates from(const FockVector& v) {
    v.require_proper("teleport input");
    return {{1.0}, {v.amplitudes()}, v.dim()};
  }
};

/// Grid-independent description of the teleportation setup, read off an
/// initial ensemble built by laser::cvqt_initial_ensemble.
struct TeleportSetup {
  double eta = 0.0;
  laser::PhaseRule pump;
  laser::PhaseRule alice;  // LO of s1; s2 must be alice + pi/2
  laser::PhaseRule bob;
  double bob_amplitude = 0.0;
  InputStates input;
  std::vector<std::vector<double>> grid_phases;
  std::vector<double> grid_weights;

  static TeleportSetup from(const PhaseEnsemble& e) {
    TeleportSetup s;
    const laser::ModeRecord* tmss = nullptr;
    for (const auto& m : e.modes())
      if (m.kind == "tmss") tmss = &m;
    if (!tmss || !e.mixed()) throw std::invalid_argument("teleport: ensemble is not a teleportation initial state");
    s.eta = tmss->magnitude;
    detail::check_eta(s.eta);
    s.pump = tmss->phase;
    const auto& l1 = e.lo("l1");
    const auto& l2 = e.lo("l2");
    if (l2.phase.source != l1.phase.source || l2.phase.multiplier != l1.phase.multiplier ||
        std::abs(std::remainder(l2.phase.offset - l1.phase.offset - std::numbers::pi / 2, 2 * std::numbers::pi)) > 1e-12)
      throw std::invalid_argument("teleport: BHD2 LO must lead BHD1 LO by pi/2");
    s.alice = l1.phase;
    s.bob = e.lo("l3").phase;
    s.bob_amplitude = e.lo("l3").amplitude;
    s.input = InputStates::from(e.mixed()->rho);
    for (const auto& p : e.points()) {
      s.grid_phases.push_back(p.phases);
      s.grid_weights.push_back(p.weight);
    }
    return s;
  }
};

/// Bob's choice of phase: the true per-component phase, or a fixed guess.
struct Correction {
  bool shared_phase = true;
  double phi_guess = 0.0;
};

struct TeleportResult {
  /// Mode-2 ensemble over (grid point, input eigenvector) pairs; each
  /// component is the normalized corrected state below the truncation and
  /// carries the dropped mass as its tail.
  PhaseEnsemble output;
  /// P(x1, x2), density with respect to dx1 dx2.
  double probability_density = 0.0;
};

namespace detail {

struct ComponentOut {
  double log_prob;  // log of weight-free outcome density
  CVector state;    // normalized below truncation
  double tail;
};

inline ComponentOut run_component(const TeleportSetup& s, std::size_t k, std::size_t j, Complex gamma, const Correction& c) {
  const auto& ph = s.grid_phases[k];
  const double phi = s.alice.eval(ph);
  const auto p = params(s.eta, s.pump.eval(ph), gamma, phi);
  const CVector v = middle(p, s.input.vectors[j]);
  const double lp = log_norm2(p, v);
  const double bob_phase = c.shared_phase ? s.bob.eval(ph) : c.phi_guess;
  const Complex beta_b = s.eta * gamma * std::polar(1.0, bob_phase);
  CVector out = corrected(p, beta_b, v);
  const double kept = std::isfinite(lp) ? out.squaredNorm() / std::exp(lp) : 0.0;
  if (std::isfinite(lp)) out /= std::sqrt(std::exp(lp));
  return {lp, out, std::max(0.0, 1.0 - kept)};
}

}  // namespace detail

inline TeleportResult teleport_once(const TeleportSetup& s, DualOutcome outcome, Correction correction = {}) {
  const Complex gamma = outcome.gamma();
  const std::size_t N = s.input.dim;
  std::vector<laser::EnsemblePoint> pts;
  std::vector<double> logs;
  std::vector<detail::ComponentOut> outs;
  std::vector<std::size_t> owner;
  for (std::size_t k = 0; k < s.grid_phases.size(); ++k)
    for (std::size_t j = 0; j < s.input.weights.size(); ++j) {
      auto o = detail::run_component(s, k, j, gamma, correction);
      logs.push_back(o.log_prob + std::log(s.grid_weights[k] * s.input.weights[j]));
      outs.push_back(std::move(o));
      owner.push_back(k);
    }
  double lmax = -std::numeric_limits<double>::infinity();
  for (double l : logs) lmax = std::max(lmax, l);
  if (!std::isfinite(lmax)) throw NumericalError("teleport_once: outcome has zero probability");
  double total = 0.0;
  for (double l : logs) total += std::exp(l - lmax);
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const double w = std::exp(logs[i] - lmax) / total;
    pts.push_back({s.grid_phases[owner[i]], w,
                   FockVector(1, N, outs[i].state, FockVector::Kind::proper, outs[i].tail)});
  }
  laser::normalize_weights(pts);
  std::vector<laser::LOParam> los{{"l3", s.bob_amplitude, s.bob, 0}};
  PhaseEnsemble out(s.grid_phases.size(), 1, std::move(pts), std::move(los), {{"2", "teleported", s.eta, s.bob}});
  return {std::move(out), std::exp(lmax) * total};
}

inline TeleportResult teleport_once(const PhaseEnsemble& initial, DualOutcome outcome, Correction correction = {}) {
  return teleport_once(TeleportSetup::from(initial), outcome, correction);
}

/// P(x1, x2) summed over grid and input spectrum.
inline double outcome_density(const TeleportSetup& s, DualOutcome outcome) {
  const Complex gamma = outcome.gamma();
  double total = 0.0;
  for (std::size_t k = 0; k < s.grid_phases.size(); ++k) {
    const auto& ph = s.grid_phases[k];
    const auto p = detail::params(s.eta, s.pump.eval(ph), gamma, s.alice.eval(ph));
    for (std::size_t j = 0; j < s.input.weights.size(); ++j)
      total += s.grid_weights[k] * s.input.weights[j] * std::exp(detail::log_norm2(p, detail::middle(p, s.input.vectors[j])));
  }
  return total;
}

/// Fidelity of the mode-2 output against the input state. Components carry
/// their exact norm, so the low block of the output is exact, and the input
/// lives in that block; nothing beyond the truncation is needed.
inline double output_fidelity(const TeleportResult& r, const DensityMatrix& rho_in, const InputStates& in) {
  if (in.weights.size() == 1 && std::abs(in.weights[0] - 1.0) < 1e-12) {
    double f = 0.0;
    for (const auto& p : r.output.points()) f += p.weight * std::norm(in.vectors[0].dot(p.component.amplitudes()));
    return f;
  }
  const std::size_t N = rho_in.dim();
  CMatrix out = CMatrix::Zero(Eigen::Index(N), Eigen::Index(N));
  for (const auto& p : r.output.points()) out += p.weight * p.component.amplitudes() * p.component.amplitudes().adjoint();
  return state_fidelity(rho_in, DensityMatrix(1, N, out));
}

inline double output_fidelity(const TeleportResult& r, const DensityMatrix& rho_in) {
  return output_fidelity(r, rho_in, InputStates::from(rho_in));
}

// ---------------------------------------------------------------------------
// Sampling experiment

struct ExperimentOptions {
  std::size_t grid_size = 64;  // K
  // Reading grid: +-(half_width w + 2 sqrt(<n_in>)) with step w * step, where
  // w = 1/sqrt(1 - eta^2) is the width of the outcome distribution.
  double outcome_half_width = 8.0;
  double outcome_step = 0.05;
  double lo_amplitude = 1.0e3;
};

struct FidelityRow {
  double eta = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  /// probability mass of the fixed-phase outcome density captured by the grid
  double grid_mass = 0.0;
};

namespace detail {

/// Fixed-phase outcome density p0(x1, x2): the grid point with phi = 0 and
/// the rigid pump offset. Every other grid point is a rotation of it.
struct FixedPhaseGrid {
  obpm::QuadratureGrid grid;
  std::vector<double> density;
  double mass = 0.0;
};

inline FixedPhaseGrid fixed_phase_density(const TeleportSetup& s, const obpm::QuadratureGrid& grid) {
  // psi - 2 phi is the same at every grid point for affine rules
  const double offset = s.pump.eval(s.grid_phases[0]) - 2.0 * s.alice.eval(s.grid_phases[0]);
  FixedPhaseGrid f{grid, std::vector<double>(grid.count * grid.count), 0.0};
  for (std::size_t i = 0; i < grid.count; ++i)
    for (std::size_t jj = 0; jj < grid.count; ++jj) {
      const Complex g = DualOutcome{grid.x(i), grid.x(jj)}.gamma();
      const auto p = params(s.eta, offset, g, 0.0);
      double d = 0.0;
      for (std::size_t j = 0; j < s.input.weights.size(); ++j)
        d += s.input.weights[j] * std::exp(log_norm2(p, middle(p, s.input.vectors[j])));
      f.density[i * grid.count + jj] = d;
      f.mass += d;
    }
  f.mass *= grid.step * grid.step;
  return f;
}

inline void check_rigid(const TeleportSetup& s) {
  const double offset = s.pump.eval(s.grid_phases[0]) - 2.0 * s.alice.eval(s.grid_phases[0]);
  for (const auto& ph : s.grid_phases)
    if (std::abs(std::remainder(s.pump.eval(ph) - 2.0 * s.alice.eval(ph) - offset, 2 * std::numbers::pi)) > 1e-9)
      throw std::invalid_argument("teleport: pump phase must follow twice the LO phase");
}

}  // namespace detail

/// Mean fidelity of the teleported state over sampled outcomes, per eta.
/// Outcomes are drawn by picking a grid point by weight, drawing the
/// rotated reading beta from the fixed-phase density, and setting
/// gamma = beta e^{-i phi_k}.
inline std::vector<FidelityRow> fidelity_experiment(const std::vector<double>& etas, const DensityMatrix& rho_in,
                                                    Correction correction, std::size_t num_samples, std::uint64_t seed,
                                                    ExperimentOptions opt = {}) {
  if (num_samples < 2) throw std::invalid_argument("fidelity_experiment: need at least two samples");
  std::vector<FidelityRow> rows;
  const double n_in = std::real((rho_in.entries() * ModeOp::number(0).matrix(rho_in.dim())).trace());
  for (std::size_t ie = 0; ie < etas.size(); ++ie) {
    const double eta = etas[ie];
    detail::check_eta(eta);
    const double w = 1.0 / std::sqrt(1.0 - eta * eta);
    const auto grid = obpm::QuadratureGrid::symmetric(opt.outcome_half_width * w + 2.0 * std::sqrt(std::max(n_in, 0.0)),
                                                      opt.outcome_step * w);
    const auto initial = laser::cvqt_initial_ensemble(opt.lo_amplitude, eta, rho_in, opt.grid_size, rho_in.dim(), 1.0);
    const TeleportSetup s = TeleportSetup::from(initial);
    detail::check_rigid(s);
    const auto fixed = detail::fixed_phase_density(s, grid);
    const obpm::GridSampler2D sampler(fixed.density, grid, grid);
    std::vector<double> cdf(s.grid_weights.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < cdf.size(); ++k) cdf[k] = (acc += s.grid_weights[k]);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t n = 0; n < num_samples; ++n) {
      std::mt19937_64 rng(obpm::stream_seed(seed, (std::uint64_t(ie) << 40) | n));
      const double u = obpm::uniform01(rng) * acc;
      const std::size_t k = std::min<std::size_t>(std::size_t(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()),
                                                   cdf.size() - 1);
      const auto [b1, b2] = sampler.sample(rng);
      const Complex gamma = DualOutcome{b1, b2}.gamma() * std::polar(1.0, -s.alice.eval(s.grid_phases[k]));
      const auto r = teleport_once(s, DualOutcome::from_gamma(gamma), correction);
      const double f = output_fidelity(r, rho_in, s.input);
      sum += f;
      sum2 += f * f;
    }
    const double mean = sum / double(num_samples);
    const double var = std::max(0.0, (sum2 - double(num_samples) * mean * mean) / double(num_samples - 1));
    rows.push_back({eta, mean, std::sqrt(var / double(num_samples)), num_samples, fixed.mass});
  }
  return rows;
}

}  // namespace cvqt::teleport
