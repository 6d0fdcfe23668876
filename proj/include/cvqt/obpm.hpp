#pragma once

// Balanced homodyne detection in the observable-based projection picture.
//
// Each ensemble component is measured against its own LO: the outcome
// density is P(x) = sum_k w_k |<x, theta_k | psi_k>|^2 with theta_k the
// phase of the LO paired with the signal mode at grid point k. The
// post-measurement signal factor is the truncated quadrature eigenvector,
// renormalized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cvqt/fock.hpp"
#include "cvqt/laser.hpp"

namespace cvqt::obpm {

using laser::PhaseEnsemble;

/// Uniform quadrature grid x_i = x_min + i * step, i = 0 .. count - 1.
struct QuadratureGrid {
  double x_min = -12.0;
  double step = 0.01;
  std::size_t count = 2401;

  static QuadratureGrid symmetric(double half_width, double step) {
    if (!(step > 0.0) || !(half_width > 0.0)) throw std::invalid_argument("QuadratureGrid: step and range must be positive");
    const auto half = static_cast<std::size_t>(std::llround(half_width / step));
    return {-double(half) * step, step, 2 * half + 1};
  }

  /// Range +-(12 + 4 * max_amplitude).
  static QuadratureGrid adaptive(double max_amplitude, double step = 0.01) {
    return symmetric(12.0 + 4.0 * max_amplitude, step);
  }

  double x(std::size_t i) const { return x_min + double(i) * step; }
  double x_max() const { return x(count - 1); }
  std::vector<double> points() const {
    std::vector<double> p(count);
    for (std::size_t i = 0; i < count; ++i) p[i] = x(i);
    return p;
  }
};

/// Rows x_i, columns n: <n | x_i, 0>. The theta dependence is the diagonal
/// phase e^{i n theta}, applied on the fly.
class MeasurementKernel {
 public:
  MeasurementKernel(QuadratureGrid grid, std::size_t N) : grid_(grid), N_(N), table_(grid.count, N) {
    for (std::size_t i = 0; i < grid.count; ++i) {
      const CVector q = quadrature_amplitudes(grid.x(i), 0.0, N);
      for (std::size_t n = 0; n < N; ++n) table_(Eigen::Index(i), Eigen::Index(n)) = q[Eigen::Index(n)].real();
    }
  }

  const QuadratureGrid& grid() const { return grid_; }
  std::size_t dim() const { return N_; }
  const Eigen::MatrixXd& table() const { return table_; }

  /// <x_i, theta | psi> for every grid point.
  CVector overlaps(const CVector& psi, double theta) const {
    CVector rotated(psi.size());
    for (Eigen::Index n = 0; n < psi.size(); ++n) rotated[n] = psi[n] * std::polar(1.0, -theta * double(n));
    return table_.cast<Complex>() * rotated;
  }

  /// sum_i step <m|x_i,theta><x_i,theta|n> on the first `block` levels.
  CMatrix completeness(double theta, std::size_t block) const {
    const auto b = Eigen::Index(std::min(block, N_));
    const Eigen::MatrixXd t = table_.leftCols(b);
    CMatrix g = (t.transpose() * t * grid_.step).cast<Complex>();
    for (Eigen::Index m = 0; m < b; ++m)
      for (Eigen::Index n = 0; n < b; ++n) g(m, n) *= std::polar(1.0, theta * double(m - n));
    return g;
  }

 private:
  QuadratureGrid grid_;
  std::size_t N_;
  Eigen::MatrixXd table_;
};

namespace detail {

inline double signal_theta(const PhaseEnsemble& e, std::size_t signal_mode, std::size_t k) {
  return e.lo_phase(e.lo_for_mode(signal_mode), k);
}

/// || <x, theta|_mode psi ||^2 times the trace of the untouched mixed slot,
/// or <x|rho|x> times ||psi||^2 when the signal is the mixed slot.
inline double component_probability(const PhaseEnsemble& e, std::size_t signal_mode, std::size_t k, const CVector& bra) {
  const auto& comp = e.point(k).component;
  const auto pi = e.pure_index(signal_mode);
  if (!pi) {
    const Complex v = bra.dot(e.mixed()->rho.entries() * bra);
    return v.real() * comp.norm_squared();
  }
  const double mixed_trace = e.mixed() ? e.mixed()->rho.trace() : 1.0;
  if (comp.num_modes() == 1) return std::norm(bra.dot(comp.amplitudes())) * mixed_trace;
  return project_mode(comp, *pi, bra).norm_squared() * mixed_trace;
}

}  // namespace detail

/// Outcome density at x_bar.
inline double homodyne_probability(const PhaseEnsemble& e, std::size_t signal_mode, double x_bar) {
  double p = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const CVector bra = quadrature_amplitudes(x_bar, detail::signal_theta(e, signal_mode, k), e.dim());
    p += e.point(k).weight * detail::component_probability(e, signal_mode, k, bra);
  }
  return p;
}

/// Outcome density on every point of the kernel grid. Single-mode pure
/// ensembles take the fast path through the cached kernel table.
inline std::vector<double> homodyne_density(const PhaseEnsemble& e, std::size_t signal_mode, const MeasurementKernel& kernel) {
  if (kernel.dim() != e.dim()) throw std::invalid_argument("homodyne_density: kernel truncation does not match ensemble");
  const auto& grid = kernel.grid();
  std::vector<double> out(grid.count, 0.0);
  if (e.num_modes() == 1 && !e.mixed()) {
    for (std::size_t k = 0; k < e.size(); ++k) {
      const CVector ov = kernel.overlaps(e.point(k).component.amplitudes(), detail::signal_theta(e, signal_mode, k));
      const double w = e.point(k).weight;
      for (std::size_t i = 0; i < grid.count; ++i) out[i] += w * std::norm(ov[Eigen::Index(i)]);
    }
    return out;
  }
  for (std::size_t i = 0; i < grid.count; ++i) out[i] = homodyne_probability(e, signal_mode, grid.x(i));
  return out;
}

/// Trapezoid integral of a density sampled on the grid.
inline double integrate(const std::vector<double>& density, const QuadratureGrid& grid) {
  double s = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i)
    s += (i == 0 || i + 1 == density.size() ? 0.5 : 1.0) * density[i];
  return s * grid.step;
}

/// Mean and variance of a density sampled on the grid.
inline std::pair<double, double> moments(const std::vector<double>& density, const QuadratureGrid& grid) {
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    const double x = grid.x(i);
    z += density[i];
    m1 += density[i] * x;
    m2 += density[i] * x * x;
  }
  m1 /= z;
  return {m1, m2 / z - m1 * m1};
}

/// Post-measurement ensemble for reading x_bar on signal_mode. The signal
/// factor becomes the renormalized truncation of |x_bar, theta_k>; grid
/// weights are reweighted by the component outcome probability.
inline PhaseEnsemble homodyne_update(const PhaseEnsemble& e, std::size_t signal_mode, double x_bar) {
  const auto pi = e.pure_index(signal_mode);
  if (!pi) throw std::invalid_argument("homodyne_update: the mixed slot cannot be measured in place");
  std::vector<laser::EnsemblePoint> pts;
  pts.reserve(e.size());
  double total = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const auto& comp = e.point(k).component;
    const CVector bra = quadrature_amplitudes(x_bar, detail::signal_theta(e, signal_mode, k), e.dim());
    const FockVector measured = FockVector(1, e.dim(), bra, FockVector::Kind::improper).normalized();
    double pk;
    FockVector next;
    if (comp.num_modes() == 1) {
      pk = std::norm(bra.dot(comp.amplitudes()));
      next = measured;
    } else {
      const FockVector rest = project_mode(comp, *pi, bra);
      pk = rest.norm_squared();
      if (pk > 0.0) {
        // reinsert the measured mode at its slot: rest has the signal mode removed
        const FockVector rn = rest.normalized();
        const std::size_t before = *pi;
        const std::size_t outer = ipow(e.dim(), before);
        const std::size_t inner = ipow(e.dim(), comp.num_modes() - 1 - before);
        CVector amp(Eigen::Index(comp.size()));
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t n = 0; n < e.dim(); ++n)
            for (std::size_t i = 0; i < inner; ++i)
              amp[Eigen::Index((o * e.dim() + n) * inner + i)] = rn[o * inner + i] * measured[n];
        next = FockVector(comp.num_modes(), e.dim(), std::move(amp));
      } else {
        next = comp;
      }
    }
    const double w = e.point(k).weight * pk;
    total += w;
    pts.push_back({e.point(k).phases, w, std::move(next)});
  }
  if (!(total > 0.0)) throw NumericalError("homodyne_update: outcome has zero probability");
  laser::normalize_weights(pts);
  return e.with_points(std::move(pts), e.mixed());
}

// ---------------------------------------------------------------------------
// Sampling

/// Deterministic 64-bit mixer; derives independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) with 53 random bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

/// Piecewise-constant inverse-CDF sampler: bin i is centred on x_i with
/// width step and mass proportional to density[i].
class GridSampler {
 public:
  GridSampler(const std::vector<double>& density, const QuadratureGrid& grid) : grid_(grid), cdf_(density.size() + 1, 0.0) {
    if (density.size() != grid.count) throw std::invalid_argument("GridSampler: density size does not match grid");
    for (std::size_t i = 0; i < density.size(); ++i) {
      if (!(density[i] >= -1e-14) || !std::isfinite(density[i]))
        throw NumericalError("GridSampler: density is negative or non-finite; grid too coarse or truncation too small");
      cdf_[i + 1] = cdf_[i] + std::max(density[i], 0.0);
    }
    if (!(cdf_.back() > 0.0)) throw NumericalError("GridSampler: density has no mass on the grid");
    for (double& c : cdf_) c /= cdf_.back();
  }

  double sample(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t bin = std::size_t(it - cdf_.begin());
    bin = std::clamp<std::size_t>(bin, 1, grid_.count) - 1;
    return grid_.x(bin) + (uniform01(rng) - 0.5) * grid_.step;
  }

  /// Probability mass of each bin.
  double mass(std::size_t i) const { return cdf_[i + 1] - cdf_[i]; }

 private:
  QuadratureGrid grid_;
  std::vector<double> cdf_;
};

/// Two-dimensional version over grid_x (slow, rows) x grid_y (fast).
class GridSampler2D {
 public:
  GridSampler2D(const std::vector<double>& density, const QuadratureGrid& gx, const QuadratureGrid& gy)
      : gx_(gx), gy_(gy) {
    if (density.size() != gx.count * gy.count) throw std::invalid_argument("GridSampler2D: density size mismatch");
    std::vector<double> marginal(gx.count, 0.0);
    rows_.reserve(gx.count);
    for (std::size_t i = 0; i < gx.count; ++i) {
      std::vector<double> row(density.begin() + std::ptrdiff_t(i * gy.count),
                              density.begin() + std::ptrdiff_t((i + 1) * gy.count));
      for (double v : row) marginal[i] += std::max(v, 0.0);
      if (marginal[i] == 0.0) row.assign(gy.count, 1.0);  // never selected
      rows_.emplace_back(row, gy);
    }
    marginal_.emplace(marginal, gx);
  }

  std::pair<double, double> sample(std::mt19937_64& rng) const {
    const double x = marginal_->sample(rng);
    const auto i = std::size_t(std::clamp<long long>(std::llround((x - gx_.x_min) / gx_.step), 0, (long long)gx_.count - 1));
    return {x, rows_[i].sample(rng)};
  }

 private:
  QuadratureGrid gx_, gy_;
  std::optional<GridSampler> marginal_;
  std::vector<GridSampler> rows_;
};

struct HomodyneOutcome {
  double x_bar = 0.0;
  double lo_amplitude = 0.0;
  /// Grid weights conditioned on the outcome.
  std::vector<double> conditional_weights;
};

/// Draws one reading from the discretized outcome density and resolves the
/// conditional grid weights.
inline HomodyneOutcome sample_outcome(const PhaseEnsemble& e, std::size_t signal_mode, std::uint64_t seed,
                                      const MeasurementKernel& kernel) {
  const GridSampler sampler(homodyne_density(e, signal_mode, kernel), kernel.grid());
  std::mt19937_64 rng(seed);
  HomodyneOutcome out;
  out.x_bar = sampler.sample(rng);
  out.lo_amplitude = e.lo_for_mode(signal_mode).amplitude;
  const double p = homodyne_probability(e, signal_mode, out.x_bar);
  for (std::size_t k = 0; k < e.size(); ++k) {
    const CVector bra = quadrature_amplitudes(out.x_bar, detail::signal_theta(e, signal_mode, k), e.dim());
    out.conditional_weights.push_back(e.point(k).weight * detail::component_probability(e, signal_mode, k, bra) / p);
  }
  return out;
}

/// Many independent readings from one seeded stream.
inline std::vector<double> sample_readings(const PhaseEnsemble& e, std::size_t signal_mode, std::uint64_t seed,
                                           std::size_t count, const MeasurementKernel& kernel) {
  const GridSampler sampler(homodyne_density(e, signal_mode, kernel), kernel.grid());
  std::mt19937_64 rng(seed);
  std::vector<double> out(count);
  for (double& x : out) x = sampler.sample(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Reference values

/// |<x, phi | 0, s>|^2 for real squeeze s: a centred Gaussian with variance
/// e^{-2s} cos^2 phi + e^{2s} sin^2 phi.
inline double squeezed_quadrature_density(double x, double s, double phi) {
  const double c = std::cos(phi), sn = std::sin(phi);
  const double var = std::exp(-2 * s) * c * c + std::exp(2 * s) * sn * sn;
  return std::exp(-0.5 * x * x / var) / std::sqrt(2 * std::numbers::pi * var);
}

struct ObservableCheck {
  /// || (a_l^dag a_s + a_l a_s^dag - r X_s(theta)) |LO>|psi> || / || r X_s |LO>|psi> ||
  double relative_residual = 0.0;
  /// sqrt(<n_s>) / (r sqrt(<X_s^2>)), the validity ratio of the approximation
  double validity_ratio = 0.0;
  /// max |<LO| a_l^dag a_s + a_l a_s^dag |LO> - r X_s| over matrix elements
  double diagonal_error = 0.0;
  std::size_t lo_dim = 0;
};

/// Compares the BHD difference-current operator with r X_s(theta) on a
/// Fock-expanded coherent LO of amplitude r e^{i theta}.
inline ObservableCheck observable_approximation(double r, double theta, const FockVector& signal) {
  signal.require_proper("observable_approximation");
  if (signal.num_modes() != 1) throw std::invalid_argument("observable_approximation: signal must be one mode");
  const Complex alpha = std::polar(r, theta);
  std::size_t lo_dim = static_cast<std::size_t>(r * r + 12.0 * r + 40.0);
  const FockVector lo = coherent_state(alpha, lo_dim);
  const std::size_t Ns = signal.dim();
  const auto L = Eigen::Index(lo_dim), S = Eigen::Index(Ns);
  // state as an L x S matrix: rows LO level, columns signal level
  const CMatrix psi = lo.amplitudes() * signal.amplitudes().transpose();
  auto lo_raise = [&](const CMatrix& m) {  // a_l^dag on rows
    CMatrix out = CMatrix::Zero(L + 1, m.cols());
    for (Eigen::Index i = 0; i < L; ++i) out.row(i + 1) = std::sqrt(double(i + 1)) * m.row(i);
    return out;
  };
  auto lo_lower = [&](const CMatrix& m) {  // a_l on rows
    CMatrix out = CMatrix::Zero(L + 1, m.cols());
    for (Eigen::Index i = 1; i < L; ++i) out.row(i - 1) = std::sqrt(double(i)) * m.row(i);
    return out;
  };
  auto sig_lower = [&](const CMatrix& m) {
    CMatrix out = CMatrix::Zero(m.rows(), S + 1);
    for (Eigen::Index j = 1; j < S; ++j) out.col(j - 1) = std::sqrt(double(j)) * m.col(j);
    return out;
  };
  auto sig_raise = [&](const CMatrix& m) {
    CMatrix out = CMatrix::Zero(m.rows(), S + 1);
    for (Eigen::Index j = 0; j < S; ++j) out.col(j + 1) = std::sqrt(double(j + 1)) * m.col(j);
    return out;
  };
  auto pad = [&](const CMatrix& m) {
    CMatrix out = CMatrix::Zero(L + 1, S + 1);
    out.topLeftCorner(m.rows(), m.cols()) = m;
    return out;
  };
  const CMatrix bhd = pad(lo_raise(sig_lower(psi).leftCols(S))) + pad(lo_lower(sig_raise(psi)).topRows(L));
  const CMatrix x_psi = sig_lower(psi) * std::polar(1.0, -theta) + sig_raise(psi) * std::polar(1.0, theta);
  const CMatrix target = pad(x_psi) * r;
  ObservableCheck out;
  out.lo_dim = lo_dim;
  out.relative_residual = (bhd - target).norm() / target.norm();
  const CMatrix X = ModeOp::quadrature(0, theta).matrix(Ns);
  const double n_s = expectation(signal, ModeOp::number(0)).real();
  const double x2 = signal.amplitudes().dot(X * X * signal.amplitudes()).real();
  out.validity_ratio = std::sqrt(n_s) / (r * std::sqrt(x2));
  // <LO| a_l^dag a_s + a_l a_s^dag |LO> on the signal space
  Complex lo_a{}, lo_adag{};
  for (Eigen::Index i = 0; i + 1 < L; ++i) lo_a += std::conj(lo.amplitudes()[i]) * std::sqrt(double(i + 1)) * lo.amplitudes()[i + 1];
  lo_adag = std::conj(lo_a);
  const CMatrix a = ModeOp::annihilate(0).matrix(Ns);
  const CMatrix reduced = lo_adag * a + lo_a * a.adjoint();
  out.diagonal_error = (reduced - r * X).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace cvqt::obpm
