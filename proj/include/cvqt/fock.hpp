#pragma once

// Truncated multi-mode Fock space: state vectors, density matrices, single-mode
// operators, the 50/50 beamsplitter, partial traces and fidelities.
//
// Layout: a k-mode state with truncation N per mode stores N^k amplitudes in
// row-major multi-index order with mode 0 varying slowest, i.e.
//   index(n_0, ..., n_{k-1}) = sum_j n_j * N^(k-1-j).

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "cvqt/specfun.hpp"

namespace cvqt {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Default hard cap on the probability mass a constructor may drop.
inline constexpr double kDefaultTailCap = 1e-8;

/// Largest Hilbert-space dimension for which dense density matrices are built.
inline constexpr std::size_t kMaxDenseDim = 4096;

/// Raised when a truncation would discard more probability than allowed.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical self-check fails (non-monotone CDF, zero-probability
/// outcome, memory budget exceeded, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

inline std::size_t flat_index(std::span<const std::size_t> occupation, std::size_t dim) {
  std::size_t idx = 0;
  for (std::size_t n : occupation) {
    if (n >= dim) throw std::out_of_range("occupation exceeds truncation");
    idx = idx * dim + n;
  }
  return idx;
}

inline std::vector<std::size_t> occupation_of(std::size_t index, std::size_t num_modes, std::size_t dim) {
  std::vector<std::size_t> occ(num_modes);
  for (std::size_t j = num_modes; j-- > 0;) {
    occ[j] = index % dim;
    index /= dim;
  }
  return occ;
}

/// Stride of a mode in the flat layout.
inline std::size_t mode_stride(std::size_t mode, std::size_t num_modes, std::size_t dim) {
  return ipow(dim, num_modes - 1 - mode);
}

/// Amplitudes over a truncated multi-mode Fock basis.
///
/// Proper vectors are physical states whose norm lies in [1 - tail_mass, 1].
/// Improper vectors (quadrature eigenvectors, conditional amplitudes after a
/// projection) carry no norm guarantee; operations that need a normalized
/// state reject them.
class FockVector {
 public:
  enum class Kind { proper, improper };

  FockVector() = default;

  FockVector(std::size_t num_modes, std::size_t dim)
      : num_modes_(num_modes), dim_(dim), amplitudes_(CVector::Zero(static_cast<Eigen::Index>(ipow(dim, num_modes)))) {
    check_shape();
  }

  FockVector(std::size_t num_modes, std::size_t dim, CVector amplitudes, Kind kind = Kind::proper,
             double tail_mass = 0.0)
      : num_modes_(num_modes), dim_(dim), amplitudes_(std::move(amplitudes)), kind_(kind), tail_mass_(tail_mass) {
    check_shape();
    if (static_cast<std::size_t>(amplitudes_.size()) != ipow(dim, num_modes)) {
      throw std::invalid_argument("FockVector: amplitude count does not match dim^num_modes");
    }
  }

  /// Fock basis state |n_0, ..., n_{k-1}>.
  static FockVector basis(std::size_t dim, std::span<const std::size_t> occupation) {
    FockVector v(occupation.size(), dim);
    v.amplitudes_[static_cast<Eigen::Index>(flat_index(occupation, dim))] = 1.0;
    return v;
  }
  static FockVector basis(std::size_t dim, std::initializer_list<std::size_t> occupation) {
    return basis(dim, std::span<const std::size_t>(occupation.begin(), occupation.size()));
  }

  std::size_t num_modes() const { return num_modes_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return static_cast<std::size_t>(amplitudes_.size()); }
  const CVector& amplitudes() const { return amplitudes_; }
  CVector& amplitudes() { return amplitudes_; }
  Complex operator[](std::size_t i) const { return amplitudes_[static_cast<Eigen::Index>(i)]; }
  Complex at(std::initializer_list<std::size_t> occupation) const {
    return amplitudes_[static_cast<Eigen::Index>(
        flat_index(std::span<const std::size_t>(occupation.begin(), occupation.size()), dim_))];
  }

  Kind kind() const { return kind_; }
  bool is_improper() const { return kind_ == Kind::improper; }
  /// Probability mass outside the truncated basis (proper states only).
  double tail_mass() const { return tail_mass_; }

  double norm_squared() const { return amplitudes_.squaredNorm(); }

  /// Unit-norm proper copy. Used to turn a projected or truncated improper
  /// vector into something downstream operations accept.
  FockVector normalized() const {
    const double n = std::sqrt(norm_squared());
    if (!(n > 0.0)) throw NumericalError("cannot normalize a zero vector");
    return FockVector(num_modes_, dim_, amplitudes_ / n, Kind::proper, 0.0);
  }

  void require_proper(const char* what) const {
    if (is_improper()) throw std::invalid_argument(std::string(what) + ": improper (delta-normalized) vector not accepted");
  }

 private:
  void check_shape() const {
    if (num_modes_ == 0) throw std::invalid_argument("FockVector: num_modes must be positive");
    if (dim_ == 0) throw std::invalid_argument("FockVector: dim must be positive");
  }

  std::size_t num_modes_ = 1;
  std::size_t dim_ = 1;
  CVector amplitudes_ = CVector::Ones(1);
  Kind kind_ = Kind::proper;
  double tail_mass_ = 0.0;
};

/// Density operator over a truncated multi-mode Fock basis.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(std::size_t num_modes, std::size_t dim, CMatrix entries)
      : num_modes_(num_modes), dim_(dim), entries_(std::move(entries)) {
    const auto n = static_cast<Eigen::Index>(ipow(dim, num_modes));
    if (entries_.rows() != n || entries_.cols() != n) {
      throw std::invalid_argument("DensityMatrix: matrix shape does not match dim^num_modes");
    }
  }

  static DensityMatrix from_pure(const FockVector& v) {
    v.require_proper("DensityMatrix::from_pure");
    if (v.size() > kMaxDenseDim) throw NumericalError("DensityMatrix::from_pure: dimension exceeds dense budget");
    return {v.num_modes(), v.dim(), v.amplitudes() * v.amplitudes().adjoint()};
  }

  std::size_t num_modes() const { return num_modes_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }
  const CMatrix& entries() const { return entries_; }
  CMatrix& entries() { return entries_; }

  double trace() const { return entries_.trace().real(); }

  double hermiticity_error() const { return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff(); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  CMatrix hermitian_part() const { return 0.5 * (entries_ + entries_.adjoint()); }

  DensityMatrix normalized() const {
    const double t = trace();
    if (!(t > 0.0)) throw NumericalError("cannot normalize a density matrix with non-positive trace");
    return {num_modes_, dim_, entries_ / t};
  }

 private:
  std::size_t num_modes_ = 1;
  std::size_t dim_ = 1;
  CMatrix entries_ = CMatrix::Ones(1, 1);
};

// ---------------------------------------------------------------------------
// Single-mode operators

namespace detail {

inline CMatrix annihilation_matrix(std::size_t dim) {
  CMatrix a = CMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t n = 1; n < dim; ++n) a(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(double(n));
  return a;
}

// exp(mu a) in the truncated basis. The matrix is upper triangular and its
// entries mu^j / j! sqrt((m+j)!/m!) are exact: a never maps into the
// discarded part of the basis.
inline CMatrix exp_annihilation(Complex mu, std::size_t dim) {
  CMatrix e = CMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t m = 0; m < dim; ++m) {
    Complex c = 1.0;
    e(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = c;
    for (std::size_t j = 1; m + j < dim; ++j) {
      c *= mu * std::sqrt(double(m + j)) / double(j);
      e(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m + j)) = c;
    }
  }
  return e;
}

}  // namespace detail

/// exp(mu a) applied to a single-mode amplitude vector; O(N^2), no matrix.
inline CVector apply_exp_annihilation(Complex mu, const CVector& v) {
  const auto dim = static_cast<std::size_t>(v.size());
  CVector out(v.size());
  for (std::size_t m = 0; m < dim; ++m) {
    Complex c = 1.0;
    Complex acc = v[static_cast<Eigen::Index>(m)];
    for (std::size_t j = 1; m + j < dim; ++j) {
      c *= mu * std::sqrt(double(m + j)) / double(j);
      acc += c * v[static_cast<Eigen::Index>(m + j)];
    }
    out[static_cast<Eigen::Index>(m)] = acc;
  }
  return out;
}

/// exp(nu a^dagger) applied to a single-mode amplitude vector. Rows below the
/// truncation are exact.
inline CVector apply_exp_creation(Complex nu, const CVector& v) {
  const auto dim = static_cast<std::size_t>(v.size());
  CVector out = CVector::Zero(v.size());
  for (std::size_t n = 0; n < dim; ++n) {
    const Complex vn = v[static_cast<Eigen::Index>(n)];
    if (vn == Complex{}) continue;
    Complex c = 1.0;
    out[static_cast<Eigen::Index>(n)] += vn;
    for (std::size_t j = 1; n + j < dim; ++j) {
      c *= nu * std::sqrt(double(n + j)) / double(j);
      out[static_cast<Eigen::Index>(n + j)] += c * vn;
    }
  }
  return out;
}

/// Amplitudes of the coherent state |alpha> on n = 0..dim-1, evaluated in log
/// space so large |alpha| does not overflow.
inline CVector coherent_amplitudes(Complex alpha, std::size_t dim) {
  CVector amp = CVector::Zero(static_cast<Eigen::Index>(dim));
  const double r = std::abs(alpha);
  if (r == 0.0) {
    amp[0] = 1.0;
    return amp;
  }
  const double theta = std::arg(alpha);
  const double log_r = std::log(r);
  for (std::size_t n = 0; n < dim; ++n) {
    const double nd = double(n);
    const double log_mag = -0.5 * r * r + nd * log_r - 0.5 * std::lgamma(nd + 1.0);
    amp[static_cast<Eigen::Index>(n)] = std::polar(std::exp(log_mag), nd * theta);
  }
  return amp;
}

/// Displacement operator D(alpha) = exp(alpha a^dag - alpha* a) in the truncated
/// basis. Column n is built as (a^dag - alpha*)^n |alpha> / sqrt(n!), which
/// reproduces the exact matrix elements <m|D|n> for all m, n < dim.
inline CMatrix displacement_matrix(Complex alpha, std::size_t dim) {
  // <n+k|D|n> = sqrt(n!/(n+k)!) x^{k/2} e^{-x/2} L_n^(k)(x) e^{ik arg alpha}, x = |alpha|^2,
  // and <n|D|n+k> = (-1)^k conj(<n+k|D|n>). The normalized Laguerre values
  // are produced by a three-term recurrence in n for each fixed order k.
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix D = CMatrix::Zero(d, d);
  const double x = std::norm(alpha);
  const double phase = std::arg(alpha);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double kd = double(k);
    double prev = 0.0;
    double cur = (x > 0.0) ? std::exp(0.5 * kd * std::log(x) - 0.5 * x - 0.5 * std::lgamma(kd + 1.0)) : (k == 0 ? 1.0 : 0.0);
    const Complex rot = std::polar(1.0, kd * phase);
    const double sign = (k % 2) ? -1.0 : 1.0;
    for (Eigen::Index n = 0; n + k < d; ++n) {
      D(n + k, n) = cur * rot;
      if (k > 0) D(n, n + k) = sign * cur * std::conj(rot);
      const double nd = double(n);
      const double next = ((2.0 * nd + 1.0 + kd - x) * cur - std::sqrt(nd * (nd + kd)) * prev) / std::sqrt((nd + 1.0) * (nd + kd + 1.0));
      prev = cur;
      cur = next;
    }
  }
  return D;
}

/// A single-mode operator acting on one mode of a multi-mode state.
struct ModeOp {
  enum class Kind { annihilate, create, number, quadrature, displacement, squeeze };

  std::size_t target_mode = 0;
  Kind kind = Kind::number;
  /// theta (real part) for quadrature, alpha for displacement, epsilon for squeeze.
  Complex param{};

  static ModeOp annihilate(std::size_t mode) { return {mode, Kind::annihilate, {}}; }
  static ModeOp create(std::size_t mode) { return {mode, Kind::create, {}}; }
  static ModeOp number(std::size_t mode) { return {mode, Kind::number, {}}; }
  /// X(theta) = a e^{-i theta} + a^dag e^{i theta}.
  static ModeOp quadrature(std::size_t mode, double theta) { return {mode, Kind::quadrature, theta}; }
  static ModeOp displacement(std::size_t mode, Complex alpha) { return {mode, Kind::displacement, alpha}; }
  /// S(eps) = exp((eps* a^2 - eps a^dag^2) / 2).
  static ModeOp squeeze(std::size_t mode, Complex eps) { return {mode, Kind::squeeze, eps}; }

  CMatrix matrix(std::size_t dim) const {
    const CMatrix a = detail::annihilation_matrix(dim);
    switch (kind) {
      case Kind::annihilate:
        return a;
      case Kind::create:
        return a.adjoint();
      case Kind::number:
        return a.adjoint() * a;
      case Kind::quadrature: {
        const Complex ph = std::polar(1.0, param.real());
        return a * std::conj(ph) + a.adjoint() * ph;
      }
      case Kind::displacement:
        return displacement_matrix(param, dim);
      case Kind::squeeze: {
        // The generator couples n to n +- 2, so exponentiate on a padded basis
        // and crop; the padding keeps the low block converged.
        const std::size_t pad = dim + 64;
        const CMatrix ap = detail::annihilation_matrix(pad);
        const CMatrix gen = 0.5 * (std::conj(param) * ap * ap - param * ap.adjoint() * ap.adjoint());
        const CMatrix full = gen.exp();
        return full.topLeftCorner(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      }
    }
    throw std::logic_error("unknown ModeOp kind");
  }
};

/// Applies a dim x dim matrix to one mode of a multi-mode vector.
inline FockVector apply_mode(const FockVector& v, std::size_t mode, const CMatrix& op) {
  if (mode >= v.num_modes()) throw std::out_of_range("apply_mode: mode index out of range");
  const auto dim = static_cast<Eigen::Index>(v.dim());
  if (op.rows() != dim || op.cols() != dim) throw std::invalid_argument("apply_mode: operator shape mismatch");
  const auto inner = static_cast<Eigen::Index>(mode_stride(mode, v.num_modes(), v.dim()));
  const auto outer = static_cast<Eigen::Index>(v.size()) / (dim * inner);
  using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  CVector out(v.amplitudes().size());
  for (Eigen::Index o = 0; o < outer; ++o) {
    Eigen::Map<const RowMat> in_block(v.amplitudes().data() + o * dim * inner, dim, inner);
    Eigen::Map<RowMat> out_block(out.data() + o * dim * inner, dim, inner);
    out_block.noalias() = op * in_block;
  }
  return FockVector(v.num_modes(), v.dim(), std::move(out), v.kind(), v.tail_mass());
}

inline FockVector apply(const FockVector& v, const ModeOp& op) { return apply_mode(v, op.target_mode, op.matrix(v.dim())); }

/// <v| O |v> for a proper vector.
inline Complex expectation(const FockVector& v, const ModeOp& op) {
  v.require_proper("expectation");
  return v.amplitudes().dot(apply(v, op).amplitudes());
}

/// Contracts one mode with a single-mode bra: returns <bra|_mode |v>, a vector
/// over the remaining modes. The result is an unnormalized conditional
/// amplitude and is flagged improper.
inline FockVector project_mode(const FockVector& v, std::size_t mode, const CVector& bra) {
  if (mode >= v.num_modes()) throw std::out_of_range("project_mode: mode index out of range");
  if (v.num_modes() < 2) throw std::invalid_argument("project_mode: need at least two modes");
  const auto dim = static_cast<Eigen::Index>(v.dim());
  if (bra.size() != dim) throw std::invalid_argument("project_mode: bra dimension mismatch");
  const auto inner = static_cast<Eigen::Index>(mode_stride(mode, v.num_modes(), v.dim()));
  const auto outer = static_cast<Eigen::Index>(v.size()) / (dim * inner);
  using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  CVector out(outer * inner);
  for (Eigen::Index o = 0; o < outer; ++o) {
    Eigen::Map<const RowMat> in_block(v.amplitudes().data() + o * dim * inner, dim, inner);
    out.segment(o * inner, inner) = (bra.adjoint() * in_block).transpose();
  }
  return FockVector(v.num_modes() - 1, v.dim(), std::move(out), FockVector::Kind::improper);
}

inline FockVector tensor(const FockVector& a, const FockVector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("tensor: truncation mismatch");
  CVector out(static_cast<Eigen::Index>(a.size() * b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.segment(static_cast<Eigen::Index>(i * b.size()), static_cast<Eigen::Index>(b.size())) = a[i] * b.amplitudes();
  }
  const auto kind = (a.is_improper() || b.is_improper()) ? FockVector::Kind::improper : FockVector::Kind::proper;
  return FockVector(a.num_modes() + b.num_modes(), a.dim(), std::move(out), kind, a.tail_mass() + b.tail_mass());
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("tensor: truncation mismatch");
  if (a.size() * b.size() > kMaxDenseDim) throw NumericalError("tensor: dimension exceeds dense budget");
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  CMatrix out(na * nb, na * nb);
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < na; ++j) out.block(i * nb, j * nb, nb, nb) = a.entries()(i, j) * b.entries();
  return {a.num_modes() + b.num_modes(), a.dim(), std::move(out)};
}

/// Reorders modes: output mode j is input mode perm[j].
inline DensityMatrix permute_modes(const DensityMatrix& rho, std::span<const std::size_t> perm) {
  const std::size_t k = rho.num_modes();
  const std::size_t dim = rho.dim();
  if (perm.size() != k) throw std::invalid_argument("permute_modes: permutation size mismatch");
  std::vector<std::size_t> map(rho.size());
  for (std::size_t out = 0; out < rho.size(); ++out) {
    const auto occ_out = occupation_of(out, k, dim);
    std::vector<std::size_t> occ_in(k);
    for (std::size_t j = 0; j < k; ++j) occ_in[perm[j]] = occ_out[j];
    map[out] = flat_index(occ_in, dim);
  }
  CMatrix e(rho.entries().rows(), rho.entries().cols());
  for (std::size_t i = 0; i < rho.size(); ++i)
    for (std::size_t j = 0; j < rho.size(); ++j)
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rho.entries()(static_cast<Eigen::Index>(map[i]), static_cast<Eigen::Index>(map[j]));
  return {k, dim, std::move(e)};
}

namespace detail {

struct ModeSplit {
  std::vector<std::size_t> keep;
  std::vector<std::size_t> traced;
  // full flat index = keep_offset[i] + traced_offset[t]
  std::vector<std::size_t> keep_offset;
  std::vector<std::size_t> traced_offset;
};

inline ModeSplit split_modes(std::size_t num_modes, std::size_t dim, std::vector<std::size_t> keep) {
  if (keep.empty()) throw std::invalid_argument("partial trace: keep set must be nonempty");
  std::sort(keep.begin(), keep.end());
  if (std::adjacent_find(keep.begin(), keep.end()) != keep.end()) throw std::invalid_argument("partial trace: duplicate mode");
  if (keep.back() >= num_modes) throw std::out_of_range("partial trace: mode index out of range");
  ModeSplit s;
  s.keep = keep;
  for (std::size_t m = 0; m < num_modes; ++m)
    if (!std::binary_search(keep.begin(), keep.end(), m)) s.traced.push_back(m);
  auto offsets = [&](const std::vector<std::size_t>& modes) {
    std::vector<std::size_t> off(ipow(dim, modes.size()));
    for (std::size_t i = 0; i < off.size(); ++i) {
      const auto occ = occupation_of(i, modes.size(), dim);
      std::size_t f = 0;
      for (std::size_t j = 0; j < modes.size(); ++j) f += occ[j] * mode_stride(modes[j], num_modes, dim);
      off[i] = f;
    }
    return off;
  };
  s.keep_offset = offsets(s.keep);
  s.traced_offset = offsets(s.traced);
  return s;
}

}  // namespace detail

/// Reduced density matrix on keep_modes (returned in ascending mode order).
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::vector<std::size_t> keep_modes) {
  const auto s = detail::split_modes(rho.num_modes(), rho.dim(), std::move(keep_modes));
  const auto nk = static_cast<Eigen::Index>(s.keep_offset.size());
  CMatrix out = CMatrix::Zero(nk, nk);
  for (Eigen::Index i = 0; i < nk; ++i)
    for (Eigen::Index j = 0; j < nk; ++j) {
      Complex acc{};
      for (std::size_t t : s.traced_offset)
        acc += rho.entries()(static_cast<Eigen::Index>(s.keep_offset[static_cast<std::size_t>(i)] + t),
                             static_cast<Eigen::Index>(s.keep_offset[static_cast<std::size_t>(j)] + t));
      out(i, j) = acc;
    }
  return {s.keep.size(), rho.dim(), std::move(out)};
}

/// Reduced density matrix of a pure (or unnormalized) vector, without forming
/// the full projector.
inline DensityMatrix reduced_density(const FockVector& v, std::vector<std::size_t> keep_modes) {
  const auto s = detail::split_modes(v.num_modes(), v.dim(), std::move(keep_modes));
  if (s.keep_offset.size() > kMaxDenseDim) throw NumericalError("reduced_density: dimension exceeds dense budget");
  const auto nk = static_cast<Eigen::Index>(s.keep_offset.size());
  const auto nt = static_cast<Eigen::Index>(s.traced_offset.size());
  CMatrix m(nk, nt);
  for (Eigen::Index i = 0; i < nk; ++i)
    for (Eigen::Index t = 0; t < nt; ++t)
      m(i, t) = v[s.keep_offset[static_cast<std::size_t>(i)] + s.traced_offset[static_cast<std::size_t>(t)]];
  return {s.keep.size(), v.dim(), m * m.adjoint()};
}

// ---------------------------------------------------------------------------
// State constructors

namespace detail {

// Sum of exp(log_term(n)) over n = start, start + step, ... for a sequence
// that is eventually decreasing past `peak`.
template <class LogTerm>
double tail_sum(LogTerm log_term, std::size_t start, std::size_t step, double peak) {
  double sum = 0.0;
  double log_max = -std::numeric_limits<double>::infinity();
  for (std::size_t n = start, it = 0; it < 10'000'000; n += step, ++it) {
    const double lt = log_term(n);
    log_max = std::max(log_max, lt);
    sum += std::exp(lt);
    if (double(n) > peak && (lt < log_max - 45.0 || lt < -745.0)) break;
  }
  return sum;
}

inline void enforce_tail(double tail, double cap, const std::string& what) {
  if (tail > cap) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": truncation drops probability %.3g > cap %.3g; increase N", tail, cap);
    throw TruncationError(what + buf);
  }
}

}  // namespace detail

/// |alpha> truncated to N levels. The reported tail is the exact Poisson mass
/// beyond N - 1.
inline FockVector coherent_state(Complex alpha, std::size_t N, double tail_cap = kDefaultTailCap) {
  if (N == 0) throw std::invalid_argument("coherent_state: N must be positive");
  const double lambda = std::norm(alpha);
  double tail = 0.0;
  if (lambda > 0.0) {
    const double log_lambda = std::log(lambda);
    tail = detail::tail_sum(
        [&](std::size_t n) { return -lambda + double(n) * log_lambda - std::lgamma(double(n) + 1.0); }, N, 1, lambda);
  }
  detail::enforce_tail(tail, tail_cap, "coherent_state");
  return FockVector(1, N, coherent_amplitudes(alpha, N), FockVector::Kind::proper, tail);
}

/// Squeezed vacuum S(eps)|0> with S(eps) = exp((eps* a^2 - eps a^dag^2)/2),
/// eps = s e^{i psi}:
///   <2k|0,eps> = (cosh s)^{-1/2} (-e^{i psi} tanh s)^k sqrt((2k)!) / (2^k k!).
/// Equivalently <n|0,eps> = (2^n n! cosh s)^{-1/2} (e^{i psi} tanh s)^{n/2} H_n(0).
inline FockVector squeezed_vacuum(Complex eps, std::size_t N, double tail_cap = kDefaultTailCap) {
  if (N == 0) throw std::invalid_argument("squeezed_vacuum: N must be positive");
  const double s = std::abs(eps);
  CVector amp = CVector::Zero(static_cast<Eigen::Index>(N));
  if (s == 0.0) {
    amp[0] = 1.0;
    return FockVector(1, N, std::move(amp));
  }
  const double psi = std::arg(eps);
  const double log_tanh = std::log(std::tanh(s));
  const double log_cosh = std::log(std::cosh(s));
  auto log_pop = [&](std::size_t n) {  // log |<n|0,eps>|^2, n even
    const double k = double(n / 2);
    return -log_cosh + 2.0 * k * log_tanh + std::lgamma(2.0 * k + 1.0) - 2.0 * k * std::log(2.0) -
           2.0 * std::lgamma(k + 1.0);
  };
  for (std::size_t n = 0; n < N; n += 2) {
    const double k = double(n / 2);
    amp[static_cast<Eigen::Index>(n)] = std::polar(std::exp(0.5 * log_pop(n)), k * (psi + std::numbers::pi));
  }
  const std::size_t first_missing = (N % 2 == 0) ? N : N + 1;
  const double tail = detail::tail_sum(log_pop, first_missing, 2, 0.0);
  detail::enforce_tail(tail, tail_cap, "squeezed_vacuum");
  return FockVector(1, N, std::move(amp), FockVector::Kind::proper, tail);
}

/// Two-mode squeezed state sqrt(1 - eta^2) sum_n (eta e^{i phase2})^n |n>|n>.
inline FockVector two_mode_squeezed(double eta, double phase2, std::size_t N, double tail_cap = kDefaultTailCap) {
  if (!(eta >= 0.0)) throw std::invalid_argument("two_mode_squeezed: eta must be nonnegative");
  if (eta >= 1.0) throw std::invalid_argument("two_mode_squeezed: eta >= 1 is not normalizable");
  if (N == 0) throw std::invalid_argument("two_mode_squeezed: N must be positive");
  const double tail = std::pow(eta * eta, double(N));
  detail::enforce_tail(tail, tail_cap, "two_mode_squeezed");
  FockVector v(2, N);
  const double norm = std::sqrt(1.0 - eta * eta);
  for (std::size_t n = 0; n < N; ++n) {
    v.amplitudes()[static_cast<Eigen::Index>(n * N + n)] = norm * std::polar(std::pow(eta, double(n)), double(n) * phase2);
  }
  return FockVector(2, N, v.amplitudes(), FockVector::Kind::proper, tail);
}

/// Amplitudes <n|x,theta> = (2 pi)^{-1/4} (2^n n!)^{-1/2} H_n(x/sqrt2) e^{-x^2/4} e^{i n theta},
/// computed as 2^{-1/4} psi_n(x / sqrt2) e^{i n theta} with psi_n the
/// orthonormal Hermite functions.
inline CVector quadrature_amplitudes(double x, double theta, std::size_t N) {
  const auto psi = specfun::hermite_functions(x / std::numbers::sqrt2, N - 1);
  const double pref = std::pow(2.0, -0.25);
  CVector amp(static_cast<Eigen::Index>(N));
  for (std::size_t n = 0; n < N; ++n) amp[static_cast<Eigen::Index>(n)] = std::polar(pref * psi[n], double(n) * theta);
  return amp;
}

/// Quadrature eigenvector |x,theta> of X(theta) truncated to N levels
/// (improper: delta-normalized in x).
inline FockVector quadrature_eigenvector(double x, double theta, std::size_t N) {
  if (N == 0) throw std::invalid_argument("quadrature_eigenvector: N must be positive");
  return FockVector(1, N, quadrature_amplitudes(x, theta, N), FockVector::Kind::improper);
}

// ---------------------------------------------------------------------------
// Beamsplitter

/// Number-conserving block of the 50/50 beamsplitter for total photon number
/// n. Entry (k, j) = <k, n-k|_{cd} U |j, n-j>_{ab} with output modes
/// c = (a - b)/sqrt2, d = (a + b)/sqrt2, i.e. a^dag = (c^dag + d^dag)/sqrt2 and
/// b^dag = (d^dag - c^dag)/sqrt2 when the input state is rewritten in the
/// output modes.
inline std::vector<CMatrix> beamsplitter_blocks(std::size_t max_total) {
  // U = exp(pi/4 (b^dag a - a^dag b)). On the n-photon block, indexed by the
  // count k in the first slot, the generator is real tridiagonal and
  // antisymmetric; exponentiate through the eigenbasis of the Hermitian
  // matrix i K so the result stays orthogonal for large n.
  std::vector<CMatrix> blocks;
  blocks.reserve(max_total + 1);
  const double t = std::numbers::pi / 4;
  for (std::size_t n = 0; n <= max_total; ++n) {
    const auto nn = static_cast<Eigen::Index>(n);
    CMatrix h = CMatrix::Zero(nn + 1, nn + 1);
    for (Eigen::Index k = 0; k < nn; ++k) {
      const double g = std::sqrt(double(k + 1) * double(nn - k));
      h(k, k + 1) = Complex(0.0, g);
      h(k + 1, k) = Complex(0.0, -g);
    }
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    const CVector phases = (es.eigenvalues() * Complex(0.0, -t)).array().exp().matrix();
    CMatrix u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    blocks.push_back(u.real().cast<Complex>());
  }
  return blocks;
}

/// 50/50 beamsplitter on (mode_a, mode_b); the outputs c = (a - b)/sqrt2 and
/// d = (a + b)/sqrt2 are written back into the mode_a and mode_b slots.
/// Amplitude that would land at or above the truncation is dropped and added
/// to the reported tail mass of proper vectors.
inline FockVector beamsplitter_5050(const FockVector& state, std::size_t mode_a, std::size_t mode_b) {
  if (mode_a == mode_b) throw std::invalid_argument("beamsplitter_5050: mode indices must differ");
  if (mode_a >= state.num_modes() || mode_b >= state.num_modes())
    throw std::out_of_range("beamsplitter_5050: mode index out of range");
  const std::size_t dim = state.dim();
  const auto blocks = beamsplitter_blocks(2 * dim - 2);
  const std::size_t sa = mode_stride(mode_a, state.num_modes(), dim);
  const std::size_t sb = mode_stride(mode_b, state.num_modes(), dim);
  CVector out = CVector::Zero(state.amplitudes().size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Complex v = state[i];
    if (v == Complex{}) continue;
    const std::size_t na = (i / sa) % dim;
    const std::size_t nb = (i / sb) % dim;
    const std::size_t base = i - na * sa - nb * sb;
    const std::size_t n = na + nb;
    const CMatrix& B = blocks[n];
    const std::size_t k_lo = n >= dim ? n - dim + 1 : 0;
    const std::size_t k_hi = std::min(n, dim - 1);
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
      out[static_cast<Eigen::Index>(base + k * sa + (n - k) * sb)] +=
          B(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(na)) * v;
    }
  }
  double tail = state.tail_mass();
  if (!state.is_improper()) tail += std::max(0.0, state.norm_squared() - out.squaredNorm());
  return FockVector(state.num_modes(), dim, std::move(out), state.kind(), tail);
}

// ---------------------------------------------------------------------------
// Fidelity and distances

namespace detail {

inline void check_match(std::size_t ma, std::size_t da, std::size_t mb, std::size_t db) {
  if (ma != mb || da != db) throw std::invalid_argument("state_fidelity: mode structure mismatch");
}

inline CMatrix psd_sqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// |<a|b>|^2 for pure states.
inline double state_fidelity(const FockVector& a, const FockVector& b) {
  a.require_proper("state_fidelity");
  b.require_proper("state_fidelity");
  detail::check_match(a.num_modes(), a.dim(), b.num_modes(), b.dim());
  return std::norm(a.amplitudes().dot(b.amplitudes()));
}

/// <a|rho|a>.
inline double state_fidelity(const FockVector& a, const DensityMatrix& rho) {
  a.require_proper("state_fidelity");
  detail::check_match(a.num_modes(), a.dim(), rho.num_modes(), rho.dim());
  return std::real(a.amplitudes().dot(rho.entries() * a.amplitudes()));
}

inline double state_fidelity(const DensityMatrix& rho, const FockVector& a) { return state_fidelity(a, rho); }

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double state_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  detail::check_match(rho.num_modes(), rho.dim(), sigma.num_modes(), sigma.dim());
  const CMatrix sr = detail::psd_sqrt(rho.entries());
  const CMatrix inner = sr * sigma.entries() * sr;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
  const double t = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return t * t;
}

/// Trace distance (1/2) ||rho - sigma||_1.
inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  detail::check_match(rho.num_modes(), rho.dim(), sigma.num_modes(), sigma.dim());
  const CMatrix diff = rho.entries() - sigma.entries();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace cvqt
