#pragma once

// Special functions used by the jump-count and photon-number formulas:
// log-Gamma differences, log-Beta, Hermite polynomials / Hermite functions,
// and the confluent hypergeometric function 1F1 on the positive real axis.
//
// Everything that can overflow is returned as a LogValue and exponentiated
// by the caller as late as possible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvqt::specfun {

/// Signed number stored as sign * exp(log_abs).
struct LogValue {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 1;

  static LogValue from(double v) {
    if (v == 0.0) return {};
    return {std::log(std::abs(v)), v < 0 ? -1 : 1};
  }
  double value() const { return sign * std::exp(log_abs); }
  bool is_zero() const { return log_abs == -std::numeric_limits<double>::infinity(); }

  friend LogValue operator*(const LogValue& a, const LogValue& b) {
    return {a.log_abs + b.log_abs, a.sign * b.sign};
  }
  friend LogValue operator/(const LogValue& a, const LogValue& b) {
    return {a.log_abs - b.log_abs, a.sign * b.sign};
  }
};

namespace detail {

// Tail of the Stirling series: sum_k B_2k / (2k (2k-1) x^(2k-1)).
inline double stirling_tail(double x) {
  static constexpr double kCoeff[] = {
      1.0 / 12.0,          -1.0 / 360.0,  1.0 / 1260.0,       -1.0 / 1680.0,
      1.0 / 1188.0,        -691.0 / 360360.0, 1.0 / 156.0,    -3617.0 / 122400.0};
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double term = inv;
  double sum = 0.0;
  for (double c : kCoeff) {
    sum += c * term;
    term *= inv2;
  }
  return sum;
}

inline constexpr double kStirlingCutoff = 10.0;

}  // namespace detail

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
  return std::lgamma(x);
}

/// log Gamma(x + d) - log Gamma(x) for x > 0, x + d > 0, with the increment d
/// taken as exact. Avoids both the cancellation of two large lgamma values and
/// the rounding of x + d when d is much smaller than x.
inline double log_gamma_increment(double x, double d) {
  if (!(x > 0.0) || !(x + d > 0.0)) throw std::domain_error("log_gamma_increment: arguments must be positive");
  if (d == 0.0) return 0.0;
  double shift_correction = 0.0;
  const double lo = std::min(x, x + d);
  if (lo < detail::kStirlingCutoff) {
    const int shift = static_cast<int>(std::ceil(detail::kStirlingCutoff - lo));
    // Gamma(u) = Gamma(u + n) / prod_{i<n} (u + i)
    for (int i = 0; i < shift; ++i) shift_correction -= std::log1p(d / (x + i));
    x += shift;
  }
  const double y = x + d;
  const double main = (y - 0.5) * std::log1p(d / x) + d * (std::log(x) - 1.0);
  return main + detail::stirling_tail(y) - detail::stirling_tail(x) + shift_correction;
}

/// log Gamma(x) - log Gamma(y).
inline double log_gamma_ratio(double x, double y) { return -log_gamma_increment(x, y - x); }

/// log B(x, y) = log Gamma(x) + log Gamma(y) - log Gamma(x + y).
inline LogValue log_beta(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("log_beta: arguments must be positive");
  const double small = std::min(x, y);
  const double big = std::max(x, y);
  return {std::lgamma(small) - log_gamma_increment(big, small), 1};
}

/// log of the binomial coefficient C(n, k).
inline double log_binomial(double n, double k) {
  if (k < 0 || k > n) throw std::domain_error("log_binomial: k out of range");
  if (k == 0 || k == n) return 0.0;
  return log_gamma_increment(k + 1.0, n - k) - std::lgamma(n - k + 1.0);
}

/// Physicists' Hermite polynomials H_0(x) .. H_{n_max}(x) by the three-term
/// recurrence. Overflows for large n; use hermite_functions() there.
inline std::vector<double> hermite_sequence(double x, std::size_t n_max) {
  std::vector<double> h(n_max + 1);
  h[0] = 1.0;
  if (n_max >= 1) h[1] = 2.0 * x;
  for (std::size_t n = 1; n < n_max; ++n) {
    h[n + 1] = 2.0 * x * h[n] - 2.0 * static_cast<double>(n) * h[n - 1];
  }
  return h;
}

/// Orthonormal Hermite functions
///   psi_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) exp(-x^2 / 2),
/// evaluated by the scaled recurrence
///   psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1},
/// which stays bounded for any n.
inline std::vector<double> hermite_functions(double x, std::size_t n_max) {
  std::vector<double> psi(n_max + 1);
  psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (n_max >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (std::size_t n = 1; n < n_max; ++n) {
    const double nd = static_cast<double>(n);
    psi[n + 1] = std::sqrt(2.0 / (nd + 1.0)) * x * psi[n] - std::sqrt(nd / (nd + 1.0)) * psi[n - 1];
  }
  return psi;
}

/// 1F1(a; b; z) for a > 0, b > 0, z >= 0.
///
/// On this domain every term of the Kummer series is positive, so the series
/// is summed directly in log space (no cancellation, no overflow). The number
/// of significant terms grows like z, which is fine for z up to a few 10^4.
inline LogValue hyp1f1(double a, double b, double z) {
  if (!(a > 0.0) || !(b > 0.0) || !(z >= 0.0) || !std::isfinite(z)) {
    throw std::domain_error("hyp1f1: only a > 0, b > 0, z >= 0 is supported (got a=" + std::to_string(a) +
                            ", b=" + std::to_string(b) + ", z=" + std::to_string(z) + ")");
  }
  if (z == 0.0) return {0.0, 1};
  constexpr std::size_t kMaxTerms = 2'000'000;
  const double log_z = std::log(z);

  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(std::min(4.0 * z + 200.0, 1.0e6)));
  double log_t = 0.0;
  double log_max = 0.0;
  log_terms.push_back(0.0);
  for (std::size_t k = 0;; ++k) {
    if (k >= kMaxTerms) throw std::runtime_error("hyp1f1: series did not converge");
    const double kd = static_cast<double>(k);
    log_t += std::log((a + kd) / ((b + kd) * (kd + 1.0))) + log_z;
    log_terms.push_back(log_t);
    log_max = std::max(log_max, log_t);
    // Past the peak the ratio is < 1 and keeps shrinking; stop once the
    // remaining geometric tail is below double resolution.
    const double ratio = (a + kd + 1.0) * z / ((b + kd + 1.0) * (kd + 2.0));
    if (ratio < 0.5 && log_t < log_max - 40.0) break;
  }
  // Compensated summation of exp(log_t - log_max).
  double sum = 0.0;
  double comp = 0.0;
  for (double lt : log_terms) {
    const double y = std::exp(lt - log_max) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return {log_max + std::log(sum), 1};
}

}  // namespace cvqt::specfun
