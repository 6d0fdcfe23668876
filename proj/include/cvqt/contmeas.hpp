#pragma once

// Phase-correlation generation between two independent lasers a and b.
//
// The beams are mixed into c = (a - b)/sqrt2 and d = (a + b)/sqrt2 and
// probed by absorbing atoms. For coherent components the photon numbers are
// |c|^2 = 2 r^2 sin^2(D/2) and |d|^2 = 2 r^2 cos^2(D/2), D = phi_a - phi_b,
// so after p absorptions from c and q from d the phase difference has the
// posterior sin^{2p}(D/2) cos^{2q}(D/2) and both amplitudes have decayed to
// r_t = r_o e^{-R t}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvqt/fock.hpp"
#include "cvqt/laser.hpp"
#include "cvqt/obpm.hpp"
#include "cvqt/specfun.hpp"

namespace cvqt::contmeas {

enum class Mode { c, d };

inline char mode_char(Mode m) { return m == Mode::c ? 'c' : 'd'; }

struct JumpStats {
  std::size_t total = 0;  // s
  std::size_t p = 0;      // jumps in c
  std::size_t q() const { return total - p; }
};

// ---------------------------------------------------------------------------
// Two-branch homodyne result

struct PhaseBranch {
  double delta = 0.0;
  double weight = 0.0;
};

/// Posterior over D from a reading of cos D: D = +-arccos(reading).
inline std::vector<PhaseBranch> bhd_phase_posterior(double cos_reading) {
  if (!(cos_reading >= -1.0 && cos_reading <= 1.0)) throw std::invalid_argument("bhd_phase_posterior: reading outside [-1, 1]");
  const double d = std::acos(cos_reading);
  if (cos_reading == 1.0 || cos_reading == -1.0) return {{d, 1.0}};
  return {{d, 0.5}, {2 * std::numbers::pi - d, 0.5}};
}

// ---------------------------------------------------------------------------
// Jump statistics and posterior

inline constexpr std::size_t kMaxJumps = 1'000'000;

inline void check_counts(std::size_t s, std::size_t p) {
  if (s > kMaxJumps) throw std::invalid_argument("jump count exceeds 10^6");
  if (p > s) throw std::invalid_argument("p must not exceed the total jump count");
}

/// log of C(s, p) B(p + 1/2, q + 1/2) / pi.
inline double log_jump_count_probability(std::size_t s, std::size_t p) {
  check_counts(s, p);
  const double q = double(s - p);
  return specfun::log_binomial(double(s), double(p)) + specfun::log_beta(double(p) + 0.5, q + 0.5).log_abs -
         std::log(std::numbers::pi);
}

inline double jump_count_probability(std::size_t s, std::size_t p) {
  check_counts(s, p);
  // evaluate on the smaller of p, q so that P(s, p) == P(s, s - p) bit for bit
  return std::exp(log_jump_count_probability(s, std::min(p, s - p)));
}

struct PhasePosterior {
  std::vector<double> grid;     // D values, uniform on [0, 2 pi)
  std::vector<double> weights;  // sum to 1
  double r_t = 0.0;
  /// log of the grid mean of the unnormalized weights sin^{2p} cos^{2q};
  /// equals log(B(p + 1/2, q + 1/2) / pi) whenever K > p + q.
  double log_norm = 0.0;

  std::size_t size() const { return weights.size(); }
  std::size_t mode_index() const { return std::size_t(std::max_element(weights.begin(), weights.end()) - weights.begin()); }
};

inline std::size_t default_grid_size(std::size_t s) { return std::max<std::size_t>(1024, 8 * s); }

inline PhasePosterior posterior_phase_state(std::size_t s, std::size_t p, double r_t, std::size_t K = 0) {
  check_counts(s, p);
  if (!(r_t >= 0.0)) throw std::invalid_argument("posterior_phase_state: r_t must be nonnegative");
  if (K == 0) K = default_grid_size(s);
  const double q = double(s - p);
  PhasePosterior post{laser::uniform_grid(K), std::vector<double>(K), r_t, 0.0};
  std::vector<double> logw(K);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const double h = 0.5 * post.grid[k];
    const double ls = p == 0 ? 0.0 : 2.0 * double(p) * std::log(std::abs(std::sin(h)));
    const double lc = q == 0 ? 0.0 : 2.0 * q * std::log(std::abs(std::cos(h)));
    logw[k] = ls + lc;
    lmax = std::max(lmax, logw[k]);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) total += (post.weights[k] = std::exp(logw[k] - lmax));
  for (double& w : post.weights) w /= total;
  post.log_norm = lmax + std::log(total / double(K));
  return post;
}

// ---------------------------------------------------------------------------
// Photon-number distribution

inline constexpr double kMaxFieldIntensity = 1.0e5;  // r_t^2

namespace detail {

inline void check_photon_args(double r_t, std::size_t m) {
  if (!(r_t >= 0.0) || !std::isfinite(r_t)) throw std::invalid_argument("photon_distribution: r_t must be finite and nonnegative");
  if (r_t * r_t > kMaxFieldIntensity)
    throw std::invalid_argument("photon_distribution: r_t^2 = " + std::to_string(r_t * r_t) +
                                " exceeds the supported range (1e5)");
  if (double(m) > 4.0 * kMaxFieldIntensity + 1e3)
    throw std::invalid_argument("photon_distribution: photon number " + std::to_string(m) + " exceeds the supported range");
}

inline double log_poisson(double mean, std::size_t m) {
  if (mean == 0.0) return m == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return -mean + double(m) * std::log(mean) - std::lgamma(double(m) + 1.0);
}

}  // namespace detail

/// log P_c(m) from the closed form with the Kummer function; for mode d the
/// roles of p and q are swapped.
inline double log_photon_distribution(std::size_t s, std::size_t p, double r_t, std::size_t m, Mode mode = Mode::c) {
  check_counts(s, p);
  detail::check_photon_args(r_t, m);
  const double pp = double(mode == Mode::c ? p : s - p);
  const double qq = double(s) - pp;
  const double z = 2.0 * r_t * r_t;
  if (z == 0.0) return m == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double md = double(m);
  const double log_beta_ratio =
      specfun::log_beta(md + pp + 0.5, qq + 0.5).log_abs - specfun::log_beta(pp + 0.5, qq + 0.5).log_abs;
  const double out = detail::log_poisson(z, m) + log_beta_ratio + specfun::hyp1f1(qq + 0.5, md + pp + qq + 1.0, z).log_abs;
  if (!std::isfinite(out) || out > 1e-9) throw NumericalError("photon_distribution: evaluation lost precision");
  return out;
}

/// Mixture-of-Poissons form for m = 0 .. m_max: the posterior average of
/// Poisson(m; 2 r^2 sin^2(D/2)) by the periodic trapezoid rule on K nodes.
inline std::vector<double> photon_distribution_quadrature_table(std::size_t s, std::size_t p, double r_t, std::size_t m_max,
                                                                Mode mode = Mode::c, std::size_t K = 0) {
  check_counts(s, p);
  detail::check_photon_args(r_t, m_max);
  if (K == 0) K = std::max<std::size_t>(8192, 16 * s);
  const auto post = posterior_phase_state(s, mode == Mode::c ? p : s - p, r_t, K);
  const double z = 2.0 * r_t * r_t;
  std::vector<double> out(m_max + 1, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    if (post.weights[k] == 0.0) continue;
    const double sn = std::sin(0.5 * post.grid[k]);
    const double mean = z * sn * sn;
    for (std::size_t m = 0; m <= m_max; ++m) {
      const double lp = detail::log_poisson(mean, m);
      if (lp > -745.0) out[m] += post.weights[k] * std::exp(lp);
    }
  }
  return out;
}

inline double photon_distribution_quadrature(std::size_t s, std::size_t p, double r_t, std::size_t m, Mode mode = Mode::c,
                                             std::size_t K = 0) {
  check_counts(s, p);
  detail::check_photon_args(r_t, m);
  if (K == 0) K = std::max<std::size_t>(8192, 16 * s);
  const auto post = posterior_phase_state(s, mode == Mode::c ? p : s - p, r_t, K);
  const double z = 2.0 * r_t * r_t;
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (post.weights[k] == 0.0) continue;
    const double sn = std::sin(0.5 * post.grid[k]);
    total += post.weights[k] * std::exp(detail::log_poisson(z * sn * sn, m));
  }
  return total;
}

/// Closed form, falling back to the quadrature if the Kummer series fails.
inline double photon_distribution(std::size_t s, std::size_t p, double r_t, std::size_t m, Mode mode = Mode::c) {
  try {
    return std::exp(log_photon_distribution(s, p, r_t, m, mode));
  } catch (const std::runtime_error&) {
    return photon_distribution_quadrature(s, p, r_t, m, mode);
  }
}

struct PhotonTableRow {
  std::size_t m = 0;
  double p_c = 0.0;
  double p_d = 0.0;
  double p_c_oracle = 0.0;
  double p_d_oracle = 0.0;
};

struct PhotonTable {
  std::vector<PhotonTableRow> rows;
  /// Largest |closed form - quadrature| over the table (both modes).
  double max_oracle_deviation = 0.0;
  /// |closed form / quadrature - 1| at the peak of each distribution.
  double peak_relative_deviation_c = 0.0;
  double peak_relative_deviation_d = 0.0;
  std::size_t peak_c = 0;
  std::size_t peak_d = 0;
  double sum_c = 0.0;
  double sum_d = 0.0;
};

/// P_c and P_d for m = 0 .. m_max, with the quadrature oracle alongside.
inline PhotonTable photon_table(std::size_t s, std::size_t p, double r_t, std::size_t m_max) {
  PhotonTable t;
  const auto oc = photon_distribution_quadrature_table(s, p, r_t, m_max, Mode::c);
  const auto od = photon_distribution_quadrature_table(s, p, r_t, m_max, Mode::d);
  for (std::size_t m = 0; m <= m_max; ++m) {
    PhotonTableRow row{m, photon_distribution(s, p, r_t, m, Mode::c), photon_distribution(s, p, r_t, m, Mode::d), oc[m], od[m]};
    t.max_oracle_deviation = std::max({t.max_oracle_deviation, std::abs(row.p_c - oc[m]), std::abs(row.p_d - od[m])});
    t.sum_c += row.p_c;
    t.sum_d += row.p_d;
    t.rows.push_back(row);
    if (row.p_c > t.rows[t.peak_c].p_c) t.peak_c = m;
    if (row.p_d > t.rows[t.peak_d].p_d) t.peak_d = m;
  }
  const auto rel = [](double a, double b) { return b > 0.0 ? std::abs(a / b - 1.0) : (a == 0.0 ? 0.0 : 1.0); };
  t.peak_relative_deviation_c = rel(t.rows[t.peak_c].p_c, t.rows[t.peak_c].p_c_oracle);
  t.peak_relative_deviation_d = rel(t.rows[t.peak_d].p_d, t.rows[t.peak_d].p_d_oracle);
  return t;
}

// ---------------------------------------------------------------------------
// Monte Carlo wave-function trajectories

struct TrajectoryConfig {
  double r_o = 10.0;
  double R = 1.0e-3;  // absorption rate
  double dt = 1.0;
  double t_end = 100.0;
  std::size_t grid_size = 1024;
  /// End the run at this many jumps (before t_end if reached).
  std::optional<std::size_t> stop_after_jumps;
  /// Validity threshold for 4 s r_o^2 R dt.
  double validity_threshold = 0.1;
};

struct Jump {
  double time = 0.0;
  Mode mode = Mode::c;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::vector<Jump> jumps;
  JumpStats stats;
  PhasePosterior posterior;
  std::vector<std::pair<double, double>> r_history;  // (t, r_t) at start, jumps, end
  double end_time = 0.0;
  /// 4 s r_o^2 R dt with s the final jump count; valid when below the threshold.
  double validity_ratio = 0.0;
  bool valid = true;
};

inline void validate(const TrajectoryConfig& c) {
  if (!(c.r_o >= 0.0) || c.r_o * c.r_o > 1.0e4) throw std::invalid_argument("trajectory: r_o^2 must lie in [0, 1e4]");
  if (!(c.R >= 0.0)) throw std::invalid_argument("trajectory: absorption rate must be nonnegative");
  if (!(c.dt > 0.0)) throw std::invalid_argument("trajectory: dt must be positive");
  if (c.R * c.dt > 1.0e-3) throw std::invalid_argument("trajectory: R dt must not exceed 1e-3");
  if (4.0 * c.R * c.dt * c.r_o * c.r_o > 1.0)
    throw std::invalid_argument("trajectory: jump probability 4 R dt r_o^2 exceeds 1; reduce dt");
  if (!(c.t_end >= 0.0)) throw std::invalid_argument("trajectory: t_end must be nonnegative");
  if (c.grid_size < 4) throw std::invalid_argument("trajectory: grid too small");
}

/// Step-by-step engine on the phase-difference posterior. Coherent
/// components are eigenstates of c and d, so a jump multiplies each weight
/// by sin^2 or cos^2 and the decay between jumps only shrinks r_t; since
/// |c|^2 + |d|^2 does not depend on D, no-jump steps leave the weights alone.
class TrajectoryEngine {
 public:
  TrajectoryEngine(TrajectoryConfig config, std::uint64_t seed) : c_(std::move(config)), seed_(seed), rng_(seed) {
    validate(c_);
    const std::size_t K = c_.grid_size;
    grid_ = laser::uniform_grid(K);
    weights_.assign(K, 1.0 / double(K));
    sin2_.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double sn = std::sin(0.5 * grid_[k]);
      sin2_[k] = sn * sn;
    }
    steps_total_ = std::size_t(std::llround(c_.t_end / c_.dt));
    r_history_.push_back({0.0, c_.r_o});
  }

  double time() const { return double(step_) * c_.dt; }
  double r_t() const { return c_.r_o * std::exp(-c_.R * time()); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Jump>& jumps() const { return jumps_; }
  std::size_t p() const { return p_; }
  bool done() const {
    return step_ >= steps_total_ || (c_.stop_after_jumps && jumps_.size() >= *c_.stop_after_jumps);
  }

  /// Mean sin^2(D/2) under the current posterior.
  double mean_sin2() const {
    double m = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) m += weights_[k] * sin2_[k];
    return m;
  }

  /// Advances one step; returns the jump if one occurred.
  std::optional<Jump> step() {
    if (done()) return std::nullopt;
    const double r = r_t();
    const double p_jump = 4.0 * c_.R * c_.dt * r * r;
    const double u = obpm::uniform01(rng_);
    ++step_;
    if (u >= p_jump) return std::nullopt;
    const double pc = mean_sin2();
    const Mode mode = obpm::uniform01(rng_) < pc ? Mode::c : Mode::d;
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      weights_[k] *= mode == Mode::c ? sin2_[k] : 1.0 - sin2_[k];
      total += weights_[k];
    }
    for (double& w : weights_) w /= total;
    if (mode == Mode::c) ++p_;
    const Jump j{time(), mode};
    jumps_.push_back(j);
    r_history_.push_back({j.time, r_t()});
    return j;
  }

  TrajectoryRecord finish() {
    while (!done()) step();
    TrajectoryRecord rec;
    rec.seed = seed_;
    rec.dt = c_.dt;
    rec.jumps = jumps_;
    rec.stats = {jumps_.size(), p_};
    rec.posterior = {grid_, weights_, r_t(), 0.0};
    rec.end_time = time();
    rec.r_history = r_history_;
    if (rec.r_history.back().first != rec.end_time) rec.r_history.push_back({rec.end_time, r_t()});
    rec.validity_ratio = 4.0 * double(jumps_.size()) * c_.r_o * c_.r_o * c_.R * c_.dt;
    rec.valid = rec.validity_ratio <= c_.validity_threshold;
    return rec;
  }

 private:
  TrajectoryConfig c_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<double> grid_, weights_, sin2_;
  std::size_t step_ = 0, steps_total_ = 0, p_ = 0;
  std::vector<Jump> jumps_;
  std::vector<std::pair<double, double>> r_history_;
};

inline TrajectoryRecord mcwf_run(const TrajectoryConfig& config, std::uint64_t seed) {
  return TrajectoryEngine(config, seed).finish();
}

/// Trajectory i uses the stream stream_seed(seed, i).
inline std::vector<TrajectoryRecord> mcwf_batch(const TrajectoryConfig& config, std::uint64_t seed, std::size_t count) {
  validate(config);
  std::vector<TrajectoryRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(mcwf_run(config, obpm::stream_seed(seed, i)));
  return out;
}

/// Histogram of p over trajectories that reached exactly s jumps.
inline std::vector<std::size_t> jump_histogram(const std::vector<TrajectoryRecord>& recs, std::size_t s) {
  std::vector<std::size_t> h(s + 1, 0);
  for (const auto& r : recs)
    if (r.stats.total == s) ++h[r.stats.p];
  return h;
}

/// Average final posterior over trajectories with the given (s, p); empty if none.
inline std::vector<double> empirical_posterior(const std::vector<TrajectoryRecord>& recs, std::size_t s, std::size_t p) {
  std::vector<double> avg;
  std::size_t n = 0;
  for (const auto& r : recs) {
    if (r.stats.total != s || r.stats.p != p) continue;
    if (avg.empty()) avg.assign(r.posterior.size(), 0.0);
    if (r.posterior.size() != avg.size()) throw std::invalid_argument("empirical_posterior: grid sizes differ");
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += r.posterior.weights[k];
    ++n;
  }
  for (double& w : avg) w /= double(n);
  return avg;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

/// Chi-square statistic of a p histogram against jump_count_probability(s, .),
/// with bins of expected count below min_expected pooled into their neighbour.
struct ChiSquare {
  double statistic = 0.0;
  std::size_t dof = 0;
  std::size_t samples = 0;
};

inline ChiSquare chi_square_jump_counts(const std::vector<std::size_t>& hist, double min_expected = 5.0) {
  if (hist.empty()) throw std::invalid_argument("chi_square_jump_counts: empty histogram");
  const std::size_t s = hist.size() - 1;
  std::size_t n = 0;
  for (auto h : hist) n += h;
  ChiSquare out{0.0, 0, n};
  if (n == 0) return out;
  double obs = 0.0, exp = 0.0;
  std::size_t bins = 0;
  for (std::size_t p = 0; p <= s; ++p) {
    obs += double(hist[p]);
    exp += double(n) * jump_count_probability(s, p);
    if (exp >= min_expected || p == s) {
      out.statistic += (obs - exp) * (obs - exp) / std::max(exp, 1e-300);
      ++bins;
      obs = exp = 0.0;
    }
  }
  out.dof = bins > 0 ? bins - 1 : 0;
  return out;
}

}  // namespace cvqt::contmeas
