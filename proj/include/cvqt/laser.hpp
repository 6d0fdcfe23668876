#pragma once

// Phase ensembles: a laser of completely unknown phase is represented as a
// uniform K-point mixture over that phase. Every grid point carries a pure
// Fock component whose mode phases are affine functions of the grid phase,
// plus parametric (never Fock-expanded) local-oscillator records.
//
// The K-point Riemann sum is exact for trigonometric polynomials of degree
// below K, so for K > 2N phase averages of truncated matrix elements are
// exact to rounding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cvqt/fock.hpp"

namespace cvqt::laser {

/// phase = multiplier * grid_phase[source] + offset
struct PhaseRule {
  std::size_t source = 0;
  double multiplier = 1.0;
  double offset = 0.0;

  double eval(const std::vector<double>& grid_phases) const {
    if (source >= grid_phases.size()) throw std::out_of_range("PhaseRule: source phase index out of range");
    return multiplier * grid_phases[source] + offset;
  }
};

/// Strong local oscillator; only its amplitude and phase enter the physics.
struct LOParam {
  std::string label;
  double amplitude = 0.0;
  PhaseRule phase;
  /// Full-ordering mode this LO measures, if any.
  std::optional<std::size_t> paired_mode;
};

/// Metadata about how a Fock mode's phase follows the grid (for manifests
/// and the rigidity checks).
struct ModeRecord {
  std::string label;
  std::string kind;  // "coherent", "squeezed", "tmss", "input", ...
  double magnitude = 0.0;
  PhaseRule phase;
};

struct EnsemblePoint {
  std::vector<double> phases;
  double weight = 0.0;
  FockVector component;
};

/// A single mode carried as a density matrix, identical at every grid point.
struct MixedSlot {
  std::size_t position = 0;
  DensityMatrix rho;
};

inline std::vector<double> uniform_grid(std::size_t K) {
  if (K == 0) throw std::invalid_argument("uniform_grid: K must be positive");
  std::vector<double> g(K);
  for (std::size_t k = 0; k < K; ++k) g[k] = 2.0 * std::numbers::pi * double(k) / double(K);
  return g;
}

class PhaseEnsemble {
 public:
  PhaseEnsemble() = default;
  PhaseEnsemble(std::size_t grid_size, std::size_t num_phases, std::vector<EnsemblePoint> points,
                std::vector<LOParam> los, std::vector<ModeRecord> modes, std::optional<MixedSlot> mixed = std::nullopt)
      : grid_size_(grid_size),
        num_phases_(num_phases),
        points_(std::move(points)),
        los_(std::move(los)),
        modes_(std::move(modes)),
        mixed_(std::move(mixed)) {
    validate();
  }

  std::size_t grid_size() const { return grid_size_; }
  std::size_t num_phases() const { return num_phases_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<EnsemblePoint>& points() const { return points_; }
  const EnsemblePoint& point(std::size_t k) const { return points_.at(k); }
  const std::vector<LOParam>& los() const { return los_; }
  const std::vector<ModeRecord>& modes() const { return modes_; }
  const std::optional<MixedSlot>& mixed() const { return mixed_; }

  std::size_t dim() const { return points_.front().component.dim(); }
  std::size_t pure_modes() const { return points_.front().component.num_modes(); }
  std::size_t num_modes() const { return pure_modes() + (mixed_ ? 1 : 0); }

  /// Maps a full-ordering mode index to the index inside the pure component,
  /// or nullopt for the mixed slot.
  std::optional<std::size_t> pure_index(std::size_t full_mode) const {
    if (full_mode >= num_modes()) throw std::out_of_range("PhaseEnsemble: mode index out of range");
    if (!mixed_) return full_mode;
    if (full_mode == mixed_->position) return std::nullopt;
    return full_mode < mixed_->position ? full_mode : full_mode - 1;
  }

  const LOParam& lo_for_mode(std::size_t full_mode) const {
    for (const auto& lo : los_)
      if (lo.paired_mode && *lo.paired_mode == full_mode) return lo;
    throw std::invalid_argument("PhaseEnsemble: mode " + std::to_string(full_mode) + " has no paired local oscillator");
  }

  const LOParam& lo(const std::string& label) const {
    for (const auto& l : los_)
      if (l.label == label) return l;
    throw std::invalid_argument("PhaseEnsemble: no local oscillator labelled " + label);
  }

  double lo_phase(const LOParam& lo, std::size_t k) const { return lo.phase.eval(points_.at(k).phases); }

  /// Tr of the implied operator, computed without forming it.
  double trace() const {
    double t = 0.0;
    for (const auto& p : points_) t += p.weight * p.component.norm_squared();
    return t * (mixed_ ? mixed_->rho.trace() : 1.0);
  }

  double tail_mass() const {
    double t = 0.0;
    for (const auto& p : points_) t += p.weight * p.component.tail_mass();
    return t;
  }

  /// Reduced state of the implied operator sum_k w_k rho_k on keep_modes
  /// (full ordering, sorted output order).
  DensityMatrix reduced_density(std::vector<std::size_t> keep_modes) const {
    if (keep_modes.empty()) throw std::invalid_argument("PhaseEnsemble::reduced_density: empty keep set");
    std::sort(keep_modes.begin(), keep_modes.end());
    keep_modes.erase(std::unique(keep_modes.begin(), keep_modes.end()), keep_modes.end());
    std::vector<std::size_t> keep_pure;
    bool keep_mixed = false;
    std::size_t mixed_rank = 0;  // position of the mixed mode inside keep_modes
    for (std::size_t i = 0; i < keep_modes.size(); ++i) {
      const auto pi = pure_index(keep_modes[i]);
      if (pi) {
        keep_pure.push_back(*pi);
      } else {
        keep_mixed = true;
        mixed_rank = i;
      }
    }
    const std::size_t N = dim();
    std::optional<CMatrix> acc;
    double pure_trace = 0.0;
    for (const auto& p : points_) {
      if (keep_pure.empty()) {
        pure_trace += p.weight * p.component.norm_squared();
        continue;
      }
      const CMatrix r = cvqt::reduced_density(p.component, keep_pure).entries() * p.weight;
      if (acc) {
        *acc += r;
      } else {
        acc = r;
      }
    }
    if (!keep_mixed) {
      const double scale = mixed_ ? mixed_->rho.trace() : 1.0;
      return {keep_pure.size(), N, *acc * scale};
    }
    if (keep_pure.empty()) return {1, N, mixed_->rho.entries() * pure_trace};
    // mixed factor first, then move it to its sorted position
    const DensityMatrix joint = tensor(mixed_->rho, DensityMatrix(keep_pure.size(), N, *acc));
    std::vector<std::size_t> perm(keep_modes.size());
    // perm[i] = which factor of `joint` ends up at output position i
    for (std::size_t i = 0, next_pure = 1; i < perm.size(); ++i) perm[i] = (i == mixed_rank) ? 0 : next_pure++;
    return permute_modes(joint, perm);
  }

  /// The full implied density operator; only for small total dimension.
  DensityMatrix implied_density() const {
    std::vector<std::size_t> all(num_modes());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (ipow(dim(), num_modes()) > kMaxDenseDim) throw NumericalError("implied_density: dimension exceeds dense budget");
    return reduced_density(all);
  }

  /// Same ensemble with new weights (normalized here) and components.
  PhaseEnsemble with_points(std::vector<EnsemblePoint> pts, std::optional<MixedSlot> mixed) const {
    return PhaseEnsemble(grid_size_, num_phases_, std::move(pts), los_, modes_, std::move(mixed));
  }

 private:
  void validate() const {
    if (points_.empty()) throw std::invalid_argument("PhaseEnsemble: no grid points");
    double total = 0.0;
    for (const auto& p : points_) {
      if (!(p.weight >= 0.0)) throw std::invalid_argument("PhaseEnsemble: negative weight");
      if (p.phases.size() != num_phases_) throw std::invalid_argument("PhaseEnsemble: grid phase count mismatch");
      if (p.component.dim() != points_.front().component.dim() ||
          p.component.num_modes() != points_.front().component.num_modes())
        throw std::invalid_argument("PhaseEnsemble: components have inconsistent shapes");
      total += p.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("PhaseEnsemble: weights must sum to 1");
    if (mixed_) {
      if (mixed_->rho.num_modes() != 1 || mixed_->rho.dim() != points_.front().component.dim())
        throw std::invalid_argument("PhaseEnsemble: mixed slot must be one mode at the common truncation");
      if (mixed_->position > points_.front().component.num_modes())
        throw std::invalid_argument("PhaseEnsemble: mixed slot position out of range");
    }
    for (const auto& lo : los_) {
      if (!(lo.amplitude >= 0.0)) throw std::invalid_argument("PhaseEnsemble: LO amplitude must be nonnegative");
      if (lo.paired_mode && *lo.paired_mode >= num_modes())
        throw std::invalid_argument("PhaseEnsemble: LO paired with a nonexistent mode");
    }
  }

  std::size_t grid_size_ = 0;
  std::size_t num_phases_ = 1;
  std::vector<EnsemblePoint> points_;
  std::vector<LOParam> los_;
  std::vector<ModeRecord> modes_;
  std::optional<MixedSlot> mixed_;
};

/// Normalizes nonnegative weights in place; throws if they vanish.
inline void normalize_weights(std::vector<EnsemblePoint>& pts) {
  double total = 0.0;
  for (const auto& p : pts) total += p.weight;
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("ensemble weights sum to zero");
  for (auto& p : pts) p.weight /= total;
}

// ---------------------------------------------------------------------------
// Constructors

/// Uniform mixture of |r e^{i phi_k}>.
inline PhaseEnsemble single_laser_ensemble(double r, std::size_t K, std::size_t N, double tail_cap = kDefaultTailCap) {
  if (r < 0.0) throw std::invalid_argument("single_laser_ensemble: amplitude must be nonnegative");
  std::vector<EnsemblePoint> pts;
  pts.reserve(K);
  for (double phi : uniform_grid(K)) pts.push_back({{phi}, 1.0 / double(K), coherent_state(std::polar(r, phi), N, tail_cap)});
  return PhaseEnsemble(K, 1, std::move(pts), {}, {{"laser", "coherent", r, {0, 1.0, 0.0}}});
}

/// Frequency-doubled pump: the signal is squeezed vacuum with phase 2 phi,
/// the LO carries phase phi + phi_c.
/// squeeze_offset adds a fixed phase to the squeeze parameter.
inline PhaseEnsemble pump_locked_ensemble(double r_o, double s, double phi_c, std::size_t K, std::size_t N,
                                          double tail_cap = kDefaultTailCap, double squeeze_offset = 0.0) {
  if (s < 0.0) throw std::invalid_argument("pump_locked_ensemble: squeeze magnitude must be nonnegative");
  const PhaseRule squeeze_rule{0, 2.0, squeeze_offset};
  std::vector<EnsemblePoint> pts;
  pts.reserve(K);
  for (double phi : uniform_grid(K)) {
    const std::vector<double> ph{phi};
    pts.push_back({ph, 1.0 / double(K), squeezed_vacuum(std::polar(s, squeeze_rule.eval(ph)), N, tail_cap)});
  }
  std::vector<LOParam> los{{"lo", r_o, {0, 1.0, phi_c}, 0}};
  return PhaseEnsemble(K, 1, std::move(pts), std::move(los), {{"signal", "squeezed", s, squeeze_rule}});
}

struct CvqtLOAmplitudes {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
};

/// Teleportation initial state. Full mode ordering is (in, 1, 2): the input
/// mode is the mixed slot, modes 1 and 2 hold the two-mode squeezed state
/// with pump phase 2 phi. After the 50/50 beamsplitter on (in, 1) the slots
/// hold (s1, s2, 2), which is what the LO pairings refer to.
inline PhaseEnsemble cvqt_initial_ensemble(CvqtLOAmplitudes r_o, double eta, const DensityMatrix& rho_in, std::size_t K,
                                           std::size_t N, double tail_cap = kDefaultTailCap) {
  if (rho_in.num_modes() != 1 || rho_in.dim() != N)
    throw std::invalid_argument("cvqt_initial_ensemble: rho_in must be single-mode at truncation N");
  const PhaseRule pump_rule{0, 2.0, 0.0};
  std::vector<EnsemblePoint> pts;
  pts.reserve(K);
  for (double phi : uniform_grid(K)) {
    const std::vector<double> ph{phi};
    pts.push_back({ph, 1.0 / double(K), two_mode_squeezed(eta, pump_rule.eval(ph), N, tail_cap)});
  }
  std::vector<LOParam> los{{"l1", r_o.l1, {0, 1.0, 0.0}, 0},
                           {"l2", r_o.l2, {0, 1.0, std::numbers::pi / 2}, 1},
                           {"l3", r_o.l3, {0, 1.0, 0.0}, 2}};
  std::vector<ModeRecord> modes{{"in", "input", 0.0, {0, 0.0, 0.0}}, {"1,2", "tmss", eta, pump_rule}};
  return PhaseEnsemble(K, 1, std::move(pts), std::move(los), std::move(modes), MixedSlot{0, rho_in});
}

inline PhaseEnsemble cvqt_initial_ensemble(double r_o, double eta, const DensityMatrix& rho_in, std::size_t K,
                                           std::size_t N, double tail_cap = kDefaultTailCap) {
  return cvqt_initial_ensemble(CvqtLOAmplitudes{r_o, r_o, r_o}, eta, rho_in, K, N, tail_cap);
}

/// Two independent lasers a and b on a K x K grid of (phi_a, phi_b).
/// Full mode ordering is (a, b).
inline PhaseEnsemble two_laser_ensemble(double r_a, double r_b, std::size_t K, std::size_t N,
                                        double tail_cap = kDefaultTailCap) {
  const auto grid = uniform_grid(K);
  std::vector<FockVector> fa, fb;
  for (double phi : grid) {
    fa.push_back(coherent_state(std::polar(r_a, phi), N, tail_cap));
    fb.push_back(coherent_state(std::polar(r_b, phi), N, tail_cap));
  }
  std::vector<EnsemblePoint> pts;
  pts.reserve(K * K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) pts.push_back({{grid[i], grid[j]}, 1.0 / double(K * K), tensor(fa[i], fb[j])});
  return PhaseEnsemble(K, 2, std::move(pts), {},
                       {{"a", "coherent", r_a, {0, 1.0, 0.0}}, {"b", "coherent", r_b, {1, 1.0, 0.0}}});
}

}  // namespace cvqt::laser
