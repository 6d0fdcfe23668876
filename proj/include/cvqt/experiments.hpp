#pragma once

// Experiment runners behind the command-line tool. Each runner validates its
// configuration, writes CSV/JSON/JSONL files into the output directory, and
// returns the summary it wrote.

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "cvqt/contmeas.hpp"
#include "cvqt/fock.hpp"
#include "cvqt/laser.hpp"
#include "cvqt/obpm.hpp"
#include "cvqt/serialize.hpp"
#include "cvqt/teleport.hpp"

namespace cvqt::experiments {

using nlohmann::json;

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A self-check value outside its acceptance threshold.
class ThresholdBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string command;
  std::string out_dir = ".";
  std::uint64_t seed = 1;

  // truncation and phase grid
  std::size_t N = 40;
  std::size_t K = 256;
  double tail_cap = kDefaultTailCap;

  // squeezed-light homodyne
  double r_o = 100.0;
  double s = 0.5;
  double phi_c = 0.0;
  double x_step = 0.01;
  double x_half_width = 0.0;  // 0: chosen from s

  // teleportation
  std::vector<double> eta{0.0, 0.2, 0.5, 0.8};
  Complex alpha{1.0, 0.0};
  std::size_t samples = 10000;

  // continuous measurement
  std::size_t s_total = 100;
  std::size_t p = 100;
  double r_t2 = 1000.0;
  std::size_t m_max = 0;  // 0: chosen from r_t2
  double R = 1.0e-3;
  double dt = 1.0;
  double t_end = 1.0e4;
  std::size_t trajectories = 1000;
  std::size_t stop_after_jumps = 20;  // 0: run to t_end
  std::size_t delta_grid = 1024;
};

// ---------------------------------------------------------------------------
// Config <-> JSON

inline json to_json(const ExperimentConfig& c) {
  return {{"command", c.command},
          {"out_dir", c.out_dir},
          {"seed", c.seed},
          {"N", c.N},
          {"K", c.K},
          {"tail_cap", c.tail_cap},
          {"r_o", c.r_o},
          {"s", c.s},
          {"phi_c", c.phi_c},
          {"x_step", c.x_step},
          {"x_half_width", c.x_half_width},
          {"eta", c.eta},
          {"alpha", {c.alpha.real(), c.alpha.imag()}},
          {"samples", c.samples},
          {"s_total", c.s_total},
          {"p", c.p},
          {"r_t2", c.r_t2},
          {"m_max", c.m_max},
          {"R", c.R},
          {"dt", c.dt},
          {"t_end", c.t_end},
          {"trajectories", c.trajectories},
          {"stop_after_jumps", c.stop_after_jumps},
          {"delta_grid", c.delta_grid}};
}

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Overlays the fields present in j onto base; unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const json known = to_json(base);
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  using detail::read_field;
  read_field(j, "command", base.command);
  read_field(j, "out_dir", base.out_dir);
  read_field(j, "seed", base.seed);
  read_field(j, "N", base.N);
  read_field(j, "K", base.K);
  read_field(j, "tail_cap", base.tail_cap);
  read_field(j, "r_o", base.r_o);
  read_field(j, "s", base.s);
  read_field(j, "phi_c", base.phi_c);
  read_field(j, "x_step", base.x_step);
  read_field(j, "x_half_width", base.x_half_width);
  read_field(j, "eta", base.eta);
  if (j.contains("alpha")) {
    std::vector<double> a;
    read_field(j, "alpha", a);
    if (a.size() != 2) throw ConfigError("field 'alpha': expected [re, im]");
    base.alpha = {a[0], a[1]};
  }
  read_field(j, "samples", base.samples);
  read_field(j, "s_total", base.s_total);
  read_field(j, "p", base.p);
  read_field(j, "r_t2", base.r_t2);
  read_field(j, "m_max", base.m_max);
  read_field(j, "R", base.R);
  read_field(j, "dt", base.dt);
  read_field(j, "t_end", base.t_end);
  read_field(j, "trajectories", base.trajectories);
  read_field(j, "stop_after_jumps", base.stop_after_jumps);
  read_field(j, "delta_grid", base.delta_grid);
  return base;
}

namespace detail {

inline void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(std::string("field '") + field + "': " + what);
}

inline void validate_common(const ExperimentConfig& c) {
  require(!c.out_dir.empty(), "out_dir", "must not be empty");
}

}  // namespace detail

inline void validate_squeezed(const ExperimentConfig& c) {
  using detail::require;
  detail::validate_common(c);
  require(c.N >= 2 && c.N <= 400, "N", "must lie in [2, 400]");
  require(c.K >= 1 && c.K <= 4096, "K", "must lie in [1, 4096]");
  require(c.tail_cap > 0.0 && c.tail_cap <= 1.0, "tail_cap", "must lie in (0, 1]");
  require(c.r_o > 0.0, "r_o", "must be positive");
  require(c.s >= 0.0 && c.s <= 3.0, "s", "must lie in [0, 3]");
  require(std::isfinite(c.phi_c), "phi_c", "must be finite");
  require(c.x_step > 0.0 && c.x_step <= 0.5, "x_step", "must lie in (0, 0.5]");
  require(c.x_half_width >= 0.0 && c.x_half_width <= 200.0, "x_half_width", "must lie in [0, 200]");
}

inline void validate_teleport(const ExperimentConfig& c) {
  using detail::require;
  detail::validate_common(c);
  require(c.N >= 2 && c.N <= 120, "N", "must lie in [2, 120]");
  require(c.K >= 1 && c.K <= 4096, "K", "must lie in [1, 4096]");
  require(!c.eta.empty(), "eta", "needs at least one value");
  for (double e : c.eta) require(e >= 0.0 && e <= 0.999, "eta", "values must lie in [0, 0.999]");
  require(std::isfinite(std::abs(c.alpha)) && std::abs(c.alpha) <= 5.0, "alpha", "|alpha| must not exceed 5");
  require(c.samples >= 2 && c.samples <= 10'000'000, "samples", "must lie in [2, 1e7]");
  require(c.r_o > 0.0, "r_o", "must be positive");
}

inline void validate_contmeas_analytic(const ExperimentConfig& c) {
  using detail::require;
  detail::validate_common(c);
  require(c.s_total <= contmeas::kMaxJumps, "s_total", "must not exceed 1e6");
  require(c.p <= c.s_total, "p", "must not exceed s_total");
  require(c.r_t2 >= 0.0 && c.r_t2 <= 1.0e4, "r_t2", "must lie in [0, 1e4]");
  require(c.m_max <= 100'000, "m_max", "must not exceed 1e5");
}

inline void validate_contmeas_trajectory(const ExperimentConfig& c) {
  using detail::require;
  detail::validate_common(c);
  require(c.r_o >= 0.0 && c.r_o * c.r_o <= 1.0e4, "r_o", "r_o^2 must lie in [0, 1e4]");
  require(c.R >= 0.0, "R", "must be nonnegative");
  require(c.dt > 0.0, "dt", "must be positive");
  require(c.R * c.dt <= 1.0e-3, "dt", "R * dt must not exceed 1e-3");
  require(4.0 * c.R * c.dt * c.r_o * c.r_o <= 1.0, "dt", "4 R dt r_o^2 must not exceed 1");
  require(c.t_end >= 0.0 && c.t_end / c.dt <= 1.0e9, "t_end", "must be nonnegative with at most 1e9 steps");
  require(c.trajectories >= 1 && c.trajectories <= 10'000'000, "trajectories", "must lie in [1, 1e7]");
  require(c.delta_grid >= 4 && c.delta_grid <= 1'000'000, "delta_grid", "must lie in [4, 1e6]");
}

// ---------------------------------------------------------------------------
// Report helpers

namespace detail {

inline std::string out_path(const ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.out_dir) / name).string();
}

inline void prepare(const ExperimentConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw ConfigError("field 'out_dir': cannot create '" + c.out_dir + "': " + ec.message());
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline json finish_summary(const ExperimentConfig& c, json results, const std::vector<std::string>& files,
                           const Stopwatch& clock) {
  json j{{"config", to_json(c)},
         {"seed", c.seed},
         {"version", io::kVersion},
         {"files", files},
         {"results", std::move(results)},
         {"runtime_seconds", clock.seconds()}};
  return j;
}

}  // namespace detail

/// Chi-square survival function, for goodness-of-fit p-values.
inline double chi_square_p_value(double statistic, std::size_t dof) {
  if (dof == 0) return 1.0;
  return boost::math::gamma_q(0.5 * double(dof), 0.5 * statistic);
}

// ---------------------------------------------------------------------------
// squeezed-homodyne

inline json run_squeezed_homodyne(const ExperimentConfig& c) {
  validate_squeezed(c);
  detail::prepare(c);
  detail::Stopwatch clock;
  const auto e = laser::pump_locked_ensemble(c.r_o, c.s, c.phi_c, c.K, c.N, c.tail_cap);
  const double half = c.x_half_width > 0.0 ? c.x_half_width : 8.0 * std::exp(c.s) + 2.0;
  const obpm::MeasurementKernel kernel(obpm::QuadratureGrid::symmetric(half, c.x_step), c.N);
  const auto dens = obpm::homodyne_density(e, 0, kernel);
  const auto& grid = kernel.grid();

  const std::string csv = "squeezed_homodyne.csv";
  io::CsvWriter w(detail::out_path(c, csv), {"x", "p_obpm", "p_closed"});
  std::vector<double> closed(grid.count);
  double max_dev = 0.0;
  for (std::size_t i = 0; i < grid.count; ++i) {
    closed[i] = obpm::squeezed_quadrature_density(grid.x(i), c.s, c.phi_c);
    max_dev = std::max(max_dev, std::abs(dens[i] - closed[i]));
    w.row({grid.x(i), dens[i], closed[i]});
  }
  const auto [mean, var] = obpm::moments(dens, grid);
  const double cs = std::cos(c.phi_c), sn = std::sin(c.phi_c);
  const double expected_var = std::exp(-2 * c.s) * cs * cs + std::exp(2 * c.s) * sn * sn;
  json results{{"max_pointwise_deviation", max_dev},
               {"mean", mean},
               {"variance", var},
               {"variance_expected", expected_var},
               {"variance_ratio", var / expected_var},
               {"normalization", obpm::integrate(dens, grid)},
               {"x_range", {grid.x_min, grid.x_max()}},
               {"ensemble", io::ensemble_metadata(e)}};
  auto summary = detail::finish_summary(c, std::move(results), {csv, "squeezed_homodyne_summary.json"}, clock);
  io::write_json(detail::out_path(c, "squeezed_homodyne_summary.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// teleport

inline json run_teleport(const ExperimentConfig& c) {
  validate_teleport(c);
  detail::prepare(c);
  detail::Stopwatch clock;
  const auto rho = DensityMatrix::from_pure(coherent_state(c.alpha, c.N, c.tail_cap));
  teleport::ExperimentOptions opt;
  opt.grid_size = c.K;
  opt.lo_amplitude = c.r_o;
  const auto shared = teleport::fidelity_experiment(c.eta, rho, {true, 0.0}, c.samples, c.seed, opt);
  const auto unshared = teleport::fidelity_experiment(c.eta, rho, {false, 0.0}, c.samples, c.seed, opt);

  const std::string csv = "teleport_fidelity.csv";
  io::CsvWriter w(detail::out_path(c, csv),
                  {"eta", "shared_mean", "shared_stderr", "unshared_mean", "unshared_stderr", "samples"});
  json rows = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    const auto& a = shared[i];
    const auto& b = unshared[i];
    w.row({a.eta, a.mean, a.std_error, b.mean, b.std_error, double(a.samples)});
    const double sigma = std::hypot(a.std_error, b.std_error);
    rows.push_back({{"eta", a.eta},
                    {"shared", {{"mean", a.mean}, {"std_error", a.std_error}, {"grid_mass", a.grid_mass}}},
                    {"unshared", {{"mean", b.mean}, {"std_error", b.std_error}, {"grid_mass", b.grid_mass}}},
                    {"samples", a.samples},
                    {"gap", a.mean - b.mean},
                    {"gap_sigma", sigma > 0.0 ? json((a.mean - b.mean) / sigma) : json(nullptr)}});
    if (i > 0 && !(a.mean > shared[i - 1].mean)) monotone = false;
  }
  json results{{"rows", std::move(rows)},
               {"shared_monotone_in_eta", monotone},
               {"input", {{"alpha", {c.alpha.real(), c.alpha.imag()}}}},
               {"note", "Bob's correction is the strong local-oscillator limit (a displacement of mode 2)"}};
  auto summary = detail::finish_summary(c, std::move(results), {csv, "teleport_summary.json"}, clock);
  io::write_json(detail::out_path(c, "teleport_summary.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// contmeas-analytic

inline std::size_t default_m_max(double r_t2) {
  return std::size_t(std::ceil(2.0 * r_t2 + 12.0 * std::sqrt(2.0 * r_t2 + 1.0) + 20.0));
}

inline json run_contmeas_analytic(const ExperimentConfig& c) {
  validate_contmeas_analytic(c);
  detail::prepare(c);
  detail::Stopwatch clock;
  const std::size_t s = c.s_total;

  const std::string jump_csv = "jump_counts.csv";
  {
    io::CsvWriter w(detail::out_path(c, jump_csv), {"p", "probability"});
    for (std::size_t p = 0; p <= s; ++p) w.row({double(p), contmeas::jump_count_probability(s, p)});
  }
  double norm = 0.0;
  bool symmetric = true;
  for (std::size_t p = 0; p <= s; ++p) {
    norm += contmeas::jump_count_probability(s, p);
    symmetric = symmetric && contmeas::jump_count_probability(s, p) == contmeas::jump_count_probability(s, s - p);
  }

  const double r_t = std::sqrt(c.r_t2);
  const std::size_t m_max = c.m_max > 0 ? c.m_max : default_m_max(c.r_t2);
  const auto table = contmeas::photon_table(s, c.p, r_t, m_max);
  const std::string photon_csv = "photon_distribution.csv";
  {
    io::CsvWriter w(detail::out_path(c, photon_csv), {"m", "p_c", "p_d", "p_c_oracle", "p_d_oracle"});
    for (const auto& r : table.rows) w.row({double(r.m), r.p_c, r.p_d, r.p_c_oracle, r.p_d_oracle});
  }
  double tv_poisson = 0.0;
  for (const auto& r : table.rows) tv_poisson += std::abs(r.p_c - std::exp(contmeas::detail::log_poisson(2 * c.r_t2, r.m)));
  tv_poisson *= 0.5;

  json results{{"s_total", s},
               {"p", c.p},
               {"p_extremes", contmeas::jump_count_probability(s, 0) + contmeas::jump_count_probability(s, s)},
               {"jump_normalization", norm},
               {"jump_symmetric", symmetric},
               {"r_t2", c.r_t2},
               {"m_max", m_max},
               {"sum_p_c", table.sum_c},
               {"sum_p_d", table.sum_d},
               {"peak_c", table.peak_c},
               {"peak_d", table.peak_d},
               {"oracle_max_abs_deviation", table.max_oracle_deviation},
               {"oracle_peak_rel_deviation", std::max(table.peak_relative_deviation_c, table.peak_relative_deviation_d)},
               {"tv_to_poisson", tv_poisson}};
  auto summary =
      detail::finish_summary(c, std::move(results), {jump_csv, photon_csv, "contmeas_analytic_summary.json"}, clock);
  io::write_json(detail::out_path(c, "contmeas_analytic_summary.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// contmeas-trajectory

inline contmeas::TrajectoryConfig trajectory_config(const ExperimentConfig& c) {
  contmeas::TrajectoryConfig t;
  t.r_o = c.r_o;
  t.R = c.R;
  t.dt = c.dt;
  t.t_end = c.t_end;
  t.grid_size = c.delta_grid;
  if (c.stop_after_jumps > 0) t.stop_after_jumps = c.stop_after_jumps;
  return t;
}

inline json run_contmeas_trajectory(const ExperimentConfig& c) {
  validate_contmeas_trajectory(c);
  detail::prepare(c);
  detail::Stopwatch clock;
  const auto recs = contmeas::mcwf_batch(trajectory_config(c), c.seed, c.trajectories);

  const std::string jsonl = "trajectories.jsonl";
  {
    std::vector<json> lines;
    lines.reserve(recs.size());
    for (const auto& r : recs) lines.push_back(io::to_json(r));
    io::write_jsonl(detail::out_path(c, jsonl), lines);
  }

  std::vector<std::string> files{jsonl};
  json results{{"trajectories", recs.size()}};
  std::size_t flagged = 0;
  for (const auto& r : recs) flagged += !r.valid;
  results["outside_validity_regime"] = flagged;

  if (c.stop_after_jumps > 0) {
    const std::size_t s = c.stop_after_jumps;
    const auto hist = contmeas::jump_histogram(recs, s);
    const auto chi = contmeas::chi_square_jump_counts(hist);
    const std::string csv = "jump_histogram.csv";
    io::CsvWriter w(detail::out_path(c, csv), {"p", "count", "expected"});
    json tv = json::object();
    double tv_max = 0.0;
    for (std::size_t p = 0; p <= s; ++p) {
      w.row({double(p), double(hist[p]), double(chi.samples) * contmeas::jump_count_probability(s, p)});
      const auto emp = contmeas::empirical_posterior(recs, s, p);
      if (emp.empty()) continue;
      const double d = contmeas::total_variation(emp, contmeas::posterior_phase_state(s, p, 1.0, c.delta_grid).weights);
      tv[std::to_string(p)] = d;
      tv_max = std::max(tv_max, d);
    }
    files.push_back(csv);
    results["conditioned_on_jumps"] = s;
    results["conditioned_samples"] = chi.samples;
    results["chi_square"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi_square_p_value(chi.statistic, chi.dof)}};
    results["posterior_tv"] = std::move(tv);
    results["posterior_tv_max"] = tv_max;
  }
  files.push_back("contmeas_trajectory_summary.json");
  auto summary = detail::finish_summary(c, std::move(results), files, clock);
  io::write_json(detail::out_path(c, "contmeas_trajectory_summary.json"), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// selfcheck

struct CheckLine {
  std::string name;
  double value;
  double threshold;
  bool pass;
};

/// Fast desk-scale versions of the main identities. Writes selfcheck.json;
/// throws ThresholdBreach after writing if any check fails.
inline json run_selfcheck(const ExperimentConfig& c) {
  detail::validate_common(c);
  detail::prepare(c);
  detail::Stopwatch clock;
  std::vector<CheckLine> lines;
  const auto le = [&](std::string name, double v, double thr) { lines.push_back({std::move(name), v, thr, v <= thr}); };

  le("jump_extremes_s100_abs_error", std::abs(contmeas::jump_count_probability(100, 0) + contmeas::jump_count_probability(100, 100) - 0.113), 1e-3);
  {
    double worst = 0.0;
    for (std::size_t s : {1u, 10u, 100u, 1000u}) {
      double t = 0.0;
      for (std::size_t p = 0; p <= s; ++p) t += contmeas::jump_count_probability(s, p);
      worst = std::max(worst, std::abs(t - 1.0));
    }
    le("jump_normalization_error", worst, 1e-12);
  }
  le("photon_oracle_abs_deviation", contmeas::photon_table(8, 3, 2.0, 60).max_oracle_deviation, 1e-8);
  {
    const std::size_t N = 40;
    const auto e = laser::pump_locked_ensemble(100.0, 0.5, 0.0, 64, N);
    const obpm::MeasurementKernel kernel(obpm::QuadratureGrid::symmetric(8.0, 0.05), N);
    const auto d = obpm::homodyne_density(e, 0, kernel);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
      worst = std::max(worst, std::abs(d[i] - obpm::squeezed_quadrature_density(kernel.grid().x(i), 0.5, 0.0)));
    le("squeezed_density_deviation", worst, 1e-6);
  }
  {
    const std::size_t N = 25;
    const double eta = 0.6, phi = 0.3;
    const Complex gamma(1.0, 0.5);
    const auto t = teleport::dual_homodyne_project(eta, 2 * phi, gamma, phi, N);
    double worst = 0.0;
    for (std::size_t m = 0; m <= 12; ++m) {
      FockVector in(1, N);
      in.amplitudes()[Eigen::Index(m)] = 1.0;
      const auto st = beamsplitter_5050(tensor(in, two_mode_squeezed(eta, 2 * phi, N, 1.0)), 0, 1);
      const auto o = teleport::DualOutcome::from_gamma(gamma);
      const auto col = project_mode(project_mode(st, 0, quadrature_amplitudes(o.x1, phi, N)), 0,
                                    quadrature_amplitudes(o.x2, phi + std::numbers::pi / 2, N))
                           .amplitudes();
      for (Eigen::Index n = 0; n <= 12; ++n) worst = std::max(worst, std::abs(col[n] - t.matrix(n, Eigen::Index(m))));
    }
    le("dual_projection_brute_force_deviation", worst, 1e-8);
  }
  {
    const std::size_t N = 15;
    const auto e = laser::cvqt_initial_ensemble(100.0, 0.0, DensityMatrix::from_pure(coherent_state(0.6, N)), 8, N);
    const auto r = teleport::teleport_once(e, {0.4, -0.2});
    le("teleport_eta0_vacuum_infidelity", std::abs(1.0 - teleport::output_fidelity(r, DensityMatrix::from_pure(coherent_state(0.0, N)))), 1e-10);
  }
  {
    contmeas::TrajectoryConfig t;
    t.r_o = 5.0;
    t.t_end = 3000.0;
    contmeas::TrajectoryEngine eng(t, c.seed);
    double changed = 0.0, decay = 0.0;
    auto before = eng.weights();
    while (!eng.done()) {
      const bool jumped = eng.step().has_value();
      if (!jumped && eng.weights() != before) changed = 1.0;
      decay = std::max(decay, std::abs(eng.r_t() / t.r_o - std::exp(-t.R * eng.time())));
      before = eng.weights();
    }
    le("null_segment_posterior_changed", changed, 0.0);
    le("amplitude_decay_error", decay, 1e-12);
  }

  json checks = json::array();
  bool all = true;
  for (const auto& l : lines) {
    checks.push_back({{"name", l.name}, {"value", l.value}, {"threshold", l.threshold}, {"pass", l.pass}});
    all = all && l.pass;
  }
  auto summary = detail::finish_summary(c, {{"checks", std::move(checks)}, {"all_pass", all}}, {"selfcheck.json"}, clock);
  io::write_json(detail::out_path(c, "selfcheck.json"), summary);
  if (!all) throw ThresholdBreach("selfcheck: one or more checks outside threshold");
  return summary;
}

/// Defaults for a subcommand before any file or flag values are applied.
inline ExperimentConfig defaults_for(const std::string& command) {
  ExperimentConfig c;
  c.command = command;
  if (command == "teleport") {
    c.N = 25;
    c.K = 64;
  } else if (command == "contmeas-trajectory") {
    c.r_o = 10.0;
    c.trajectories = 10000;
  }
  return c;
}

inline json run(const ExperimentConfig& c) {
  if (c.command == "squeezed-homodyne") return run_squeezed_homodyne(c);
  if (c.command == "teleport") return run_teleport(c);
  if (c.command == "contmeas-analytic") return run_contmeas_analytic(c);
  if (c.command == "contmeas-trajectory") return run_contmeas_trajectory(c);
  if (c.command == "selfcheck") return run_selfcheck(c);
  throw ConfigError("field 'command': unknown experiment '" + c.command + "'");
}

}  // namespace cvqt::experiments
