#pragma once

// JSON / CSV / JSONL encodings of library objects.
//
// Complex arrays are stored as [[re, im], ...]; matrices row-major. Doubles
// go through nlohmann::json, which prints the shortest round-trip form, so
// identical inputs always give identical bytes.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvqt/contmeas.hpp"
#include "cvqt/fock.hpp"
#include "cvqt/laser.hpp"

namespace cvqt::io {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline json complex_array(const Complex* data, std::size_t n) {
  json a = json::array();
  for (std::size_t i = 0; i < n; ++i) a.push_back({data[i].real(), data[i].imag()});
  return a;
}

inline Complex complex_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline json to_json(const FockVector& v) {
  return {{"modes", v.num_modes()},
          {"dim", v.dim()},
          {"kind", v.is_improper() ? "improper" : "proper"},
          {"tail_mass", v.tail_mass()},
          {"amplitudes", detail::complex_array(v.amplitudes().data(), v.size())}};
}

inline FockVector fock_vector_from_json(const json& j) {
  const auto modes = j.at("modes").get<std::size_t>();
  const auto dim = j.at("dim").get<std::size_t>();
  const auto& amps = j.at("amplitudes");
  CVector v(static_cast<Eigen::Index>(amps.size()));
  for (std::size_t i = 0; i < amps.size(); ++i) v[Eigen::Index(i)] = detail::complex_from(amps[i]);
  const auto kind = j.value("kind", std::string("proper")) == "improper" ? FockVector::Kind::improper : FockVector::Kind::proper;
  return FockVector(modes, dim, std::move(v), kind, j.value("tail_mass", 0.0));
}

inline json to_json(const DensityMatrix& rho) {
  json a = json::array();
  for (Eigen::Index r = 0; r < rho.entries().rows(); ++r)
    for (Eigen::Index c = 0; c < rho.entries().cols(); ++c) a.push_back({rho.entries()(r, c).real(), rho.entries()(r, c).imag()});
  return {{"modes", rho.num_modes()}, {"dim", rho.dim()}, {"entries", std::move(a)}};
}

inline DensityMatrix density_matrix_from_json(const json& j) {
  const auto modes = j.at("modes").get<std::size_t>();
  const auto dim = j.at("dim").get<std::size_t>();
  const auto& e = j.at("entries");
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(e.size()))));
  if (std::size_t(n * n) != e.size()) throw std::invalid_argument("density matrix entries are not square");
  CMatrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = detail::complex_from(e[std::size_t(r * n + c)]);
  return DensityMatrix(modes, dim, std::move(m));
}

inline json to_json(const laser::PhaseRule& r) {
  return {{"source", r.source}, {"multiplier", r.multiplier}, {"offset", r.offset}};
}

/// Grid size, LO and mode parameters; amplitudes are not included.
inline json ensemble_metadata(const laser::PhaseEnsemble& e) {
  json los = json::array();
  for (const auto& lo : e.los()) {
    los.push_back({{"label", lo.label},
                   {"amplitude", lo.amplitude},
                   {"phase", to_json(lo.phase)},
                   {"paired_mode", lo.paired_mode ? json(*lo.paired_mode) : json(nullptr)}});
  }
  json modes = json::array();
  for (const auto& m : e.modes())
    modes.push_back({{"label", m.label}, {"kind", m.kind}, {"magnitude", m.magnitude}, {"phase", to_json(m.phase)}});
  return {{"grid_size", e.grid_size()},
          {"num_phases", e.num_phases()},
          {"points", e.size()},
          {"dim", e.dim()},
          {"num_modes", e.num_modes()},
          {"mixed_slot", e.mixed() ? json(e.mixed()->position) : json(nullptr)},
          {"local_oscillators", std::move(los)},
          {"modes", std::move(modes)}};
}

inline json to_json(const contmeas::TrajectoryRecord& r) {
  json jumps = json::array();
  for (const auto& j : r.jumps) jumps.push_back({j.time, std::string(1, contmeas::mode_char(j.mode))});
  json hist = json::array();
  for (const auto& [t, rt] : r.r_history) hist.push_back({t, rt});
  return {{"seed", r.seed},
          {"dt", r.dt},
          {"end_time", r.end_time},
          {"jumps", std::move(jumps)},
          {"s", r.stats.total},
          {"p", r.stats.p},
          {"q", r.stats.q()},
          {"r_t", r.posterior.r_t},
          {"r_history", std::move(hist)},
          {"posterior_mode", r.posterior.grid.empty() ? 0.0 : r.posterior.grid[r.posterior.mode_index()]},
          {"validity_ratio", r.validity_ratio},
          {"valid", r.valid}};
}

// ---------------------------------------------------------------------------
// Files

/// Shortest round-trip decimal form, matching the JSON output.
inline std::string format_double(double v) { return json(v).dump(); }

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(format_double(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

inline void write_jsonl(const std::string& path, const std::vector<json>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& l : lines) out << l.dump() << '\n';
}

}  // namespace cvqt::io
