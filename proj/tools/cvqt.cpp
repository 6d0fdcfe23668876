// Command-line runner for the experiments in cvqt/experiments.hpp.
//
//   cvqt <subcommand> [--config file.json] [--flag value ...]
//
// Flags override values from the config file. The output directory defaults
// to $CVQT_OUT_DIR, then to the current directory.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 self-check threshold breach.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvqt/experiments.hpp"

namespace {

using cvqt::experiments::ConfigError;
using cvqt::experiments::ExperimentConfig;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitBreach = 4;

// Flag values land in a scratch config; only flags actually given are copied
// over the file-derived config.
struct Overrides {
  ExperimentConfig v;
  std::vector<double> alpha;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> opts;

  template <class T>
  void add(CLI::App* app, const std::string& flag, T ExperimentConfig::*field, const std::string& help) {
    auto* o = app->add_option(flag, v.*field, help);
    opts.push_back({o, [this, field](ExperimentConfig& c) { c.*field = v.*field; }});
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& [o, set] : opts)
      if (o->count() > 0) set(c);
  }
};

void add_common(CLI::App* app, Overrides& ov, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file");
  ov.add(app, "--out-dir", &ExperimentConfig::out_dir, "output directory");
  ov.add(app, "--seed", &ExperimentConfig::seed, "master seed");
}

ExperimentConfig load(const std::string& command, const std::string& path, const Overrides& ov, CLI::Option* alpha_opt) {
  ExperimentConfig c = cvqt::experiments::defaults_for(command);
  if (const char* env = std::getenv("CVQT_OUT_DIR"); env && *env) c.out_dir = env;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + path + "': " + e.what());
    }
    c = cvqt::experiments::config_from_json(j, c);
  }
  ov.apply(c);
  if (alpha_opt && alpha_opt->count() > 0) c.alpha = {ov.alpha[0], ov.alpha[1]};
  if (!c.command.empty() && c.command != command)
    throw ConfigError("field 'command': config is for '" + c.command + "', not '" + command + "'");
  c.command = command;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-unknown laser experiments: homodyne detection, teleportation, continuous measurement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cvqt::io::kVersion));

  struct Sub {
    CLI::App* app;
    Overrides ov;
    std::string config;
    CLI::Option* alpha = nullptr;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  const auto make = [&](const std::string& name, const std::string& help) {
    subs.push_back(std::make_unique<Sub>());
    auto& s = *subs.back();
    s.app = app.add_subcommand(name, help);
    add_common(s.app, s.ov, s.config);
    return &s;
  };

  auto* sq = make("squeezed-homodyne", "homodyne statistics of pump-locked squeezed light");
  sq->ov.add(sq->app, "--N", &ExperimentConfig::N, "Fock truncation");
  sq->ov.add(sq->app, "--K", &ExperimentConfig::K, "phase grid size");
  sq->ov.add(sq->app, "--tail-cap", &ExperimentConfig::tail_cap, "largest accepted truncated probability");
  sq->ov.add(sq->app, "--r-o", &ExperimentConfig::r_o, "LO amplitude");
  sq->ov.add(sq->app, "--s", &ExperimentConfig::s, "squeeze magnitude");
  sq->ov.add(sq->app, "--phi-c", &ExperimentConfig::phi_c, "LO offset from the squeezing axis");
  sq->ov.add(sq->app, "--x-step", &ExperimentConfig::x_step, "reading grid step");
  sq->ov.add(sq->app, "--x-half-width", &ExperimentConfig::x_half_width, "reading grid half width (0: automatic)");

  auto* tp = make("teleport", "teleportation fidelity with shared and unshared laser phase");
  tp->ov.add(tp->app, "--N", &ExperimentConfig::N, "Fock truncation");
  tp->ov.add(tp->app, "--K", &ExperimentConfig::K, "phase grid size");
  tp->ov.add(tp->app, "--tail-cap", &ExperimentConfig::tail_cap, "largest accepted truncated probability of the input");
  tp->ov.add(tp->app, "--r-o", &ExperimentConfig::r_o, "LO amplitude");
  tp->ov.add(tp->app, "--eta", &ExperimentConfig::eta, "squeezing parameters (list)");
  tp->ov.add(tp->app, "--samples", &ExperimentConfig::samples, "outcome samples per eta");
  tp->alpha = tp->app->add_option("--alpha", tp->ov.alpha, "coherent input amplitude: re im")->expected(2);

  auto* ca = make("contmeas-analytic", "jump-count and photon-number distributions");
  ca->ov.add(ca->app, "--s-total", &ExperimentConfig::s_total, "total jumps");
  ca->ov.add(ca->app, "--p", &ExperimentConfig::p, "jumps in mode c");
  ca->ov.add(ca->app, "--r-t2", &ExperimentConfig::r_t2, "field intensity r_t^2");
  ca->ov.add(ca->app, "--m-max", &ExperimentConfig::m_max, "largest photon number (0: automatic)");

  auto* ct = make("contmeas-trajectory", "Monte Carlo wave-function trajectories");
  ct->ov.add(ct->app, "--r-o", &ExperimentConfig::r_o, "initial amplitude of each laser");
  ct->ov.add(ct->app, "--R", &ExperimentConfig::R, "absorption rate");
  ct->ov.add(ct->app, "--dt", &ExperimentConfig::dt, "time step");
  ct->ov.add(ct->app, "--t-end", &ExperimentConfig::t_end, "run length");
  ct->ov.add(ct->app, "--trajectories", &ExperimentConfig::trajectories, "number of trajectories");
  ct->ov.add(ct->app, "--stop-after-jumps", &ExperimentConfig::stop_after_jumps, "end each run at this many jumps (0: never)");
  ct->ov.add(ct->app, "--delta-grid", &ExperimentConfig::delta_grid, "phase-difference grid size");

  make("selfcheck", "fast checks of the main identities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  for (auto& s : subs) {
    if (!s->app->parsed()) continue;
    try {
      const auto cfg = load(s->app->get_name(), s->config, s->ov, s->alpha);
      const auto summary = cvqt::experiments::run(cfg);
      std::cout << summary.at("results").dump(2) << '\n';
      return 0;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const cvqt::experiments::ThresholdBreach& e) {
      std::cerr << e.what() << '\n';
      return kExitBreach;
    } catch (const std::invalid_argument& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const std::domain_error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "numerical failure: " << e.what() << '\n';
      return kExitNumerical;
    }
  }
  return kExitConfig;
}
