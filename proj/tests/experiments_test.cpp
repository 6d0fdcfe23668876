#include "cvqt/experiments.hpp"

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

using namespace cvqt;
using namespace cvqt::experiments;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_runtime(const std::string& s) {
  return std::regex_replace(s, std::regex("\"runtime_seconds\": [^\\n]*"), "\"runtime_seconds\": X");
}

ExperimentConfig config(const std::string& command, const std::string& dir) {
  auto c = defaults_for(command);
  c.out_dir = (std::filesystem::temp_directory_path() / ("cvqt_experiments_" + dir)).string();
  std::filesystem::remove_all(c.out_dir);
  return c;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = defaults_for("teleport");
  c.eta = {0.1, 0.3};
  c.alpha = {0.5, -0.2};
  c.seed = 99;
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownAndMistypedFields) {
  EXPECT_THROW(config_from_json(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"N", "many"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"alpha", {1.0}}}), ConfigError);
  try {
    config_from_json(json{{"N", -3.5}});
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'N'"), std::string::npos);
  }
}

TEST(Config, RangeValidationNamesField) {
  auto c = config("squeezed-homodyne", "range");
  c.s = 7.0;
  try {
    run(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'s'"), std::string::npos);
  }
  auto t = config("contmeas-trajectory", "range2");
  t.dt = 10.0;
  EXPECT_THROW(run(t), ConfigError);
  auto u = config("nope", "range3");
  EXPECT_THROW(run(u), ConfigError);
}

TEST(SqueezedHomodyne, VacuumIsStandardNormal) {
  auto c = config("squeezed-homodyne", "vac");
  c.s = 0.0;
  const auto r = run(c).at("results");
  EXPECT_LE(r.at("max_pointwise_deviation").get<double>(), 1e-10);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.out_dir) / "squeezed_homodyne.csv"));
}

TEST(SqueezedHomodyne, SqueezedAndAntiSqueezedVariance) {
  auto c = config("squeezed-homodyne", "sq");
  c.s = 0.5;
  auto r = run(c).at("results");
  EXPECT_NEAR(r.at("variance").get<double>() / std::exp(-1.0), 1.0, 0.01);
  c.phi_c = std::numbers::pi / 2;
  r = run(c).at("results");
  EXPECT_NEAR(r.at("variance").get<double>() / std::exp(1.0), 1.0, 0.01);
}

TEST(SqueezedHomodyne, UnderTruncationIsNumericalFailure) {
  auto c = config("squeezed-homodyne", "trunc");
  c.s = 1.0;
  c.N = 40;
  EXPECT_THROW(run(c), TruncationError);
}

TEST(Teleport, SweepShape) {
  auto c = config("teleport", "tp");
  c.eta = {0.0, 0.5, 0.8};
  c.samples = 300;
  c.K = 16;
  const auto r = run(c).at("results");
  const auto& rows = r.at("rows");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(r.at("shared_monotone_in_eta").get<bool>());
  EXPECT_GT(rows[2].at("gap_sigma").get<double>(), 3.0);
  const auto csv = slurp(std::filesystem::path(c.out_dir) / "teleport_fidelity.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Teleport, EtaZeroVacuumFidelity) {
  auto c = config("teleport", "tp0");
  c.eta = {0.0};
  c.alpha = 0.0;
  c.samples = 50;
  c.K = 8;
  c.N = 12;
  const auto r = run(c).at("results");
  EXPECT_NEAR(r.at("rows")[0].at("shared").at("mean").get<double>(), 1.0, 1e-10);
}

TEST(ContmeasAnalytic, SummaryFields) {
  auto c = config("contmeas-analytic", "ca");
  const auto r = run(c).at("results");
  EXPECT_NEAR(r.at("p_extremes").get<double>(), 0.113, 1e-3);
  EXPECT_LE(r.at("oracle_peak_rel_deviation").get<double>(), 1e-6);
  EXPECT_NEAR(r.at("sum_p_c").get<double>(), 1.0, 1e-8);
  EXPECT_NEAR(r.at("sum_p_d").get<double>(), 1.0, 1e-8);
}

TEST(ContmeasTrajectory, ByteIdenticalReruns) {
  auto c = config("contmeas-trajectory", "ct");
  c.trajectories = 300;
  const auto first = run(c);
  const auto jsonl = slurp(std::filesystem::path(c.out_dir) / "trajectories.jsonl");
  const auto hist = slurp(std::filesystem::path(c.out_dir) / "jump_histogram.csv");
  const auto summary = slurp(std::filesystem::path(c.out_dir) / "contmeas_trajectory_summary.json");
  run(c);
  EXPECT_EQ(slurp(std::filesystem::path(c.out_dir) / "trajectories.jsonl"), jsonl);
  EXPECT_EQ(slurp(std::filesystem::path(c.out_dir) / "jump_histogram.csv"), hist);
  EXPECT_EQ(strip_runtime(slurp(std::filesystem::path(c.out_dir) / "contmeas_trajectory_summary.json")),
            strip_runtime(summary));
  EXPECT_EQ(first.at("config").at("seed"), c.seed);
  EXPECT_EQ(first.at("version"), io::kVersion);
}

TEST(Selfcheck, AllPass) {
  auto c = config("selfcheck", "sc");
  const auto r = run(c).at("results");
  EXPECT_TRUE(r.at("all_pass").get<bool>());
}
