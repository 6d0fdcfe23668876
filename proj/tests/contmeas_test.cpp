#include "cvqt/contmeas.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

using namespace cvqt;
using namespace cvqt::contmeas;

namespace {

const double kPi = std::numbers::pi;

// Posterior-weighted Poisson mixture by the trapezoid rule, written against Boost.
double mixture_oracle(std::size_t p, std::size_t q, double r2, std::size_t m, std::size_t K = 2048) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double h = kPi * double(k) / double(K);
    const double w = std::pow(std::sin(h), 2.0 * double(p)) * std::pow(std::cos(h), 2.0 * double(q));
    const double mean = 2.0 * r2 * std::sin(h) * std::sin(h);
    const double pois = mean == 0.0 ? (m == 0 ? 1.0 : 0.0) : boost::math::pdf(boost::math::poisson(mean), double(m));
    num += w * pois;
    den += w;
  }
  return num / den;
}

// Same mixture for all m <= m_max at once, Poisson terms in log space.
std::vector<double> mixture_table(std::size_t p, std::size_t q, double r2, std::size_t m_max, std::size_t K = 2048) {
  std::vector<double> out(m_max + 1, 0.0);
  double den = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double h = kPi * double(k) / double(K);
    const double w = std::pow(std::sin(h), 2.0 * double(p)) * std::pow(std::cos(h), 2.0 * double(q));
    den += w;
    if (w == 0.0) continue;
    const double mean = 2.0 * r2 * std::sin(h) * std::sin(h);
    if (mean == 0.0) {
      out[0] += w;
      continue;
    }
    for (std::size_t m = 0; m <= m_max; ++m)
      out[m] += w * std::exp(-mean + double(m) * std::log(mean) - std::lgamma(double(m) + 1.0));
  }
  for (double& v : out) v /= den;
  return out;
}

TrajectoryConfig gof_config() {
  TrajectoryConfig c;
  c.r_o = 10.0;
  c.R = 1.0e-3;
  c.dt = 1.0;
  c.t_end = 1.0e4;
  c.grid_size = 1024;
  c.stop_after_jumps = 20;
  return c;
}

}  // namespace

TEST(BhdPosterior, Branches) {
  auto b = bhd_phase_posterior(1.0);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].delta, 0.0);
  EXPECT_EQ(b[0].weight, 1.0);

  b = bhd_phase_posterior(0.0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_NEAR(b[0].delta, kPi / 2, 1e-15);
  EXPECT_NEAR(b[1].delta, 3 * kPi / 2, 1e-15);
  EXPECT_EQ(b[0].weight, 0.5);
  EXPECT_EQ(b[1].weight, 0.5);
}

TEST(BhdPosterior, ReflectionSymmetric) {
  const auto b = bhd_phase_posterior(std::cos(0.7));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_NEAR(b[0].delta, 0.7, 1e-12);
  EXPECT_NEAR(std::remainder(b[1].delta + 0.7, 2 * kPi), 0.0, 1e-12);
  // reflecting D -> -D maps the branch set onto itself
  EXPECT_NEAR(std::remainder(-b[0].delta - b[1].delta, 2 * kPi), 0.0, 1e-12);
  EXPECT_EQ(b[0].weight, b[1].weight);
  EXPECT_THROW(bhd_phase_posterior(1.5), std::invalid_argument);
}

TEST(JumpCounts, SmallCases) {
  EXPECT_NEAR(jump_count_probability(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(jump_count_probability(0, 0), 1.0, 1e-15);
  EXPECT_THROW(jump_count_probability(3, 4), std::invalid_argument);
  EXPECT_THROW(jump_count_probability(2'000'000, 1), std::invalid_argument);
}

TEST(JumpCounts, EndpointsAtOneHundred) {
  EXPECT_NEAR(jump_count_probability(100, 0) + jump_count_probability(100, 100), 0.113, 1e-3);
}

TEST(JumpCounts, MatchesBoostBeta) {
  for (std::size_t s : {1u, 5u, 30u, 120u})
    for (std::size_t p = 0; p <= s; p += 1 + s / 7) {
      const double q = double(s - p);
      const double ref = boost::math::binomial_coefficient<double>(unsigned(s), unsigned(p)) *
                         boost::math::beta(double(p) + 0.5, q + 0.5) / kPi;
      EXPECT_NEAR(jump_count_probability(s, p) / ref, 1.0, 1e-12) << s << " " << p;
    }
}

TEST(JumpCounts, NormalizedAndSymmetric) {
  for (std::size_t s : {0u, 1u, 2u, 7u, 50u, 333u, 1000u}) {
    double total = 0.0;
    for (std::size_t p = 0; p <= s; ++p) {
      total += jump_count_probability(s, p);
      EXPECT_EQ(jump_count_probability(s, p), jump_count_probability(s, s - p));
    }
    EXPECT_NEAR(total, 1.0, 1e-12) << "s " << s;
  }
  EXPECT_TRUE(std::isfinite(log_jump_count_probability(1'000'000, 400'000)));
}

TEST(Posterior, NoInformationIsUniform) {
  const auto post = posterior_phase_state(0, 0, 3.0, 64);
  for (double w : post.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 64);
  EXPECT_EQ(post.r_t, 3.0);
}

TEST(Posterior, PeaksAndRatios) {
  const auto all_c = posterior_phase_state(100, 100, 1.0, 1024);
  EXPECT_NEAR(all_c.grid[all_c.mode_index()], kPi, 1e-12);
  // grid index 256 is D = pi/2, index 512 is D = pi
  EXPECT_NEAR(all_c.weights[256] / all_c.weights[512], std::pow(2.0, -100), 1e-10 * std::pow(2.0, -100));
  const auto all_d = posterior_phase_state(100, 0, 1.0, 1024);
  EXPECT_EQ(all_d.mode_index(), 0u);
  double total = 0.0;
  for (double w : all_c.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Posterior, NormalizationMatchesBeta) {
  for (auto [s, p] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {3, 1}, {20, 7}, {100, 100}, {500, 250}}) {
    const auto post = posterior_phase_state(s, p, 1.0);
    const double ref = std::log(boost::math::beta(double(p) + 0.5, double(s - p) + 0.5) / kPi);
    EXPECT_NEAR(post.log_norm, ref, 1e-10) << s << " " << p;
  }
}

TEST(PhotonDistribution, ZeroField) {
  EXPECT_EQ(photon_distribution(5, 2, 0.0, 0), 1.0);
  EXPECT_EQ(photon_distribution(5, 2, 0.0, 3), 0.0);
}

TEST(PhotonDistribution, NoJumpsMatchesOracle) {
  for (std::size_t m = 0; m <= 40; ++m) EXPECT_NEAR(photon_distribution(0, 0, 2.0, m), mixture_oracle(0, 0, 4.0, m), 1e-10);
}

TEST(PhotonDistribution, OracleEquivalenceSweep) {
  double worst = 0.0;
  for (double r2 : {0.3, 4.0, 25.0})
    for (std::size_t s = 0; s <= 20; ++s)
      for (std::size_t p = 0; p <= s; ++p) {
        const auto ref = mixture_table(p, s - p, r2, 100);
        for (std::size_t m = 0; m <= 100; ++m)
          worst = std::max(worst, std::abs(photon_distribution(s, p, std::sqrt(r2), m) - ref[m]));
      }
  EXPECT_LT(worst, 1e-8);
}

TEST(PhotonDistribution, ModeDIsSwap) {
  for (std::size_t m : {0u, 3u, 17u})
    EXPECT_EQ(photon_distribution(12, 4, 2.5, m, Mode::d), photon_distribution(12, 8, 2.5, m, Mode::c));
}

TEST(PhotonDistribution, StrongFieldNormalizedWithOraclePeak) {
  const double r = std::sqrt(1000.0);
  double total = 0.0, best = 0.0;
  std::size_t peak = 0;
  for (std::size_t m = 0; m <= 4000; ++m) {
    const double v = photon_distribution(100, 100, r, m);
    total += v;
    if (v > best) {
      best = v;
      peak = m;
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-8);
  const double oracle = mixture_oracle(100, 0, 1000.0, peak, 16384);
  EXPECT_NEAR(best / oracle, 1.0, 1e-6) << "peak at m = " << peak;
  EXPECT_GT(peak, 1800u);  // posterior concentrates at D = pi, mean 2 r^2 sin^2 -> 2000
}

TEST(PhotonDistribution, ApproachesPoisson) {
  const double r2 = 1000.0;
  const boost::math::poisson ref(2 * r2);
  double last = 1.0;
  for (std::size_t s : {10u, 100u, 1000u}) {
    double tv = 0.0;
    for (std::size_t m = 0; m <= 4000; ++m) tv += std::abs(photon_distribution(s, s, std::sqrt(r2), m) - boost::math::pdf(ref, double(m)));
    tv *= 0.5;
    EXPECT_LT(tv, last) << "s " << s;
    last = tv;
  }
}

TEST(PhotonDistribution, RejectsHugeField) {
  EXPECT_THROW(photon_distribution(1, 0, 1.0e3, 0), std::invalid_argument);
}

TEST(PhotonTable, CrossCheckReported) {
  const auto t = photon_table(6, 2, 3.0, 60);
  EXPECT_NEAR(t.sum_c, 1.0, 1e-10);
  EXPECT_NEAR(t.sum_d, 1.0, 1e-10);
  EXPECT_LT(t.peak_relative_deviation_c, 1e-8);
  EXPECT_EQ(t.rows.size(), 61u);
  EXPECT_LT(t.max_oracle_deviation, 1e-10);
}

TEST(Trajectory, ZeroDuration) {
  TrajectoryConfig c;
  c.t_end = 0.0;
  const auto rec = mcwf_run(c, 1);
  EXPECT_TRUE(rec.jumps.empty());
  EXPECT_EQ(rec.posterior.r_t, c.r_o);
  for (double w : rec.posterior.weights) EXPECT_EQ(w, 1.0 / double(c.grid_size));
}

TEST(Trajectory, RejectsLargeSteps) {
  TrajectoryConfig c;
  c.R = 1.0;
  c.dt = 0.01;
  EXPECT_THROW(mcwf_run(c, 1), std::invalid_argument);
  c = TrajectoryConfig{};
  c.r_o = 100.0;  // 4 R dt r_o^2 = 40
  EXPECT_THROW(mcwf_run(c, 1), std::invalid_argument);
}

TEST(Trajectory, AmplitudeDecay) {
  TrajectoryConfig c;
  c.r_o = 3.0;
  c.R = 1e-4;
  c.dt = 0.5;
  c.t_end = 2000.0;
  TrajectoryEngine eng(c, 42);
  while (!eng.done()) {
    eng.step();
    EXPECT_NEAR(eng.r_t() / c.r_o, std::exp(-c.R * eng.time()), 1e-12);
  }
  const auto rec = eng.finish();
  for (auto [t, r] : rec.r_history) EXPECT_NEAR(r / c.r_o, std::exp(-c.R * t), 1e-12);
}

TEST(Trajectory, NullSegmentsLeavePosteriorBitIdentical) {
  TrajectoryConfig c;
  c.r_o = 5.0;
  c.t_end = 5000.0;
  TrajectoryEngine eng(c, 9);
  std::vector<double> before = eng.weights();
  std::size_t null_steps = 0, jumps = 0;
  while (!eng.done()) {
    if (eng.step()) {
      ++jumps;
    } else {
      ++null_steps;
      ASSERT_EQ(eng.weights(), before);
    }
    before = eng.weights();
  }
  EXPECT_GT(jumps, 0u);
  EXPECT_GT(null_steps, 0u);
}

TEST(Trajectory, RecordConsistency) {
  auto c = gof_config();
  const auto rec = mcwf_run(c, 77);
  ASSERT_EQ(rec.jumps.size(), 20u);
  std::size_t pc = 0;
  for (std::size_t i = 0; i < rec.jumps.size(); ++i) {
    if (i > 0) {
      EXPECT_GT(rec.jumps[i].time, rec.jumps[i - 1].time);
    }
    pc += rec.jumps[i].mode == Mode::c;
  }
  EXPECT_EQ(pc, rec.stats.p);
  const auto expect = posterior_phase_state(20, pc, rec.posterior.r_t, c.grid_size);
  EXPECT_LT(total_variation(expect.weights, rec.posterior.weights), 1e-10);
}

TEST(Trajectory, ValidityFlag) {
  auto c = gof_config();
  const auto rec = mcwf_run(c, 3);
  EXPECT_NEAR(rec.validity_ratio, 4.0 * 20 * 100 * 1e-3, 1e-12);
  EXPECT_FALSE(rec.valid);
  TrajectoryConfig slow;
  slow.r_o = 1.0;
  slow.R = 1e-4;
  slow.dt = 1.0;
  slow.t_end = 1000.0;
  const auto ok = mcwf_run(slow, 3);
  EXPECT_EQ(ok.valid, ok.validity_ratio <= 0.1);
  EXPECT_TRUE(mcwf_run(slow, 4).valid || mcwf_run(slow, 4).stats.total > 250);
}

TEST(Trajectory, BatchIsDeterministic) {
  auto c = gof_config();
  const auto a = mcwf_batch(c, 5, 20);
  const auto b = mcwf_batch(c, 5, 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].stats.p, b[i].stats.p);
    EXPECT_EQ(a[i].posterior.weights, b[i].posterior.weights);
  }
}

TEST(Trajectory, JumpStatisticsFitClosedForm) {
  const auto recs = mcwf_batch(gof_config(), 2024, 10000);
  const auto hist = jump_histogram(recs, 20);
  const auto chi = chi_square_jump_counts(hist);
  EXPECT_EQ(chi.samples, 10000u);
  const double p_value = boost::math::gamma_q(0.5 * double(chi.dof), 0.5 * chi.statistic);
  EXPECT_GT(p_value, 0.01) << "chi2 " << chi.statistic << " dof " << chi.dof;

  for (std::size_t p : {0u, 3u, 10u, 20u}) {
    const auto emp = empirical_posterior(recs, 20, p);
    ASSERT_FALSE(emp.empty());
    EXPECT_LE(total_variation(emp, posterior_phase_state(20, p, 1.0, 1024).weights), 0.02) << "p " << p;
  }
}
