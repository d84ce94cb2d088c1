#include <gtest/gtest.h>

#include <cmath>

#include <fmt/core.h>

#include "ecodrive/calibration.hpp"
#include "ecodrive/common.hpp"

using namespace ecodrive;
using namespace ecodrive::calib;

namespace {

const IdmParams kTruth{14.0, 2.5, 1.2, 1.4, 2.2, 4.0};

}  // namespace

TEST(Calibration, NextSpeedIsIdmStep) {
  const FollowingSample x{30.0, 10.0, 0.0, 0.0};
  const IdmParams p;
  const double s_star = p.s0 + 10.0 * p.T;
  const double a = p.alpha * (1 - std::pow(10.0 / p.v0, 4) - std::pow(s_star / 30.0, 2));
  EXPECT_NEAR(idm_next_speed(x, p, 0.5), 10.0 + 0.5 * a, 1e-12);
  const FollowingSample stuck{0.5, 0.2, 5.0, 0.0};
  EXPECT_GE(idm_next_speed(stuck, p, 0.5), 0.0);
}

TEST(Calibration, PosteriorPeaksNearTruthOnCleanData) {
  const auto traj = synthesize_trajectory("d", kTruth, 600, 0.0, 1);
  const auto prior = default_prior();
  Vec5 truth;
  const auto arr = kTruth.as_array();
  for (std::size_t i = 0; i < 5; ++i) truth[i] = std::log(arr[i]);
  const double at_truth = log_posterior(traj, truth, prior, 0.5);
  for (std::size_t i = 0; i < 5; ++i) {
    auto off = truth;
    off[i] += 0.2;
    EXPECT_LT(log_posterior(traj, off, prior, 0.5), at_truth) << i;
  }
}

TEST(Calibration, FitRecoversParameters) {
  const auto traj = synthesize_trajectory("d", kTruth, 800, 0.05, 2);
  CalibrationOptions opt;
  const auto fit = fit_driver(traj, default_prior(), opt);
  const auto got = fit.theta.as_array(), want = kTruth.as_array();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(std::log(got[i]), std::log(want[i]), 0.15) << i;
  EXPECT_GE(fit.log_posterior, fit.log_posterior_at_prior_mean);
  EXPECT_NEAR(fit.sigma_eps, 0.05, 0.02);
}

TEST(Calibration, PopulationFromSampledDrivers) {
  const auto pop = default_population(DriverClass::car);
  std::vector<DriverTrajectory> trajs;
  for (int d = 0; d < 12; ++d)
    trajs.push_back(synthesize_trajectory(fmt::format("d{}", d), sample_driver(pop, 100 + d), 500, 0.02, d));
  CalibrationOptions opt;
  opt.restarts = 2;
  const auto res = calibrate(trajs, default_prior(), DriverClass::car, opt);
  EXPECT_EQ(res.fits.size(), 12u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_TRUE(std::isfinite(res.population.mu[i]));
    EXPECT_GE(res.population.sigma[i][i], 0.0);
  }
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(res.population.sigma[i][j], res.population.sigma[j][i], 1e-12);
}

TEST(Calibration, SampledDriversRespectBounds) {
  const auto pop = default_population(DriverClass::heavy);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = sample_driver(pop, s);
    EXPECT_TRUE(p.valid());
    EXPECT_GT(p.alpha, 0.05);
    EXPECT_GT(p.beta, 0.05);
    EXPECT_LE(p.v0, 40.0);
  }
  EXPECT_EQ(sample_driver(pop, 5), sample_driver(pop, 5));
}

TEST(Calibration, DegenerateAndShortTrajectories) {
  DriverTrajectory still{"still", std::vector<FollowingSample>(40, FollowingSample{10.0, 0.0, 0.0, 0.0})};
  DriverTrajectory moving = synthesize_trajectory("m", kTruth, 200, 0.0, 3);
  const auto res = calibrate({still, moving}, default_prior(), DriverClass::car);
  ASSERT_EQ(res.skipped.size(), 1u);
  EXPECT_EQ(res.skipped[0], "still");
  EXPECT_THROW(calibrate({still}, default_prior(), DriverClass::car), DataError);
  DriverTrajectory short_one{"s", std::vector<FollowingSample>(5)};
  EXPECT_THROW(calibrate({short_one}, default_prior(), DriverClass::car), ValidationError);
}

TEST(Calibration, CsvParsingPairsConsecutiveRows) {
  const auto t = parse_trajectories_csv("driver,t,s,v,dv\na,0,20,5,0\na,0.5,20,6,0\nb,0,10,1,0\na,1.0,21,7,1\n");
  ASSERT_EQ(t.size(), 2u);
  ASSERT_EQ(t[0].samples.size(), 2u);
  EXPECT_DOUBLE_EQ(t[0].samples[0].v_next, 6.0);
  EXPECT_DOUBLE_EQ(t[0].samples[1].v_next, 7.0);
  EXPECT_TRUE(t[1].samples.empty());
  EXPECT_THROW(parse_trajectories_csv("driver,t,s,v\n"), DataError);
  EXPECT_THROW(parse_trajectories_csv("driver,t,s,v,dv\na,1,2,3,4\na,0.5,2,3,4\n"), DataError);
}

TEST(Calibration, PopulationTextRoundTrip) {
  const auto pop = default_population(DriverClass::heavy);
  EXPECT_EQ(population_from_text(to_text(pop)), pop);
  EXPECT_THROW(population_from_text("{}"), DataError);
}
