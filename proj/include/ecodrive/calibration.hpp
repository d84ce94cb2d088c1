#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecodrive/vehicle.hpp"

namespace ecodrive::calib {

enum class DriverClass { car, heavy };

using Vec5 = std::array<double, 5>;
using Mat5 = std::array<Vec5, 5>;

/// Lognormal population of IDM parameters (v0, s0, T, alpha, beta).
struct DriverPopulation {
  DriverClass cls = DriverClass::car;
  Vec5 mu{};     ///< mean of ln(theta)
  Mat5 sigma{};  ///< covariance of ln(theta)
  double sigma_eps = 0.1;

  bool operator==(const DriverPopulation&) const = default;
};

DriverPopulation default_population(DriverClass cls);

/// Population for a vehicle type: heavy vehicles share one population.
inline DriverClass driver_class(VehicleType t) { return is_heavy(t) ? DriverClass::heavy : DriverClass::car; }

/// theta = exp(z), z ~ N(mu, sigma); redraws outside alpha, beta > 0.05 and v0 <= 40.
IdmParams sample_driver(const DriverPopulation& pop, std::uint64_t seed);

/// One observation: gap s, speed v, approach rate dv = v - v_leader, and the next speed.
struct FollowingSample {
  double s = 0.0;
  double v = 0.0;
  double dv = 0.0;
  double v_next = 0.0;
};

struct DriverTrajectory {
  std::string driver;
  std::vector<FollowingSample> samples;
};

struct Prior {
  Vec5 mu0{};
  Mat5 sigma0{};
  double mu_eps = -2.3;  ///< mean of ln(sigma_eps)
  double sigma1 = 1.0;   ///< std of ln(sigma_eps)
};

/// Weakly informative prior around canonical urban IDM values.
Prior default_prior(DriverClass cls = DriverClass::car);

struct CalibrationOptions {
  double dt = 0.5;
  int min_steps = 20;
  int restarts = 4;
  int max_evaluations = 6000;
  std::uint64_t seed = 0;
};

struct DriverFit {
  std::string driver;
  IdmParams theta;
  double sigma_eps = 0.0;
  double log_posterior = 0.0;
  double log_posterior_at_prior_mean = 0.0;
};

struct CalibrationResult {
  DriverPopulation population;
  std::vector<DriverFit> fits;
  std::vector<std::string> skipped;  ///< degenerate trajectories
};

/// One-step speed prediction v + a_idm * dt, floored at zero.
double idm_next_speed(const FollowingSample& x, const IdmParams& theta, double dt);

/// Log posterior of ln(theta) given a driver's samples, with sigma_eps profiled out.
double log_posterior(const DriverTrajectory& traj, const Vec5& log_theta, const Prior& prior, double dt,
                     double* sigma_eps_out = nullptr);

DriverFit fit_driver(const DriverTrajectory& traj, const Prior& prior, const CalibrationOptions& options);

/// Per-driver MAP fits (parallel) followed by a Gaussian fit over the log-MAPs.
CalibrationResult calibrate(const std::vector<DriverTrajectory>& trajectories, const Prior& prior,
                            DriverClass cls, const CalibrationOptions& options = {});

/// CSV `driver,t,s,v,dv`, rows grouped by driver in time order.
std::vector<DriverTrajectory> parse_trajectories_csv(const std::string& text);

std::string to_text(const DriverPopulation& pop);
DriverPopulation population_from_text(const std::string& text);

/// Synthetic car-following data: a follower with `theta` behind a scripted leader.
DriverTrajectory synthesize_trajectory(const std::string& driver, const IdmParams& theta, int steps, double noise_std,
                                       std::uint64_t seed, double dt = 0.5);

}  // namespace ecodrive::calib
