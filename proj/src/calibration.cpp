#include "ecodrive/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/core.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <json.hpp>

#include "ecodrive/common.hpp"
#include "ecodrive/microsim.hpp"

namespace ecodrive::calib {

namespace {

Vec5 log_of(const Vec5& v) {
  Vec5 out;
  for (int i = 0; i < 5; ++i) out[static_cast<std::size_t>(i)] = std::log(v[static_cast<std::size_t>(i)]);
  return out;
}

Mat5 diagonal(const Vec5& std_dev) {
  Mat5 m{};
  for (std::size_t i = 0; i < 5; ++i) m[i][i] = std_dev[i] * std_dev[i];
  return m;
}

Eigen::Matrix<double, 5, 5> to_eigen(const Mat5& m) {
  Eigen::Matrix<double, 5, 5> e;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) e(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return e;
}

double sum_squared_residuals(const DriverTrajectory& traj, const IdmParams& theta, double dt) {
  double ssr = 0.0;
  for (const auto& x : traj.samples) {
    const double r = x.v_next - idm_next_speed(x, theta, dt);
    ssr += r * r;
  }
  return ssr;
}

bool degenerate(const DriverTrajectory& traj) {
  const auto& first = traj.samples.front();
  return std::all_of(traj.samples.begin(), traj.samples.end(), [&](const FollowingSample& x) {
    return x.s == first.s && x.v == first.v && x.dv == first.dv && x.v_next == first.v_next;
  });
}

struct Objective {
  const DriverTrajectory* traj;
  const Prior* prior;
  double dt;
  int evaluations = 0;
};

double neg_log_posterior(const gsl_vector* x, void* params) {
  auto* obj = static_cast<Objective*>(params);
  ++obj->evaluations;
  Vec5 z;
  for (std::size_t i = 0; i < 5; ++i) z[i] = gsl_vector_get(x, i);
  const double lp = log_posterior(*obj->traj, z, *obj->prior, obj->dt);
  return std::isfinite(lp) ? -lp : 1e300;
}

/// Nelder-Mead from `start`; returns the best point found.
Vec5 nelder_mead(Objective& obj, const Vec5& start, double step, int max_evals) {
  const gsl_multimin_fminimizer_type* type = gsl_multimin_fminimizer_nmsimplex2;
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(type, 5);
  gsl_vector* x = gsl_vector_alloc(5);
  gsl_vector* ss = gsl_vector_alloc(5);
  for (std::size_t i = 0; i < 5; ++i) gsl_vector_set(x, i, start[i]);
  gsl_vector_set_all(ss, step);
  gsl_multimin_function fn{&neg_log_posterior, 5, &obj};
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  const int budget_end = obj.evaluations + max_evals;
  while (obj.evaluations < budget_end) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10) == GSL_SUCCESS) break;
  }
  Vec5 best;
  for (std::size_t i = 0; i < 5; ++i) best[i] = gsl_vector_get(s->x, i);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  gsl_multimin_fminimizer_free(s);
  return best;
}

struct GslHandlerOff {
  GslHandlerOff() { gsl_set_error_handler_off(); }
};

}  // namespace

DriverPopulation default_population(DriverClass cls) {
  DriverPopulation p;
  p.cls = cls;
  if (cls == DriverClass::car) {
    p.mu = log_of({16.0, 2.0, 1.2, 1.5, 2.0});
    p.sigma = diagonal({0.10, 0.15, 0.15, 0.15, 0.15});
  } else {
    p.mu = log_of({14.0, 3.0, 1.8, 0.9, 1.5});
    p.sigma = diagonal({0.10, 0.15, 0.15, 0.15, 0.15});
  }
  p.sigma_eps = 0.1;
  return p;
}

Prior default_prior(DriverClass cls) {
  Prior p;
  p.mu0 = cls == DriverClass::car ? log_of({15.0, 2.0, 1.5, 1.5, 2.0}) : log_of({13.0, 3.0, 2.0, 1.0, 1.5});
  p.sigma0 = diagonal({0.5, 0.5, 0.5, 0.5, 0.5});
  p.mu_eps = -2.3;
  p.sigma1 = 1.0;
  return p;
}

IdmParams sample_driver(const DriverPopulation& pop, std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> eig(to_eigen(pop.sigma));
  const Eigen::Matrix<double, 5, 5> root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Rng rng = make_rng(seed, stream::drivers);
  std::normal_distribution<double> normal;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::Matrix<double, 5, 1> n;
    for (int i = 0; i < 5; ++i) n(i) = normal(rng);
    const Eigen::Matrix<double, 5, 1> z = root * n;
    Vec5 theta;
    for (std::size_t i = 0; i < 5; ++i) theta[i] = std::exp(pop.mu[i] + z(static_cast<int>(i)));
    const IdmParams p = IdmParams::from_array(theta);
    if (p.alpha > 0.05 && p.beta > 0.05 && p.v0 <= 40.0 && p.valid()) return p;
  }
  throw ConfigError("driver population yields no admissible parameters");
}

double idm_next_speed(const FollowingSample& x, const IdmParams& theta, double dt) {
  const double a = sim::idm_accel(x.v, x.s, x.v - x.dv, theta, -1e9);
  return std::max(0.0, x.v + a * dt);
}

double log_posterior(const DriverTrajectory& traj, const Vec5& log_theta, const Prior& prior, double dt,
                     double* sigma_eps_out) {
  Vec5 theta;
  for (std::size_t i = 0; i < 5; ++i) theta[i] = std::exp(log_theta[i]);
  const double ssr = sum_squared_residuals(traj, IdmParams::from_array(theta), dt);
  const double n = static_cast<double>(traj.samples.size());

  // Profile out u = ln(sigma_eps): the stationarity condition is monotone in u.
  const double q = ssr / (dt * dt);
  const double inv_var1 = 1.0 / (prior.sigma1 * prior.sigma1);
  auto grad = [&](double u) { return -n + q * std::exp(-2.0 * u) - (u - prior.mu_eps) * inv_var1; };
  double lo = prior.mu_eps - n * prior.sigma1 * prior.sigma1 - 1.0;
  double hi = prior.mu_eps + 50.0;
  if (q > 0) lo = std::min(lo, 0.5 * std::log(q / (n + 1.0)) - 50.0);
  while (grad(lo) < 0) lo -= 50.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (grad(mid) > 0 ? lo : hi) = mid;
  }
  const double u = 0.5 * (lo + hi);
  if (sigma_eps_out) *sigma_eps_out = std::exp(u);

  const double log_lik = -n * (u + std::log(dt)) - 0.5 * q * std::exp(-2.0 * u) - 0.5 * n * std::log(2.0 * std::numbers::pi);
  const double log_eps_prior = -0.5 * (u - prior.mu_eps) * (u - prior.mu_eps) * inv_var1;

  Eigen::Matrix<double, 5, 1> d;
  for (int i = 0; i < 5; ++i) d(i) = log_theta[static_cast<std::size_t>(i)] - prior.mu0[static_cast<std::size_t>(i)];
  const auto sigma0 = to_eigen(prior.sigma0);
  const double mahal = d.dot(sigma0.ldlt().solve(d));
  return log_lik + log_eps_prior - 0.5 * mahal;
}

DriverFit fit_driver(const DriverTrajectory& traj, const Prior& prior, const CalibrationOptions& options) {
  static const GslHandlerOff gsl_quiet;
  Objective obj{&traj, &prior, options.dt};
  Vec5 best = prior.mu0;
  double best_lp = log_posterior(traj, best, prior, options.dt);
  const double at_prior = best_lp;
  Rng rng = make_rng(hash_combine(options.seed, std::hash<std::string>{}(traj.driver)), stream::sampling);
  std::normal_distribution<double> jitter(0.0, 0.3);
  const int per_run = std::max(100, options.max_evaluations / std::max(1, options.restarts + 1));
  for (int r = 0; r <= options.restarts; ++r) {
    Vec5 start = best;
    if (r > 0 && r % 2 == 0)
      for (auto& z : start) z += jitter(rng);
    const Vec5 cand = nelder_mead(obj, start, r == 0 ? 0.3 : 0.1, per_run);
    const double lp = log_posterior(traj, cand, prior, options.dt);
    if (lp > best_lp) {
      best_lp = lp;
      best = cand;
    }
  }
  DriverFit fit;
  fit.driver = traj.driver;
  Vec5 theta;
  for (std::size_t i = 0; i < 5; ++i) theta[i] = std::exp(best[i]);
  fit.theta = IdmParams::from_array(theta);
  fit.log_posterior = log_posterior(traj, best, prior, options.dt, &fit.sigma_eps);
  fit.log_posterior_at_prior_mean = at_prior;
  return fit;
}

CalibrationResult calibrate(const std::vector<DriverTrajectory>& trajectories, const Prior& prior, DriverClass cls,
                            const CalibrationOptions& options) {
  if (trajectories.empty()) throw ValidationError("calibration needs at least one driver");
  CalibrationResult result;
  std::vector<const DriverTrajectory*> usable;
  for (const auto& t : trajectories) {
    if (static_cast<int>(t.samples.size()) < options.min_steps)
      throw ValidationError(fmt::format("driver '{}' has {} steps; at least {} are required", t.driver, t.samples.size(),
                                        options.min_steps));
    if (degenerate(t)) result.skipped.push_back(t.driver);
    else usable.push_back(&t);
  }
  if (usable.empty()) throw DataError("every trajectory is degenerate");

  result.fits.resize(usable.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(usable.size()); ++i)
    result.fits[static_cast<std::size_t>(i)] = fit_driver(*usable[static_cast<std::size_t>(i)], prior, options);

  const auto n = result.fits.size();
  DriverPopulation& pop = result.population;
  pop.cls = cls;
  std::vector<Vec5> logs;
  for (const auto& f : result.fits) logs.push_back(log_of(f.theta.as_array()));
  pop.mu = {};
  for (const auto& z : logs)
    for (std::size_t i = 0; i < 5; ++i) pop.mu[i] += z[i] / static_cast<double>(n);
  if (n < 2) {
    pop.sigma = prior.sigma0;
  } else {
    pop.sigma = {};
    for (const auto& z : logs)
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
          pop.sigma[i][j] += (z[i] - pop.mu[i]) * (z[j] - pop.mu[j]) / static_cast<double>(n - 1);
  }
  double ssr = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    ssr += sum_squared_residuals(*usable[k], result.fits[k].theta, options.dt);
    count += usable[k]->samples.size();
  }
  pop.sigma_eps = std::sqrt(ssr / static_cast<double>(count)) / options.dt;
  return result;
}

std::vector<DriverTrajectory> parse_trajectories_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("trajectory file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "driver,t,s,v,dv") throw DataError("trajectory header must be 'driver,t,s,v,dv'");
  struct Row {
    double t, s, v, dv;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (auto& field : f)
      if (!std::getline(ls, field, ',')) throw DataError(fmt::format("trajectory line {} has too few fields", lineno));
    Row r{};
    try {
      r = Row{std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
    } catch (const std::exception&) {
      throw DataError(fmt::format("trajectory line {} is malformed", lineno));
    }
    if (!rows.count(f[0])) order.push_back(f[0]);
    auto& list = rows[f[0]];
    if (!list.empty() && r.t <= list.back().t)
      throw DataError(fmt::format("trajectory line {}: time does not increase for driver '{}'", lineno, f[0]));
    list.push_back(r);
  }
  std::vector<DriverTrajectory> out;
  for (const auto& d : order) {
    DriverTrajectory traj{d, {}};
    const auto& list = rows[d];
    for (std::size_t i = 0; i + 1 < list.size(); ++i)
      traj.samples.push_back(FollowingSample{list[i].s, list[i].v, list[i].dv, list[i + 1].v});
    out.push_back(std::move(traj));
  }
  return out;
}

std::string to_text(const DriverPopulation& pop) {
  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  j["class"] = pop.cls == DriverClass::car ? "car" : "heavy";
  j["parameters"] = {"v0", "s0", "T", "alpha", "beta"};
  j["mu"] = pop.mu;
  j["sigma"] = pop.sigma;
  j["sigma_eps"] = pop.sigma_eps;
  return j.dump(2) + "\n";
}

DriverPopulation population_from_text(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema").get<int>() != kSchemaVersion) throw DataError("unsupported population schema");
    DriverPopulation p;
    const auto cls = j.at("class").get<std::string>();
    if (cls != "car" && cls != "heavy") throw DataError("population class must be car or heavy");
    p.cls = cls == "car" ? DriverClass::car : DriverClass::heavy;
    p.mu = j.at("mu").get<Vec5>();
    p.sigma = j.at("sigma").get<Mat5>();
    p.sigma_eps = j.at("sigma_eps").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("population document: {}", e.what()));
  }
}

DriverTrajectory synthesize_trajectory(const std::string& driver, const IdmParams& theta, int steps, double noise_std,
                                       std::uint64_t seed, double dt) {
  // Leader cycles through stop-and-go and free-running stretches so every parameter is exercised.
  auto leader_target = [](double t) {
    const double c = std::fmod(t, 120.0);
    if (c < 30) return 16.0;
    if (c < 45) return 0.0;
    if (c < 75) return 25.0;
    if (c < 90) return 8.0;
    if (c < 105) return 0.0;
    return 12.0;
  };
  Rng rng = make_rng(seed, stream::drivers);
  std::normal_distribution<double> noise(0.0, noise_std * dt);
  double lx = 30.0, lv = 0.0, fx = 0.0, fv = 0.0;
  DriverTrajectory traj{driver, {}};
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    FollowingSample x{lx - 5.0 - fx, fv, fv - lv, 0.0};
    double next = idm_next_speed(x, theta, dt);
    if (noise_std > 0) next = std::max(0.0, next + noise(rng));
    x.v_next = next;
    traj.samples.push_back(x);
    const double target = leader_target(t);
    const double la = std::clamp((target - lv) / dt, -3.0, 1.5);
    lv = std::max(0.0, lv + la * dt);
    lx += lv * dt;
    fv = next;
    fx += fv * dt;
  }
  return traj;
}

}  // namespace ecodrive::calib
