#pragma once

#include <array>
#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecodrive/common.hpp"
#include "ecodrive/emission_provider.hpp"
#include "ecodrive/nn.hpp"
#include "ecodrive/vehicle.hpp"

namespace ecodrive::emissions {

inline constexpr double kStep = 0.5;  ///< seconds per emission step

/// Rate coefficients in g/s: c0 + c1 v + c2 v^2 + c3 v^3 + c4 max(0, v a) + c5 v grade.
struct Coefficients {
  std::array<double, 6> c{};
};

struct EnvironmentModel {
  double ref_temperature = 20.0;
  double ref_humidity = 50.0;
  double k_temperature = 0.04;  ///< per (10 degC)^2
  double k_humidity = 0.02;     ///< per (50 %)^2
  double multiplier(double temperature, double humidity) const;
};

/// Age degradation: multiplier = 1 + kAgeDegradationPerBucket * bucket.
inline constexpr double kAgeDegradationPerBucket = 0.015;

Coefficients base_coefficients(VehicleType type, Fuel fuel);
double age_multiplier(int age_bucket);

/// Analytic stand-in for a vehicle emission simulator. Grams of CO2 per 0.5 s step.
double oracle_emission(const EmissionQuery& q, const EmissionKey& key, const EnvironmentModel& env = {});

/// Total oracle emission of a speed trace sampled every kStep seconds (first step starts from v[0]).
double oracle_trace(const std::vector<double>& speeds, double initial_speed, const EmissionKey& key, double grade,
                    double temperature, double humidity, const EnvironmentModel& env = {});

std::vector<EmissionKey> all_emission_keys();

/// A constant-speed baseline trace and the same trace plus one extra step.
struct TrajectoryPair {
  int n = 10;
  double v_base = 0.0;
  double v_extra = 0.0;
  double grade = 0.0, temperature = 20.0, humidity = 50.0;
  std::vector<double> base() const;
  std::vector<double> extended() const;
};

struct Sample {
  EmissionKey key;
  EmissionQuery features;
  double label = 0.0;
};

struct QueryGrid {
  std::vector<double> speeds;
  std::vector<double> accelerations;
  std::vector<double> grades{0.0};
  std::vector<double> temperatures{20.0};
  std::vector<double> humidities{50.0};
  std::size_t size() const {
    return speeds.size() * accelerations.size() * grades.size() * temperatures.size() * humidities.size();
  }
};

/// Envelope grid used for training: speeds 0-30 m/s, accelerations -4.5..3, grades, climate.
QueryGrid default_query_grid();
/// `count` queries drawn uniformly over the same envelope.
std::vector<TrajectoryPair> random_pairs(int count, std::uint64_t seed);
std::vector<TrajectoryPair> grid_pairs(const QueryGrid& grid);

/// Labels each pair by differencing the oracle over the two traces.
std::vector<Sample> build_dataset(const std::vector<EmissionKey>& keys, const std::vector<TrajectoryPair>& pairs,
                                  const EnvironmentModel& env = {});

std::string dataset_to_csv(const std::vector<Sample>& samples);
std::vector<Sample> dataset_from_csv(const std::string& text);

struct SurrogateOptions {
  int hidden = 32;
  int epochs = 400;
  int batch = 256;
  double lr = 3e-3;
  double holdout = 0.2;
  double min_r2 = 0.98;
  std::uint64_t seed = 1;
  int min_samples = 1000;
};

struct EmissionModel {
  EmissionKey key;
  nn::Mlp net;
  std::array<double, 5> in_mean{}, in_std{};
  double out_mean = 0.0, out_std = 1.0;

  double raw(const EmissionQuery& q) const;
  /// max(0, raw)
  double predict(const EmissionQuery& q) const { return std::max(0.0, raw(q)); }
  bool operator==(const EmissionModel&) const = default;
};

struct FitReport {
  double train_r2 = 0.0;
  double holdout_r2 = 0.0;
  double holdout_mae = 0.0;
  std::size_t samples = 0;
};

/// Thrown when the held-out R^2 misses the threshold; carries the report.
class FitFailure : public DataError {
 public:
  FitFailure(const std::string& what, FitReport report) : DataError(what), report(report) {}
  FitReport report;
};

EmissionModel train_surrogate(const std::vector<Sample>& dataset, const EmissionKey& key, const SurrogateOptions& options,
                              FitReport* report = nullptr);

std::string serialize_model(const EmissionModel& m);
EmissionModel deserialize_model(const std::string& bytes);

/// Exact analytic provider.
class OracleProvider final : public EmissionProvider {
 public:
  explicit OracleProvider(EnvironmentModel env = {}) : env_(env) {}
  double grams(const EmissionKey& key, const EmissionQuery& q) override { return oracle_emission(q, key, env_); }
  std::unique_ptr<EmissionProvider> clone() const override { return std::make_unique<OracleProvider>(env_); }

 private:
  EnvironmentModel env_;
};

/// Serves clamped surrogate predictions with a per-instance cache. Keys without a model fall back
/// to the model for `fallback` when set, else raise.
class SurrogateProvider final : public EmissionProvider {
 public:
  SurrogateProvider(std::shared_ptr<const std::map<EmissionKey, EmissionModel>> models, bool use_cache = true,
                    std::optional<EmissionKey> fallback = std::nullopt);
  double grams(const EmissionKey& key, const EmissionQuery& q) override;
  std::unique_ptr<EmissionProvider> clone() const override;
  std::size_t cache_hits() const { return hits_; }
  std::size_t cache_size() const;

 private:
  struct QueryHash {
    std::size_t operator()(const EmissionQuery& q) const;
  };
  const EmissionModel& model_for(const EmissionKey& key) const;
  std::shared_ptr<const std::map<EmissionKey, EmissionModel>> models_;
  bool use_cache_;
  std::optional<EmissionKey> fallback_;
  std::map<EmissionKey, std::unordered_map<EmissionQuery, double, QueryHash>> cache_;
  std::size_t hits_ = 0;
};

}  // namespace ecodrive::emissions
