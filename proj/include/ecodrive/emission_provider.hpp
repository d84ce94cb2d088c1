#pragma once

#include <memory>

#include "ecodrive/vehicle.hpp"

namespace ecodrive {

struct EmissionQuery {
  double velocity = 0.0;      ///< m/s
  double acceleration = 0.0;  ///< m/s^2
  double road_grade = 0.0;    ///< percent
  double temperature = 20.0;  ///< degC
  double humidity = 50.0;     ///< percent

  bool operator==(const EmissionQuery&) const = default;
};

/// Source of per-step CO2 for the simulator. Instances may cache, so each engine owns one.
class EmissionProvider {
 public:
  virtual ~EmissionProvider() = default;
  /// Grams of CO2 emitted over one 0.5 s step.
  virtual double grams(const EmissionKey& key, const EmissionQuery& q) = 0;
  virtual std::unique_ptr<EmissionProvider> clone() const = 0;
};

}  // namespace ecodrive
