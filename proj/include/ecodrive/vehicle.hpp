#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>

namespace ecodrive {

enum class VehicleType { passenger_car, passenger_truck, bus, truck };
enum class Fuel { gasoline, diesel };

inline constexpr int kVehicleTypeCount = 4;
inline constexpr int kFuelCount = 2;
/// Buckets 0..9 are ages 1..10 years; bucket 10 is "older than 10".
inline constexpr int kAgeBucketCount = 11;

/// Identifies one emission model.
struct EmissionKey {
  VehicleType type = VehicleType::passenger_car;
  Fuel fuel = Fuel::gasoline;
  int age_bucket = 4;

  auto operator<=>(const EmissionKey&) const = default;
};

inline constexpr EmissionKey kDefaultEmissionKey{};

/// Heavy vehicles (buses, trucks) share one driver population.
constexpr bool is_heavy(VehicleType t) { return t == VehicleType::bus || t == VehicleType::truck; }

constexpr double vehicle_length(VehicleType t) { return is_heavy(t) ? 12.0 : 5.0; }

std::string_view to_string(VehicleType t);
std::string_view to_string(Fuel f);
VehicleType parse_vehicle_type(std::string_view s);
Fuel parse_fuel(std::string_view s);
std::string to_string(const EmissionKey& key);

/// Intelligent-driver-model parameters.
struct IdmParams {
  double v0 = 15.0;     ///< desired velocity [m/s]
  double s0 = 2.0;      ///< jam headway [m]
  double T = 1.5;       ///< time headway [s]
  double alpha = 1.5;   ///< maximum acceleration [m/s^2]
  double beta = 2.0;    ///< comfortable deceleration [m/s^2]
  double delta = 4.0;   ///< acceleration exponent

  bool valid() const { return v0 > 0 && s0 > 0 && T > 0 && alpha > 0 && beta > 0 && delta > 0; }
  std::array<double, 5> as_array() const { return {v0, s0, T, alpha, beta}; }
  static IdmParams from_array(const std::array<double, 5>& p, double delta = 4.0) {
    return {p[0], p[1], p[2], p[3], p[4], delta};
  }
  bool operator==(const IdmParams&) const = default;
};

enum class Intent { left, straight, right };

}  // namespace ecodrive
