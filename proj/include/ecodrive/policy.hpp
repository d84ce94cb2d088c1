#pragma once

#include <array>
#include <memory>
#include <string_view>

#include "ecodrive/microsim.hpp"
#include "ecodrive/nn.hpp"

namespace ecodrive::policy {

using sim::VehicleId;

inline constexpr int kEgoFeatures = 15;
inline constexpr int kNeighborSlots = 6;
inline constexpr int kNeighborFeatures = 5;
inline constexpr int kContextFeatures = 6;
inline constexpr int kObservationSize = kEgoFeatures + kNeighborSlots * kNeighborFeatures + kContextFeatures;

using Observation = std::array<double, kObservationSize>;

/// Sensing limits and the scale each raw quantity is divided by.
struct ObservationConfig {
  double sensing_range = 100.0;  ///< m, neighbor detection
  double signal_range = 750.0;   ///< m, signal phase and timing availability
  double speed_scale = 30.0;     ///< m/s
  double distance_scale = 750.0; ///< m, distance to the stop line
  double time_scale = 100.0;     ///< s
  double lane_scale = 7.0;
  double length_scale = 750.0;   ///< m
  double phase_scale = 60.0;     ///< s, green and red durations

  bool operator==(const ObservationConfig&) const = default;
};

/// Layout: ego [speed, distance to signal, signal (red, green, yellow), time left, time to 2nd and 3rd green,
/// location (approach, box, exit), lane, intent (left, straight, right)]; six neighbors [speed, gap,
/// turn signal (left, right, none)] ordered leader/follower in same, left, right lanes; context [lanes,
/// lane length, green, red, speed limit, penetration].
Observation encode_observation(const sim::Engine& engine, VehicleId id, const ObservationConfig& cfg = {});

struct RewardParams {
  double alpha = 35.0;    ///< idling penalty
  double beta = 3.0;      ///< emission penalty per gram
  double tau_stop = 1.0;  ///< m/s; below this the vehicle counts as stopped

  bool operator==(const RewardParams&) const = default;
};

enum class Variant { pi1, pi2 };

RewardParams reward_params(Variant v);
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

/// r = v - alpha * 1[v < tau] - beta * e
double reward(double v, double grams, const RewardParams& p);

/// Lane change claims the step when one fires; otherwise the bounded, guarded policy action.
sim::ControlDecision hierarchical_control(const sim::Engine& engine, VehicleId id, double policy_accel);

/// Human-like status quo driving: the vehicle's own IDM.
double baseline_controller(const sim::Engine& engine, VehicleId id);

/// Deterministic (mean action) controller over a shared actor network.
class PolicyController final : public sim::Controller {
 public:
  PolicyController(std::shared_ptr<const nn::Mlp> actor, ObservationConfig obs = {});
  void act(const sim::Engine& engine, std::span<const VehicleId> ids, std::vector<double>& accel) const override;

 private:
  std::shared_ptr<const nn::Mlp> actor_;
  ObservationConfig obs_;
};

}  // namespace ecodrive::policy
