#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecodrive/calibration.hpp"
#include "ecodrive/common.hpp"
#include "ecodrive/emission_provider.hpp"
#include "ecodrive/scenario.hpp"
#include "ecodrive/vehicle.hpp"

namespace ecodrive::sim {

using VehicleId = std::uint64_t;
using scenario::SignalState;

inline constexpr double kStepSeconds = 0.5;

struct SimConfig {
  double dt = kStepSeconds;
  double a_min = -4.5;  ///< m/s^2
  double a_max = 3.0;   ///< m/s^2
  double queue_speed = 0.1;      ///< below this a vehicle counts as queued/waiting
  double yellow_stop_decel = 3.6;  ///< stop on yellow when the required deceleration is at most this
  int warmup_steps = 50;
  bool log_trajectories = false;
  bool fail_on_collision = true;
  double inflow_scale = 1.0;  ///< multiplies every approach inflow (queue-ratio check)
  scenario::NetworkOptions network;
  /// Bounds policy accelerations: the applied value never exceeds this IDM law.
  IdmParams guard{15.0, 2.0, 1.0, 3.0, 2.0, 4.0};
  // Lane changing
  double strategic_lookahead = 300.0;  ///< m before the control stop line
  double tactical_gain = 2.0;          ///< m/s anticipated speed gain
  double tactical_lookahead = 100.0;   ///< m
  double lane_change_cooldown = 3.0;   ///< s
  double min_lane_change_gap = 2.0;    ///< m
  calib::DriverPopulation car_drivers = calib::default_population(calib::DriverClass::car);
  calib::DriverPopulation heavy_drivers = calib::default_population(calib::DriverClass::heavy);
};

enum class Segment { ghost, incoming, box, outgoing };
enum class LaneChangeKind { strategic, tactical, regulatory };

struct Vehicle {
  VehicleId id = 0;
  int corridor = 0;
  int lane = 0;
  double pos = 0.0;  ///< front bumper, m from the corridor source
  double vel = 0.0;
  double acc = 0.0;
  double length = 5.0;
  Intent intent = Intent::straight;
  bool controlled = false;
  EmissionKey key{};
  IdmParams driver{};
  double spawn_time = 0.0;
  double last_lane_change = -1e9;
  double last_grams = 0.0;
  int turn_signal = 0;  ///< -1 right, 0 none, +1 left
  bool committed_ghost = false;
  bool committed_control = false;
};

struct LaneChange {
  int target_lane = 0;
  LaneChangeKind kind = LaneChangeKind::strategic;
};

struct EpisodeMetrics {
  int throughput = 0;            ///< vehicles crossing the control-active stop line
  double emissions_g = 0.0;      ///< CO2 on control-active approaches
  double queue_ratio = 0.0;      ///< mean queue length / lane length over approaches and steps
  double waiting_time_s = 0.0;   ///< mean wait per vehicle on the preceding (ghost) approach, unspawned included
  double control_wait_s = 0.0;   ///< mean stopped time per vehicle on the control-active approach
  int spawned = 0;
  int exited = 0;
  int arrivals = 0;
  int pending_end = 0;
  int collisions = 0;
  int guard_interventions = 0;
  int red_crossings = 0;
  int lane_changes = 0;
  int steps = 0;
  double duration_s = 0.0;

  bool operator==(const EpisodeMetrics&) const = default;
};

struct LogRecord {
  double t = 0.0;
  VehicleId veh = 0;
  int lane = 0;  ///< corridor * 10 + lane index
  double pos = 0.0;
  double vel = 0.0;
  double acc = 0.0;
  bool ctrl = false;
  char signal = '-';
};

struct TrajectoryLog {
  double dt = kStepSeconds;
  std::vector<LogRecord> records;
  std::vector<int> unspawned;  ///< scheduled-but-unspawned vehicles after each step

  std::string to_csv() const;
  static TrajectoryLog from_csv(const std::string& text);
};

struct Fault {
  double t = 0.0;
  VehicleId follower = 0;
  VehicleId leader = 0;
  double gap = 0.0;
};

/// Outcome of the most recent step for a vehicle that was given a policy action.
struct StepOutcome {
  double vel = 0.0;
  double grams = 0.0;
  bool exited = false;
};

enum class ControlKind { policy, lane_change, human };

struct ControlDecision {
  ControlKind kind = ControlKind::human;
  double accel = 0.0;
  std::optional<LaneChange> lane_change;
};

class Engine;

/// Supplies accelerations for controlled vehicles inside the eco-driving zone.
/// `act` may be called concurrently from several engines.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void act(const Engine& engine, std::span<const VehicleId> ids, std::vector<double>& accel) const = 0;
  /// False for controllers that leave vehicles to the human driver model.
  virtual bool overrides() const { return true; }
};

/// The status-quo baseline: controlled vehicles drive exactly like humans.
class BaselineController final : public Controller {
 public:
  void act(const Engine&, std::span<const VehicleId>, std::vector<double>& accel) const override { accel.clear(); }
  bool overrides() const override { return false; }
};

/// IDM acceleration with an optional leader at gap `gap` moving at `leader_vel`.
/// A non-positive gap returns `a_min` and sets `collision` when provided.
double idm_accel(double v, std::optional<double> gap, double leader_vel, const IdmParams& p, double a_min = -4.5,
                 bool* collision = nullptr);

/// Neighbor view for lane-change decisions.
struct LaneView {
  bool exists = false;
  const Vehicle* leader = nullptr;
  const Vehicle* follower = nullptr;
  double lane_speed = 0.0;  ///< anticipated speed in this lane
};

struct LaneChangeContext {
  const Vehicle* ego = nullptr;
  double dist_to_control_stop = 0.0;
  int lane_count = 1;
  double speed_limit = 15.0;
  LaneView current, left, right;  ///< left = lane + 1, right = lane - 1
};

std::optional<LaneChange> lane_change_decision(const LaneChangeContext& ctx, const SimConfig& cfg);

/// Single-threaded microsimulation of one scenario.
class Engine {
 public:
  Engine(const scenario::ScenarioSpec& spec, SimConfig config, std::unique_ptr<EmissionProvider> emissions,
         std::uint64_t seed);

  /// Spawns arrivals and executes lane changes for this step.
  void begin_step();
  /// Vehicles that need a policy action this step, in id order.
  std::vector<VehicleId> policy_vehicles() const;
  /// Applies actions (parallel to `ids`) and advances kinematics by dt.
  void finish_step(std::span<const VehicleId> ids, std::span<const double> accel);
  void step() { begin_step(); finish_step({}, {}); }
  void step(const Controller& controller);

  /// Hierarchical control for one vehicle: lane change first, then the bounded policy action.
  ControlDecision resolve_control(VehicleId id, double policy_accel) const;
  /// Acceleration the human driver model would apply.
  double human_accel(const Vehicle& v) const;

  double time() const { return step_ * config_.dt; }
  int step_index() const { return step_; }
  const SimConfig& config() const { return config_; }
  const scenario::ScenarioSpec& spec() const { return spec_; }
  const scenario::SimNetwork& network() const { return network_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const Vehicle* find(VehicleId id) const;
  const StepOutcome* outcome(VehicleId id) const;
  int pending() const;

  Segment segment(const Vehicle& v) const;
  bool in_eco_zone(const Vehicle& v) const;
  /// Signal state ahead of the vehicle, with distance to that stop line; nullopt past the last one.
  struct SignalAhead {
    SignalState state;
    double distance;
    bool control;
  };
  std::optional<SignalAhead> signal_ahead(const Vehicle& v) const;

  /// Nearest vehicle ahead/behind in a lane of the vehicle's corridor.
  const Vehicle* leader_in_lane(const Vehicle& v, int lane) const;
  const Vehicle* follower_in_lane(const Vehicle& v, int lane) const;

  EpisodeMetrics metrics() const;
  const TrajectoryLog& log() const { return log_; }
  const std::vector<Fault>& faults() const { return faults_; }

 private:
  struct Pending {
    Vehicle vehicle;
    double arrival = 0.0;
  };

  void schedule_arrivals();
  void insert_pending();
  Vehicle make_vehicle(int corridor, double arrival);
  void rebuild_lanes();
  LaneChangeContext lane_context(const Vehicle& v) const;
  bool must_stop(const Vehicle& v, const SignalAhead& s) const;
  double stop_line_accel(const Vehicle& v, const IdmParams& p) const;
  double guard_accel(const Vehicle& v) const;
  bool metrics_active() const { return step_ >= config_.warmup_steps; }

  scenario::ScenarioSpec spec_;
  SimConfig config_;
  scenario::SimNetwork network_;
  std::unique_ptr<EmissionProvider> emissions_;
  std::uint64_t seed_;
  int step_ = 0;
  VehicleId next_id_ = 1;

  std::vector<Vehicle> vehicles_;
  std::vector<std::vector<std::vector<int>>> lanes_;  ///< [corridor][lane] -> vehicle indices, front first
  std::vector<std::deque<Pending>> pending_;
  std::vector<double> next_arrival_;
  std::vector<Rng> arrival_rng_;
  std::unordered_map<VehicleId, LaneChange> lane_changes_;
  std::unordered_map<VehicleId, StepOutcome> outcomes_;

  // accumulators
  EpisodeMetrics m_;
  double queue_ratio_sum_ = 0.0;
  long queue_samples_ = 0;
  double ghost_wait_sum_ = 0.0;
  double control_wait_sum_ = 0.0;
  int control_vehicles_ = 0;
  TrajectoryLog log_;
  std::vector<Fault> faults_;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  TrajectoryLog log;
};

/// Runs warmup + `horizon` steps. Collisions raise SimulationFault when configured to.
EpisodeResult run_episode(const scenario::ScenarioSpec& spec, const Controller& controller, int horizon,
                          const SimConfig& config, const EmissionProvider& emissions, std::uint64_t seed);

/// Episodes for several seeds; OpenMP over seeds, results in seed order.
std::vector<EpisodeResult> run_episodes(const scenario::ScenarioSpec& spec, const Controller& controller, int horizon,
                                        const SimConfig& config, const EmissionProvider& emissions,
                                        std::span<const std::uint64_t> seeds);
/// Serial reference for run_episodes.
std::vector<EpisodeResult> run_episodes_serial(const scenario::ScenarioSpec& spec, const Controller& controller, int horizon,
                                               const SimConfig& config, const EmissionProvider& emissions,
                                               std::span<const std::uint64_t> seeds);

std::string metrics_to_text(const EpisodeMetrics& m);

}  // namespace ecodrive::sim
