#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecodrive/vehicle.hpp"

namespace ecodrive::scenario {

enum class Season { summer, fall, winter, spring };
enum class Weather { clear, rain, snow };
enum class HourType { peak, offpeak };
enum class SignalState { red, green, yellow };

struct Approach {
  int lane_count = 1;
  double lane_length = 400.0;  ///< m
  double speed_limit = 15.0;   ///< m/s
  double road_grade = 0.0;     ///< percent grade
  bool is_ghost = false;

  bool operator==(const Approach&) const = default;
};

struct IntersectionGeometry {
  std::vector<Approach> incoming;
  std::vector<Approach> outgoing;
  int phase_count = 2;
  double turn_fraction = 0.05;  ///< share of inflow per available turn movement

  bool operator==(const IntersectionGeometry&) const = default;
};

/// One signal phase. `red_s` is the all-red clearance that follows it.
struct Phase {
  double green_s = 30.0;
  double yellow_s = 3.0;
  double red_s = 0.0;

  double duration() const { return green_s + yellow_s + red_s; }
  bool operator==(const Phase&) const = default;
};

/// Fixed-time plan. Phases run back to back; an approach served by phase k sees red
/// whenever phase k is not in its green or yellow interval.
class SignalPlan {
 public:
  std::vector<Phase> phases;
  double offset_s = 0.0;

  SignalPlan() = default;
  SignalPlan(std::vector<Phase> p, double offset) : phases(std::move(p)), offset_s(offset) {}

  /// Plan where the served approach sees `green`, `yellow`, then `red` seconds of red.
  static SignalPlan two_phase(double green, double red, double yellow = 3.0, double offset = 0.0);

  double cycle_length() const;
  SignalState state(int phase, double t) const;
  /// Seconds until the current state of `phase` changes.
  double time_left(int phase, double t) const;
  /// Seconds until the 1st, 2nd, and 3rd green onsets (0 for the first when green now).
  std::array<double, 3> time_to_green(int phase, double t) const;
  double green_s(int phase) const { return phases.at(static_cast<std::size_t>(phase)).green_s; }
  double red_s(int phase) const;

  bool operator==(const SignalPlan&) const = default;

 private:
  double phase_start(int phase) const;
  double local_time(double t) const;
};

struct FleetShare {
  EmissionKey key;
  double share = 1.0;
  bool operator==(const FleetShare&) const = default;
};

struct ScenarioSpec {
  std::string id;
  IntersectionGeometry geometry;
  SignalPlan control_signal;
  std::vector<SignalPlan> ghost_signals;  ///< one per incoming approach
  std::vector<double> inflows;            ///< veh/h per incoming approach
  double penetration = 1.0;
  double temperature = 20.0;  ///< degC
  double humidity = 50.0;     ///< percent
  Season season = Season::summer;
  Weather weather = Weather::clear;
  HourType hour_type = HourType::peak;
  std::vector<FleetShare> fleet_mix{FleetShare{}};
  std::uint64_t seed = 0;

  bool operator==(const ScenarioSpec&) const = default;
};

/// Throws ValidationError describing the first violated invariant.
void validate(const ScenarioSpec& spec);

/// Ghost feeder default plan: green 30 s, yellow 3 s, red 30 s.
SignalPlan default_ghost_plan(double offset = 0.0);

/// Temperature and humidity for a season/weather slice (documented table in docs/scenarios.md).
std::pair<double, double> climate(Season season, Weather weather);

/// Curated factor valuations; every list must be non-empty.
struct FactorGrid {
  std::vector<int> approach_count{4};
  std::vector<int> lane_count{1, 2, 3};
  std::vector<double> lane_length{100, 250, 400, 750};
  std::vector<double> outgoing_length{200};
  std::vector<double> speed_limit{11.0, 13.5, 15.6, 20.0};
  std::vector<double> road_grade{0.0};
  std::vector<int> phase_count{2, 4};
  std::vector<double> green{15, 25, 35};
  std::vector<double> yellow{3};
  std::vector<double> red{30, 40, 55};  ///< red seen by the approach (two-phase plans only)
  std::vector<double> offset{0};
  std::vector<double> ghost_offset{0};
  std::vector<double> inflow{200, 300, 400};
  std::vector<double> penetration{0.1, 0.2, 0.5, 1.0};
  std::vector<Season> season{Season::summer};
  std::vector<Weather> weather{Weather::clear};
  std::vector<HourType> hour_type{HourType::peak};
  std::vector<std::vector<FleetShare>> fleet_mix{{FleetShare{}}};
};

FactorGrid parse_grid(const nlohmann::json& j);
nlohmann::json to_json(const FactorGrid& grid);

/// Draws `count` scenarios uniformly from the grid; pure in (grid, count, seed).
std::vector<ScenarioSpec> sample_scenarios(const FactorGrid& grid, int count, std::uint64_t seed);

/// Exhaustive product of the grid's valuations.
std::vector<ScenarioSpec> enumerate_grid(const FactorGrid& grid, std::uint64_t seed);
std::size_t grid_cardinality(const FactorGrid& grid);

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec spec_from_json(const nlohmann::json& j);
std::string serialize(const ScenarioSpec& spec);
ScenarioSpec parse_spec(const std::string& text);

/// AADT to hourly flow: 8.4 % of AADT in a peak hour, 5.5 % off-peak.
double aadt_to_hourly(double aadt, HourType hour_type);

/// Segment layout the microsimulator runs on: one corridor per incoming approach,
/// ghost feeder -> control-active approach -> intersection box -> outgoing approach.
struct Corridor {
  int approach = 0;
  int lane_count = 1;
  double ghost_length = 250.0;
  double incoming_length = 400.0;
  double box_length = 15.0;
  double outgoing_length = 200.0;
  double speed_limit = 15.0;
  double road_grade = 0.0;
  double inflow = 0.0;
  int control_phase = 0;
  SignalPlan ghost_plan;

  double ghost_stop() const { return ghost_length; }
  double control_stop() const { return ghost_length + incoming_length; }
  double box_end() const { return control_stop() + box_length; }
  double end() const { return box_end() + outgoing_length; }
};

struct NetworkOptions {
  double ghost_length = 250.0;
  double box_length = 15.0;
};

struct SimNetwork {
  std::vector<Corridor> corridors;
  SignalPlan control_signal;
  int ghost_feeders() const { return static_cast<int>(corridors.size()); }
};

SimNetwork build_ghost_network(const ScenarioSpec& spec, const NetworkOptions& options = {});

std::string_view to_string(Season s);
std::string_view to_string(Weather w);
std::string_view to_string(HourType h);
Season parse_season(std::string_view s);
Weather parse_weather(std::string_view s);
HourType parse_hour_type(std::string_view s);

}  // namespace ecodrive::scenario
