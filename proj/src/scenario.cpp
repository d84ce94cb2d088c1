#include "ecodrive/scenario.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "ecodrive/common.hpp"

namespace ecodrive {

std::string_view to_string(VehicleType t) {
  switch (t) {
    case VehicleType::passenger_car: return "passenger_car";
    case VehicleType::passenger_truck: return "passenger_truck";
    case VehicleType::bus: return "bus";
    case VehicleType::truck: return "truck";
  }
  return "?";
}

std::string_view to_string(Fuel f) { return f == Fuel::gasoline ? "gasoline" : "diesel"; }

VehicleType parse_vehicle_type(std::string_view s) {
  if (s == "passenger_car") return VehicleType::passenger_car;
  if (s == "passenger_truck") return VehicleType::passenger_truck;
  if (s == "bus") return VehicleType::bus;
  if (s == "truck") return VehicleType::truck;
  throw ValidationError(fmt::format("unknown vehicle type '{}'", s));
}

Fuel parse_fuel(std::string_view s) {
  if (s == "gasoline") return Fuel::gasoline;
  if (s == "diesel") return Fuel::diesel;
  throw ValidationError(fmt::format("unknown fuel '{}'", s));
}

std::string to_string(const EmissionKey& key) {
  return fmt::format("{}/{}/{}", to_string(key.type), to_string(key.fuel), key.age_bucket);
}

}  // namespace ecodrive

namespace ecodrive::scenario {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Signal plans

SignalPlan SignalPlan::two_phase(double green, double red, double yellow, double offset) {
  if (red <= yellow) throw ValidationError("two-phase plan needs red longer than yellow");
  return SignalPlan({Phase{green, yellow, 0.0}, Phase{red - yellow, yellow, 0.0}}, offset);
}

double SignalPlan::cycle_length() const {
  double c = 0.0;
  for (const auto& p : phases) c += p.duration();
  return c;
}

double SignalPlan::phase_start(int phase) const {
  double s = 0.0;
  for (int k = 0; k < phase; ++k) s += phases[static_cast<std::size_t>(k)].duration();
  return s;
}

double SignalPlan::local_time(double t) const {
  const double c = cycle_length();
  double u = std::fmod(t - offset_s, c);  // the cycle starts at t = offset
  if (u < 0) u += c;
  return u;
}

SignalState SignalPlan::state(int phase, double t) const {
  const auto& p = phases.at(static_cast<std::size_t>(phase));
  const double c = cycle_length();
  double u = local_time(t) - phase_start(phase);
  if (u < 0) u += c;
  if (u < p.green_s) return SignalState::green;
  if (u < p.green_s + p.yellow_s) return SignalState::yellow;
  return SignalState::red;
}

double SignalPlan::time_left(int phase, double t) const {
  const auto& p = phases.at(static_cast<std::size_t>(phase));
  const double c = cycle_length();
  double u = local_time(t) - phase_start(phase);
  if (u < 0) u += c;
  if (u < p.green_s) return p.green_s - u;
  if (u < p.green_s + p.yellow_s) return p.green_s + p.yellow_s - u;
  return c - u;
}

std::array<double, 3> SignalPlan::time_to_green(int phase, double t) const {
  const double c = cycle_length();
  double first = 0.0;
  if (state(phase, t) != SignalState::green) {
    double u = local_time(t) - phase_start(phase);
    if (u < 0) u += c;
    first = c - u;
  }
  return {first, first + c, first + 2 * c};
}

double SignalPlan::red_s(int phase) const {
  const auto& p = phases.at(static_cast<std::size_t>(phase));
  return cycle_length() - p.green_s - p.yellow_s;
}

SignalPlan default_ghost_plan(double offset) { return SignalPlan::two_phase(30.0, 30.0, 3.0, offset); }

std::pair<double, double> climate(Season season, Weather weather) {
  double temp = 20.0;
  double hum = 50.0;
  switch (season) {
    case Season::summer: temp = 27.0; hum = 60.0; break;
    case Season::fall: temp = 16.0; hum = 65.0; break;
    case Season::winter: temp = 5.0; hum = 70.0; break;
    case Season::spring: temp = 15.0; hum = 60.0; break;
  }
  switch (weather) {
    case Weather::clear: break;
    case Weather::rain: temp -= 3.0; hum += 25.0; break;
    case Weather::snow: temp -= 8.0; hum += 15.0; break;
  }
  return {temp, std::min(hum, 100.0)};
}

// ---------------------------------------------------------------------------
// Validation

void validate(const ScenarioSpec& spec) {
  const auto& g = spec.geometry;
  if (g.incoming.empty()) throw ValidationError("scenario has no incoming approach");
  if (g.outgoing.empty()) throw ValidationError("incoming approaches need an outgoing approach");
  if (g.phase_count < 1 || g.phase_count > 8) throw ValidationError("phase_count must be in [1, 8]");
  if (g.turn_fraction < 0 || g.turn_fraction > 0.5) throw ValidationError("turn_fraction must be in [0, 0.5]");
  auto check_approach = [](const Approach& a, std::string_view what) {
    if (a.lane_count < 1 || a.lane_count > 7)
      throw ValidationError(fmt::format("{} lane count {} outside [1, 7]", what, a.lane_count));
    if (!(a.lane_length > 0 && a.lane_length <= 750))
      throw ValidationError(fmt::format("{} lane length {} outside (0, 750]", what, a.lane_length));
    if (!(a.speed_limit > 0)) throw ValidationError(fmt::format("{} speed limit must be positive", what));
    if (!std::isfinite(a.road_grade)) throw ValidationError(fmt::format("{} grade must be finite", what));
  };
  for (const auto& a : g.incoming) check_approach(a, "incoming");
  for (const auto& a : g.outgoing) check_approach(a, "outgoing");
  if (spec.control_signal.phases.empty()) throw ValidationError("control signal has no phases");
  if (static_cast<int>(spec.control_signal.phases.size()) != g.phase_count)
    throw ValidationError("control signal phase list does not match phase_count");
  for (const auto& p : spec.control_signal.phases)
    if (p.green_s <= 0 || p.yellow_s < 0 || p.red_s < 0) throw ValidationError("invalid phase durations");
  if (spec.ghost_signals.size() != g.incoming.size())
    throw ValidationError("need exactly one ghost signal per incoming approach");
  if (spec.inflows.size() != g.incoming.size()) throw ValidationError("need one inflow per incoming approach");
  for (double q : spec.inflows)
    if (!(q >= 0)) throw ValidationError("inflows must be non-negative");
  if (!(spec.penetration > 0 && spec.penetration <= 1)) throw ValidationError("penetration must be in (0, 1]");
  if (spec.fleet_mix.empty()) throw ValidationError("fleet mix is empty");
  double total = 0.0;
  for (const auto& f : spec.fleet_mix) {
    if (f.share < 0) throw ValidationError("fleet share must be non-negative");
    if (f.key.age_bucket < 0 || f.key.age_bucket >= kAgeBucketCount) throw ValidationError("age bucket out of range");
    total += f.share;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError(fmt::format("fleet mix sums to {}, not 1", total));
}

// ---------------------------------------------------------------------------
// Enum names

std::string_view to_string(Season s) {
  switch (s) {
    case Season::summer: return "summer";
    case Season::fall: return "fall";
    case Season::winter: return "winter";
    case Season::spring: return "spring";
  }
  return "?";
}
std::string_view to_string(Weather w) {
  switch (w) {
    case Weather::clear: return "clear";
    case Weather::rain: return "rain";
    case Weather::snow: return "snow";
  }
  return "?";
}
std::string_view to_string(HourType h) { return h == HourType::peak ? "peak" : "offpeak"; }

Season parse_season(std::string_view s) {
  if (s == "summer") return Season::summer;
  if (s == "fall") return Season::fall;
  if (s == "winter") return Season::winter;
  if (s == "spring") return Season::spring;
  throw ValidationError(fmt::format("unknown season '{}'", s));
}
Weather parse_weather(std::string_view s) {
  if (s == "clear") return Weather::clear;
  if (s == "rain") return Weather::rain;
  if (s == "snow") return Weather::snow;
  throw ValidationError(fmt::format("unknown weather '{}'", s));
}
HourType parse_hour_type(std::string_view s) {
  if (s == "peak") return HourType::peak;
  if (s == "offpeak") return HourType::offpeak;
  throw ValidationError(fmt::format("unknown hour type '{}'", s));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json key_json(const EmissionKey& k) {
  return json{{"type", to_string(k.type)}, {"fuel", to_string(k.fuel)}, {"age_bucket", k.age_bucket}};
}

EmissionKey key_from(const json& j) {
  return EmissionKey{parse_vehicle_type(j.at("type").get<std::string>()), parse_fuel(j.at("fuel").get<std::string>()),
                     j.at("age_bucket").get<int>()};
}

json fleet_json(const std::vector<FleetShare>& mix) {
  json arr = json::array();
  for (const auto& f : mix) {
    json e = key_json(f.key);
    e["share"] = f.share;
    arr.push_back(e);
  }
  return arr;
}

std::vector<FleetShare> fleet_from(const json& arr) {
  std::vector<FleetShare> mix;
  for (const auto& e : arr) mix.push_back(FleetShare{key_from(e), e.at("share").get<double>()});
  return mix;
}

json approach_json(const Approach& a) {
  return json{{"lane_count", a.lane_count}, {"lane_length", a.lane_length}, {"speed_limit", a.speed_limit},
              {"road_grade", a.road_grade}, {"is_ghost", a.is_ghost}};
}

Approach approach_from(const json& j) {
  return Approach{j.at("lane_count").get<int>(), j.at("lane_length").get<double>(), j.at("speed_limit").get<double>(),
                  j.at("road_grade").get<double>(), j.at("is_ghost").get<bool>()};
}

json plan_json(const SignalPlan& p) {
  json phases = json::array();
  for (const auto& ph : p.phases) phases.push_back(json::array({ph.green_s, ph.yellow_s, ph.red_s}));
  return json{{"phases", phases}, {"offset_s", p.offset_s}, {"cycle_length_s", p.cycle_length()}};
}

SignalPlan plan_from(const json& j) {
  SignalPlan p;
  for (const auto& ph : j.at("phases")) p.phases.push_back(Phase{ph.at(0).get<double>(), ph.at(1).get<double>(), ph.at(2).get<double>()});
  p.offset_s = j.at("offset_s").get<double>();
  if (j.contains("cycle_length_s") && std::abs(j["cycle_length_s"].get<double>() - p.cycle_length()) > 1e-9)
    throw ValidationError("cycle_length_s does not equal the sum of phase durations");
  return p;
}

template <typename T, typename F>
std::vector<T> list_from(const json& j, const char* name, F convert, std::vector<T> fallback) {
  if (!j.contains(name)) return fallback;
  std::vector<T> out;
  for (const auto& e : j.at(name)) out.push_back(convert(e));
  if (out.empty()) throw ConfigError(fmt::format("grid factor '{}' is empty", name));
  return out;
}

template <typename T>
json list_json(const std::vector<T>& v) {
  json arr = json::array();
  for (const auto& x : v) arr.push_back(x);
  return arr;
}

template <typename E>
json enum_list_json(const std::vector<E>& v) {
  json arr = json::array();
  for (const auto& x : v) arr.push_back(to_string(x));
  return arr;
}

}  // namespace

json to_json(const ScenarioSpec& s) {
  json in = json::array(), out = json::array(), ghosts = json::array();
  for (const auto& a : s.geometry.incoming) in.push_back(approach_json(a));
  for (const auto& a : s.geometry.outgoing) out.push_back(approach_json(a));
  for (const auto& g : s.ghost_signals) ghosts.push_back(plan_json(g));
  return json{{"schema", kSchemaVersion},
              {"id", s.id},
              {"geometry",
               {{"incoming", in}, {"outgoing", out}, {"phase_count", s.geometry.phase_count},
                {"turn_fraction", s.geometry.turn_fraction}}},
              {"control_signal", plan_json(s.control_signal)},
              {"ghost_signals", ghosts},
              {"inflows", s.inflows},
              {"penetration", s.penetration},
              {"temperature", s.temperature},
              {"humidity", s.humidity},
              {"season", to_string(s.season)},
              {"weather", to_string(s.weather)},
              {"hour_type", to_string(s.hour_type)},
              {"fleet_mix", fleet_json(s.fleet_mix)},
              {"seed", s.seed}};
}

ScenarioSpec spec_from_json(const json& j) {
  if (!j.contains("schema") || j["schema"].get<int>() != kSchemaVersion)
    throw DataError("scenario document has unknown or missing schema version");
  ScenarioSpec s;
  try {
    s.id = j.at("id").get<std::string>();
    const auto& g = j.at("geometry");
    for (const auto& a : g.at("incoming")) s.geometry.incoming.push_back(approach_from(a));
    for (const auto& a : g.at("outgoing")) s.geometry.outgoing.push_back(approach_from(a));
    s.geometry.phase_count = g.at("phase_count").get<int>();
    s.geometry.turn_fraction = g.at("turn_fraction").get<double>();
    s.control_signal = plan_from(j.at("control_signal"));
    for (const auto& p : j.at("ghost_signals")) s.ghost_signals.push_back(plan_from(p));
    s.inflows = j.at("inflows").get<std::vector<double>>();
    s.penetration = j.at("penetration").get<double>();
    s.temperature = j.at("temperature").get<double>();
    s.humidity = j.at("humidity").get<double>();
    s.season = parse_season(j.at("season").get<std::string>());
    s.weather = parse_weather(j.at("weather").get<std::string>());
    s.hour_type = parse_hour_type(j.at("hour_type").get<std::string>());
    s.fleet_mix = fleet_from(j.at("fleet_mix"));
    s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed scenario document: {}", e.what()));
  }
  validate(s);
  return s;
}

std::string serialize(const ScenarioSpec& spec) { return to_json(spec).dump(2) + "\n"; }

ScenarioSpec parse_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("scenario is not valid structured text: {}", e.what()));
  }
  return spec_from_json(j);
}

FactorGrid parse_grid(const json& j) {
  if (j.contains("schema") && j["schema"].get<int>() != kSchemaVersion) throw ConfigError("grid has unknown schema version");
  FactorGrid g;
  auto as_int = [](const json& e) { return e.get<int>(); };
  auto as_double = [](const json& e) { return e.get<double>(); };
  try {
    g.approach_count = list_from<int>(j, "approach_count", as_int, g.approach_count);
    g.lane_count = list_from<int>(j, "lane_count", as_int, g.lane_count);
    g.lane_length = list_from<double>(j, "lane_length", as_double, g.lane_length);
    g.outgoing_length = list_from<double>(j, "outgoing_length", as_double, g.outgoing_length);
    g.speed_limit = list_from<double>(j, "speed_limit", as_double, g.speed_limit);
    g.road_grade = list_from<double>(j, "road_grade", as_double, g.road_grade);
    g.phase_count = list_from<int>(j, "phase_count", as_int, g.phase_count);
    g.green = list_from<double>(j, "green", as_double, g.green);
    g.yellow = list_from<double>(j, "yellow", as_double, g.yellow);
    g.red = list_from<double>(j, "red", as_double, g.red);
    g.offset = list_from<double>(j, "offset", as_double, g.offset);
    g.ghost_offset = list_from<double>(j, "ghost_offset", as_double, g.ghost_offset);
    g.inflow = list_from<double>(j, "inflow", as_double, g.inflow);
    g.penetration = list_from<double>(j, "penetration", as_double, g.penetration);
    g.season = list_from<Season>(j, "season", [](const json& e) { return parse_season(e.get<std::string>()); }, g.season);
    g.weather = list_from<Weather>(j, "weather", [](const json& e) { return parse_weather(e.get<std::string>()); }, g.weather);
    g.hour_type = list_from<HourType>(j, "hour_type", [](const json& e) { return parse_hour_type(e.get<std::string>()); }, g.hour_type);
    g.fleet_mix = list_from<std::vector<FleetShare>>(j, "fleet_mix", [](const json& e) { return fleet_from(e); }, g.fleet_mix);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed grid: {}", e.what()));
  }
  return g;
}

json to_json(const FactorGrid& g) {
  json mixes = json::array();
  for (const auto& m : g.fleet_mix) mixes.push_back(fleet_json(m));
  return json{{"schema", kSchemaVersion},        {"approach_count", list_json(g.approach_count)},
              {"lane_count", list_json(g.lane_count)}, {"lane_length", list_json(g.lane_length)},
              {"outgoing_length", list_json(g.outgoing_length)}, {"speed_limit", list_json(g.speed_limit)},
              {"road_grade", list_json(g.road_grade)}, {"phase_count", list_json(g.phase_count)},
              {"green", list_json(g.green)},           {"yellow", list_json(g.yellow)},
              {"red", list_json(g.red)},               {"offset", list_json(g.offset)},
              {"ghost_offset", list_json(g.ghost_offset)}, {"inflow", list_json(g.inflow)},
              {"penetration", list_json(g.penetration)}, {"season", enum_list_json(g.season)},
              {"weather", enum_list_json(g.weather)},  {"hour_type", enum_list_json(g.hour_type)},
              {"fleet_mix", mixes}};
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

void check_grid(const FactorGrid& g) {
  auto nonempty = [](std::size_t n, const char* name) {
    if (n == 0) throw ConfigError(fmt::format("grid factor '{}' is empty", name));
  };
  nonempty(g.approach_count.size(), "approach_count");
  nonempty(g.lane_count.size(), "lane_count");
  nonempty(g.lane_length.size(), "lane_length");
  nonempty(g.outgoing_length.size(), "outgoing_length");
  nonempty(g.speed_limit.size(), "speed_limit");
  nonempty(g.road_grade.size(), "road_grade");
  nonempty(g.phase_count.size(), "phase_count");
  nonempty(g.green.size(), "green");
  nonempty(g.yellow.size(), "yellow");
  nonempty(g.red.size(), "red");
  nonempty(g.offset.size(), "offset");
  nonempty(g.ghost_offset.size(), "ghost_offset");
  nonempty(g.inflow.size(), "inflow");
  nonempty(g.penetration.size(), "penetration");
  nonempty(g.season.size(), "season");
  nonempty(g.weather.size(), "weather");
  nonempty(g.hour_type.size(), "hour_type");
  nonempty(g.fleet_mix.size(), "fleet_mix");
}

/// Factor valuation for one scenario; indices into the grid lists.
struct Valuation {
  int approaches = 1;
  int lanes = 1;
  double lane_length = 400;
  double outgoing_length = 200;
  double speed_limit = 15;
  double grade = 0;
  int phases = 2;
  double green = 25;
  double yellow = 3;
  double red = 40;
  double offset_frac = 0;
  double ghost_offset_frac = 0;
  double inflow = 300;
  double penetration = 1.0;
  Season season = Season::summer;
  Weather weather = Weather::clear;
  HourType hour = HourType::peak;
  const std::vector<FleetShare>* fleet = nullptr;
};

SignalPlan control_plan(int phases, double green, double yellow, double red, double offset_frac) {
  SignalPlan plan;
  if (phases <= 2) {
    plan = SignalPlan::two_phase(green, red, yellow);
  } else {
    plan.phases.assign(static_cast<std::size_t>(phases), Phase{green, yellow, 0.0});
  }
  plan.offset_s = offset_frac * plan.cycle_length();
  return plan;
}

ScenarioSpec build_spec(const Valuation& v, std::uint64_t seed, std::size_t index) {
  ScenarioSpec s;
  s.id = fmt::format("s{:06d}", index);
  const int phases = std::max(2, v.phases);
  s.geometry.phase_count = phases;
  for (int a = 0; a < v.approaches; ++a) {
    s.geometry.incoming.push_back(Approach{v.lanes, v.lane_length, v.speed_limit, v.grade, false});
    s.geometry.outgoing.push_back(Approach{v.lanes, v.outgoing_length, v.speed_limit, v.grade, false});
    auto ghost = default_ghost_plan();
    ghost.offset_s = v.ghost_offset_frac * ghost.cycle_length();
    s.ghost_signals.push_back(ghost);
    s.inflows.push_back(v.inflow);
  }
  s.control_signal = control_plan(phases, v.green, v.yellow, v.red, v.offset_frac);
  s.penetration = v.penetration;
  s.season = v.season;
  s.weather = v.weather;
  s.hour_type = v.hour;
  std::tie(s.temperature, s.humidity) = climate(v.season, v.weather);
  s.fleet_mix = *v.fleet;
  s.seed = hash_combine(seed, index, stream::sampling);
  return s;
}

}  // namespace

std::vector<ScenarioSpec> sample_scenarios(const FactorGrid& g, int count, std::uint64_t seed) {
  check_grid(g);
  if (count < 1) throw ConfigError("count must be at least 1");
  auto rng = make_rng(seed, stream::sampling);
  auto pick = [&rng](const auto& list) -> decltype(auto) {
    std::uniform_int_distribution<std::size_t> d(0, list.size() - 1);
    return list[d(rng)];
  };
  std::vector<ScenarioSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Valuation v;
    v.approaches = pick(g.approach_count);
    v.lanes = pick(g.lane_count);
    v.lane_length = pick(g.lane_length);
    v.outgoing_length = pick(g.outgoing_length);
    v.speed_limit = pick(g.speed_limit);
    v.grade = pick(g.road_grade);
    v.phases = pick(g.phase_count);
    v.green = pick(g.green);
    v.yellow = pick(g.yellow);
    v.red = pick(g.red);
    v.offset_frac = pick(g.offset);
    v.ghost_offset_frac = pick(g.ghost_offset);
    v.inflow = pick(g.inflow);
    v.penetration = pick(g.penetration);
    v.season = pick(g.season);
    v.weather = pick(g.weather);
    v.hour = pick(g.hour_type);
    v.fleet = &pick(g.fleet_mix);
    auto spec = build_spec(v, seed, static_cast<std::size_t>(i));
    validate(spec);
    out.push_back(std::move(spec));
  }
  return out;
}

std::size_t grid_cardinality(const FactorGrid& g) {
  return g.approach_count.size() * g.lane_count.size() * g.lane_length.size() * g.outgoing_length.size() *
         g.speed_limit.size() * g.road_grade.size() * g.phase_count.size() * g.green.size() * g.yellow.size() *
         g.red.size() * g.offset.size() * g.ghost_offset.size() * g.inflow.size() * g.penetration.size() *
         g.season.size() * g.weather.size() * g.hour_type.size() * g.fleet_mix.size();
}

std::vector<ScenarioSpec> enumerate_grid(const FactorGrid& g, std::uint64_t seed) {
  check_grid(g);
  const std::size_t total = grid_cardinality(g);
  std::vector<ScenarioSpec> out;
  out.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t r = n;
    auto take = [&r](const auto& list) -> decltype(auto) {
      const auto& x = list[r % list.size()];
      r /= list.size();
      return x;
    };
    Valuation v;
    v.approaches = take(g.approach_count);
    v.lanes = take(g.lane_count);
    v.lane_length = take(g.lane_length);
    v.outgoing_length = take(g.outgoing_length);
    v.speed_limit = take(g.speed_limit);
    v.grade = take(g.road_grade);
    v.phases = take(g.phase_count);
    v.green = take(g.green);
    v.yellow = take(g.yellow);
    v.red = take(g.red);
    v.offset_frac = take(g.offset);
    v.ghost_offset_frac = take(g.ghost_offset);
    v.inflow = take(g.inflow);
    v.penetration = take(g.penetration);
    v.season = take(g.season);
    v.weather = take(g.weather);
    v.hour = take(g.hour_type);
    v.fleet = &take(g.fleet_mix);
    out.push_back(build_spec(v, seed, n));
  }
  return out;
}

double aadt_to_hourly(double aadt, HourType hour_type) {
  if (!(aadt >= 0)) throw ValidationError("AADT must be non-negative");
  return aadt * (hour_type == HourType::peak ? 0.084 : 0.055);
}

// ---------------------------------------------------------------------------
// Ghost network

SimNetwork build_ghost_network(const ScenarioSpec& spec, const NetworkOptions& options) {
  validate(spec);
  SimNetwork net;
  net.control_signal = spec.control_signal;
  const auto& g = spec.geometry;
  for (std::size_t i = 0; i < g.incoming.size(); ++i) {
    const auto& in = g.incoming[i];
    const auto& out = g.outgoing[std::min(i, g.outgoing.size() - 1)];
    Corridor c;
    c.approach = static_cast<int>(i);
    c.lane_count = in.lane_count;
    c.ghost_length = options.ghost_length;
    c.incoming_length = in.lane_length;
    c.box_length = options.box_length;
    c.outgoing_length = out.lane_length;
    c.speed_limit = in.speed_limit;
    c.road_grade = in.road_grade;
    c.inflow = spec.inflows[i];
    c.control_phase = static_cast<int>(i) % g.phase_count;
    c.ghost_plan = spec.ghost_signals[i];
    net.corridors.push_back(std::move(c));
  }
  return net;
}

}  // namespace ecodrive::scenario
