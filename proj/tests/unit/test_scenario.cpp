#include <gtest/gtest.h>

#include <json.hpp>

#include "ecodrive/common.hpp"
#include "ecodrive/scenario.hpp"
#include "fixtures.hpp"

using namespace ecodrive;
using namespace ecodrive::scenario;

TEST(SignalPlan, TwoPhaseStates) {
  const auto p = SignalPlan::two_phase(25, 40);
  EXPECT_DOUBLE_EQ(p.cycle_length(), 65.0 + 3.0);
  EXPECT_EQ(p.state(0, 0.0), SignalState::green);
  EXPECT_EQ(p.state(0, 24.9), SignalState::green);
  EXPECT_EQ(p.state(0, 26.0), SignalState::yellow);
  EXPECT_EQ(p.state(0, 30.0), SignalState::red);
  EXPECT_EQ(p.state(1, 30.0), SignalState::green);
  EXPECT_DOUBLE_EQ(p.red_s(0), 40.0);
}

TEST(SignalPlan, TimeToGreen) {
  const auto p = SignalPlan::two_phase(25, 40);
  const auto g = p.time_to_green(0, 30.0);
  EXPECT_DOUBLE_EQ(g[0], 38.0);
  EXPECT_DOUBLE_EQ(g[1], 38.0 + 68.0);
  EXPECT_DOUBLE_EQ(g[2], 38.0 + 136.0);
  EXPECT_DOUBLE_EQ(p.time_to_green(0, 5.0)[0], 0.0);
  EXPECT_NEAR(p.time_left(0, 5.0), 20.0, 1e-12);
}

TEST(SignalPlan, OffsetShiftsTheCycle) {
  auto p = SignalPlan::two_phase(25, 40);
  p.offset_s = 10.0;
  for (double t : {0.0, 7.5, 33.0, 51.0}) EXPECT_EQ(p.state(0, t + 10.0), SignalPlan::two_phase(25, 40).state(0, t));
}

TEST(Validate, AcceptsProxyAndRejectsBrokenSpecs) {
  EXPECT_NO_THROW(validate(fixture::proxy_spec()));
  auto s = fixture::proxy_spec();
  s.penetration = 0.0;
  EXPECT_THROW(validate(s), ValidationError);
  s = fixture::proxy_spec();
  s.geometry.phase_count = 4;
  EXPECT_THROW(validate(s), ValidationError);
  s = fixture::proxy_spec();
  s.fleet_mix[0].share = 0.5;
  EXPECT_THROW(validate(s), ValidationError);
  s = fixture::proxy_spec();
  s.inflows.clear();
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Spec, SerializeRoundTrip) {
  auto s = fixture::proxy_spec(0.5);
  s.fleet_mix = {FleetShare{EmissionKey{VehicleType::passenger_car, Fuel::gasoline, 3}, 0.7},
                 FleetShare{EmissionKey{VehicleType::bus, Fuel::diesel, 9}, 0.3}};
  EXPECT_EQ(parse_spec(serialize(s)), s);
}

TEST(Spec, RejectsUnknownSchema) {
  auto j = to_json(fixture::proxy_spec());
  j["schema"] = 99;
  EXPECT_THROW(parse_spec(j.dump()), Error);
}

TEST(Grid, SamplingIsPureInSeed) {
  FactorGrid g;
  const auto a = sample_scenarios(g, 20, 3);
  const auto b = sample_scenarios(g, 20, 3);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(serialize(a[i]), serialize(b[i]));
  const auto c = sample_scenarios(g, 20, 4);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= serialize(a[i]) != serialize(c[i]);
  EXPECT_TRUE(differs);
  for (const auto& s : a) EXPECT_NO_THROW(validate(s));
}

TEST(Grid, EnumerationMatchesCardinality) {
  FactorGrid g;
  g.lane_count = {1, 2};
  g.lane_length = {100, 400};
  g.speed_limit = {15};
  g.green = {20};
  g.red = {40};
  g.inflow = {300};
  g.penetration = {1.0};
  g.phase_count = {2, 4};
  EXPECT_EQ(grid_cardinality(g), 8u);
  const auto all = enumerate_grid(g, 1);
  EXPECT_EQ(all.size(), 8u);
  for (const auto& s : all) EXPECT_NO_THROW(validate(s));
}

TEST(Grid, EmptyFactorIsAConfigError) {
  FactorGrid g;
  g.green.clear();
  EXPECT_THROW(sample_scenarios(g, 1, 1), ConfigError);
}

TEST(Demand, AadtConversion) {
  EXPECT_NEAR(aadt_to_hourly(10000, HourType::peak), 840.0, 1e-9);
  EXPECT_NEAR(aadt_to_hourly(10000, HourType::offpeak), 550.0, 1e-9);
}

TEST(Network, GhostCorridorLayout) {
  const auto net = build_ghost_network(fixture::proxy_spec());
  ASSERT_EQ(net.corridors.size(), 1u);
  const auto& c = net.corridors[0];
  EXPECT_DOUBLE_EQ(c.control_stop() - c.ghost_stop(), 400.0);
  EXPECT_DOUBLE_EQ(c.end() - c.box_end(), 200.0);
  EXPECT_EQ(c.control_phase, 0);
}
