#pragma once

#include "ecodrive/scenario.hpp"

namespace ecodrive::fixture {

/// Single-lane approach: 400 m, 15 m/s, 300 veh/h, green 25 s / red 40 s.
inline scenario::ScenarioSpec proxy_spec(double penetration = 1.0) {
  scenario::ScenarioSpec s;
  s.id = "proxy";
  s.geometry.phase_count = 2;
  s.geometry.incoming.push_back(scenario::Approach{1, 400.0, 15.0, 0.0, false});
  s.geometry.outgoing.push_back(scenario::Approach{1, 200.0, 15.0, 0.0, false});
  s.control_signal = scenario::SignalPlan::two_phase(25.0, 40.0);
  s.ghost_signals.push_back(scenario::default_ghost_plan());
  s.inflows.push_back(300.0);
  s.penetration = penetration;
  s.seed = 7;
  return s;
}

}  // namespace ecodrive::fixture
