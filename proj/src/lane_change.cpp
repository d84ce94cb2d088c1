#include <algorithm>

#include "ecodrive/microsim.hpp"

namespace ecodrive::sim {

namespace {

bool gap_acceptable(const Vehicle& ego, const LaneView& lane, const SimConfig& cfg) {
  if (!lane.exists) return false;
  if (lane.leader && lane.leader->pos - lane.leader->length - ego.pos < cfg.min_lane_change_gap) return false;
  if (lane.follower) {
    const Vehicle& f = *lane.follower;
    const double gap = ego.pos - ego.length - f.pos;
    if (gap < cfg.min_lane_change_gap) return false;
    // The new follower must not need to brake harder than its comfortable deceleration.
    if (idm_accel(f.vel, gap, ego.vel, f.driver, cfg.a_min) < -f.driver.beta) return false;
  }
  return true;
}

int target_lane_for(Intent intent, int lane_count, int current) {
  switch (intent) {
    case Intent::left: return lane_count - 1;
    case Intent::right: return 0;
    case Intent::straight: return current;
  }
  return current;
}

}  // namespace

std::optional<LaneChange> lane_change_decision(const LaneChangeContext& ctx, const SimConfig& cfg) {
  if (ctx.ego == nullptr || ctx.lane_count < 2) return std::nullopt;
  if (!ctx.left.exists && !ctx.right.exists) return std::nullopt;
  const Vehicle& ego = *ctx.ego;
  const double d = ctx.dist_to_control_stop;
  if (d <= 0) return std::nullopt;

  // Strategic: reach the lane the route needs.
  const int want = target_lane_for(ego.intent, ctx.lane_count, ego.lane);
  if (want != ego.lane && d <= cfg.strategic_lookahead) {
    const bool go_left = want > ego.lane;
    const LaneView& side = go_left ? ctx.left : ctx.right;
    if (gap_acceptable(ego, side, cfg)) return LaneChange{ego.lane + (go_left ? 1 : -1), LaneChangeKind::strategic};
    return std::nullopt;
  }
  if (want != ego.lane) return std::nullopt;

  // Tactical: a faster adjacent lane, only for through traffic away from the stop line.
  if (ego.intent == Intent::straight && d > 30.0) {
    const double here = ctx.current.lane_speed;
    const LaneView* best = nullptr;
    double best_speed = here + cfg.tactical_gain;
    for (const LaneView* side : {&ctx.left, &ctx.right}) {
      if (!side->exists || side->lane_speed <= best_speed) continue;
      if (!gap_acceptable(ego, *side, cfg)) continue;
      best = side;
      best_speed = side->lane_speed;
    }
    if (best) return LaneChange{ego.lane + (best == &ctx.left ? 1 : -1), LaneChangeKind::tactical};
  }

  // Regulatory keep-right when the right lane flows freely.
  if (ego.intent == Intent::straight && ctx.right.exists && d > 50.0 && ctx.right.lane_speed >= ctx.speed_limit &&
      ctx.current.lane_speed >= ctx.speed_limit && gap_acceptable(ego, ctx.right, cfg))
    return LaneChange{ego.lane - 1, LaneChangeKind::regulatory};
  return std::nullopt;
}

}  // namespace ecodrive::sim
