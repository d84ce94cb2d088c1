#include "ecodrive/policy.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "ecodrive/common.hpp"

namespace ecodrive::policy {

using sim::Segment;
using sim::Vehicle;

namespace {

void put_neighbor(double* out, const Vehicle& ego, const Vehicle* other, bool ahead, const ObservationConfig& cfg) {
  double gap = cfg.sensing_range;
  double speed = ego.vel;
  int turn = 0;
  if (other) {
    const double g = ahead ? other->pos - other->length - ego.pos : ego.pos - ego.length - other->pos;
    if (g <= cfg.sensing_range) {
      gap = g;
      speed = other->vel;
      turn = other->turn_signal;
    }
  }
  out[0] = speed / cfg.speed_scale;
  out[1] = gap / cfg.sensing_range;
  out[2] = turn > 0 ? 1.0 : 0.0;
  out[3] = turn < 0 ? 1.0 : 0.0;
  out[4] = turn == 0 ? 1.0 : 0.0;
}

}  // namespace

Observation encode_observation(const sim::Engine& engine, VehicleId id, const ObservationConfig& cfg) {
  const Vehicle* ego = engine.find(id);
  if (ego == nullptr) throw UsageError(fmt::format("vehicle {} is not in the world", id));
  const auto& cor = engine.network().corridors.at(static_cast<std::size_t>(ego->corridor));
  const auto& plan = engine.network().control_signal;
  const double t = engine.time();
  Observation o{};
  double* p = o.data();

  // Ego block.
  p[0] = ego->vel / cfg.speed_scale;
  const Segment seg = engine.segment(*ego);
  const double dist = cor.control_stop() - ego->pos;
  const bool signal_known = seg == Segment::incoming && dist <= cfg.signal_range;
  if (signal_known) {
    p[1] = dist / cfg.distance_scale;
    const auto state = plan.state(cor.control_phase, t);
    p[2] = state == scenario::SignalState::red ? 1.0 : 0.0;
    p[3] = state == scenario::SignalState::green ? 1.0 : 0.0;
    p[4] = state == scenario::SignalState::yellow ? 1.0 : 0.0;
    p[5] = plan.time_left(cor.control_phase, t) / cfg.time_scale;
    const auto ttg = plan.time_to_green(cor.control_phase, t);
    p[6] = ttg[1] / cfg.time_scale;
    p[7] = ttg[2] / cfg.time_scale;
  } else {
    p[1] = cfg.signal_range / cfg.distance_scale;
  }
  p[8] = seg == Segment::incoming || seg == Segment::ghost ? 1.0 : 0.0;
  p[9] = seg == Segment::box ? 1.0 : 0.0;
  p[10] = seg == Segment::outgoing ? 1.0 : 0.0;
  p[11] = ego->lane / cfg.lane_scale;
  p[12] = ego->intent == Intent::left ? 1.0 : 0.0;
  p[13] = ego->intent == Intent::straight ? 1.0 : 0.0;
  p[14] = ego->intent == Intent::right ? 1.0 : 0.0;

  // Neighbors: leader then follower in the same, left, and right lanes.
  double* nb = p + kEgoFeatures;
  const int lanes[3] = {ego->lane, ego->lane + 1, ego->lane - 1};
  for (int k = 0; k < 3; ++k) {
    const bool exists = lanes[k] >= 0 && lanes[k] < cor.lane_count;
    const Vehicle* lead = exists ? engine.leader_in_lane(*ego, lanes[k]) : nullptr;
    const Vehicle* follow = exists ? engine.follower_in_lane(*ego, lanes[k]) : nullptr;
    put_neighbor(nb + (2 * k) * kNeighborFeatures, *ego, lead, true, cfg);
    put_neighbor(nb + (2 * k + 1) * kNeighborFeatures, *ego, follow, false, cfg);
  }

  // Context block.
  double* ctx = p + kEgoFeatures + kNeighborSlots * kNeighborFeatures;
  ctx[0] = cor.lane_count / cfg.lane_scale;
  ctx[1] = cor.incoming_length / cfg.length_scale;
  ctx[2] = plan.green_s(cor.control_phase) / cfg.phase_scale;
  ctx[3] = plan.red_s(cor.control_phase) / cfg.phase_scale;
  ctx[4] = cor.speed_limit / cfg.speed_scale;
  ctx[5] = engine.spec().penetration;
  return o;
}

RewardParams reward_params(Variant v) {
  return v == Variant::pi1 ? RewardParams{35.0, 3.0, 1.0} : RewardParams{10.0, 3.0, 1.0};
}

std::string_view to_string(Variant v) { return v == Variant::pi1 ? "pi1" : "pi2"; }

Variant parse_variant(std::string_view s) {
  if (s == "pi1") return Variant::pi1;
  if (s == "pi2") return Variant::pi2;
  throw UsageError(fmt::format("unknown policy variant '{}' (expected pi1 or pi2)", s));
}

double reward(double v, double grams, const RewardParams& p) {
  return v - (v < p.tau_stop ? p.alpha : 0.0) - p.beta * grams;
}

sim::ControlDecision hierarchical_control(const sim::Engine& engine, VehicleId id, double policy_accel) {
  return engine.resolve_control(id, policy_accel);
}

double baseline_controller(const sim::Engine& engine, VehicleId id) {
  const Vehicle* v = engine.find(id);
  if (v == nullptr) throw UsageError(fmt::format("vehicle {} is not in the world", id));
  return engine.human_accel(*v);
}

PolicyController::PolicyController(std::shared_ptr<const nn::Mlp> actor, ObservationConfig obs)
    : actor_(std::move(actor)), obs_(obs) {
  if (!actor_ || actor_->inputs() != kObservationSize || actor_->outputs() != 1)
    throw ConfigError(fmt::format("actor must map {} observations to 1 action", kObservationSize));
}

void PolicyController::act(const sim::Engine& engine, std::span<const VehicleId> ids, std::vector<double>& accel) const {
  std::vector<double> x;
  x.reserve(ids.size() * kObservationSize);
  for (auto id : ids) {
    const auto o = encode_observation(engine, id, obs_);
    x.insert(x.end(), o.begin(), o.end());
  }
  accel = actor_->predict(x, static_cast<int>(ids.size()), nn::Exec::serial);
}

}  // namespace ecodrive::policy
