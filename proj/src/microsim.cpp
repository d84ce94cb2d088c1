#include "ecodrive/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "ecodrive/common.hpp"

namespace ecodrive::sim {

double idm_accel(double v, std::optional<double> gap, double leader_vel, const IdmParams& p, double a_min,
                 bool* collision) {
  const double free_term = std::pow(v / p.v0, p.delta);
  if (!gap) return p.alpha * (1.0 - free_term);
  if (*gap <= 0.0) {
    if (collision) *collision = true;
    return a_min;
  }
  const double dv = v - leader_vel;
  const double s_star = p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.alpha * p.beta)));
  const double ratio = s_star / *gap;
  return p.alpha * (1.0 - free_term - ratio * ratio);
}

// ---------------------------------------------------------------------------

Engine::Engine(const scenario::ScenarioSpec& spec, SimConfig config, std::unique_ptr<EmissionProvider> emissions,
               std::uint64_t seed)
    : spec_(spec),
      config_(std::move(config)),
      network_(scenario::build_ghost_network(spec, config_.network)),
      emissions_(std::move(emissions)),
      seed_(seed) {
  if (!emissions_) throw ConfigError("engine needs an emission provider");
  const auto n = network_.corridors.size();
  lanes_.resize(n);
  for (std::size_t c = 0; c < n; ++c) lanes_[c].resize(static_cast<std::size_t>(network_.corridors[c].lane_count));
  pending_.resize(n);
  next_arrival_.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    arrival_rng_.push_back(make_rng(seed, hash_combine(stream::arrivals, c)));
    const double rate = network_.corridors[c].inflow * config_.inflow_scale / 3600.0;
    next_arrival_[c] = rate > 0 ? std::exponential_distribution<double>(rate)(arrival_rng_[c]) : 1e300;
  }
  log_.dt = config_.dt;
}

Vehicle Engine::make_vehicle(int corridor, double arrival) {
  Vehicle v;
  v.id = next_id_++;
  v.corridor = corridor;
  const double tf = spec_.geometry.turn_fraction;
  const double ui = unit_from_hash(hash_combine(seed_, v.id, stream::intents));
  v.intent = ui < tf ? Intent::left : (ui < 2 * tf ? Intent::right : Intent::straight);
  v.controlled = unit_from_hash(hash_combine(seed_, v.id, stream::control)) < spec_.penetration;
  const double uf = unit_from_hash(hash_combine(seed_, v.id, stream::fleet));
  double acc = 0.0;
  v.key = spec_.fleet_mix.back().key;
  for (const auto& f : spec_.fleet_mix) {
    acc += f.share;
    if (uf < acc) {
      v.key = f.key;
      break;
    }
  }
  const auto& pop = is_heavy(v.key.type) ? config_.heavy_drivers : config_.car_drivers;
  v.driver = calib::sample_driver(pop, hash_combine(seed_, v.id, stream::drivers));
  v.driver.v0 = std::min(v.driver.v0, network_.corridors[static_cast<std::size_t>(corridor)].speed_limit);
  v.length = vehicle_length(v.key.type);
  v.spawn_time = arrival;
  return v;
}

void Engine::schedule_arrivals() {
  const double t_end = time() + config_.dt;
  for (std::size_t c = 0; c < network_.corridors.size(); ++c) {
    const double rate = network_.corridors[c].inflow * config_.inflow_scale / 3600.0;
    if (rate <= 0) continue;
    std::exponential_distribution<double> gap(rate);
    while (next_arrival_[c] < t_end) {
      pending_[c].push_back(Pending{make_vehicle(static_cast<int>(c), next_arrival_[c]), next_arrival_[c]});
      if (metrics_active()) ++m_.arrivals;
      next_arrival_[c] += gap(arrival_rng_[c]);
    }
  }
}

void Engine::insert_pending() {
  for (std::size_t c = 0; c < network_.corridors.size(); ++c) {
    const auto& cor = network_.corridors[c];
    std::vector<bool> used(static_cast<std::size_t>(cor.lane_count), false);
    while (!pending_[c].empty()) {
      Vehicle v = pending_[c].front().vehicle;
      auto entry_gap = [&](int lane) {
        const auto& idx = lanes_[c][static_cast<std::size_t>(lane)];
        if (idx.empty()) return 1e9;
        const auto& last = vehicles_[static_cast<std::size_t>(idx.back())];
        return last.pos - last.length;
      };
      int lane = 0;
      if (v.intent == Intent::left) {
        lane = cor.lane_count - 1;
      } else if (v.intent == Intent::straight) {
        double best = -1e18;
        for (int l = 0; l < cor.lane_count; ++l) {
          if (used[static_cast<std::size_t>(l)]) continue;
          if (const double g = entry_gap(l); g > best) {
            best = g;
            lane = l;
          }
        }
      }
      if (used[static_cast<std::size_t>(lane)]) break;
      const double gap = entry_gap(lane);
      if (gap < v.driver.s0 + 0.5) break;
      const double v_des = std::min(v.driver.v0, cor.speed_limit);
      double v_ins = std::min(v_des, std::max(0.0, (gap - v.driver.s0) / v.driver.T));
      const auto& idx = lanes_[c][static_cast<std::size_t>(lane)];
      if (!idx.empty()) v_ins = std::min(v_ins, vehicles_[static_cast<std::size_t>(idx.back())].vel + 2.0);
      v.lane = lane;
      v.pos = 0.0;
      v.vel = v_ins;
      v.acc = 0.0;
      used[static_cast<std::size_t>(lane)] = true;
      pending_[c].pop_front();
      vehicles_.push_back(v);
      ++m_.spawned;
      rebuild_lanes();
    }
  }
}

void Engine::rebuild_lanes() {
  for (auto& cor : lanes_)
    for (auto& lane : cor) lane.clear();
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    lanes_[static_cast<std::size_t>(v.corridor)][static_cast<std::size_t>(v.lane)].push_back(static_cast<int>(i));
  }
  for (auto& cor : lanes_)
    for (auto& lane : cor)
      std::sort(lane.begin(), lane.end(), [this](int a, int b) {
        const auto& va = vehicles_[static_cast<std::size_t>(a)];
        const auto& vb = vehicles_[static_cast<std::size_t>(b)];
        if (va.pos != vb.pos) return va.pos > vb.pos;
        return va.id < vb.id;
      });
}

const Vehicle* Engine::find(VehicleId id) const {
  for (const auto& v : vehicles_)
    if (v.id == id) return &v;
  return nullptr;
}

const StepOutcome* Engine::outcome(VehicleId id) const {
  auto it = outcomes_.find(id);
  return it == outcomes_.end() ? nullptr : &it->second;
}

int Engine::pending() const {
  int n = 0;
  for (const auto& q : pending_) n += static_cast<int>(q.size());
  return n;
}

Segment Engine::segment(const Vehicle& v) const {
  const auto& c = network_.corridors[static_cast<std::size_t>(v.corridor)];
  if (v.pos < c.ghost_stop()) return Segment::ghost;
  if (v.pos < c.control_stop()) return Segment::incoming;
  if (v.pos < c.box_end()) return Segment::box;
  return Segment::outgoing;
}

bool Engine::in_eco_zone(const Vehicle& v) const { return segment(v) != Segment::ghost; }

std::optional<Engine::SignalAhead> Engine::signal_ahead(const Vehicle& v) const {
  const auto& c = network_.corridors[static_cast<std::size_t>(v.corridor)];
  const double t = time();
  if (v.pos < c.ghost_stop()) return SignalAhead{c.ghost_plan.state(0, t), c.ghost_stop() - v.pos, false};
  if (v.pos < c.control_stop())
    return SignalAhead{network_.control_signal.state(c.control_phase, t), c.control_stop() - v.pos, true};
  return std::nullopt;
}

bool Engine::must_stop(const Vehicle& v, const SignalAhead& s) const {
  const bool committed = s.control ? v.committed_control : v.committed_ghost;
  const double d = std::max(s.distance, 1e-9);
  const double needed = v.vel * v.vel / (2.0 * d);
  switch (s.state) {
    case SignalState::green: return false;
    case SignalState::yellow: return !committed && needed <= config_.yellow_stop_decel;
    case SignalState::red: return !(committed && needed > -config_.a_min);
  }
  return true;
}

const Vehicle* Engine::leader_in_lane(const Vehicle& v, int lane) const {
  const auto& idx = lanes_[static_cast<std::size_t>(v.corridor)][static_cast<std::size_t>(lane)];
  const Vehicle* best = nullptr;
  for (int i : idx) {
    const auto& o = vehicles_[static_cast<std::size_t>(i)];
    if (o.id == v.id) continue;
    if (o.pos > v.pos || (o.pos == v.pos && o.id < v.id)) best = &o;  // front-first order: last match is nearest
    else break;
  }
  return best;
}

const Vehicle* Engine::follower_in_lane(const Vehicle& v, int lane) const {
  const auto& idx = lanes_[static_cast<std::size_t>(v.corridor)][static_cast<std::size_t>(lane)];
  for (int i : idx) {
    const auto& o = vehicles_[static_cast<std::size_t>(i)];
    if (o.id == v.id) continue;
    if (o.pos < v.pos || (o.pos == v.pos && o.id > v.id)) return &o;
  }
  return nullptr;
}

double Engine::stop_line_accel(const Vehicle& v, const IdmParams& p) const {
  double a = 1e9;
  if (auto s = signal_ahead(v); s && must_stop(v, *s)) a = idm_accel(v.vel, std::max(s->distance, 1e-6), 0.0, p, config_.a_min);
  return a;
}

double Engine::human_accel(const Vehicle& v) const {
  double a;
  if (const Vehicle* lead = leader_in_lane(v, v.lane)) {
    a = idm_accel(v.vel, lead->pos - lead->length - v.pos, lead->vel, v.driver, config_.a_min);
  } else {
    a = idm_accel(v.vel, std::nullopt, 0.0, v.driver, config_.a_min);
  }
  a = std::min(a, stop_line_accel(v, v.driver));
  return std::clamp(a, config_.a_min, config_.a_max);
}

double Engine::guard_accel(const Vehicle& v) const {
  IdmParams p = config_.guard;
  p.v0 = network_.corridors[static_cast<std::size_t>(v.corridor)].speed_limit;
  double a;
  if (const Vehicle* lead = leader_in_lane(v, v.lane)) {
    a = idm_accel(v.vel, lead->pos - lead->length - v.pos, lead->vel, p, config_.a_min);
  } else {
    a = idm_accel(v.vel, std::nullopt, 0.0, p, config_.a_min);
  }
  a = std::min(a, stop_line_accel(v, p));
  return std::clamp(a, config_.a_min, config_.a_max);
}

ControlDecision Engine::resolve_control(VehicleId id, double policy_accel) const {
  const Vehicle* v = find(id);
  if (v == nullptr) throw UsageError(fmt::format("vehicle {} is not in the world", id));
  if (auto it = lane_changes_.find(id); it != lane_changes_.end())
    return ControlDecision{ControlKind::lane_change, human_accel(*v), it->second};
  const double a = std::clamp(policy_accel, config_.a_min, config_.a_max);
  return ControlDecision{ControlKind::policy, std::min(a, guard_accel(*v)), std::nullopt};
}

LaneChangeContext Engine::lane_context(const Vehicle& v) const {
  const auto& c = network_.corridors[static_cast<std::size_t>(v.corridor)];
  LaneChangeContext ctx;
  ctx.ego = &v;
  ctx.dist_to_control_stop = c.control_stop() - v.pos;
  ctx.lane_count = c.lane_count;
  ctx.speed_limit = c.speed_limit;
  auto view = [&](int lane) {
    LaneView lv;
    if (lane < 0 || lane >= c.lane_count) return lv;
    lv.exists = true;
    lv.leader = leader_in_lane(v, lane);
    lv.follower = follower_in_lane(v, lane);
    lv.lane_speed = c.speed_limit;
    if (lv.leader && lv.leader->pos - v.pos <= config_.tactical_lookahead) lv.lane_speed = std::min(lv.lane_speed, lv.leader->vel);
    return lv;
  };
  ctx.current = view(v.lane);
  ctx.left = view(v.lane + 1);
  ctx.right = view(v.lane - 1);
  return ctx;
}

void Engine::begin_step() {
  lane_changes_.clear();
  outcomes_.clear();
  schedule_arrivals();
  rebuild_lanes();
  insert_pending();

  const double t = time();
  for (auto& v : vehicles_) {
    const auto& c = network_.corridors[static_cast<std::size_t>(v.corridor)];
    const double d = c.control_stop() - v.pos;
    v.turn_signal = 0;
    if (v.intent != Intent::straight && d > 0 && d <= config_.strategic_lookahead)
      v.turn_signal = v.intent == Intent::left ? 1 : -1;
  }

  // Lane changes: decide on a snapshot, apply front to back with re-validation.
  std::vector<std::pair<int, LaneChange>> decisions;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    const auto& c = network_.corridors[static_cast<std::size_t>(v.corridor)];
    if (c.lane_count < 2 || v.pos >= c.control_stop()) continue;
    if (t - v.last_lane_change < config_.lane_change_cooldown) continue;
    if (auto lc = lane_change_decision(lane_context(v), config_)) decisions.emplace_back(static_cast<int>(i), *lc);
  }
  std::sort(decisions.begin(), decisions.end(), [this](const auto& a, const auto& b) {
    const auto& va = vehicles_[static_cast<std::size_t>(a.first)];
    const auto& vb = vehicles_[static_cast<std::size_t>(b.first)];
    if (va.pos != vb.pos) return va.pos > vb.pos;
    return va.id < vb.id;
  });
  for (const auto& [i, lc] : decisions) {
    auto& v = vehicles_[static_cast<std::size_t>(i)];
    auto ctx = lane_context(v);
    const LaneView& target = lc.target_lane > v.lane ? ctx.left : ctx.right;
    if (!target.exists) continue;
    if (target.leader && target.leader->pos - target.leader->length - v.pos < config_.min_lane_change_gap) continue;
    if (target.follower) {
      const auto* f = target.follower;
      const double gap = v.pos - v.length - f->pos;
      if (gap < config_.min_lane_change_gap) continue;
      if (idm_accel(f->vel, gap, v.vel, f->driver, config_.a_min) < -f->driver.beta) continue;
    }
    v.turn_signal = lc.target_lane > v.lane ? 1 : -1;
    v.lane = lc.target_lane;
    v.last_lane_change = t;
    lane_changes_[v.id] = lc;
    if (metrics_active()) ++m_.lane_changes;
    rebuild_lanes();
  }

  // Yellow-onset commitments: vehicles that cannot stop comfortably proceed.
  for (auto& v : vehicles_) {
    auto s = signal_ahead(v);
    if (!s || s->state != SignalState::yellow) continue;
    const double needed = v.vel * v.vel / (2.0 * std::max(s->distance, 1e-9));
    if (needed > config_.yellow_stop_decel) (s->control ? v.committed_control : v.committed_ghost) = true;
  }
}

std::vector<VehicleId> Engine::policy_vehicles() const {
  std::vector<VehicleId> ids;
  for (const auto& v : vehicles_)
    if (v.controlled && in_eco_zone(v) && !lane_changes_.count(v.id)) ids.push_back(v.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Engine::step(const Controller& controller) {
  begin_step();
  if (!controller.overrides()) {
    finish_step({}, {});
    return;
  }
  const auto ids = policy_vehicles();
  std::vector<double> accel;
  if (!ids.empty()) controller.act(*this, ids, accel);
  if (accel.size() != ids.size()) throw UsageError("controller returned the wrong number of actions");
  finish_step(ids, accel);
}

void Engine::finish_step(std::span<const VehicleId> ids, std::span<const double> accel) {
  if (ids.size() != accel.size()) throw UsageError("ids and actions differ in length");
  std::unordered_map<VehicleId, double> actions;
  for (std::size_t i = 0; i < ids.size(); ++i) actions[ids[i]] = accel[i];

  const double dt = config_.dt;
  const double t = time();
  const bool active = metrics_active();

  // Accelerations from the current snapshot.
  std::vector<double> acc(vehicles_.size());
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    auto it = actions.find(v.id);
    if (it != actions.end()) {
      if (!v.controlled || !in_eco_zone(v)) throw UsageError(fmt::format("action for vehicle {} which is not under policy control", v.id));
      const double wanted = std::clamp(it->second, config_.a_min, config_.a_max);
      const auto d = resolve_control(v.id, it->second);
      acc[i] = d.accel;
      if (d.kind == ControlKind::policy && d.accel < wanted && active) ++m_.guard_interventions;
    } else {
      acc[i] = human_accel(v);
    }
  }

  std::vector<VehicleId> exited;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    auto& v = vehicles_[i];
    const auto& c = network_.corridors[static_cast<std::size_t>(v.corridor)];
    const auto ahead = signal_ahead(v);
    const bool stop_required = ahead && must_stop(v, *ahead);
    const double old_pos = v.pos;
    const double old_vel = v.vel;
    double new_vel = std::clamp(old_vel + acc[i] * dt, 0.0, c.speed_limit);
    double new_pos = old_pos + new_vel * dt;
    if (ahead) {
      const double line = old_pos + ahead->distance;
      if (stop_required && new_pos >= line) {
        // Hard red-light guard.
        new_pos = std::max(old_pos, line - 1e-3);
        new_vel = 0.0;
        if (active) ++m_.guard_interventions;
      } else if (new_pos >= line && ahead->state == SignalState::red && active) {
        ++m_.red_crossings;
      }
      if (new_pos >= line) (ahead->control ? v.committed_control : v.committed_ghost) = false;
    }
    v.acc = (new_vel - old_vel) / dt;
    v.vel = new_vel;
    v.pos = new_pos;

    double grams = 0.0;
    if (old_pos >= c.ghost_stop()) {
      grams = emissions_->grams(v.key, EmissionQuery{new_vel, v.acc, c.road_grade, spec_.temperature, spec_.humidity});
      if (active) m_.emissions_g += grams;
    }
    v.last_grams = grams;
    if (active && old_pos < c.control_stop() && new_pos >= c.control_stop()) ++m_.throughput;
    const bool gone = new_pos >= c.end();
    if (actions.count(v.id)) outcomes_[v.id] = StepOutcome{new_vel, grams, gone};
    if (gone) {
      exited.push_back(v.id);
      if (active) ++m_.exited;
    }
  }
  if (!exited.empty())
    std::erase_if(vehicles_, [&](const Vehicle& v) { return std::find(exited.begin(), exited.end(), v.id) != exited.end(); });
  rebuild_lanes();

  // Collision check: every follower must keep a positive gap.
  for (auto& cor : lanes_) {
    for (auto& lane : cor) {
      for (std::size_t k = 1; k < lane.size(); ++k) {
        auto& lead = vehicles_[static_cast<std::size_t>(lane[k - 1])];
        auto& fol = vehicles_[static_cast<std::size_t>(lane[k])];
        const double gap = lead.pos - lead.length - fol.pos;
        if (gap > 0) continue;
        faults_.push_back(Fault{t + dt, fol.id, lead.id, gap});
        ++m_.collisions;
        if (config_.fail_on_collision)
          throw SimulationFault(fmt::format("collision at t={:.1f}: vehicle {} behind {} with gap {:.3f} m", t + dt,
                                            fol.id, lead.id, gap));
        fol.pos = lead.pos - lead.length - 1e-3;
        fol.vel = std::min(fol.vel, lead.vel);
      }
    }
  }

  if (active) {
    for (std::size_t ci = 0; ci < network_.corridors.size(); ++ci) {
      const auto& c = network_.corridors[ci];
      double worst = 0.0;
      for (const auto& lane : lanes_[ci]) {
        double q = 0.0;
        for (int idx : lane) {
          const auto& v = vehicles_[static_cast<std::size_t>(idx)];
          if (v.pos >= c.ghost_stop() && v.pos < c.control_stop() && v.vel < config_.queue_speed) q += v.length + 2.0;
        }
        worst = std::max(worst, q);
      }
      queue_ratio_sum_ += worst / c.incoming_length;
      ++queue_samples_;
    }
    for (const auto& v : vehicles_) {
      if (v.vel >= config_.queue_speed) continue;
      const auto seg = segment(v);
      if (seg == Segment::ghost) ghost_wait_sum_ += dt;
      else if (seg == Segment::incoming) control_wait_sum_ += dt;
    }
    ghost_wait_sum_ += dt * pending();
  }

  ++step_;
  if (active) ++m_.steps;

  if (config_.log_trajectories) {
    std::vector<const Vehicle*> order;
    for (const auto& v : vehicles_) order.push_back(&v);
    std::sort(order.begin(), order.end(), [](const Vehicle* a, const Vehicle* b) { return a->id < b->id; });
    for (const auto* v : order) {
      char sig = '-';
      if (auto s = signal_ahead(*v)) sig = s->state == SignalState::green ? 'G' : (s->state == SignalState::yellow ? 'Y' : 'R');
      log_.records.push_back(LogRecord{time(), v->id, v->corridor * 10 + v->lane, v->pos, v->vel, v->acc, v->controlled, sig});
    }
    log_.unspawned.push_back(pending());
  }
}

EpisodeMetrics Engine::metrics() const {
  EpisodeMetrics m = m_;
  m.queue_ratio = queue_samples_ ? queue_ratio_sum_ / static_cast<double>(queue_samples_) : 0.0;
  m.waiting_time_s = m.arrivals > 0 ? ghost_wait_sum_ / m.arrivals : 0.0;
  m.control_wait_s = m.throughput > 0 ? control_wait_sum_ / m.throughput : 0.0;
  m.pending_end = pending();
  m.duration_s = m.steps * config_.dt;
  return m;
}

// ---------------------------------------------------------------------------

std::string TrajectoryLog::to_csv() const {
  std::string out = "t,veh,lane,pos,vel,acc,ctrl,signal\n";
  out.reserve(records.size() * 48);
  for (const auto& r : records)
    out += fmt::format("{:.1f},{},{},{:.6f},{:.6f},{:.6f},{},{}\n", r.t, r.veh, r.lane, r.pos, r.vel, r.acc,
                       r.ctrl ? 1 : 0, r.signal);
  return out;
}

TrajectoryLog TrajectoryLog::from_csv(const std::string& text) {
  TrajectoryLog log;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,veh,lane,pos,vel,acc,ctrl,signal", 0) != 0)
    throw DataError("trajectory log lacks the expected header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[8];
    for (int k = 0; k < 8; ++k)
      if (!std::getline(ls, f[k], ',')) throw DataError(fmt::format("trajectory log line {} has too few fields", lineno));
    try {
      log.records.push_back(LogRecord{std::stod(f[0]), std::stoull(f[1]), std::stoi(f[2]), std::stod(f[3]), std::stod(f[4]),
                                      std::stod(f[5]), f[6] == "1", f[7].empty() ? '-' : f[7][0]});
    } catch (const std::exception&) {
      throw DataError(fmt::format("trajectory log line {} is malformed", lineno));
    }
  }
  return log;
}

std::string metrics_to_text(const EpisodeMetrics& m) {
  nlohmann::json j{{"schema", kSchemaVersion},
                   {"throughput", m.throughput},
                   {"emissions_g", m.emissions_g},
                   {"queue_ratio", m.queue_ratio},
                   {"waiting_time_s", m.waiting_time_s},
                   {"control_wait_s", m.control_wait_s},
                   {"spawned", m.spawned},
                   {"exited", m.exited},
                   {"arrivals", m.arrivals},
                   {"pending_end", m.pending_end},
                   {"collisions", m.collisions},
                   {"guard_interventions", m.guard_interventions},
                   {"red_crossings", m.red_crossings},
                   {"lane_changes", m.lane_changes},
                   {"steps", m.steps},
                   {"duration_s", m.duration_s}};
  return j.dump(2) + "\n";
}

EpisodeResult run_episode(const scenario::ScenarioSpec& spec, const Controller& controller, int horizon,
                          const SimConfig& config, const EmissionProvider& emissions, std::uint64_t seed) {
  if (horizon < 0) throw UsageError("horizon must be non-negative");
  Engine engine(spec, config, emissions.clone(), seed);
  const int total = config.warmup_steps + horizon;
  for (int k = 0; k < total; ++k) engine.step(controller);
  return EpisodeResult{engine.metrics(), engine.log()};
}

std::vector<EpisodeResult> run_episodes(const scenario::ScenarioSpec& spec, const Controller& controller, int horizon,
                                        const SimConfig& config, const EmissionProvider& emissions,
                                        std::span<const std::uint64_t> seeds) {
  std::vector<EpisodeResult> out(seeds.size());
  std::vector<std::string> errors(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seeds.size()); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = run_episode(spec, controller, horizon, config, emissions, seeds[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw SimulationFault(e);
  return out;
}

std::vector<EpisodeResult> run_episodes_serial(const scenario::ScenarioSpec& spec, const Controller& controller,
                                               int horizon, const SimConfig& config, const EmissionProvider& emissions,
                                               std::span<const std::uint64_t> seeds) {
  std::vector<EpisodeResult> out;
  out.reserve(seeds.size());
  for (auto s : seeds) out.push_back(run_episode(spec, controller, horizon, config, emissions, s));
  return out;
}

}  // namespace ecodrive::sim
