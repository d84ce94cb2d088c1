#include "ecodrive/safety.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/core.h>

namespace ecodrive::safety {

namespace {

struct Sample {
  double t, pos, vel, acc;
  int lane;
};

using Tracks = std::unordered_map<VehicleId, std::vector<Sample>>;

Tracks index_tracks(const TrajectoryLog& log) {
  Tracks tracks;
  for (const auto& r : log.records) tracks[r.veh].push_back(Sample{r.t, r.pos, r.vel, r.acc, r.lane});
  for (auto& [id, v] : tracks)
    std::stable_sort(v.begin(), v.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
  return tracks;
}

// First time the track reaches `x` (positions are nondecreasing). nullopt if never, or already past at the first sample.
std::optional<double> first_reach(const std::vector<Sample>& track, double x) {
  if (track.empty() || track.front().pos >= x) return std::nullopt;
  auto it = std::lower_bound(track.begin(), track.end(), x, [](const Sample& s, double v) { return s.pos < v; });
  if (it == track.end()) return std::nullopt;
  return it->t;
}

std::optional<double> pet_for_cell(const Tracks& tracks, VehicleId leader, VehicleId follower, long cell,
                                   const SafetyConfig& cfg) {
  const auto l = tracks.find(leader), f = tracks.find(follower);
  if (l == tracks.end() || f == tracks.end()) return std::nullopt;
  const auto vacate = first_reach(l->second, static_cast<double>(cell + 1) * cfg.cell_size + cfg.vehicle_length);
  const auto enter = first_reach(f->second, static_cast<double>(cell) * cfg.cell_size);
  if (!vacate || !enter) return std::nullopt;
  return std::max(0.0, *enter - *vacate);
}

}  // namespace

std::optional<double> time_to_collision(double gap, double v_follower, double v_leader) {
  const double closing = v_follower - v_leader;
  if (closing <= 0.0) return std::nullopt;
  return std::max(0.0, gap) / closing;
}

std::optional<double> post_encroachment(const TrajectoryLog& log, VehicleId leader, VehicleId follower, long cell,
                                        const SafetyConfig& cfg) {
  return pet_for_cell(index_tracks(log), leader, follower, cell, cfg);
}

std::vector<ConflictEvent> detect_conflicts(const TrajectoryLog& log, const SafetyConfig& cfg) {
  if (log.records.empty()) return {};
  const Tracks tracks = index_tracks(log);
  double t_first = log.records.front().t, t_last = t_first;
  for (const auto& r : log.records) {
    t_first = std::min(t_first, r.t);
    t_last = std::max(t_last, r.t);
  }

  // Records grouped by step, then by lane.
  std::map<double, std::vector<const sim::LogRecord*>> steps;
  for (const auto& r : log.records) steps[r.t].push_back(&r);

  struct Open {
    ConflictEvent ev;
    double last_t = 0.0;
    double ttc_at_min = 0.0;
    bool braked = false;
  };
  std::map<std::pair<VehicleId, VehicleId>, Open> open;
  std::vector<ConflictEvent> done;
  const double tol = 1e-9;

  auto close = [&](Open& o) {
    auto& ev = o.ev;
    // PET: follower cell entries inside the window, else the first one after it.
    const auto& ft = tracks.at(ev.follower);
    auto at_t0 = std::lower_bound(ft.begin(), ft.end(), ev.t0, [](const Sample& s, double t) { return s.t < t; });
    const double start_pos = at_t0 == ft.end() ? ft.back().pos : at_t0->pos;
    const long first_cell = static_cast<long>(std::floor(start_pos / cfg.cell_size)) + 1;
    std::optional<double> pet;
    for (long c = first_cell;; ++c) {
      const auto enter = first_reach(ft, static_cast<double>(c) * cfg.cell_size);
      if (!enter) break;
      const auto p = pet_for_cell(tracks, ev.leader, ev.follower, c, cfg);
      if (p && (!pet || *p < *pet)) pet = p;
      if (*enter > ev.t1 + tol && pet) break;
      if (*enter > ev.t1 + cfg.pet_threshold + tol) break;
    }
    ev.pet = pet;
    ev.partial = ev.t0 <= t_first + tol || ev.t1 >= t_last - tol || !pet;
    if (!pet || *pet < cfg.pet_threshold) done.push_back(ev);
  };

  for (const auto& [t, recs] : steps) {
    std::map<int, std::vector<const sim::LogRecord*>> lanes;
    for (const auto* r : recs) lanes[r->lane].push_back(r);
    for (auto& [lane, v] : lanes) {
      std::sort(v.begin(), v.end(), [](const auto* a, const auto* b) { return a->pos > b->pos; });
      for (std::size_t i = 1; i < v.size(); ++i) {
        const auto* lead = v[i - 1];
        const auto* fol = v[i];
        const double gap = lead->pos - cfg.vehicle_length - fol->pos;
        const auto ttc = time_to_collision(gap, fol->vel, lead->vel);
        if (!ttc || *ttc >= cfg.ttc_threshold) continue;
        const auto key = std::make_pair(lead->veh, fol->veh);
        auto it = open.find(key);
        if (it != open.end() && t - it->second.last_t > log.dt + tol) {
          close(it->second);
          open.erase(it);
          it = open.end();
        }
        if (it == open.end()) {
          Open o;
          o.ev.leader = lead->veh;
          o.ev.follower = fol->veh;
          o.ev.lane = lane;
          o.ev.t0 = t;
          o.ev.min_ttc = *ttc;
          o.ev.delta_s = std::abs(lead->vel - fol->vel);
          it = open.emplace(key, o).first;
        }
        auto& o = it->second;
        o.last_t = t;
        o.ev.t1 = t;
        if (*ttc < o.ev.min_ttc) {
          o.ev.min_ttc = *ttc;
          o.ev.delta_s = std::abs(lead->vel - fol->vel);
        }
        o.ev.max_s = std::max({o.ev.max_s, lead->vel, fol->vel});
        if (!o.braked && fol->acc < 0.0) {
          o.braked = true;
          o.ev.dr = -fol->acc;
        }
      }
    }
    // Episodes not continued at this step are finished.
    for (auto it = open.begin(); it != open.end();) {
      if (it->second.last_t < t - tol) {
        close(it->second);
        it = open.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& [k, o] : open) close(o);
  std::sort(done.begin(), done.end(), [](const ConflictEvent& a, const ConflictEvent& b) {
    return std::tie(a.t0, a.leader, a.follower) < std::tie(b.t0, b.leader, b.follower);
  });
  return done;
}

std::string events_to_csv(const std::vector<ConflictEvent>& events) {
  std::string out = "pair,t0,t1,ttc,pet,maxs,deltas,dr\n";
  for (const auto& e : events)
    out += fmt::format("{}-{},{:.3f},{:.3f},{:.6g},{},{:.6g},{:.6g},{:.6g}\n", e.leader, e.follower, e.t0, e.t1,
                       e.min_ttc, e.pet ? fmt::format("{:.6g}", *e.pet) : std::string(), e.max_s, e.delta_s, e.dr);
  return out;
}

MeasureMeans measure_means(const std::vector<ConflictEvent>& events) {
  MeasureMeans m;
  m.events = events.size();
  std::array<double, 5> sum{};
  std::array<std::size_t, 5> n{};
  for (const auto& e : events) {
    const std::array<std::optional<double>, 5> vals{e.min_ttc, e.pet, e.max_s, e.delta_s, e.dr};
    for (std::size_t k = 0; k < 5; ++k)
      if (vals[k]) {
        sum[k] += *vals[k];
        ++n[k];
      }
  }
  for (std::size_t k = 0; k < 5; ++k)
    if (n[k]) m.mean[k] = sum[k] / static_cast<double>(n[k]);
  return m;
}

NormalizedReport normalized_report(const std::vector<ConflictEvent>& policy, const std::vector<ConflictEvent>& baseline) {
  NormalizedReport r;
  r.policy = measure_means(policy);
  r.baseline = measure_means(baseline);
  for (std::size_t k = 0; k < 5; ++k)
    if (r.policy.mean[k] && r.baseline.mean[k] && *r.baseline.mean[k] != 0.0)
      r.ratio[k] = *r.policy.mean[k] / *r.baseline.mean[k];
  return r;
}

std::string report_to_csv(const std::vector<std::pair<std::string, NormalizedReport>>& rows) {
  std::string out = "policy";
  for (const auto* name : kMeasureNames) out += fmt::format(",{}", name);
  out += ",events,baseline_events\n";
  for (const auto& [label, r] : rows) {
    out += label;
    for (const auto& v : r.ratio) out += v ? fmt::format(",{:.6f}", *v) : std::string(",");
    out += fmt::format(",{},{}\n", r.policy.events, r.baseline.events);
  }
  return out;
}

}  // namespace ecodrive::safety
