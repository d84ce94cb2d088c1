#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/microsim.hpp"

namespace ecodrive::safety {

using sim::TrajectoryLog;
using sim::VehicleId;

struct SafetyConfig {
  double ttc_threshold = 1.5;   ///< s
  double pet_threshold = 5.0;   ///< s
  double cell_size = 5.0;       ///< m
  double vehicle_length = 5.0;  ///< m, used for gaps and cell vacating
};

struct ConflictEvent {
  VehicleId leader = 0;
  VehicleId follower = 0;
  int lane = 0;
  double t0 = 0.0, t1 = 0.0;
  double min_ttc = 0.0;
  std::optional<double> pet;  ///< absent when no cell hand-over is in the log
  double max_s = 0.0;
  double delta_s = 0.0;  ///< |v_leader - v_follower| at the minimum TTC
  double dr = 0.0;       ///< follower's first braking rate in the event, positive
  bool partial = false;  ///< event touches the log boundary or lacks PET evidence
};

/// Gap over closing speed; nullopt when the gap is not closing.
std::optional<double> time_to_collision(double gap, double v_follower, double v_leader);

/// Time between the leader's rear leaving cell `cell` and the follower's front entering it.
std::optional<double> post_encroachment(const TrajectoryLog& log, VehicleId leader, VehicleId follower, long cell,
                                        const SafetyConfig& cfg = {});

/// Same-lane leader/follower episodes with TTC below threshold, kept when PET is below threshold or unknown.
std::vector<ConflictEvent> detect_conflicts(const TrajectoryLog& log, const SafetyConfig& cfg = {});

std::string events_to_csv(const std::vector<ConflictEvent>& events);

inline constexpr std::array<const char*, 5> kMeasureNames{"ttc", "pet", "maxs", "deltas", "dr"};
/// TTC and PET: higher is safer. MaxS, DeltaS, DR: lower is safer.
inline constexpr std::array<bool, 5> kHigherIsSafer{true, true, false, false, false};

struct MeasureMeans {
  std::array<std::optional<double>, 5> mean;
  std::size_t events = 0;
};

MeasureMeans measure_means(const std::vector<ConflictEvent>& events);

struct NormalizedReport {
  MeasureMeans policy, baseline;
  std::array<std::optional<double>, 5> ratio;  ///< absent when the baseline mean is zero or missing
};

NormalizedReport normalized_report(const std::vector<ConflictEvent>& policy, const std::vector<ConflictEvent>& baseline);

/// Rows: one per policy label; columns: the five ratios.
std::string report_to_csv(const std::vector<std::pair<std::string, NormalizedReport>>& rows);

}  // namespace ecodrive::safety
