#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/common.hpp"
#include "ecodrive/scenario.hpp"
#include "ecodrive/training.hpp"

namespace ecodrive::assess {

inline constexpr double kDefaultTauQ = 0.3;

/// Raised when a constraint cannot be decided from the evidence supplied.
class IncompleteEvidence : public DataError {
 public:
  using DataError::DataError;
};

struct Metrics {
  double emissions_g = 0.0;
  double throughput = 0.0;
  double queue_ratio = 0.0;
  double preceding_wait_s = 0.0;

  bool operator==(const Metrics&) const = default;
};

Metrics to_metrics(const train::MetricSummary& s);

struct ConstraintFlags {
  bool throughput = false;
  bool queue = false;
  bool wait = false;

  bool all() const { return throughput && queue && wait; }
  bool operator==(const ConstraintFlags&) const = default;
};

/// `scaled_queue_ratio` is the candidate's mean queue ratio under the (1 + r) inflow; nullopt raises.
ConstraintFlags check_constraints(const Metrics& candidate, const Metrics& baseline,
                                  std::optional<double> scaled_queue_ratio, double tau_q = kDefaultTauQ);

inline constexpr const char* kBaselineId = "pib";

struct Candidate {
  std::string policy;  ///< "pi1", "pi2", or "pib"
  Metrics metrics;
  std::optional<double> scaled_queue_ratio;
  ConstraintFlags flags;
  bool valid = false;  ///< false stands in for the large-constant objective

  bool operator==(const Candidate&) const = default;
};

/// Index of the selected candidate: least emissions among valid ones, ties to the baseline.
/// The baseline must be present and is always valid.
std::size_t select_policy(std::vector<Candidate>& candidates, double tau_q = kDefaultTauQ);

/// The nine influential factors, in reporting order.
inline constexpr std::array<const char*, 9> kFactorNames{"temperature", "humidity",    "speed_limit",
                                                         "road_grade",  "signal_ratio", "inflow",
                                                         "phase_count", "lane_count",  "lane_length"};
using Factors = std::array<double, 9>;
Factors factors_of(const scenario::ScenarioSpec& spec);

struct AssessmentRecord {
  std::string scenario_id;
  std::string intersection;  ///< grouping key for per-intersection benefit
  double penetration = 1.0;
  std::string season, weather, hour_type;
  Factors factors{};
  double inflow_scale = 0.0;  ///< r used for the queue check
  double tau_q = kDefaultTauQ;
  std::vector<Candidate> candidates;
  std::string selected;
  Metrics baseline;

  const Candidate& selected_candidate() const;
  double benefit_g() const { return baseline.emissions_g - selected_candidate().metrics.emissions_g; }
  bool operator==(const AssessmentRecord&) const = default;
};

std::string to_json_line(const AssessmentRecord& r);
AssessmentRecord record_from_json_line(const std::string& line);
void append_records(const std::filesystem::path& path, const std::vector<AssessmentRecord>& records);
/// Reads every *.ndjson file under `path` (or the file itself), in name order.
std::vector<AssessmentRecord> read_records(const std::filesystem::path& path);

struct PolicySet {
  std::optional<train::PolicyCheckpoint> pi1, pi2;
};

struct AssessConfig {
  std::vector<std::uint64_t> seeds = train::kEvaluationSeeds;
  int horizon = 1200;
  double tau_q = kDefaultTauQ;
  double inflow_scale = 0.0;
  sim::SimConfig sim;
};

/// Evaluates baseline and available eco policies on one scenario, nominal and with inflow scaled by (1 + r).
AssessmentRecord assess_scenario(const scenario::ScenarioSpec& spec, const PolicySet& policies,
                                 const AssessConfig& cfg, const EmissionProvider& emissions);

/// Largest r in [lo, hi] with pass_fraction(r) >= target, by bisection; pass_fraction must be nonincreasing.
/// Returns lo when even lo fails.
double bisect_inflow_scale(const std::function<double(double)>& pass_fraction, double target = 0.99, double lo = 0.0,
                           double hi = 1.0, int iterations = 10);

/// Fraction of scenarios whose baseline queue ratio under (1 + r) inflow stays within tau_q.
double baseline_queue_pass_fraction(const std::vector<scenario::ScenarioSpec>& specs, double r, const AssessConfig& cfg,
                                    const EmissionProvider& emissions);

scenario::ScenarioSpec scale_inflow(scenario::ScenarioSpec spec, double r);

}  // namespace ecodrive::assess
