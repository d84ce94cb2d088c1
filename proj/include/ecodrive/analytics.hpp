#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/assessment.hpp"

namespace ecodrive::assess {

struct EffectivenessReport {
  double effectiveness = 0.0;
  double mean_eco_g = 0.0;
  double mean_baseline_g = 0.0;
  std::vector<std::pair<std::string, double>> contributions;  ///< scenario id, baseline - selected grams
  std::size_t scenarios = 0;
};

/// E = 1 - mean(eco) / mean(baseline). Throws DataError on empty input or zero baseline.
EffectivenessReport regional_effectiveness(const std::vector<AssessmentRecord>& records);

/// Effectiveness per "season/weather/hour" slice.
std::map<std::string, EffectivenessReport> effectiveness_by_slice(const std::vector<AssessmentRecord>& records);

/// Effectiveness per adoption level.
std::map<double, EffectivenessReport> effectiveness_by_adoption(const std::vector<AssessmentRecord>& records);

/// nullopt when either side has zero variance or fewer than 3 points.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// r between each factor and the per-scenario benefit.
std::array<std::optional<double>, 9> factor_correlations(const std::vector<AssessmentRecord>& records);

/// Benefit per intersection: mean over its scenarios of baseline minus selected grams.
std::vector<std::pair<std::string, double>> intersection_benefits(const std::vector<AssessmentRecord>& records);

/// Cumulative share of total benefit after the top k items (k = 1..n), items sorted by descending benefit.
/// All zeros when the total is not positive.
std::vector<double> pareto_curve(std::vector<double> benefits);

struct VennCounts {
  std::vector<std::vector<std::size_t>> top_sets;  ///< per level, sorted item indices
  std::map<unsigned, std::size_t> regions;         ///< membership bitmask -> items with exactly that membership
  std::vector<std::vector<std::size_t>> pairwise;  ///< |A_i ∩ A_j|
  std::size_t all = 0;                             ///< items in every set
};

/// `benefits[level][item]` over a shared item universe; each level keeps its ceil(fraction * n) best items,
/// ties to the lower index.
VennCounts top_set_overlap(const std::vector<std::vector<double>>& benefits, double top_fraction = 0.2);

struct ScalingInputs {
  double urban_intersection_miles = 1141744;
  double rural_intersection_miles = 551855;
  double total_miles = 3261772;
  double transport_share = 0.29;
  double land_share = 0.81;
  double us_global_share = 0.1261;
};

struct ScalingReport {
  double intersection_share = 0.0;
  double us_reduction = 0.0;
  double global_reduction = 0.0;
};

ScalingReport national_scaling(double effectiveness, const ScalingInputs& in = {});

struct ProjectionYear {
  int year = 0;
  double vmt = 1.0;               ///< relative weight of the year
  std::vector<double> shares;     ///< per powertrain, summing to 1
};

/// Pooled fractional reduction against an all-ICE fleet. `rates[0]` is the ICE rate per mile.
/// Eco-driving removes `eco_reduction` of every powertrain's emissions.
double joint_projection(const std::vector<ProjectionYear>& years, const std::vector<double>& rates,
                        double eco_reduction);

}  // namespace ecodrive::assess
