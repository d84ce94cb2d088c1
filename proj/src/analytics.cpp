#include "ecodrive/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

namespace ecodrive::assess {

EffectivenessReport regional_effectiveness(const std::vector<AssessmentRecord>& records) {
  if (records.empty()) throw DataError("effectiveness needs at least one record");
  EffectivenessReport rep;
  rep.scenarios = records.size();
  const double n = static_cast<double>(records.size());
  for (const auto& r : records) {
    const double eco = r.selected_candidate().metrics.emissions_g;
    rep.mean_eco_g += eco / n;
    rep.mean_baseline_g += r.baseline.emissions_g / n;
    rep.contributions.emplace_back(r.scenario_id, r.baseline.emissions_g - eco);
  }
  if (rep.mean_baseline_g == 0.0) throw DataError("baseline emissions are zero; effectiveness is undefined");
  rep.effectiveness = 1.0 - rep.mean_eco_g / rep.mean_baseline_g;
  return rep;
}

std::map<std::string, EffectivenessReport> effectiveness_by_slice(const std::vector<AssessmentRecord>& records) {
  std::map<std::string, std::vector<AssessmentRecord>> groups;
  for (const auto& r : records) groups[fmt::format("{}/{}/{}", r.season, r.weather, r.hour_type)].push_back(r);
  std::map<std::string, EffectivenessReport> out;
  for (const auto& [k, v] : groups) out.emplace(k, regional_effectiveness(v));
  return out;
}

std::map<double, EffectivenessReport> effectiveness_by_adoption(const std::vector<AssessmentRecord>& records) {
  std::map<double, std::vector<AssessmentRecord>> groups;
  for (const auto& r : records) groups[r.penetration].push_back(r);
  std::map<double, EffectivenessReport> out;
  for (const auto& [k, v] : groups) out.emplace(k, regional_effectiveness(v));
  return out;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw UsageError("pearson needs equal-length samples");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::array<std::optional<double>, 9> factor_correlations(const std::vector<AssessmentRecord>& records) {
  std::vector<double> benefit;
  for (const auto& r : records) benefit.push_back(r.benefit_g());
  std::array<std::optional<double>, 9> out;
  for (std::size_t f = 0; f < out.size(); ++f) {
    std::vector<double> x;
    for (const auto& r : records) x.push_back(r.factors[f]);
    out[f] = pearson(x, benefit);
  }
  return out;
}

std::vector<std::pair<std::string, double>> intersection_benefits(const std::vector<AssessmentRecord>& records) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : records) {
    auto& [sum, n] = acc[r.intersection];
    sum += r.benefit_g();
    ++n;
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [k, v] : acc) out.emplace_back(k, v.first / v.second);
  return out;
}

std::vector<double> pareto_curve(std::vector<double> benefits) {
  std::sort(benefits.begin(), benefits.end(), std::greater<>());
  const double total = std::accumulate(benefits.begin(), benefits.end(), 0.0);
  std::vector<double> out(benefits.size(), 0.0);
  if (!(total > 0.0)) return out;
  double run = 0.0;
  for (std::size_t i = 0; i < benefits.size(); ++i) {
    run += benefits[i];
    out[i] = std::clamp(run / total, 0.0, 1.0);
    if (i > 0) out[i] = std::max(out[i], out[i - 1]);
  }
  if (!out.empty()) out.back() = 1.0;
  return out;
}

VennCounts top_set_overlap(const std::vector<std::vector<double>>& benefits, double top_fraction) {
  if (benefits.empty()) throw UsageError("overlap needs at least one adoption level");
  if (benefits.size() > 16) throw UsageError("overlap supports at most 16 levels");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw UsageError("top fraction must be in (0, 1]");
  const std::size_t n = benefits.front().size();
  for (const auto& b : benefits)
    if (b.size() != n) throw UsageError("every adoption level must cover the same items");
  const auto k = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-12));
  VennCounts v;
  std::vector<unsigned> mask(n, 0u);
  for (std::size_t l = 0; l < benefits.size(); ++l) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return benefits[l][a] > benefits[l][b]; });
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) mask[i] |= 1u << l;
    v.top_sets.push_back(std::move(idx));
  }
  const unsigned full = (1u << benefits.size()) - 1u;
  for (unsigned m : mask) {
    if (m == 0) continue;
    ++v.regions[m];
    if (m == full) ++v.all;
  }
  const std::size_t L = benefits.size();
  v.pairwise.assign(L, std::vector<std::size_t>(L, 0));
  for (unsigned m : mask)
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b)
        if ((m >> a & 1u) && (m >> b & 1u)) ++v.pairwise[a][b];
  return v;
}

ScalingReport national_scaling(double effectiveness, const ScalingInputs& in) {
  for (double s : {in.transport_share, in.land_share, in.us_global_share})
    if (s < 0.0 || s > 1.0) throw ValidationError("scaling shares must lie in [0, 1]");
  if (!(in.total_miles > 0.0)) throw ValidationError("total miles must be positive");
  ScalingReport r;
  r.intersection_share = (in.urban_intersection_miles + in.rural_intersection_miles) / in.total_miles;
  if (r.intersection_share < 0.0 || r.intersection_share > 1.0)
    throw ValidationError("intersection miles exceed total miles");
  r.us_reduction = in.transport_share * in.land_share * r.intersection_share * effectiveness;
  r.global_reduction = r.us_reduction * in.us_global_share;
  return r;
}

double joint_projection(const std::vector<ProjectionYear>& years, const std::vector<double>& rates,
                        double eco_reduction) {
  if (years.empty()) throw ValidationError("projection needs at least one year");
  if (rates.empty() || !(rates[0] > 0.0)) throw ValidationError("the ICE emission rate must be positive");
  if (eco_reduction < 0.0 || eco_reduction > 1.0) throw ValidationError("eco reduction must lie in [0, 1]");
  double actual = 0.0, ice = 0.0;
  for (const auto& y : years) {
    if (y.shares.size() != rates.size())
      throw ValidationError(fmt::format("year {} has {} shares for {} powertrains", y.year, y.shares.size(), rates.size()));
    double sum = 0.0, rate = 0.0;
    for (std::size_t p = 0; p < rates.size(); ++p) {
      if (y.shares[p] < 0.0) throw ValidationError(fmt::format("year {} has a negative share", y.year));
      sum += y.shares[p];
      rate += y.shares[p] * rates[p];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(fmt::format("year {} shares sum to {}, not 1", y.year, sum));
    actual += y.vmt * rate * (1.0 - eco_reduction);
    ice += y.vmt * rates[0];
  }
  return 1.0 - actual / ice;
}

}  // namespace ecodrive::assess
