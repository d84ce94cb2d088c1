#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ecodrive/analytics.hpp"
#include "ecodrive/assessment.hpp"
#include "ecodrive/emissions.hpp"
#include "fixtures.hpp"

using namespace ecodrive;
using namespace ecodrive::assess;

namespace {

Candidate cand(const std::string& id, double e, double n, double w, std::optional<double> q) {
  Candidate c;
  c.policy = id;
  c.metrics = Metrics{e, n, 0.1, w};
  c.scaled_queue_ratio = q;
  return c;
}

AssessmentRecord record(const std::string& id, const std::string& inter, double pen, double base_g, double eco_g,
                        double factor0 = 0.0) {
  AssessmentRecord r;
  r.scenario_id = id;
  r.intersection = inter;
  r.penetration = pen;
  r.season = "summer";
  r.weather = "sunny";
  r.hour_type = "peak";
  r.factors[0] = factor0;
  r.baseline = Metrics{base_g, 10, 0.1, 5};
  r.candidates = {cand("pib", base_g, 10, 5, 0.1), cand("pi1", eco_g, 10, 5, 0.1)};
  r.candidates[0].valid = r.candidates[1].valid = true;
  r.selected = eco_g < base_g ? "pi1" : "pib";
  return r;
}

}  // namespace

TEST(Constraints, EachFlagIndependently) {
  const Metrics base{100, 10, 0.1, 5};
  EXPECT_TRUE(check_constraints(Metrics{90, 10, 0.2, 5}, base, 0.3).all());
  EXPECT_FALSE(check_constraints(Metrics{90, 9, 0.1, 5}, base, 0.1).throughput);
  EXPECT_FALSE(check_constraints(Metrics{90, 10, 0.1, 5}, base, 0.31).queue);
  EXPECT_FALSE(check_constraints(Metrics{90, 10, 0.1, 5.5}, base, 0.1).wait);
  EXPECT_THROW(check_constraints(Metrics{90, 10, 0.1, 5}, base, std::nullopt), IncompleteEvidence);
}

TEST(Selection, LeastEmissionsAmongValid) {
  std::vector<Candidate> c{cand("pib", 100, 10, 5, 0.2), cand("pi1", 80, 10, 5, 0.2), cand("pi2", 70, 9, 5, 0.2)};
  EXPECT_EQ(select_policy(c), 1u);  // pi2 loses throughput
  EXPECT_TRUE(c[0].valid);
  EXPECT_TRUE(c[1].valid);
  EXPECT_FALSE(c[2].valid);
}

TEST(Selection, FallsBackToBaselineAndBreaksTiesToIt) {
  std::vector<Candidate> c{cand("pib", 100, 10, 5, 0.5), cand("pi1", 80, 10, 5, 0.5)};
  EXPECT_EQ(select_policy(c), 0u);  // queue fails for pi1, the baseline stays valid
  std::vector<Candidate> tie{cand("pi1", 100, 10, 5, 0.1), cand("pib", 100, 10, 5, 0.1)};
  EXPECT_EQ(select_policy(tie), 1u);
  std::vector<Candidate> none{cand("pi1", 100, 10, 5, 0.1)};
  EXPECT_THROW(select_policy(none), UsageError);
}

TEST(Records, JsonLineRoundTrip) {
  auto r = record("s1", "iA", 0.5, 100, 80, 3.0);
  r.candidates[1].scaled_queue_ratio.reset();
  EXPECT_EQ(record_from_json_line(to_json_line(r)), r);
  EXPECT_DOUBLE_EQ(r.benefit_g(), 20.0);
  EXPECT_THROW(record_from_json_line("{\"schema\":1}"), DataError);
  EXPECT_THROW(record_from_json_line("not json"), DataError);
}

TEST(Records, AppendAndReadDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "ecodrive_records_test";
  std::filesystem::remove_all(dir);
  append_records(dir / "a.ndjson", {record("s1", "iA", 1, 100, 80)});
  append_records(dir / "a.ndjson", {record("s2", "iB", 1, 50, 50)});
  append_records(dir / "b.ndjson", {record("s3", "iA", 1, 70, 60)});
  const auto all = read_records(dir);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[2].scenario_id, "s3");
  EXPECT_THROW(read_records(dir / "missing"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Bisection, FindsTheLargestPassingScale) {
  // Pass fraction drops below 0.99 at r = 0.37.
  auto f = [](double r) { return r <= 0.37 ? 1.0 : 0.5; };
  const double r = bisect_inflow_scale(f, 0.99, 0.0, 1.0, 20);
  EXPECT_LE(r, 0.37);
  EXPECT_GT(r, 0.37 - 1e-5);
  EXPECT_DOUBLE_EQ(bisect_inflow_scale([](double) { return 1.0; }), 1.0);
  EXPECT_DOUBLE_EQ(bisect_inflow_scale([](double) { return 0.0; }), 0.0);
}

TEST(Assess, BaselineOnlyScenarioSelectsTheBaseline) {
  AssessConfig cfg;
  cfg.seeds = {1, 2};
  cfg.horizon = 200;
  cfg.inflow_scale = 0.2;
  const auto rec = assess_scenario(fixture::proxy_spec(), PolicySet{}, cfg, emissions::OracleProvider{});
  EXPECT_EQ(rec.selected, "pib");
  ASSERT_EQ(rec.candidates.size(), 1u);
  EXPECT_TRUE(rec.candidates[0].scaled_queue_ratio.has_value());
  EXPECT_DOUBLE_EQ(rec.benefit_g(), 0.0);
  EXPECT_EQ(rec.factors[7], 1.0);
  EXPECT_NEAR(rec.factors[4], 28.0 / 68.0, 1e-12);
  EXPECT_EQ(rec.intersection, assess_scenario(fixture::proxy_spec(0.5), PolicySet{}, cfg, emissions::OracleProvider{}).intersection);
  EXPECT_DOUBLE_EQ(scale_inflow(fixture::proxy_spec(), 0.5).inflows[0], 450.0);
}

TEST(Analytics, RegionalEffectiveness) {
  const std::vector<AssessmentRecord> recs{record("a", "i1", 1, 100, 80), record("b", "i2", 1, 300, 300)};
  const auto e = regional_effectiveness(recs);
  EXPECT_NEAR(e.effectiveness, 1.0 - 190.0 / 200.0, 1e-12);
  EXPECT_EQ(e.scenarios, 2u);
  EXPECT_THROW(regional_effectiveness({}), DataError);
  const auto by = effectiveness_by_adoption({record("a", "i1", 0.1, 100, 95), record("b", "i1", 1.0, 100, 80)});
  ASSERT_EQ(by.size(), 2u);
  EXPECT_NEAR(by.at(0.1).effectiveness, 0.05, 1e-12);
  EXPECT_NEAR(by.at(1.0).effectiveness, 0.20, 1e-12);
  EXPECT_EQ(effectiveness_by_slice(recs).count("summer/sunny/peak"), 1u);
}

TEST(Analytics, PearsonAgainstHandValues) {
  EXPECT_NEAR(*pearson({1, 2, 3}, {2, 4, 6}), 1.0, 1e-12);
  EXPECT_NEAR(*pearson({1, 2, 3}, {3, 2, 1}), -1.0, 1e-12);
  // x = 1..4, y = 1,3,2,4: sum dxdy = 4, sxx = syy = 5.
  EXPECT_NEAR(*pearson({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-12);
  EXPECT_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());
  EXPECT_FALSE(pearson({1, 2}, {1, 2}).has_value());
}

TEST(Analytics, FactorCorrelationUsesBenefit) {
  std::vector<AssessmentRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(record(std::to_string(i), "i", 1, 100, 100 - 3.0 * i, i));
  const auto c = factor_correlations(recs);
  EXPECT_NEAR(*c[0], 1.0, 1e-12);
  EXPECT_FALSE(c[1].has_value());
}

TEST(Analytics, ParetoCurve) {
  const auto p = pareto_curve({10, 60, 0, 30});
  ASSERT_EQ(p.size(), 4u);
  EXPECT_NEAR(p[0], 0.6, 1e-12);
  EXPECT_NEAR(p[1], 0.9, 1e-12);
  EXPECT_NEAR(p[2], 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(p[3], 1.0);
  for (double v : pareto_curve({0, 0})) EXPECT_EQ(v, 0.0);
  const auto ib = intersection_benefits({record("a", "x", 1, 100, 80), record("b", "x", 1, 100, 60)});
  ASSERT_EQ(ib.size(), 1u);
  EXPECT_NEAR(ib[0].second, 30.0, 1e-12);
}

TEST(Analytics, TopSetOverlapCounts) {
  // Ten items, top 20% = 2 per level.
  const std::vector<std::vector<double>> b{{9, 8, 1, 1, 1, 1, 1, 1, 1, 0},
                                           {9, 1, 8, 1, 1, 1, 1, 1, 1, 0},
                                           {9, 8, 1, 1, 1, 1, 1, 1, 1, 0}};
  const auto v = top_set_overlap(b, 0.2);
  EXPECT_EQ(v.top_sets[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(v.top_sets[1], (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(v.all, 1u);
  EXPECT_EQ(v.regions.at(0b111), 1u);
  EXPECT_EQ(v.regions.at(0b101), 1u);
  EXPECT_EQ(v.regions.at(0b010), 1u);
  EXPECT_EQ(v.pairwise[0][2], 2u);
  EXPECT_EQ(v.pairwise[0][1], 1u);
  // Ties go to the lower index.
  EXPECT_EQ(top_set_overlap({{1, 1, 1, 1, 1}}, 0.2).top_sets[0], (std::vector<std::size_t>{0}));
}

TEST(Analytics, NationalScalingFromMileage) {
  const auto s = national_scaling(0.11);
  EXPECT_NEAR(s.intersection_share, (1141744.0 + 551855.0) / 3261772.0, 1e-12);
  EXPECT_NEAR(s.intersection_share, 0.519, 5e-4);
  EXPECT_NEAR(s.us_reduction, 0.29 * 0.81 * s.intersection_share * 0.11, 1e-15);
  EXPECT_NEAR(s.us_reduction, 0.0134, 5e-5);
  EXPECT_NEAR(s.global_reduction, s.us_reduction * 0.1261, 1e-15);
  ScalingInputs bad;
  bad.urban_intersection_miles = 1e9;
  EXPECT_THROW(national_scaling(0.1, bad), ValidationError);
}

TEST(Analytics, JointProjection) {
  // One year, half ICE (rate 2) and half EV (rate 0.5), 10% eco-driving: 1 - 1.25 * 0.9 / 2.
  EXPECT_NEAR(joint_projection({ProjectionYear{2030, 1.0, {0.5, 0.5}}}, {2.0, 0.5}, 0.1), 1.0 - 1.125 / 2.0, 1e-12);
  EXPECT_NEAR(joint_projection({ProjectionYear{2030, 1.0, {1.0, 0.0}}}, {2.0, 0.5}, 0.0), 0.0, 1e-12);
  // VMT weights pool the years.
  const double r = joint_projection({ProjectionYear{2030, 1.0, {1.0, 0.0}}, ProjectionYear{2040, 3.0, {0.0, 1.0}}},
                                    {2.0, 0.5}, 0.0);
  EXPECT_NEAR(r, 1.0 - (2.0 + 1.5) / 8.0, 1e-12);
  EXPECT_THROW(joint_projection({ProjectionYear{2030, 1.0, {0.6, 0.6}}}, {2.0, 0.5}, 0.1), ValidationError);
}
