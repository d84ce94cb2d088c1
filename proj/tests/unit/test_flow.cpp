#include <gtest/gtest.h>

#include <map>
#include <random>

#include <fmt/core.h>

#include "ecodrive/common.hpp"
#include "ecodrive/flow.hpp"

using namespace ecodrive;
using namespace ecodrive::scenario;

namespace {

double node_imbalance(const RoadGraph& g, const std::vector<double>& x) {
  std::map<std::string, double> bal;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    bal[g.edges[i].dst] += x[i];
    bal[g.edges[i].src] -= x[i];
  }
  double worst = 0.0;
  for (const auto& n : g.nodes) {
    const bool terminal = std::find(g.sources.begin(), g.sources.end(), n) != g.sources.end() ||
                          std::find(g.sinks.begin(), g.sinks.end(), n) != g.sinks.end();
    if (!terminal) worst = std::max(worst, std::abs(bal[n]));
  }
  return worst;
}

// Random layered DAG with every node reachable from layer 0.
RoadGraph random_dag(Rng& rng, bool measure_all, std::vector<double>* truth) {
  std::uniform_int_distribution<int> layers_d(3, 5), width_d(1, 3);
  std::uniform_real_distribution<double> flow_d(10, 500);
  std::bernoulli_distribution measured(0.5);
  const int layers = layers_d(rng);
  std::vector<std::vector<std::string>> nodes(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l)
    for (int k = 0, w = width_d(rng); k < w; ++k) nodes[static_cast<std::size_t>(l)].push_back(fmt::format("n{}_{}", l, k));
  // Conservation-consistent ground truth: random source-to-sink path flows.
  std::map<std::pair<std::string, std::string>, double> flow;
  for (int p = 0; p < 6; ++p) {
    const double f = flow_d(rng);
    std::string prev = nodes[0][std::uniform_int_distribution<std::size_t>(0, nodes[0].size() - 1)(rng)];
    for (int l = 1; l < layers; ++l) {
      const auto& b = nodes[static_cast<std::size_t>(l)];
      const auto next = b[std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng)];
      flow[{prev, next}] += f;
      prev = next;
    }
  }
  RoadGraph g;
  std::normal_distribution<double> noise(0.0, 25.0);
  for (const auto& [e, f] : flow) {
    std::optional<double> m;
    if (measure_all) m = f;
    else if (measured(rng)) m = std::max(0.0, f + noise(rng));
    g.add_edge(e.first, e.second, m);
    if (truth) truth->push_back(f);
  }
  return g;
}

}  // namespace

TEST(Impute, ChainPropagatesASingleMeasurement) {
  RoadGraph g;
  g.add_edge("a", "b", 100.0);
  g.add_edge("b", "c");
  g.add_edge("c", "d");
  const auto r = impute_flows(g);
  for (double f : r.flow) EXPECT_NEAR(f, 100.0, 1e-9);
  EXPECT_TRUE(r.consistent);
}

TEST(Impute, ChainAveragesConflictingMeasurements) {
  RoadGraph g;
  g.add_edge("a", "b", 100.0);
  g.add_edge("b", "c", 120.0);
  const auto r = impute_flows(g);
  EXPECT_NEAR(r.flow[0], 110.0, 1e-9);
  EXPECT_NEAR(r.flow[1], 110.0, 1e-9);
  EXPECT_FALSE(r.consistent);
}

TEST(Impute, YMergeSumsBranches) {
  RoadGraph g;
  g.add_edge("a", "c", 100.0);
  g.add_edge("b", "c", 50.0);
  g.add_edge("c", "d");
  const auto r = impute_flows(g);
  EXPECT_NEAR(r.flow[2], 150.0, 1e-9);
}

TEST(Impute, YMergeLeastSquares) {
  // min (x1-100)^2 + (x2-50)^2 + (x1+x2-180)^2 has x1 = 110, x2 = 60.
  RoadGraph g;
  g.add_edge("a", "c", 100.0);
  g.add_edge("b", "c", 50.0);
  g.add_edge("c", "d", 180.0);
  const auto r = impute_flows(g);
  EXPECT_NEAR(r.flow[0], 110.0, 1e-9);
  EXPECT_NEAR(r.flow[1], 60.0, 1e-9);
  EXPECT_NEAR(r.flow[2], 170.0, 1e-9);
}

TEST(Impute, NonnegativityBinds) {
  // Diverge: a->b measured 10, b->c measured 50, b->d measured 0 would want b->d < 0.
  RoadGraph g;
  g.add_edge("a", "b", 10.0);
  g.add_edge("b", "c", 50.0);
  g.add_edge("b", "d", 0.0);
  const auto r = impute_flows(g);
  for (double f : r.flow) EXPECT_GE(f, 0.0);
  EXPECT_NEAR(r.flow[0], r.flow[1] + r.flow[2], 1e-9);
  EXPECT_NEAR(r.flow[2], 0.0, 1e-9);
  EXPECT_NEAR(r.flow[0], 30.0, 1e-9);
}

TEST(Impute, RandomDagsConserveFlow) {
  Rng rng(42);
  for (int k = 0; k < 100; ++k) {
    auto g = random_dag(rng, false, nullptr);
    bool any = false;
    for (const auto& e : g.edges) any |= e.measured_flow.has_value();
    if (!any) g.edges.front().measured_flow = 100.0;
    const auto r = impute_flows(g);
    g.infer_terminals();
    EXPECT_LE(node_imbalance(g, r.flow), 1e-6) << "graph " << k;
    EXPECT_LE(r.conservation_residual, 1e-6);
    for (double f : r.flow) EXPECT_GE(f, -1e-12);
  }
}

TEST(Impute, IdentityOnConsistentInputs) {
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> truth;
    const auto g = random_dag(rng, true, &truth);
    const auto r = impute_flows(g);
    for (std::size_t i = 0; i < truth.size(); ++i) EXPECT_NEAR(r.flow[i], truth[i], 1e-9);
    EXPECT_NEAR(r.objective, 0.0, 1e-12);
  }
}

TEST(Impute, ParseAndFormat) {
  const auto g = parse_road_graph("# demo\na b 100\nb c\n");
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0].measured_flow, 100.0);
  EXPECT_FALSE(g.edges[1].measured_flow.has_value());
  EXPECT_THROW(parse_road_graph("a\n"), Error);
  const auto text = format_flows(g, {100.0, 100.0});
  EXPECT_NE(text.find("b c 100.000000000"), std::string::npos);
}
