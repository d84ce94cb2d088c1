#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ecodrive::scenario {

struct RoadEdge {
  std::string src;
  std::string dst;
  std::optional<double> measured_flow;  ///< veh/day
};

/// Directed road graph. Sources are nodes without incoming edges, sinks nodes without
/// outgoing edges, unless listed explicitly.
struct RoadGraph {
  std::vector<std::string> nodes;
  std::vector<RoadEdge> edges;
  std::vector<std::string> sources;
  std::vector<std::string> sinks;

  void add_edge(std::string src, std::string dst, std::optional<double> flow = std::nullopt);
  /// Fills `sources`/`sinks` from degrees when they are empty.
  void infer_terminals();
};

/// Edge-list text: one `src dst [flow]` per line; `#` starts a comment.
RoadGraph parse_road_graph(const std::string& text);
std::string format_flows(const RoadGraph& graph, const std::vector<double>& flows);

struct FlowAssignment {
  std::vector<double> flow;        ///< per edge, same order as RoadGraph::edges
  double objective = 0.0;          ///< sum of squared misfits on measured edges
  double kkt_residual = 0.0;       ///< stationarity residual at the returned point
  double conservation_residual = 0.0;  ///< max |inflow - outflow| over internal nodes
  bool consistent = true;          ///< measured flows reproduced exactly
  int iterations = 0;
};

struct ImputeOptions {
  double tolerance = 1e-9;
  int max_iterations = 500;
};

/// Least-squares fit of measured edge flows under conservation at internal nodes and x >= 0.
FlowAssignment impute_flows(const RoadGraph& graph, const ImputeOptions& options = {});

}  // namespace ecodrive::scenario
