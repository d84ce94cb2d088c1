#include "ecodrive/flow.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <fmt/core.h>

#include "ecodrive/common.hpp"

namespace ecodrive::scenario {

void RoadGraph::add_edge(std::string src, std::string dst, std::optional<double> flow) {
  for (const auto* n : {&src, &dst})
    if (std::find(nodes.begin(), nodes.end(), *n) == nodes.end()) nodes.push_back(*n);
  edges.push_back(RoadEdge{std::move(src), std::move(dst), flow});
}

void RoadGraph::infer_terminals() {
  if (!sources.empty() && !sinks.empty()) return;
  std::set<std::string> has_in, has_out;
  for (const auto& e : edges) {
    has_out.insert(e.src);
    has_in.insert(e.dst);
  }
  if (sources.empty())
    for (const auto& n : nodes)
      if (!has_in.count(n)) sources.push_back(n);
  if (sinks.empty())
    for (const auto& n : nodes)
      if (!has_out.count(n)) sinks.push_back(n);
}

RoadGraph parse_road_graph(const std::string& text) {
  RoadGraph g;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "source" || tok[0] == "sink") {
      auto& list = tok[0] == "source" ? g.sources : g.sinks;
      for (std::size_t i = 1; i < tok.size(); ++i) list.push_back(tok[i]);
      continue;
    }
    if (tok.size() < 2 || tok.size() > 3) throw DataError(fmt::format("graph line {}: expected 'src dst [flow]'", lineno));
    std::optional<double> flow;
    if (tok.size() == 3) {
      try {
        std::size_t used = 0;
        flow = std::stod(tok[2], &used);
        if (used != tok[2].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError(fmt::format("graph line {}: bad flow '{}'", lineno, tok[2]));
      }
      if (!(*flow >= 0)) throw DataError(fmt::format("graph line {}: negative flow", lineno));
    }
    g.add_edge(tok[0], tok[1], flow);
  }
  return g;
}

std::string format_flows(const RoadGraph& graph, const std::vector<double>& flows) {
  std::string out = "# schema: 1\n";
  for (std::size_t i = 0; i < graph.edges.size(); ++i)
    out += fmt::format("{} {} {:.9f}\n", graph.edges[i].src, graph.edges[i].dst, flows.at(i));
  return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Orthonormal basis of the null space of `b` (columns).
MatrixXd null_space(const MatrixXd& b, int cols) {
  if (b.rows() == 0) return MatrixXd::Identity(cols, cols);
  Eigen::JacobiSVD<MatrixXd> svd(b, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double tol = std::max(1.0, s.size() ? s(0) : 1.0) * 1e-12 * std::max<Eigen::Index>(b.rows(), cols);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++rank;
  return svd.matrixV().rightCols(cols - rank);
}

}  // namespace

FlowAssignment impute_flows(const RoadGraph& graph_in, const ImputeOptions& options) {
  RoadGraph graph = graph_in;
  if (graph.edges.empty()) throw ValidationError("road graph has no edges");
  graph.infer_terminals();
  if (graph.sources.empty() || graph.sinks.empty()) throw ValidationError("road graph needs at least one source and one sink");

  const int m = static_cast<int>(graph.edges.size());
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) index[graph.nodes[i]] = static_cast<int>(i);
  std::set<std::string> terminal(graph.sources.begin(), graph.sources.end());
  terminal.insert(graph.sinks.begin(), graph.sinks.end());

  std::vector<int> internal;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    if (!terminal.count(graph.nodes[i])) internal.push_back(static_cast<int>(i));

  // Conservation rows: outflow - inflow = 0 at each internal node.
  MatrixXd a = MatrixXd::Zero(static_cast<Eigen::Index>(internal.size()), m);
  for (std::size_t r = 0; r < internal.size(); ++r) {
    for (int e = 0; e < m; ++e) {
      if (index[graph.edges[static_cast<std::size_t>(e)].src] == internal[r]) a(static_cast<Eigen::Index>(r), e) += 1.0;
      if (index[graph.edges[static_cast<std::size_t>(e)].dst] == internal[r]) a(static_cast<Eigen::Index>(r), e) -= 1.0;
    }
  }

  std::vector<int> measured;
  for (int e = 0; e < m; ++e)
    if (graph.edges[static_cast<std::size_t>(e)].measured_flow) measured.push_back(e);
  MatrixXd c = MatrixXd::Zero(static_cast<Eigen::Index>(measured.size()), m);
  VectorXd f(static_cast<Eigen::Index>(measured.size()));
  double scale = 1.0;
  for (std::size_t r = 0; r < measured.size(); ++r) {
    c(static_cast<Eigen::Index>(r), measured[r]) = 1.0;
    f(static_cast<Eigen::Index>(r)) = *graph.edges[static_cast<std::size_t>(measured[r])].measured_flow;
    scale = std::max(scale, std::abs(f(static_cast<Eigen::Index>(r))));
  }
  const double tol = options.tolerance * scale;

  // Primal active-set method on min 0.5|Cx - f|^2, Ax = 0, x >= 0, starting from x = 0.
  std::vector<bool> active(static_cast<std::size_t>(m), true);
  VectorXd x = VectorXd::Zero(m);
  FlowAssignment result;

  auto solve_eqp = [&]() -> VectorXd {
    std::vector<int> fixed;
    for (int i = 0; i < m; ++i)
      if (active[static_cast<std::size_t>(i)]) fixed.push_back(i);
    MatrixXd b = MatrixXd::Zero(a.rows() + static_cast<Eigen::Index>(fixed.size()), m);
    b.topRows(a.rows()) = a;
    for (std::size_t k = 0; k < fixed.size(); ++k) b(a.rows() + static_cast<Eigen::Index>(k), fixed[k]) = 1.0;
    MatrixXd n = null_space(b, m);
    if (n.cols() == 0) return VectorXd::Zero(m);
    MatrixXd cn = c * n;
    VectorXd z = cn.completeOrthogonalDecomposition().solve(f);
    return n * z;
  };

  auto multipliers = [&](const VectorXd& xv, VectorXd& residual) -> VectorXd {
    VectorXd g = c.transpose() * (c * xv - f);
    std::vector<int> fixed;
    for (int i = 0; i < m; ++i)
      if (active[static_cast<std::size_t>(i)]) fixed.push_back(i);
    MatrixXd k(m, a.rows() + static_cast<Eigen::Index>(fixed.size()));
    k.leftCols(a.rows()) = a.transpose();
    for (std::size_t j = 0; j < fixed.size(); ++j) {
      k.col(a.rows() + static_cast<Eigen::Index>(j)).setZero();
      k(fixed[j], a.rows() + static_cast<Eigen::Index>(j)) = -1.0;
    }
    VectorXd lam = k.cols() ? VectorXd(k.completeOrthogonalDecomposition().solve(-g)) : VectorXd();
    residual = g + (k.cols() ? VectorXd(k * lam) : VectorXd::Zero(m));
    VectorXd mu = VectorXd::Constant(m, 0.0);
    for (std::size_t j = 0; j < fixed.size(); ++j) mu(fixed[j]) = lam(a.rows() + static_cast<Eigen::Index>(j));
    return mu;
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    VectorXd target = solve_eqp();
    bool feasible = true;
    for (int i = 0; i < m; ++i)
      if (!active[static_cast<std::size_t>(i)] && target(i) < -tol) feasible = false;
    if (feasible) {
      x = target.cwiseMax(0.0);
      VectorXd residual;
      VectorXd mu = multipliers(x, residual);
      int worst = -1;
      double worst_mu = -tol;
      for (int i = 0; i < m; ++i)
        if (active[static_cast<std::size_t>(i)] && mu(i) < worst_mu) {
          worst_mu = mu(i);
          worst = i;
        }
      if (worst < 0) {
        result.kkt_residual = residual.cwiseAbs().maxCoeff();
        break;
      }
      active[static_cast<std::size_t>(worst)] = false;
      continue;
    }
    double step = 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      if (active[static_cast<std::size_t>(i)] || target(i) >= -tol) continue;
      const double ratio = x(i) / (x(i) - target(i));
      if (ratio < step) {
        step = ratio;
        blocking = i;
      }
    }
    x = x + step * (target - x);
    if (blocking >= 0) {
      active[static_cast<std::size_t>(blocking)] = true;
      x(blocking) = 0.0;
    }
    if (iter + 1 == options.max_iterations) throw DataError("flow imputation did not converge");
  }

  result.flow.assign(x.data(), x.data() + m);
  VectorXd misfit = c * x - f;
  result.objective = misfit.squaredNorm();
  result.conservation_residual = a.rows() ? (a * x).cwiseAbs().maxCoeff() : 0.0;
  result.consistent = misfit.size() == 0 || misfit.cwiseAbs().maxCoeff() <= 1e-6 * scale;
  return result;
}

}  // namespace ecodrive::scenario
