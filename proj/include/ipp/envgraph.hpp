#pragma once

// Environment graph, Boolean path encoding and the path feasibility checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ipp/errors.hpp"

namespace ipp {

using NodeId = int;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Slack added to every budget comparison to absorb float accumulation.
inline constexpr double kBudgetTolerance = 1e-9;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Edge {
  NodeId node;  // head for out-edges, tail for in-edges
  double weight;
};

/// Directed graph with 2-D node coordinates, nonnegative edge weights, a start
/// and a goal node, and the set of prediction locations of the estimated field.
/// Adjacency lists are kept sorted by neighbor id so iteration order is the
/// lowest-index-first tie order used everywhere else.
class EnvGraph {
 public:
  EnvGraph() = default;

  EnvGraph(std::vector<Point> coords, NodeId start, NodeId goal, std::vector<Point> prediction_points = {})
      : coords_(std::move(coords)),
        out_(coords_.size()),
        in_(coords_.size()),
        start_(start),
        goal_(goal),
        prediction_points_(std::move(prediction_points)) {
    if (!contains(start) || !contains(goal)) throw InvalidArgument("start/goal outside the node range");
    if (start == goal) throw InvalidArgument("start and goal must differ");
  }

  void add_edge(NodeId from, NodeId to, double weight = 1.0) {
    if (!contains(from) || !contains(to)) throw InvalidArgument("edge endpoint outside the node range");
    if (from == to) throw InvalidArgument("self loops are not allowed");
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw InvalidArgument("edge weights must be finite and nonnegative");
    insert_sorted(out_[from], {to, weight});
    insert_sorted(in_[to], {from, weight});
  }

  /// Obstacles are modelled by deleting edges; node indexing stays dense.
  bool remove_edge(NodeId from, NodeId to) {
    if (!contains(from) || !contains(to)) return false;
    const bool removed = erase(out_[from], to);
    erase(in_[to], from);
    return removed;
  }

  [[nodiscard]] int size() const { return static_cast<int>(coords_.size()); }
  [[nodiscard]] bool contains(NodeId i) const { return i >= 0 && i < size(); }
  [[nodiscard]] const Point& coord(NodeId i) const { return coords_.at(i); }
  [[nodiscard]] const std::vector<Point>& coords() const { return coords_; }
  [[nodiscard]] std::span<const Edge> out_edges(NodeId i) const { return out_.at(i); }
  [[nodiscard]] std::span<const Edge> in_edges(NodeId i) const { return in_.at(i); }
  [[nodiscard]] NodeId start() const { return start_; }
  [[nodiscard]] NodeId goal() const { return goal_; }
  [[nodiscard]] const std::vector<Point>& prediction_points() const { return prediction_points_; }
  [[nodiscard]] int num_prediction_points() const { return static_cast<int>(prediction_points_.size()); }

  void set_prediction_points(std::vector<Point> points) { prediction_points_ = std::move(points); }

  void set_endpoints(NodeId start, NodeId goal) {
    if (!contains(start) || !contains(goal) || start == goal) throw InvalidArgument("invalid start/goal pair");
    start_ = start;
    goal_ = goal;
  }

  [[nodiscard]] std::optional<double> edge_weight(NodeId from, NodeId to) const {
    if (!contains(from) || !contains(to)) return std::nullopt;
    const auto& adj = out_[from];
    auto it = std::lower_bound(adj.begin(), adj.end(), to, [](const Edge& e, NodeId v) { return e.node < v; });
    if (it == adj.end() || it->node != to) return std::nullopt;
    return it->weight;
  }

  [[nodiscard]] bool has_edge(NodeId from, NodeId to) const { return edge_weight(from, to).has_value(); }

  [[nodiscard]] int edge_count() const {
    int count = 0;
    for (const auto& adj : out_) count += static_cast<int>(adj.size());
    return count;
  }

  [[nodiscard]] double min_edge_weight() const {
    double best = kInf;
    for (const auto& adj : out_)
      for (const auto& e : adj) best = std::min(best, e.weight);
    return best;
  }

  [[nodiscard]] bool unit_weights() const {
    for (const auto& adj : out_)
      for (const auto& e : adj)
        if (e.weight != 1.0) return false;
    return true;
  }

 private:
  static void insert_sorted(std::vector<Edge>& adj, Edge e) {
    auto it = std::lower_bound(adj.begin(), adj.end(), e.node, [](const Edge& a, NodeId v) { return a.node < v; });
    if (it != adj.end() && it->node == e.node)
      it->weight = e.weight;
    else
      adj.insert(it, e);
  }

  static bool erase(std::vector<Edge>& adj, NodeId v) {
    auto it = std::find_if(adj.begin(), adj.end(), [v](const Edge& e) { return e.node == v; });
    if (it == adj.end()) return false;
    adj.erase(it);
    return true;
  }

  std::vector<Point> coords_;
  std::vector<std::vector<Edge>> out_;
  std::vector<std::vector<Edge>> in_;
  NodeId start_ = 0;
  NodeId goal_ = 0;
  std::vector<Point> prediction_points_;
};

enum class EdgeWeightMode { unit, euclidean };

inline constexpr int kDefaultPredictionPoints = 20;

/// Prediction locations spread evenly over the square [0, extent]^2.
/// Up to `m` points are laid out on a near-square cols x rows arrangement
/// at cell centres; when the lattice has no more than `m` nodes the node
/// positions themselves are used.
inline std::vector<Point> lattice_prediction_points(int side, double spacing = 1.0, int m = kDefaultPredictionPoints) {
  std::vector<Point> points;
  if (side * side <= m) {
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) points.push_back({c * spacing, r * spacing});
    return points;
  }
  int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  while (m % cols != 0) ++cols;
  const int rows = m / cols;
  const double extent = (side - 1) * spacing;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) points.push_back({(i + 0.5) / cols * extent, (j + 0.5) / rows * extent});
  return points;
}

/// side x side 4-connected lattice, row-major, node 0 at the bottom-left
/// corner (start) and node side^2-1 at the top-right corner (goal).
inline EnvGraph build_grid(int side, EdgeWeightMode mode = EdgeWeightMode::unit, double spacing = 1.0,
                           int num_prediction_points = kDefaultPredictionPoints) {
  if (side < 2) throw InvalidArgument("grid side must be at least 2");
  if (!(spacing > 0.0)) throw InvalidArgument("grid spacing must be positive");
  std::vector<Point> coords;
  coords.reserve(static_cast<std::size_t>(side) * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) coords.push_back({c * spacing, r * spacing});
  const int n = side * side;
  EnvGraph g(std::move(coords), 0, n - 1, lattice_prediction_points(side, spacing, num_prediction_points));
  const double w = mode == EdgeWeightMode::unit ? 1.0 : spacing;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const NodeId i = r * side + c;
      if (c + 1 < side) {
        g.add_edge(i, i + 1, w);
        g.add_edge(i + 1, i, w);
      }
      if (r + 1 < side) {
        g.add_edge(i, i + side, w);
        g.add_edge(i + side, i, w);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Shortest paths

/// Dijkstra towards `target` over reversed edges. Nodes flagged in `blocked`
/// are removed from the graph (the target itself is never blocked).
inline std::vector<double> shortest_costs_to(const EnvGraph& g, NodeId target, const std::vector<bool>& blocked = {}) {
  std::vector<double> dist(g.size(), kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[target] = 0.0;
  queue.push({0.0, target});
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (const Edge& e : g.in_edges(v)) {
      const NodeId u = e.node;
      if (!blocked.empty() && blocked[u]) continue;
      const double nd = d + e.weight;
      if (nd < dist[u]) {
        dist[u] = nd;
        queue.push({nd, u});
      }
    }
  }
  return dist;
}

inline std::vector<double> shortest_costs_to_goal(const EnvGraph& g) { return shortest_costs_to(g, g.goal()); }

/// Cheapest node sequence from `from` to `to` avoiding `blocked` nodes; ties
/// go to the lowest-index successor. Empty when unreachable.
inline std::vector<NodeId> shortest_path(const EnvGraph& g, NodeId from, NodeId to, const std::vector<bool>& blocked = {}) {
  const auto dist = shortest_costs_to(g, to, blocked);
  if (!std::isfinite(dist[from])) return {};
  std::vector<NodeId> path{from};
  std::vector<bool> used(g.size(), false);
  used[from] = true;
  NodeId cur = from;
  while (cur != to) {
    NodeId next = -1;
    for (const Edge& e : g.out_edges(cur)) {
      if (used[e.node] || !std::isfinite(dist[e.node])) continue;
      if (std::abs(e.weight + dist[e.node] - dist[cur]) <= 1e-9 * std::max(1.0, dist[cur])) {
        next = e.node;
        break;
      }
    }
    if (next < 0) return {};
    used[next] = true;
    path.push_back(next);
    cur = next;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Path encoding

/// Sparse n x n edge-indicator matrix; absent entries are zero. Real-valued so
/// that relaxed (fractional) encodings can be validated as well.
using EdgeMatrix = std::map<std::pair<NodeId, NodeId>, double>;

struct PathEncoding {
  std::vector<NodeId> sequence;
  EdgeMatrix z;
  std::vector<int> u;  // Miller-Tucker-Zemlin order, 1-based, length n
  double total_cost = 0.0;
};

/// Encodes a node sequence. Consecutive pairs that are not graph edges still
/// get a z entry (flagged by validate_path) and make total_cost infinite.
inline PathEncoding encode_path(const EnvGraph& g, std::vector<NodeId> sequence) {
  PathEncoding p;
  p.sequence = std::move(sequence);
  const int n = g.size();
  p.u.assign(n, n);
  for (std::size_t k = 0; k + 1 < p.sequence.size(); ++k) {
    const NodeId i = p.sequence[k];
    const NodeId j = p.sequence[k + 1];
    p.z[{i, j}] += 1.0;
    const auto w = g.edge_weight(i, j);
    p.total_cost += w ? *w : kInf;
  }
  for (std::size_t k = 0; k < p.sequence.size(); ++k) {
    const NodeId v = p.sequence[k];
    if (g.contains(v)) p.u[v] = std::min(static_cast<int>(k) + 1, n);
  }
  if (g.contains(g.start())) p.u[g.start()] = 1;
  return p;
}

/// Follows z from the start node. Returns nothing if z does not describe a
/// single start-to-goal chain.
inline std::optional<std::vector<NodeId>> decode_path(const EnvGraph& g, const EdgeMatrix& z) {
  std::vector<std::vector<NodeId>> succ(g.size());
  for (const auto& [ij, value] : z) {
    if (std::abs(value - 1.0) > 1e-9) {
      if (std::abs(value) <= 1e-9) continue;
      return std::nullopt;
    }
    if (!g.contains(ij.first) || !g.contains(ij.second)) return std::nullopt;
    succ[ij.first].push_back(ij.second);
  }
  std::vector<NodeId> seq{g.start()};
  std::vector<bool> seen(g.size(), false);
  seen[g.start()] = true;
  std::size_t used = 0;
  NodeId cur = g.start();
  while (cur != g.goal()) {
    if (succ[cur].size() != 1) return std::nullopt;
    cur = succ[cur].front();
    ++used;
    if (seen[cur]) return std::nullopt;
    seen[cur] = true;
    seq.push_back(cur);
  }
  std::size_t total = 0;
  for (const auto& s : succ) total += s.size();
  if (total != used) return std::nullopt;
  return seq;
}

enum class Constraint { budget, start_degree, goal_degree, termination, connectivity, subtour, integrality, sparsity };

inline std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::budget: return "budget";
    case Constraint::start_degree: return "start-degree";
    case Constraint::goal_degree: return "goal-degree";
    case Constraint::termination: return "termination";
    case Constraint::connectivity: return "connectivity";
    case Constraint::subtour: return "subtour";
    case Constraint::integrality: return "integrality";
    case Constraint::sparsity: return "sparsity";
  }
  return "unknown";
}

struct PathVerdict {
  bool valid = true;
  std::vector<Constraint> violations;

  [[nodiscard]] bool violates(Constraint c) const {
    return std::find(violations.begin(), violations.end(), c) != violations.end();
  }
};

/// True when the given order vector satisfies the MTZ constraints for z
/// (start gets order 1, every other node lies in [2, n]).
inline bool mtz_order_valid(const EnvGraph& g, const EdgeMatrix& z, const std::vector<int>& u) {
  const int n = g.size();
  if (static_cast<int>(u.size()) != n) return false;
  if (u[g.start()] != 1) return false;
  for (NodeId i = 0; i < n; ++i)
    if (i != g.start() && (u[i] < 2 || u[i] > n)) return false;
  for (const auto& [ij, value] : z) {
    const auto [i, j] = ij;
    if (i == j || i == g.start() || j == g.start()) continue;
    if (u[i] - u[j] + 1 > (n - 1) * (1.0 - value) + 1e-9) return false;
  }
  return true;
}

/// Whether any real order vector satisfies the MTZ constraints for z. The
/// constraints are difference constraints, so a longest-path relaxation from
/// the lower bound 2 decides feasibility; for integral z this coincides with
/// existence of an integer order vector.
inline bool mtz_order_exists(const EnvGraph& g, const EdgeMatrix& z) {
  const int n = g.size();
  struct Arc {
    NodeId i, j;
    double w;
  };
  std::vector<Arc> arcs;
  for (const auto& [ij, value] : z) {
    const auto [i, j] = ij;
    if (i == j || i == g.start() || j == g.start() || !g.contains(i) || !g.contains(j)) continue;
    const double w = 1.0 - (n - 1) * (1.0 - value);
    if (w > -(n - 2)) arcs.push_back({i, j, w});
  }
  std::vector<double> u(n, 2.0);
  for (int round = 0; round <= n; ++round) {
    bool changed = false;
    for (const Arc& a : arcs) {
      if (u[a.i] + a.w > u[a.j] + 1e-12) {
        u[a.j] = u[a.i] + a.w;
        changed = true;
        if (u[a.j] > n + 1e-9) return false;
      }
    }
    if (!changed) return true;
  }
  return false;
}

/// Checks the path constraints on z: budget, start/goal degree, termination,
/// connectivity with at-most-once visits, MTZ subtour elimination,
/// integrality and the graph sparsity pattern.
inline PathVerdict validate_path(const EnvGraph& g, const PathEncoding& p, double budget) {
  PathVerdict verdict;
  auto flag = [&](Constraint c) {
    if (!verdict.violates(c)) verdict.violations.push_back(c);
    verdict.valid = false;
  };
  const int n = g.size();
  const NodeId s = g.start();
  const NodeId t = g.goal();
  constexpr double eps = 1e-9;

  double cost = 0.0;
  std::vector<double> out_sum(n, 0.0), in_sum(n, 0.0);
  std::vector<double> out_no_start(n, 0.0), in_no_goal(n, 0.0);
  for (const auto& [ij, value] : p.z) {
    const auto [i, j] = ij;
    if (!g.contains(i) || !g.contains(j)) {
      flag(Constraint::sparsity);
      continue;
    }
    if (std::abs(value) <= eps) continue;
    if (std::abs(value - 1.0) > eps && std::abs(value) > eps) flag(Constraint::integrality);
    const auto w = g.edge_weight(i, j);
    if (!w) {
      flag(Constraint::sparsity);
    } else {
      cost += value * *w;
    }
    out_sum[i] += value;
    in_sum[j] += value;
    if (j != s) out_no_start[i] += value;
    if (i != t) in_no_goal[j] += value;
  }
  if (cost > budget + kBudgetTolerance) flag(Constraint::budget);
  if (std::abs(out_sum[s] - 1.0) > eps) flag(Constraint::start_degree);
  if (std::abs(in_sum[t] - 1.0) > eps) flag(Constraint::goal_degree);
  if (std::abs(in_sum[s]) > eps || std::abs(out_sum[t]) > eps) flag(Constraint::termination);
  for (NodeId i = 0; i < n; ++i) {
    if (i == s || i == t) continue;
    if (std::abs(out_no_start[i] - in_no_goal[i]) > eps || out_no_start[i] > 1.0 + eps) {
      flag(Constraint::connectivity);
      break;
    }
  }
  if (!mtz_order_exists(g, p.z)) flag(Constraint::subtour);
  return verdict;
}

// ---------------------------------------------------------------------------
// Enumeration

/// Visits every simple start-to-goal path with cost <= budget in lexicographic
/// order of node sequence. The visitor returns false to stop early.
inline void for_each_feasible_path(const EnvGraph& g, double budget,
                                   const std::function<bool(const std::vector<NodeId>&, double)>& visit) {
  const auto to_goal = shortest_costs_to_goal(g);
  if (!(to_goal[g.start()] <= budget + kBudgetTolerance)) return;
  std::vector<NodeId> stack{g.start()};
  std::vector<bool> on_path(g.size(), false);
  on_path[g.start()] = true;
  bool stop = false;
  std::function<void(NodeId, double)> dfs = [&](NodeId v, double cost) {
    if (stop) return;
    if (v == g.goal()) {
      if (!visit(stack, cost)) stop = true;
      return;
    }
    for (const Edge& e : g.out_edges(v)) {
      if (on_path[e.node]) continue;
      const double c = cost + e.weight;
      if (c + to_goal[e.node] > budget + kBudgetTolerance) continue;
      on_path[e.node] = true;
      stack.push_back(e.node);
      dfs(e.node, c);
      stack.pop_back();
      on_path[e.node] = false;
      if (stop) return;
    }
  };
  dfs(g.start(), 0.0);
}

struct PathEnumeration {
  std::vector<PathEncoding> paths;
  bool truncated = false;
};

/// Brute-force list of feasible simple paths (intended for small graphs).
inline PathEnumeration enumerate_feasible_paths(const EnvGraph& g, double budget, std::size_t cap) {
  PathEnumeration result;
  for_each_feasible_path(g, budget, [&](const std::vector<NodeId>& seq, double) {
    if (result.paths.size() >= cap) {
      result.truncated = true;
      return false;
    }
    result.paths.push_back(encode_path(g, seq));
    return true;
  });
  return result;
}

}  // namespace ipp
