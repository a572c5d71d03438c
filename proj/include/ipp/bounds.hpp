#pragma once

// Certified lower bounds on the static objectives over budget-feasible simple
// paths, an exact branch-and-bound solver for small graphs, relax-and-round,
// and the optimality gap.
//
// The relaxations work on node weights w in [0,1]^n (a measurement at every
// node with w_i = 1). A, B and D are convex in w and nonincreasing in every
// coordinate, so gradients are <= 0 componentwise.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <vector>

#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/objectives.hpp"
#include "ipp/planner.hpp"
#include "ipp/report.hpp"

namespace ipp {

struct FrankWolfeOptions {
  int max_iters = 200;
  double tol = 1e-6;  // on the duality gap
};

struct RelaxationResult {
  DesignWeights weights;   // final iterate
  double value = 0.0;      // objective at `weights`
  double lower = -kInf;    // certified bound over simple feasible paths
  double fw_gap = kInf;    // duality gap at the iterate that produced `lower`
  int iterations = 0;
  RelaxationKind kind = RelaxationKind::walk_polytope;
};

/// Largest number of nodes on a simple path of cost <= budget.
inline int max_path_nodes(const EnvGraph& g, double budget) {
  const double wmin = g.min_edge_weight();
  if (!(wmin > 0.0)) return g.size();
  return std::min(g.size(), 1 + static_cast<int>(std::floor(budget / wmin + 1e-9)));
}

// ---------------------------------------------------------------------------
// Linear-minimization oracles. Each returns an atom s and a value L that is
// <= min g^T x over the indicators x of the paths the bound must cover.

struct LmoResult {
  DesignWeights atom;
  double lower = -kInf;
};

/// {x in [0,1]^n : x_i = 1 on `fixed`, x_i = 0 off `allowed`, sum x <= K}.
struct BoxSet {
  std::vector<bool> allowed;
  std::vector<bool> fixed;
  int max_nodes = 0;
};

inline LmoResult box_lmo(const Eigen::VectorXd& grad, const BoxSet& set) {
  const int n = static_cast<int>(grad.size());
  LmoResult out;
  out.atom = DesignWeights::Zero(n);
  int slots = set.max_nodes;
  std::vector<NodeId> free;
  for (NodeId i = 0; i < n; ++i) {
    if (!set.fixed.empty() && set.fixed[i]) {
      out.atom(i) = 1.0;
      --slots;
    } else if ((set.allowed.empty() || set.allowed[i]) && grad(i) < 0.0) {
      free.push_back(i);
    }
  }
  std::stable_sort(free.begin(), free.end(), [&](NodeId a, NodeId b) { return grad(a) < grad(b); });
  for (int k = 0; k < slots && k < static_cast<int>(free.size()); ++k) out.atom(free[k]) = 1.0;
  out.lower = grad.dot(out.atom);
  return out;
}

/// Clipped visit indicators of budget-bounded start-goal walks, with a
/// Lagrangian penalty on visit counts. For multipliers lam >= 0,
///   max_path r^T x <= max_walk sum_visits (r - lam) + sum lam
/// since a path visits each node at most once; the right side is a walk DP
/// with edge costs rounded down. Multipliers are tuned by projected
/// subgradient steps and kept between calls (FW gradients change slowly). The
/// atom is the average visit vector of the later subgradient iterates, clipped
/// to 1, which approximately satisfies the count constraints.
class WalkOracle {
 public:
  WalkOracle(const EnvGraph& g, double budget, BudgetBuckets buckets, BoxSet box, int subgradient_iters = 50)
      : g_(&g), budget_(budget), buckets_(buckets), box_(std::move(box)), iters_(subgradient_iters),
        lambda_(Eigen::VectorXd::Zero(g.size())) {}

  LmoResult operator()(const Eigen::VectorXd& grad) {
    const Eigen::VectorXd rewards = -grad;
    double best_upper = kInf;
    double target = -kInf;  // reward of some simple path: a lower estimate of the dual optimum
    double theta = 1.0;
    int stalls = 0;
    Eigen::VectorXd average = Eigen::VectorXd::Zero(lambda_.size());
    int averaged = 0;
    for (int k = 0; k <= iters_; ++k) {
      const auto plan = dp_orienteering(*g_, rewards - lambda_, g_->start(), g_->goal(), budget_, buckets_);
      const double upper = plan.value + lambda_.sum();
      const auto path = erase_loops(plan.walk);
      double path_reward = 0.0;
      for (NodeId v : path) path_reward += rewards(v);
      target = std::max(target, path_reward);
      if (upper < best_upper) {
        if (best_upper - upper > 1e-9 * std::max(1.0, std::abs(upper))) stalls = 0;
        best_upper = upper;
      }
      if (++stalls > 5) {
        theta *= 0.5;
        stalls = 0;
      }
      const bool last = k == iters_ || upper - target <= 1e-12 * std::max(1.0, std::abs(upper));
      if (2 * k >= iters_ || (last && averaged == 0)) {
        for (NodeId v : plan.walk) average(v) += 1.0;
        ++averaged;
      }
      if (last) break;
      Eigen::VectorXd sub = Eigen::VectorXd::Constant(lambda_.size(), -1.0);
      for (NodeId v : plan.walk) sub(v) += 1.0;
      for (Eigen::Index i = 0; i < sub.size(); ++i)
        if (lambda_(i) <= 0.0 && sub(i) < 0.0) sub(i) = 0.0;
      const double norm2 = sub.squaredNorm();
      if (norm2 == 0.0) break;
      lambda_ = (lambda_ + theta * (upper - target) / norm2 * sub).cwiseMax(0.0);
    }
    LmoResult out;
    out.atom = (average / averaged).cwiseMin(1.0);
    out.lower = std::max(-best_upper, box_lmo(grad, box_).lower);
    return out;
  }

  /// Simple path left after cutting every cycle out of a walk.
  static std::vector<NodeId> erase_loops(const std::vector<NodeId>& walk) {
    std::vector<NodeId> path;
    for (NodeId v : walk) {
      const auto it = std::find(path.begin(), path.end(), v);
      if (it != path.end()) path.erase(it + 1, path.end());
      else path.push_back(v);
    }
    return path;
  }

 private:
  const EnvGraph* g_;
  double budget_;
  BudgetBuckets buckets_;
  BoxSet box_;
  int iters_;
  Eigen::VectorXd lambda_;
};

inline BudgetBuckets relaxed_buckets(const EnvGraph& g, double budget) {
  double res = auto_budget_resolution(g, budget);
  const double wmin = g.min_edge_weight();
  if (wmin > 0.0) res = std::min(res, wmin);
  return {res, BucketRounding::relaxed};
}

namespace detail {

/// Minimizer of a convex function on [0,1] by golden-section search.
inline double golden_section(const std::function<double(double)>& f, int iters = 60) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters; ++k) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    }
  }
  // endpoints are often optimal for FW steps
  double best_x = 0.5 * (lo + hi), best_f = f(best_x);
  for (double x : {0.0, 1.0}) {
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace detail

/// Frank-Wolfe on phi(w) starting at `start`, with lower bounds
/// f(w) + L - g^T w collected at every iterate (valid by convexity for any w).
inline RelaxationResult frank_wolfe(ObjectiveKind kind, const DesignSpace& space, DesignWeights start,
                                    const std::function<LmoResult(const Eigen::VectorXd&)>& lmo, const FrankWolfeOptions& opt) {
  require_static(kind);
  RelaxationResult res;
  DesignWeights w = std::move(start);
  for (int t = 0; t < std::max(1, opt.max_iters); ++t) {
    const double f = space.value(kind, w);
    const Eigen::VectorXd grad = space.gradient(kind, w);
    const LmoResult step = lmo(grad);
    // negative when w lies outside the set the oracle bounds; f - gap is valid either way
    const double gap = grad.dot(w) - step.lower;
    res.iterations = t + 1;
    // equal bounds: keep the smaller certificate
    const double tie = 1e-12 * std::max(1.0, std::abs(f));
    if (f - gap > res.lower + tie || (f - gap >= res.lower - tie && std::abs(gap) < std::abs(res.fw_gap))) {
      res.lower = f - gap;
      res.fw_gap = gap;
    }
    res.weights = w;
    res.value = f;
    if (gap >= 0.0 && gap <= opt.tol) break;
    const DesignWeights dir = step.atom - w;
    double gamma;
    if (kind == ObjectiveKind::B) {
      gamma = grad.dot(dir) < 0.0 ? 1.0 : 0.0;
    } else {
      const Eigen::MatrixXd base = space.precision(w);
      const Eigen::MatrixXd delta = space.information(step.atom) - space.information(w);
      gamma = detail::golden_section([&](double s) { return eval_precision(kind, base + s * delta); });
      if (gamma == 0.0) gamma = 2.0 / (t + 2.0);  // keep moving when the search stalls
    }
    w += gamma * dir;
  }
  return res;
}

/// Lower bound on min phi over budget-feasible simple start-goal paths.
/// walk_polytope also folds in the box bound (both are valid, so their max is).
inline RelaxationResult relax_lower_bound(const EnvGraph& g, const SensorModel& model, const Eigen::MatrixXd& prior_cov,
                                          ObjectiveKind kind, double budget, RelaxationKind relaxation,
                                          const FrankWolfeOptions& opt = {}) {
  require_static(kind);
  const auto shortest = shortest_path(g, g.start(), g.goal());
  if (shortest.empty() || shortest_costs_to_goal(g)[g.start()] > budget + kBudgetTolerance)
    throw InfeasibleBudget("budget below the shortest start-goal cost");
  const DesignSpace space(model, prior_cov);
  const DesignWeights start = space.indicator(shortest);
  BoxSet box{{}, {}, max_path_nodes(g, budget)};
  auto box_result = frank_wolfe(kind, space, start, [&](const Eigen::VectorXd& grad) { return box_lmo(grad, box); }, opt);
  box_result.kind = RelaxationKind::box_budget;
  if (relaxation == RelaxationKind::box_budget) return box_result;

  const auto buckets = relaxed_buckets(g, budget);
  WalkOracle oracle(g, budget, buckets, box);
  auto walk_result = frank_wolfe(kind, space, box_result.weights, std::ref(oracle), opt);
  walk_result.kind = RelaxationKind::walk_polytope;
  if (box_result.lower > walk_result.lower) {
    walk_result.lower = box_result.lower;
    walk_result.fw_gap = box_result.fw_gap;
  }
  return walk_result;
}

// ---------------------------------------------------------------------------
// Gap

inline BoundReport gap(double upper, double lower, int m) {
  if (m <= 0) throw InvalidArgument("gap needs m >= 1");
  if (lower > upper + 1e-6) throw InconsistencyError("lower bound exceeds a feasible objective value");
  BoundReport r;
  r.lower = lower;
  r.upper = upper;
  r.gap_delta = (upper - lower) / m;
  r.gap_ratio_A = m * r.gap_delta / lower;
  r.gap_ratio_D = std::exp(r.gap_delta);
  return r;
}

inline BoundReport bound_report(double upper, const RelaxationResult& relax, int m) {
  BoundReport r = gap(upper, relax.lower, m);
  r.relaxation_kind = relax.kind;
  r.iterations = relax.iterations;
  r.fw_gap = relax.fw_gap;
  return r;
}

// ---------------------------------------------------------------------------
// Exact branch and bound

struct ExactResult {
  PathEncoding path;
  double value = kInf;
  bool truncated = false;
  long long nodes_explored = 0;
};

/// Depth-first branch and bound over simple paths from the start, children in
/// ascending node order. A partial path is pruned when a lower bound on every
/// completion exceeds the incumbent: first phi(visited + every node still
/// reachable), then a box relaxation with the visited nodes fixed to 1.
inline ExactResult exact_small(const EnvGraph& g, const SensorModel& model, const Eigen::MatrixXd& prior_cov,
                               ObjectiveKind kind, double budget, double runtime_cap_s = 120.0) {
  require_static(kind);
  const int n = g.size();
  if (!(shortest_costs_to_goal(g)[g.start()] <= budget + kBudgetTolerance))
    throw InfeasibleBudget("budget below the shortest start-goal cost");
  const auto t0 = std::chrono::steady_clock::now();
  const DesignSpace space(model, prior_cov);
  const double wmin = g.min_edge_weight();

  ExactResult best;
  std::vector<NodeId> incumbent = shortest_path(g, g.start(), g.goal());
  best.value = path_objective(kind, space, incumbent);

  std::vector<NodeId> seq{g.start()};
  std::vector<bool> visited(n, false);
  visited[g.start()] = true;
  FrankWolfeOptions inner{40, 1e-9};

  std::function<void(double)> dfs = [&](double cost) {
    ++best.nodes_explored;
    if (best.truncated) return;
    if (elapsed_seconds(t0) > runtime_cap_s) {
      best.truncated = true;
      return;
    }
    const NodeId cur = seq.back();
    if (cur == g.goal()) {
      const double v = path_objective(kind, space, seq);
      if (v < best.value - 1e-12) {
        best.value = v;
        incumbent = seq;
      }
      return;
    }
    const double remaining = budget - cost;
    // nodes that can still be visited: reachable from cur and back to the goal, avoiding visited
    auto blocked = visited;
    const auto to_goal = shortest_costs_to(g, g.goal(), blocked);
    blocked[cur] = false;
    std::vector<double> from_cur(n, kInf);
    {
      using Item = std::pair<double, NodeId>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
      from_cur[cur] = 0.0;
      queue.push({0.0, cur});
      while (!queue.empty()) {
        auto [d, v] = queue.top();
        queue.pop();
        if (d > from_cur[v]) continue;
        for (const Edge& e : g.out_edges(v)) {
          if (visited[e.node]) continue;
          if (d + e.weight < from_cur[e.node]) {
            from_cur[e.node] = d + e.weight;
            queue.push({from_cur[e.node], e.node});
          }
        }
      }
    }
    std::vector<bool> reachable(n, false);
    DesignWeights optimistic = space.indicator(seq);
    for (NodeId j = 0; j < n; ++j) {
      if (!visited[j] && from_cur[j] + to_goal[j] <= remaining + kBudgetTolerance) {
        reachable[j] = true;
        optimistic(j) = 1.0;
      }
    }
    if (space.value(kind, optimistic) > best.value + 1e-9) return;
    const int extra = wmin > 0.0 ? static_cast<int>(std::floor(remaining / wmin + 1e-9)) : n;
    BoxSet box{reachable, visited, static_cast<int>(seq.size()) + extra};
    const auto relax =
        frank_wolfe(kind, space, optimistic, [&](const Eigen::VectorXd& grad) { return box_lmo(grad, box); }, inner);
    if (relax.lower > best.value + 1e-9) return;

    for (const Edge& e : g.out_edges(cur)) {
      const NodeId j = e.node;
      if (visited[j] || !(e.weight + to_goal[j] <= remaining + kBudgetTolerance)) continue;
      visited[j] = true;
      seq.push_back(j);
      dfs(cost + e.weight);
      seq.pop_back();
      visited[j] = false;
    }
  };
  dfs(0.0);
  best.path = encode_path(g, incumbent);
  return best;
}

// ---------------------------------------------------------------------------
// Relax and round

/// Greedy ascent on the relaxed weights: from the current node step to the
/// feasible unvisited non-goal neighbor of largest weight (lowest index on
/// ties); when none has positive weight, finish along the cheapest route.
inline PathEncoding round_weights(const EnvGraph& g, const DesignWeights& w, double budget) {
  AgentState agent = make_agent(g, g.start(), g.goal(), budget);
  while (!agent.at_goal()) {
    NodeId next = -1;
    for (NodeId j : feasible_moves(g, agent)) {
      if (j == agent.goal || !(w(j) > 1e-9)) continue;
      if (next < 0 || w(j) > w(next)) next = j;
    }
    if (next < 0) {
      auto blocked = agent.visited;
      blocked[agent.current] = false;
      const auto route = shortest_path(g, agent.current, agent.goal, blocked);
      if (route.empty()) throw InconsistencyError("relax_and_round: goal unreachable");
      for (std::size_t k = 1; k < route.size(); ++k) step_to(g, agent, route[k]);
      break;
    }
    step_to(g, agent, next);
  }
  return encode_path(g, agent.path);
}

inline PathEncoding relax_and_round(const EnvGraph& g, const SensorModel& model, const Eigen::MatrixXd& prior_cov,
                                    ObjectiveKind kind, double budget, const FrankWolfeOptions& opt = {}) {
  const auto relax = relax_lower_bound(g, model, prior_cov, kind, budget, RelaxationKind::walk_polytope, opt);
  return round_weights(g, relax.weights, budget);
}

}  // namespace ipp
