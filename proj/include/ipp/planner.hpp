#pragma once

// Receding-horizon planner (orienteering DP over per-node rewards) and the
// random / greedy baselines. All planners share one executor that keeps the
// executed path simple and budget-feasible: a move to j is allowed only when
// j is unvisited and the goal stays reachable from j, avoiding every visited
// node, within the remaining budget.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ipp/belief.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/objectives.hpp"
#include "ipp/report.hpp"

namespace ipp {

struct PlannerConfig {
  ObjectiveKind objective = ObjectiveKind::A;
  int walk_memory = 3;  // ASPO candidate walks never re-enter their last k nodes; 0 = any walk
  double budget = 0.0;
  int execute_steps = 1;           // steps executed per replan
  double budget_resolution = 0.0;  // 0 picks automatically
  double runtime_cap_s = 120.0;
  std::uint64_t rng_seed = 0;
};

/// Source of measurement values: y observed when measuring at a node.
using World = std::function<double(NodeId)>;

inline World silent_world() {
  return [](NodeId) { return 0.0; };
}

// ---------------------------------------------------------------------------
// Budget discretization

enum class BucketRounding {
  conservative,  // edge costs rounded up: plans never overshoot the budget
  relaxed,       // edge costs rounded down: the walk set only grows
};

struct BudgetBuckets {
  double resolution = 1.0;
  BucketRounding rounding = BucketRounding::conservative;

  [[nodiscard]] int edge_cost(double w) const {
    const double q = w / resolution;
    if (rounding == BucketRounding::conservative) return std::max(1, static_cast<int>(std::ceil(q - 1e-9)));
    const int c = static_cast<int>(std::floor(q + 1e-9));
    if (c < 1) throw InvalidArgument("edge weight below the budget resolution in relaxed rounding");
    return c;
  }

  [[nodiscard]] int capacity(double budget) const {
    return std::max(-1, static_cast<int>(std::floor(budget / resolution + 1e-9)));
  }
};

/// gcd of the weights when all are integers, the smallest weight when every
/// weight is a multiple of it, budget / 1000 otherwise.
inline double auto_budget_resolution(const EnvGraph& g, double budget) {
  std::vector<double> weights;
  for (NodeId i = 0; i < g.size(); ++i)
    for (const Edge& e : g.out_edges(i))
      if (e.weight > 0.0) weights.push_back(e.weight);
  if (weights.empty()) return 1.0;
  auto is_integer = [](double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v)); };
  if (std::all_of(weights.begin(), weights.end(), is_integer)) {
    long long d = 0;
    for (double w : weights) d = std::gcd(d, static_cast<long long>(std::llround(w)));
    return static_cast<double>(std::max(1LL, d));
  }
  const double wmin = *std::min_element(weights.begin(), weights.end());
  if (std::all_of(weights.begin(), weights.end(), [&](double w) { return is_integer(w / wmin); })) return wmin;
  return budget / 1000.0;
}

inline BudgetBuckets planning_buckets(const EnvGraph& g, const PlannerConfig& cfg) {
  const double res = cfg.budget_resolution > 0.0 ? cfg.budget_resolution : auto_budget_resolution(g, cfg.budget);
  return {res, BucketRounding::conservative};
}

// ---------------------------------------------------------------------------
// Orienteering DP

/// U[i, b]: best reward of a walk from i that reaches the goal using at most
/// b budget buckets; -inf when the goal is out of reach.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(int num_nodes, int capacity)
      : num_nodes_(num_nodes), capacity_(capacity), values_(static_cast<std::size_t>(num_nodes) * (capacity + 1), -kInf) {}

  [[nodiscard]] double at(NodeId i, int b) const { return values_[index(i, b)]; }
  double& at(NodeId i, int b) { return values_[index(i, b)]; }
  [[nodiscard]] int capacity() const { return capacity_; }
  [[nodiscard]] int num_nodes() const { return num_nodes_; }

 private:
  [[nodiscard]] std::size_t index(NodeId i, int b) const { return static_cast<std::size_t>(b) * num_nodes_ + i; }
  int num_nodes_ = 0;
  int capacity_ = -1;
  std::vector<double> values_;
};

struct OrienteeringPlan {
  ValueTable values;
  std::vector<NodeId> walk;  // from the root to the goal
  double value = -kInf;      // reward collected along `walk`
  std::vector<std::vector<NodeId>> alternatives;  // best walk through each feasible first move
};

/// Backward DP  U[goal, b] = r_goal,  U[i, b] = r_i + max_{j in out(i)} U[j, b - c_ij]
/// over walks that end on reaching the goal. Blocked nodes are removed; when
/// `from` itself is blocked it is still used as the root but never re-entered.
/// The returned walk follows the argmax (lowest index on ties).
inline OrienteeringPlan dp_with_memory(const EnvGraph& g, const Eigen::VectorXd& rewards, NodeId from, NodeId goal,
                                       double budget, const BudgetBuckets& buckets, const std::vector<bool>& blocked,
                                       int memory);

inline OrienteeringPlan dp_orienteering(const EnvGraph& g, const Eigen::VectorXd& rewards, NodeId from, NodeId goal,
                                        double budget, const BudgetBuckets& buckets, const std::vector<bool>& blocked = {},
                                        int memory = 0) {
  if (memory < 0) throw InvalidArgument("walk memory must be >= 0");
  if (memory > 0) return dp_with_memory(g, rewards, from, goal, budget, buckets, blocked, memory);
  if (rewards.size() != g.size()) throw InvalidArgument("reward vector length differs from node count");
  if (!rewards.allFinite()) throw InvalidArgument("rewards must be finite");
  const int n = g.size();
  const int cap = buckets.capacity(budget);
  if (cap < 0) throw InfeasibleBudget("negative budget");
  auto is_blocked = [&](NodeId v) { return !blocked.empty() && blocked[v]; };

  struct Arc {
    NodeId to;
    int cost;
  };
  std::vector<std::vector<Arc>> arcs(n);
  for (NodeId i = 0; i < n; ++i)
    for (const Edge& e : g.out_edges(i)) arcs[i].push_back({e.node, buckets.edge_cost(e.weight)});

  OrienteeringPlan plan;
  plan.values = ValueTable(n, cap);
  ValueTable& U = plan.values;
  for (int b = 0; b <= cap; ++b) {
    for (NodeId i = 0; i < n; ++i) {
      if (is_blocked(i)) continue;
      if (i == goal) {
        U.at(i, b) = rewards(i);
        continue;
      }
      double best = -kInf;
      for (const Arc& a : arcs[i]) {
        if (a.cost > b || is_blocked(a.to)) continue;
        best = std::max(best, U.at(a.to, b - a.cost));
      }
      if (best > -kInf) U.at(i, b) = rewards(i) + best;
    }
  }

  auto best_successor = [&](NodeId i, int b) -> std::pair<NodeId, int> {
    NodeId arg = -1;
    int arg_cost = 0;
    double best = -kInf;
    for (const Arc& a : arcs[i]) {
      if (a.cost > b || is_blocked(a.to)) continue;
      const double v = U.at(a.to, b - a.cost);
      if (v > best) {
        best = v;
        arg = a.to;
        arg_cost = a.cost;
      }
    }
    return {arg, arg_cost};
  };

  if (from == goal) {
    plan.value = rewards(goal);
    plan.walk = {goal};
    return plan;
  }
  auto [first, first_cost] = best_successor(from, cap);
  if (first < 0 || U.at(first, cap - first_cost) == -kInf)
    throw InfeasibleBudget("goal not reachable within the budget");
  plan.value = rewards(from) + U.at(first, cap - first_cost);
  auto follow = [&](NodeId cur, int b) {
    std::vector<NodeId> walk{from, cur};
    while (cur != goal) {
      auto [next, cost] = best_successor(cur, b);
      walk.push_back(next);
      b -= cost;
      cur = next;
    }
    return walk;
  };
  plan.walk = follow(first, cap - first_cost);
  for (const Arc& a : arcs[from])
    if (a.cost <= cap && !is_blocked(a.to) && U.at(a.to, cap - a.cost) > -kInf)
      plan.alternatives.push_back(follow(a.to, cap - a.cost));
  return plan;
}

/// The same recursion over states (last `memory` nodes, current node): a walk
/// never steps onto a node among its last `memory` predecessors, so memory 1
/// forbids immediate back-and-forth and memory k forbids every cycle of length
/// at most k + 1. values.at(i, b) holds the best state value at node i.
inline OrienteeringPlan dp_with_memory(const EnvGraph& g, const Eigen::VectorXd& rewards, NodeId from, NodeId goal,
                                       double budget, const BudgetBuckets& buckets, const std::vector<bool>& blocked,
                                       int memory) {
  if (rewards.size() != g.size()) throw InvalidArgument("reward vector length differs from node count");
  if (!rewards.allFinite()) throw InvalidArgument("rewards must be finite");
  const int n = g.size();
  const int cap = buckets.capacity(budget);
  if (cap < 0) throw InfeasibleBudget("negative budget");
  auto is_blocked = [&](NodeId v) { return !blocked.empty() && blocked[v]; };
  if (from < 0 || from >= n) throw InvalidArgument("root outside the graph");

  // states: history window (oldest first, -1 padded) followed by the current node
  const std::size_t width = static_cast<std::size_t>(memory) + 1;
  std::vector<NodeId> keys;  // width entries per state
  std::map<std::vector<NodeId>, int> index;
  struct Move {
    int to;
    int cost;
  };
  std::vector<std::vector<Move>> moves;
  auto intern = [&](const std::vector<NodeId>& key) {
    auto [it, fresh] = index.emplace(key, static_cast<int>(moves.size()));
    if (fresh) {
      keys.insert(keys.end(), key.begin(), key.end());
      moves.emplace_back();
    }
    return std::pair{it->second, fresh};
  };
  std::vector<NodeId> root_key(width, -1);
  root_key.back() = from;
  std::vector<int> frontier{intern(root_key).first};
  while (!frontier.empty()) {
    const int s = frontier.back();
    frontier.pop_back();
    const std::vector<NodeId> key(keys.begin() + s * width, keys.begin() + (s + 1) * width);
    const NodeId i = key.back();
    if (i == goal) continue;
    for (const Edge& e : g.out_edges(i)) {
      if (is_blocked(e.node) || std::find(key.begin(), key.end() - 1, e.node) != key.end() - 1) continue;
      std::vector<NodeId> next(key.begin() + 1, key.end());
      next.push_back(e.node);
      const auto [t, fresh] = intern(next);
      moves[s].push_back({t, buckets.edge_cost(e.weight)});
      if (fresh) frontier.push_back(t);
    }
  }
  const std::size_t S = moves.size();
  std::vector<NodeId> node_of(S);
  for (std::size_t s = 0; s < S; ++s) node_of[s] = keys[s * width + width - 1];

  // V[b * S + s]: best reward from state s onwards with b buckets left
  std::vector<double> V((cap + 1) * S, -kInf);
  auto value = [&](std::size_t s, int b) -> double& { return V[static_cast<std::size_t>(b) * S + s]; };
  auto best_move = [&](std::size_t s, int b) -> std::pair<int, double> {
    int arg = -1;
    double best = -kInf;
    for (std::size_t q = 0; q < moves[s].size(); ++q) {
      const Move& m = moves[s][q];
      if (m.cost > b) continue;
      const double v = value(m.to, b - m.cost);
      if (v > best) {
        best = v;
        arg = static_cast<int>(q);
      }
    }
    return {arg, best};
  };

  OrienteeringPlan plan;
  plan.values = ValueTable(n, cap);
  for (int b = 0; b <= cap; ++b) {
    for (std::size_t s = 0; s < S; ++s) {
      const NodeId i = node_of[s];
      double v = -kInf;
      if (i == goal) v = rewards(goal);
      else if (const auto [arg, best] = best_move(s, b); arg >= 0) v = rewards(i) + best;
      value(s, b) = v;
      plan.values.at(i, b) = std::max(plan.values.at(i, b), v);
    }
  }

  const double root_value = value(0, cap);
  if (root_value == -kInf) throw InfeasibleBudget("goal not reachable within the budget");
  plan.value = root_value;
  auto follow = [&](std::size_t s, int b) {
    std::vector<NodeId> walk{from, node_of[s]};
    while (node_of[s] != goal) {
      const Move m = moves[s][best_move(s, b).first];
      b -= m.cost;
      s = m.to;
      walk.push_back(node_of[s]);
    }
    return walk;
  };
  const Move first = moves[0][best_move(0, cap).first];
  plan.walk = follow(first.to, cap - first.cost);
  for (const Move& m : moves[0])
    if (m.cost <= cap && value(m.to, cap - m.cost) > -kInf) plan.alternatives.push_back(follow(m.to, cap - m.cost));
  return plan;
}

inline OrienteeringPlan dp_orienteering(const EnvGraph& g, const Eigen::VectorXd& rewards, const PlannerConfig& cfg) {
  return dp_orienteering(g, rewards, g.start(), g.goal(), cfg.budget, planning_buckets(g, cfg));
}

// ---------------------------------------------------------------------------
// Rewards

/// r_j = -phi(belief + one measurement at j) for A/B/D; r_j = EI_j under the
/// current posterior for EI. The belief must already hold every executed
/// measurement.
inline Eigen::VectorXd node_rewards(const Belief& b, const SensorModel& model, ObjectiveKind kind) {
  if (kind == ObjectiveKind::EI) return eval_ei(b, model, incumbent_min(b, model));
  return -objective_after_each(kind, b, model);
}

/// Rewards fed to the DP: for A/B/D the raw rewards shifted by phi(current),
/// i.e. the marginal reduction of phi, so longer walks are never penalized.
inline Eigen::VectorXd planning_rewards(const Belief& b, const SensorModel& model, ObjectiveKind kind) {
  Eigen::VectorXd r = node_rewards(b, model, kind);
  if (is_static(kind)) r.array() += eval_belief(kind, b);
  return r;
}

// ---------------------------------------------------------------------------
// Executor

struct AgentState {
  NodeId goal = -1;
  double budget = 0.0;
  double spent = 0.0;
  NodeId current = -1;
  std::vector<NodeId> path;
  std::vector<bool> visited;
  bool truncated = false;
  int replans = 0;

  [[nodiscard]] bool at_goal() const { return current == goal; }
  [[nodiscard]] double remaining() const { return budget - spent; }
};

inline AgentState make_agent(const EnvGraph& g, NodeId start, NodeId goal, double budget) {
  AgentState a;
  a.goal = goal;
  a.budget = budget;
  a.current = start;
  a.path = {start};
  a.visited.assign(g.size(), false);
  a.visited[start] = true;
  return a;
}

/// Goal costs in the graph with every visited node (current one included) removed.
inline std::vector<double> goal_costs_avoiding_visited(const EnvGraph& g, const AgentState& agent) {
  return shortest_costs_to(g, agent.goal, agent.visited);
}

/// Moves after which a simple path to the goal still fits the budget.
inline std::vector<NodeId> feasible_moves(const EnvGraph& g, const AgentState& agent) {
  const auto dist = goal_costs_avoiding_visited(g, agent);
  std::vector<NodeId> moves;
  for (const Edge& e : g.out_edges(agent.current)) {
    if (agent.visited[e.node]) continue;
    if (e.weight + dist[e.node] <= agent.remaining() + kBudgetTolerance) moves.push_back(e.node);
  }
  return moves;
}

/// Baseline moves: the goal ends the run, so it is taken only when no other
/// feasible move remains.
inline std::vector<NodeId> baseline_moves(const EnvGraph& g, const AgentState& agent) {
  auto moves = feasible_moves(g, agent);
  if (moves.size() > 1) std::erase(moves, agent.goal);
  return moves;
}

inline void measure(NodeId node, Belief& belief, const SensorModel& model, const World& world) {
  belief.absorb(node, world(node), model.sigma(node), model);
}

inline void step_to(const EnvGraph& g, AgentState& agent, NodeId next) {
  agent.spent += *g.edge_weight(agent.current, next);
  agent.current = next;
  agent.visited[next] = true;
  agent.path.push_back(next);
}

/// Finishes along the cheapest route that avoids visited nodes.
inline void complete_by_shortest_route(const EnvGraph& g, AgentState& agent, Belief& belief, const SensorModel& model,
                                       const World& world) {
  auto blocked = agent.visited;
  blocked[agent.current] = false;
  const auto route = shortest_path(g, agent.current, agent.goal, blocked);
  if (route.empty()) throw InconsistencyError("no simple route to the goal left");
  for (std::size_t k = 1; k < route.size(); ++k) {
    step_to(g, agent, route[k]);
    measure(route[k], belief, model, world);
  }
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

/// Turns a candidate walk into a simple feasible path: keep the walk up to its
/// first revisit, back off until the goal is reachable within the budget
/// without touching visited nodes, then finish along the cheapest such route.
/// The walk's first move is kept; it must be a feasible move.
inline std::vector<NodeId> repair_walk(const EnvGraph& g, const AgentState& agent, const std::vector<NodeId>& walk) {
  std::vector<bool> used = agent.visited;
  std::vector<NodeId> prefix{walk.front()};
  std::vector<double> spent{0.0};
  for (std::size_t k = 1; k < walk.size() && !used[walk[k]]; ++k) {
    spent.push_back(spent.back() + *g.edge_weight(prefix.back(), walk[k]));
    prefix.push_back(walk[k]);
    used[walk[k]] = true;
    if (walk[k] == agent.goal) break;
  }
  while (prefix.back() != agent.goal) {
    auto blocked = used;
    blocked[prefix.back()] = false;
    const auto route = shortest_path(g, prefix.back(), agent.goal, blocked);
    double cost = spent.back();
    for (std::size_t k = 1; k < route.size(); ++k) cost += *g.edge_weight(route[k - 1], route[k]);
    if (!route.empty() && cost <= agent.remaining() + kBudgetTolerance) {
      prefix.insert(prefix.end(), route.begin() + 1, route.end());
      break;
    }
    if (prefix.size() <= 2) throw InconsistencyError("candidate walk starts with an infeasible move");
    used[prefix.back()] = agent.visited[prefix.back()];
    prefix.pop_back();
    spent.pop_back();
  }
  return prefix;
}

/// One planning round: rewards, DP from the current node on the graph minus
/// visited nodes, then up to h executed steps. Every candidate walk (one per
/// feasible first move) is repaired into a simple path and scored by the
/// rewards that path collects; the best one is followed.
inline void aspo_round(const EnvGraph& g, const SensorModel& model, const PlannerConfig& cfg, const BudgetBuckets& buckets,
                       AgentState& agent, Belief& belief, const World& world) {
  const Eigen::VectorXd rewards = planning_rewards(belief, model, cfg.objective);
  const auto plan =
      dp_orienteering(g, rewards, agent.current, agent.goal, agent.remaining(), buckets, agent.visited, cfg.walk_memory);
  ++agent.replans;
  const auto moves = feasible_moves(g, agent);
  std::vector<NodeId> best;
  double best_value = -kInf;
  for (const auto& walk : plan.alternatives) {
    if (std::find(moves.begin(), moves.end(), walk[1]) == moves.end()) continue;
    auto path = repair_walk(g, agent, walk);
    double value = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) value += rewards(path[k]);
    if (value > best_value) {
      best_value = value;
      best = std::move(path);
    }
  }
  if (best.empty()) throw InconsistencyError("aspo: no feasible candidate");
  const int steps = std::max(1, cfg.execute_steps);
  for (int k = 1; k <= steps && k < static_cast<int>(best.size()); ++k) {
    step_to(g, agent, best[k]);
    measure(best[k], belief, model, world);
  }
}

namespace detail {

inline void check_budget(const EnvGraph& g, NodeId start, NodeId goal, double budget) {
  const auto dist = shortest_costs_to(g, goal);
  if (!(dist[start] <= budget + kBudgetTolerance)) throw InfeasibleBudget("budget below the shortest start-goal cost");
}

inline double final_objective(ObjectiveKind kind, const Belief& belief, const SensorModel& model) {
  if (kind == ObjectiveKind::EI) return net_expected_improvement(belief, incumbent_min(belief, model));
  return eval_belief(kind, belief);
}

inline void record_ei(SolveReport& report, ObjectiveKind kind, const Belief& belief, const SensorModel& model, int n) {
  if (kind == ObjectiveKind::EI) report.net_ei_trace.push_back(final_objective(kind, belief, model) / n);
}

/// Shared loop: `advance` moves the agent by at least one node per call. The
/// EI trace gets one entry per call.
template <class Advance>
SolveReport run_single_agent(const std::string& method, const EnvGraph& g, const SensorModel& model, const Belief& prior,
                             const PlannerConfig& cfg, const World& world, Advance&& advance) {
  check_budget(g, g.start(), g.goal(), cfg.budget);
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport report;
  report.method = method;
  report.objective = cfg.objective;
  Belief belief = prior;
  AgentState agent = make_agent(g, g.start(), g.goal(), cfg.budget);
  measure(agent.current, belief, model, world);
  record_ei(report, cfg.objective, belief, model, g.size());
  while (!agent.at_goal()) {
    if (elapsed_seconds(t0) > cfg.runtime_cap_s) {
      complete_by_shortest_route(g, agent, belief, model, world);
      agent.truncated = true;
      record_ei(report, cfg.objective, belief, model, g.size());
      break;
    }
    const std::size_t before = agent.path.size();
    advance(agent, belief);
    if (agent.path.size() == before) throw InconsistencyError(method + ": planner made no progress");
    record_ei(report, cfg.objective, belief, model, g.size());
  }
  report.wall_time_s = elapsed_seconds(t0);
  report.path = agent.path;
  report.cost = agent.spent;
  report.truncated = agent.truncated;
  report.replans = agent.replans;
  report.objective_value = final_objective(cfg.objective, belief, model);
  report.measurements = belief.history();
  return report;
}

}  // namespace detail

inline SolveReport aspo_plan(const EnvGraph& g, const SensorModel& model, const Belief& prior, const PlannerConfig& cfg,
                             const World& world = silent_world()) {
  const auto buckets = planning_buckets(g, cfg);
  return detail::run_single_agent("aspo", g, model, prior, cfg, world, [&](AgentState& agent, Belief& belief) {
    aspo_round(g, model, cfg, buckets, agent, belief, world);
  });
}

/// Uniform choice among feasible moves.
inline SolveReport random_baseline(const EnvGraph& g, const SensorModel& model, const Belief& prior, const PlannerConfig& cfg,
                                   const World& world = silent_world()) {
  std::mt19937_64 rng(cfg.rng_seed);
  return detail::run_single_agent("random", g, model, prior, cfg, world, [&](AgentState& agent, Belief& belief) {
    const auto moves = baseline_moves(g, agent);
    if (moves.empty()) throw InconsistencyError("random baseline: no feasible move");
    std::uniform_int_distribution<std::size_t> pick(0, moves.size() - 1);
    const NodeId next = moves[pick(rng)];
    step_to(g, agent, next);
    measure(next, belief, model, world);
  });
}

/// One-step lookahead: the feasible move with the best objective after a
/// hypothetical measurement there (largest EI for the adaptive objective).
inline SolveReport greedy_baseline(const EnvGraph& g, const SensorModel& model, const Belief& prior, const PlannerConfig& cfg,
                                   const World& world = silent_world()) {
  return detail::run_single_agent("greedy", g, model, prior, cfg, world, [&](AgentState& agent, Belief& belief) {
    const auto moves = baseline_moves(g, agent);
    if (moves.empty()) throw InconsistencyError("greedy baseline: no feasible move");
    const Eigen::VectorXd score = node_rewards(belief, model, cfg.objective);  // larger is better
    NodeId next = moves.front();
    for (NodeId j : moves)
      if (score(j) > score(next)) next = j;
    step_to(g, agent, next);
    measure(next, belief, model, world);
  });
}

}  // namespace ipp
