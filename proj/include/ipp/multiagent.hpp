#pragma once

// Several agents plan against one shared belief. Each round every agent still
// en route, in id order, recomputes rewards from the shared belief and
// executes up to h steps of its own orienteering plan.

#include <chrono>
#include <optional>
#include <vector>

#include "ipp/belief.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/objectives.hpp"
#include "ipp/planner.hpp"
#include "ipp/report.hpp"

namespace ipp {

struct AgentSpec {
  NodeId start = -1;
  NodeId goal = -1;
  double budget = 0.0;
};

struct FleetAgent {
  int id = 0;
  AgentSpec spec;
  AgentState state;
  std::vector<Measurement> own;  // this agent's measurements
};

struct Fleet {
  std::vector<FleetAgent> agents;
  Belief shared_belief;
};

struct FleetResult {
  std::vector<SolveReport> reports;  // one per agent, objective from its own measurements
  double joint_objective = 0.0;      // phi of the shared posterior
  Belief shared_belief;
};

/// M copies of the graph's start, goal and the configured budget.
inline std::vector<AgentSpec> uniform_agents(const EnvGraph& g, const PlannerConfig& cfg, int M) {
  if (M < 1) throw InvalidArgument("need at least one agent");
  return std::vector<AgentSpec>(M, AgentSpec{g.start(), g.goal(), cfg.budget});
}

inline double objective_of(ObjectiveKind kind, const Belief& prior, const SensorModel& model,
                           const std::vector<Measurement>& measurements) {
  Belief b = prior;
  for (const auto& meas : measurements) b.absorb(meas.node, meas.y, meas.sigma, model);
  return detail::final_objective(kind, b, model);
}

inline FleetResult plan_fleet(const EnvGraph& g, const SensorModel& model, const Belief& prior, const PlannerConfig& cfg,
                              const std::vector<AgentSpec>& specs, const World& world = silent_world()) {
  if (specs.empty()) throw InvalidArgument("need at least one agent");
  for (const auto& s : specs) {
    if (!g.contains(s.start) || !g.contains(s.goal)) throw InvalidArgument("agent endpoint outside the graph");
    detail::check_budget(g, s.start, s.goal, s.budget);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto buckets = planning_buckets(g, cfg);
  Fleet fleet{{}, prior};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    FleetAgent a{static_cast<int>(i), specs[i], make_agent(g, specs[i].start, specs[i].goal, specs[i].budget), {}};
    fleet.agents.push_back(std::move(a));
  }
  std::vector<SolveReport> reports(specs.size());

  // measurements land in the shared belief; the agent keeps its own copy
  auto record_new = [&](FleetAgent& agent, std::size_t before) {
    const auto& hist = fleet.shared_belief.history();
    for (std::size_t q = before; q < hist.size(); ++q) agent.own.push_back(hist[q]);
  };

  for (auto& agent : fleet.agents) {
    const std::size_t before = fleet.shared_belief.history().size();
    measure(agent.state.current, fleet.shared_belief, model, world);
    record_new(agent, before);
  }
  if (cfg.objective == ObjectiveKind::EI)
    for (auto& r : reports) r.net_ei_trace.push_back(detail::final_objective(cfg.objective, fleet.shared_belief, model) / g.size());
  bool pending = true;
  while (pending) {
    pending = false;
    for (auto& agent : fleet.agents) {
      if (agent.state.at_goal()) continue;
      const std::size_t before = fleet.shared_belief.history().size();
      const std::size_t path_before = agent.state.path.size();
      if (elapsed_seconds(t0) > cfg.runtime_cap_s) {
        complete_by_shortest_route(g, agent.state, fleet.shared_belief, model, world);
        agent.state.truncated = true;
      } else {
        aspo_round(g, model, cfg, buckets, agent.state, fleet.shared_belief, world);
      }
      if (agent.state.path.size() == path_before) throw InconsistencyError("fleet: agent made no progress");
      record_new(agent, before);
      if (cfg.objective == ObjectiveKind::EI)
        reports[agent.id].net_ei_trace.push_back(detail::final_objective(cfg.objective, fleet.shared_belief, model) / g.size());
      pending = pending || !agent.state.at_goal();
    }
  }

  FleetResult out;
  const double wall = elapsed_seconds(t0);
  for (auto& agent : fleet.agents) {
    SolveReport& r = reports[agent.id];
    r.method = "aspo_fleet";
    r.objective = cfg.objective;
    r.path = agent.state.path;
    r.cost = agent.state.spent;
    r.truncated = agent.state.truncated;
    r.replans = agent.state.replans;
    r.wall_time_s = wall;
    r.objective_value = objective_of(cfg.objective, prior, model, agent.own);
  }
  for (auto& r : reports) r.measurements = fleet.shared_belief.history();
  out.reports = std::move(reports);
  out.joint_objective = detail::final_objective(cfg.objective, fleet.shared_belief, model);
  out.shared_belief = std::move(fleet.shared_belief);
  return out;
}

inline FleetResult plan_fleet(const EnvGraph& g, const SensorModel& model, const Belief& prior, const PlannerConfig& cfg, int M,
                              const World& world = silent_world()) {
  return plan_fleet(g, model, prior, cfg, uniform_agents(g, cfg, M), world);
}

}  // namespace ipp
