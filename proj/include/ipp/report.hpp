#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ipp/belief.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/objectives.hpp"

namespace ipp {

enum class RelaxationKind { walk_polytope, box_budget };

inline std::string_view to_string(RelaxationKind k) { return k == RelaxationKind::walk_polytope ? "walk_polytope" : "box_budget"; }

/// Lower/upper bound pair and the derived optimality-gap figures.
struct BoundReport {
  double lower = 0.0;
  double upper = 0.0;
  double gap_delta = 0.0;    // (upper - lower) / m
  double gap_ratio_A = 0.0;  // m * delta / lower
  double gap_ratio_D = 1.0;  // exp(delta)
  RelaxationKind relaxation_kind = RelaxationKind::walk_polytope;
  int iterations = 0;
  double fw_gap = 0.0;
};

struct SolveReport {
  std::string method;
  ObjectiveKind objective = ObjectiveKind::A;
  std::vector<NodeId> path;
  double objective_value = 0.0;
  double cost = 0.0;
  double wall_time_s = 0.0;
  bool truncated = false;
  int replans = 0;
  /// Net expected improvement over the prediction points divided by the node
  /// count, one entry per executed node (adaptive runs only).
  std::vector<double> net_ei_trace;
  std::optional<BoundReport> bounds;
  /// Multimodal runs: noise sigma chosen per upgraded node.
  std::map<NodeId, double> sensors;
  std::optional<double> multimodal_value;
  /// Every measurement taken, in order (all agents for fleet runs).
  std::vector<Measurement> measurements;
  /// Fleet runs: one path per agent; `path` then holds agent 0's.
  std::vector<std::vector<NodeId>> agent_paths;
  std::string error;
};

}  // namespace ipp
