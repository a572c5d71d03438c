#pragma once

// Post-hoc improvements of a planned path: one-hop swap polishing and
// multimodal sensor selection.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "ipp/bounds.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/objectives.hpp"

namespace ipp {

struct SwapBudget {
  int n_loc = 100;  // local steps
  std::uint64_t rng_seed = 0;
  bool exhaustive = false;  // sweep every position until no swap improves, at most n_loc sweeps
};

struct PolishResult {
  PathEncoding path;
  double initial_value = 0.0;
  double value = 0.0;
  int accepted = 0;
  std::vector<double> trace;  // objective after every accepted swap
};

namespace detail {

/// Cheapest replacement of the node at position k with an unvisited one-hop
/// neighbor keeping the predecessor/successor edges and the path cost.
/// Returns -1 when no candidate strictly improves on `current`.
inline NodeId best_swap(const EnvGraph& g, ObjectiveKind kind, const DesignSpace& space, const std::vector<NodeId>& seq,
                        const std::vector<bool>& on_path, const Eigen::MatrixXd& precision, std::size_t k, double current,
                        double* best_value) {
  const NodeId prev = seq[k - 1], node = seq[k], next = seq[k + 1];
  const double old_cost = *g.edge_weight(prev, node) + *g.edge_weight(node, next);
  const Eigen::VectorXd r_old = space.scaled_rows().row(node).transpose();
  const Eigen::MatrixXd without = precision - r_old * r_old.transpose();
  NodeId best = -1;
  double best_v = current;
  for (const Edge& e : g.out_edges(prev)) {
    const NodeId j = e.node;
    if (on_path[j]) continue;
    const auto back = g.edge_weight(j, next);
    if (!back) continue;
    if (std::abs(e.weight + *back - old_cost) > 1e-9 * std::max(1.0, old_cost)) continue;
    const Eigen::VectorXd r = space.scaled_rows().row(j).transpose();
    const double v = eval_precision(kind, without + r * r.transpose());
    if (v < best_v) {
      best_v = v;
      best = j;
    }
  }
  *best_value = best_v;
  return best;
}

}  // namespace detail

/// Random one-hop swaps: pick an interior path position uniformly, try every
/// equal-cost replacement by an unvisited neighbor, keep the best one if it
/// strictly lowers phi.
inline PolishResult polish(const EnvGraph& g, const SensorModel& model, const Eigen::MatrixXd& prior_cov, ObjectiveKind kind,
                           const PathEncoding& p, const SwapBudget& sb) {
  require_static(kind);
  if (sb.n_loc < 1) throw InvalidArgument("n_loc must be >= 1");
  const DesignSpace space(model, prior_cov);
  std::vector<NodeId> seq = p.sequence;
  std::vector<bool> on_path(g.size(), false);
  for (NodeId v : seq) on_path[v] = true;
  Eigen::MatrixXd precision = space.precision(space.indicator(seq));

  PolishResult out;
  out.initial_value = eval_precision(kind, precision);
  out.value = out.initial_value;

  auto apply = [&](std::size_t k, NodeId j, double v) {
    const Eigen::VectorXd r_old = space.scaled_rows().row(seq[k]).transpose();
    const Eigen::VectorXd r_new = space.scaled_rows().row(j).transpose();
    precision += r_new * r_new.transpose() - r_old * r_old.transpose();
    on_path[seq[k]] = false;
    on_path[j] = true;
    seq[k] = j;
    out.value = v;
    ++out.accepted;
    out.trace.push_back(v);
  };

  if (seq.size() >= 3) {
    if (sb.exhaustive) {
      for (int sweep = 0; sweep < sb.n_loc; ++sweep) {
        bool improved = false;
        for (std::size_t k = 1; k + 1 < seq.size(); ++k) {
          double v = 0.0;
          const NodeId j = detail::best_swap(g, kind, space, seq, on_path, precision, k, out.value, &v);
          if (j >= 0) {
            apply(k, j, v);
            improved = true;
          }
        }
        if (!improved) break;
      }
    } else {
      std::mt19937_64 rng(sb.rng_seed);
      std::uniform_int_distribution<std::size_t> position(1, seq.size() - 2);
      for (int step = 0; step < sb.n_loc; ++step) {
        const std::size_t k = position(rng);
        double v = 0.0;
        const NodeId j = detail::best_swap(g, kind, space, seq, on_path, precision, k, out.value, &v);
        if (j >= 0) apply(k, j, v);
      }
    }
  }
  // the incremental precision drifts slightly; report the exact value
  out.path = encode_path(g, seq);
  out.value = path_objective(kind, space, seq);
  return out;
}

// ---------------------------------------------------------------------------
// Multimodal sensor selection

struct SensorAssignment {
  std::map<NodeId, double> s;       // relaxed importances on the path
  std::map<NodeId, double> chosen;  // upgraded nodes and their sigma
  int k = 0;
  double relaxed_value = 0.0;  // FW objective at s
  double relaxed_lower = 0.0;  // certified bound on the relaxed optimum
  double value = 0.0;          // phi of the rounded assignment
  int iterations = 0;
};

/// Sigma used at every path node under an assignment: the chosen ladder value
/// for upgraded nodes, sigma_max for the rest. Upgrades replace the base
/// measurement rather than adding one.
inline std::map<NodeId, double> path_sigmas(const SensorModel& model, std::span<const NodeId> path,
                                            const std::map<NodeId, double>& chosen) {
  std::map<NodeId, double> sig;
  for (NodeId v : path) {
    const auto it = chosen.find(v);
    sig[v] = it != chosen.end() ? it->second : model.sigma_max;
  }
  return sig;
}

inline double assignment_value(ObjectiveKind kind, const SensorModel& model, const Eigen::MatrixXd& prior_cov,
                               std::span<const NodeId> path, const std::map<NodeId, double>& chosen) {
  Eigen::MatrixXd precision = spd_inverse(prior_cov, "prior covariance");
  for (const auto& [v, sigma] : path_sigmas(model, path, chosen)) {
    const Eigen::VectorXd a = model.row(v);
    precision.noalias() += a * a.transpose() / (sigma * sigma);
  }
  return eval_precision(kind, precision);
}

/// Relax: s in {sum s = k, 0 <= s <= 1, s = 0 off the path} with
///   Sigma_s^{-1} = sigma_min^{-2} sum s_i a_i a_i^T + Sigma_p^{-1},
/// Sigma_p^{-1} the path posterior precision at sigma_max, solved by
/// Frank-Wolfe (top-k oracle). Round: rank path nodes by s (descending, lowest
/// id on ties) and hand out the ladder in ascending sigma order; a ladder
/// shorter than k repeats its last entry.
inline SensorAssignment select_sensors(const EnvGraph& g, const SensorModel& model, const Eigen::MatrixXd& prior_cov,
                                       ObjectiveKind kind, const PathEncoding& p, int k, std::vector<double> ladder,
                                       const FrankWolfeOptions& opt = {5000, 1e-12}) {
  require_static(kind);
  std::vector<NodeId> path = p.sequence;
  std::sort(path.begin(), path.end());
  path.erase(std::unique(path.begin(), path.end()), path.end());
  const int L = static_cast<int>(path.size());
  if (k < 1 || k > L) throw InvalidArgument("k must lie in [1, number of path nodes]");
  if (ladder.empty()) throw InvalidArgument("sensor ladder is empty");
  if (!std::is_sorted(ladder.begin(), ladder.end())) throw InvalidArgument("sensor ladder must be ascending");
  if (!(ladder.front() > 0.0)) throw InvalidArgument("sensor sigmas must be positive");
  if (g.size() != model.num_nodes()) throw InvalidArgument("sensor model does not match the graph");

  const double sigma_min = ladder.front();
  Eigen::MatrixXd base = spd_inverse(prior_cov, "prior covariance");
  Eigen::MatrixXd rows(L, model.dim());
  for (int q = 0; q < L; ++q) {
    const Eigen::VectorXd a = model.row(path[q]);
    base.noalias() += a * a.transpose() / (model.sigma_max * model.sigma_max);
    rows.row(q) = a.transpose() / sigma_min;
  }
  const DesignSpace space(rows, base);

  auto lmo = [&](const Eigen::VectorXd& grad) {
    std::vector<int> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return grad(a) < grad(b); });
    LmoResult out;
    out.atom = DesignWeights::Zero(L);
    for (int q = 0; q < k; ++q) out.atom(order[q]) = 1.0;
    out.lower = grad.dot(out.atom);
    return out;
  };
  const auto relax = frank_wolfe(kind, space, DesignWeights::Constant(L, static_cast<double>(k) / L), lmo, opt);

  SensorAssignment out;
  out.k = k;
  out.relaxed_value = relax.value;
  out.relaxed_lower = relax.lower;
  out.iterations = relax.iterations;
  std::vector<int> rank(L);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return relax.weights(a) > relax.weights(b); });
  for (int q = 0; q < L; ++q) out.s[path[q]] = relax.weights(q);
  for (int q = 0; q < k; ++q)
    out.chosen[path[rank[q]]] = ladder[std::min<std::size_t>(q, ladder.size() - 1)];
  out.value = assignment_value(kind, model, prior_cov, path, out.chosen);
  return out;
}

/// Sensor model with the assignment's sigmas written in (path nodes not
/// chosen get sigma_max).
inline SensorModel apply_assignment(SensorModel model, std::span<const NodeId> path, const SensorAssignment& sa) {
  for (const auto& [v, sigma] : path_sigmas(model, path, sa.chosen)) model.sigma(v) = sigma;
  for (const auto& [v, sigma] : sa.chosen) model.sigma_min = std::min(model.sigma_min, sigma);
  return model;
}

}  // namespace ipp
