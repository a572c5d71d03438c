#pragma once

// Experiment runner: configuration, instance generation, ground-truth worlds,
// method dispatch, CSV/JSON output, gap studies and report validation.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ipp/belief.hpp"
#include "ipp/bounds.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/io.hpp"
#include "ipp/multiagent.hpp"
#include "ipp/objectives.hpp"
#include "ipp/planner.hpp"
#include "ipp/refine.hpp"
#include "ipp/report.hpp"

namespace ipp {

// ---------------------------------------------------------------------------
// Configuration

enum class PredictionLayout { random, lattice };
enum class Environment { grid, interest };

inline constexpr double kHighInterest = 0.4;

struct MultimodalSpec {
  int k = 3;
  std::vector<double> ladder;
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"random", "greedy", "aspo", "aspo_polish", "exact", "relax_round", "b_surrogate"};
  return names;
}

struct ExperimentConfig {
  Environment environment = Environment::grid;
  int grid_side = 5;
  ObjectiveKind objective = ObjectiveKind::A;
  double budget = 0.0;  // absolute; 0 means budget_multiple x shortest cost
  double budget_multiple = 2.0;
  std::vector<std::string> methods{"aspo", "greedy", "random"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double runtime_cap_s = 120.0;
  KernelSpec kernel{};
  int m = kDefaultPredictionPoints;
  double noise_sigma = 1.0;
  std::optional<MultimodalSpec> multimodal;
  int agents = 1;
  bool adaptive = false;
  int execute_steps = 1;
  int walk_memory = 3;
  PredictionLayout layout = PredictionLayout::random;
  EdgeWeightMode edge_weights = EdgeWeightMode::unit;
  int polish_n_loc = 500;
  bool compute_bounds = true;
  RelaxationKind relaxation = RelaxationKind::walk_polytope;
  int fw_iters = 200;
  int threads = 1;
  std::vector<double> gap_budgets{1.5, 2.0, 3.0};  // multiples of the shortest cost

  void validate() const {
    if (grid_side < 2) throw InvalidArgument("grid_side must be >= 2");
    if (budget < 0.0) throw InvalidArgument("budget must be >= 0");
    if (budget == 0.0 && !(budget_multiple >= 1.0)) throw InvalidArgument("budget_multiple must be >= 1");
    if (methods.empty()) throw InvalidArgument("no methods selected");
    for (const auto& name : methods)
      if (std::find(known_methods().begin(), known_methods().end(), name) == known_methods().end())
        throw InvalidArgument("unknown method: " + name);
    if (seeds.empty()) throw InvalidArgument("no seeds selected");
    if (!(runtime_cap_s > 0.0)) throw InvalidArgument("runtime_cap_s must be positive");
    if (!(kernel.length_scale > 0.0)) throw InvalidArgument("length_scale must be positive");
    if (m < 1) throw InvalidArgument("m must be >= 1");
    if (!(noise_sigma > 0.0)) throw InvalidArgument("noise_sigma must be positive");
    if (multimodal) {
      if (multimodal->k < 1) throw InvalidArgument("multimodal k must be >= 1");
      if (multimodal->ladder.empty()) throw InvalidArgument("multimodal ladder is empty");
      if (!std::is_sorted(multimodal->ladder.begin(), multimodal->ladder.end()) || !(multimodal->ladder.front() > 0.0))
        throw InvalidArgument("multimodal ladder must be positive and ascending");
      if (multimodal->ladder.back() > noise_sigma + 1e-12)
        throw InvalidArgument("multimodal ladder must not exceed noise_sigma (the base sensor)");
    }
    if (agents < 1) throw InvalidArgument("agents must be >= 1");
    if (execute_steps < 1) throw InvalidArgument("execute_steps must be >= 1");
    if (walk_memory < 0) throw InvalidArgument("walk_memory must be >= 0");
    if (polish_n_loc < 1) throw InvalidArgument("polish_n_loc must be >= 1");
    if (fw_iters < 1) throw InvalidArgument("fw_iters must be >= 1");
    if (threads < 0) throw InvalidArgument("threads must be >= 0");
    if (adaptive != (objective == ObjectiveKind::EI)) throw InvalidArgument("adaptive runs use objective ei and vice versa");
    for (double b : gap_budgets)
      if (!(b >= 1.0)) throw InvalidArgument("gap budgets are multiples of the shortest cost, >= 1");
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidArgument(key + ": not a number: " + v);
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidArgument(key + ": not an integer: " + v);
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument(key + ": not a boolean: " + v);
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

template <class T, class F>
std::string join(const std::vector<T>& items, char sep, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += fmt(items[i]);
  }
  return out;
}

}  // namespace detail

/// "0-24" or "1,5,9" (ranges and lists may be mixed: "0-3,10").
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : detail::split(text, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(static_cast<std::uint64_t>(detail::parse_int("seeds", part)));
      continue;
    }
    const auto lo = detail::parse_int("seeds", detail::trim(part.substr(0, dash)));
    const auto hi = detail::parse_int("seeds", detail::trim(part.substr(dash + 1)));
    if (lo < 0 || hi < lo) throw InvalidArgument("seeds: bad range " + part);
    for (auto s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (seeds.empty()) throw InvalidArgument("seeds: empty list");
  return seeds;
}

/// "k=3,ladder=0.1;0.2;0.5"
inline MultimodalSpec parse_multimodal(const std::string& text) {
  MultimodalSpec spec;
  bool have_k = false, have_ladder = false;
  for (const auto& part : detail::split(text, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw InvalidArgument("multimodal: expected key=value, got " + part);
    const std::string key = detail::trim(part.substr(0, eq));
    const std::string value = detail::trim(part.substr(eq + 1));
    if (key == "k") {
      spec.k = static_cast<int>(detail::parse_int("multimodal k", value));
      have_k = true;
    } else if (key == "ladder") {
      for (const auto& v : detail::split(value, ';')) spec.ladder.push_back(detail::parse_double("multimodal ladder", v));
      have_ladder = true;
    } else {
      throw InvalidArgument("multimodal: unknown key " + key);
    }
  }
  if (!have_k || !have_ladder) throw InvalidArgument("multimodal needs k=... and ladder=...");
  return spec;
}

/// Applies one key = value setting.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  if (key == "environment") {
    if (value == "grid") cfg.environment = Environment::grid;
    else if (value == "interest") cfg.environment = Environment::interest;
    else throw InvalidArgument("environment must be grid or interest");
  } else if (key == "grid_side") {
    cfg.grid_side = static_cast<int>(parse_int(key, value));
  } else if (key == "objective") {
    cfg.objective = objective_from_string(value);
    cfg.adaptive = cfg.objective == ObjectiveKind::EI;
  } else if (key == "budget") {
    cfg.budget = parse_double(key, value);
  } else if (key == "budget_multiple") {
    cfg.budget_multiple = parse_double(key, value);
  } else if (key == "methods") {
    cfg.methods = detail::split(value, ',');
  } else if (key == "seeds") {
    cfg.seeds = parse_seeds(value);
  } else if (key == "runtime_cap_s") {
    cfg.runtime_cap_s = parse_double(key, value);
  } else if (key == "kernel") {
    cfg.kernel.family = kernel_family_from_string(value);
  } else if (key == "length_scale") {
    cfg.kernel.length_scale = parse_double(key, value);
  } else if (key == "m") {
    cfg.m = static_cast<int>(parse_int(key, value));
  } else if (key == "noise_sigma") {
    cfg.noise_sigma = parse_double(key, value);
  } else if (key == "multimodal") {
    if (value.empty() || value == "none") cfg.multimodal.reset();
    else cfg.multimodal = parse_multimodal(value);
  } else if (key == "agents") {
    cfg.agents = static_cast<int>(parse_int(key, value));
  } else if (key == "adaptive") {
    cfg.adaptive = parse_bool(key, value);
    if (cfg.adaptive) cfg.objective = ObjectiveKind::EI;
  } else if (key == "execute_steps") {
    cfg.execute_steps = static_cast<int>(parse_int(key, value));
  } else if (key == "walk_memory") {
    cfg.walk_memory = static_cast<int>(parse_int(key, value));
  } else if (key == "prediction_layout") {
    if (value == "random") cfg.layout = PredictionLayout::random;
    else if (value == "lattice") cfg.layout = PredictionLayout::lattice;
    else throw InvalidArgument("prediction_layout must be random or lattice");
  } else if (key == "edge_weights") {
    if (value == "unit") cfg.edge_weights = EdgeWeightMode::unit;
    else if (value == "euclidean") cfg.edge_weights = EdgeWeightMode::euclidean;
    else throw InvalidArgument("edge_weights must be unit or euclidean");
  } else if (key == "polish_n_loc") {
    cfg.polish_n_loc = static_cast<int>(parse_int(key, value));
  } else if (key == "compute_bounds") {
    cfg.compute_bounds = parse_bool(key, value);
  } else if (key == "relaxation") {
    if (value == "walk_polytope") cfg.relaxation = RelaxationKind::walk_polytope;
    else if (value == "box_budget") cfg.relaxation = RelaxationKind::box_budget;
    else throw InvalidArgument("relaxation must be walk_polytope or box_budget");
  } else if (key == "fw_iters") {
    cfg.fw_iters = static_cast<int>(parse_int(key, value));
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(parse_int(key, value));
  } else if (key == "gap_budgets") {
    cfg.gap_budgets.clear();
    for (const auto& v : detail::split(value, ',')) cfg.gap_budgets.push_back(parse_double(key, v));
  } else {
    throw InvalidArgument("unknown config key: " + key);
  }
}

/// key = value lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  return parse_config(in);
}

/// Canonical one-line form; parse_config on it (with ';' as line separator)
/// reproduces the config.
inline std::string echo_config(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv{
      {"environment", cfg.environment == Environment::grid ? "grid" : "interest"},
      {"grid_side", std::to_string(cfg.grid_side)},
      {"objective", std::string(to_string(cfg.objective))},
      {"budget", detail::format_double(cfg.budget)},
      {"budget_multiple", detail::format_double(cfg.budget_multiple)},
      {"methods", detail::join(cfg.methods, ',', [](const std::string& s) { return s; })},
      {"seeds", detail::join(cfg.seeds, ',', [](std::uint64_t s) { return std::to_string(s); })},
      {"runtime_cap_s", detail::format_double(cfg.runtime_cap_s)},
      {"kernel", cfg.kernel.family == KernelFamily::squared_exponential ? "se" : "matern32"},
      {"length_scale", detail::format_double(cfg.kernel.length_scale)},
      {"m", std::to_string(cfg.m)},
      {"noise_sigma", detail::format_double(cfg.noise_sigma)},
      {"multimodal", cfg.multimodal ? "k=" + std::to_string(cfg.multimodal->k) + ",ladder=" +
                                          detail::join(cfg.multimodal->ladder, ';', detail::format_double)
                                    : "none"},
      {"agents", std::to_string(cfg.agents)},
      {"adaptive", cfg.adaptive ? "true" : "false"},
      {"execute_steps", std::to_string(cfg.execute_steps)},
      {"walk_memory", std::to_string(cfg.walk_memory)},
      {"prediction_layout", cfg.layout == PredictionLayout::random ? "random" : "lattice"},
      {"edge_weights", cfg.edge_weights == EdgeWeightMode::unit ? "unit" : "euclidean"},
      {"polish_n_loc", std::to_string(cfg.polish_n_loc)},
      {"compute_bounds", cfg.compute_bounds ? "true" : "false"},
      {"relaxation", std::string(to_string(cfg.relaxation))},
      {"fw_iters", std::to_string(cfg.fw_iters)},
      {"threads", std::to_string(cfg.threads)},
      {"gap_budgets", detail::join(cfg.gap_budgets, ',', detail::format_double)},
  };
  return detail::join(kv, ';', [](const auto& p) { return p.first + "=" + p.second; });
}

// ---------------------------------------------------------------------------
// Ground truth

struct GroundTruth {
  Eigen::VectorXd values;  // one per node
};

/// iid U(0,1) values per node, used as observations (noise `conditioning_sigma`)
/// to condition a GP with kernel k over the node locations; one draw from the
/// resulting posterior is the map. Factorization failures retry with more jitter.
inline GroundTruth sample_ground_truth(const EnvGraph& g, const KernelSpec& k, std::uint64_t seed,
                                       double conditioning_sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = g.size();
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = uniform(rng);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = normal(rng);

  const Eigen::MatrixXd K = kernel_matrix(g.coords(), g.coords(), k);
  Eigen::MatrixXd noisy = K;
  noisy.diagonal().array() += conditioning_sigma * conditioning_sigma;
  const auto llt = factorize_spd(noisy, "ground-truth Gram matrix");
  const Eigen::VectorXd mean = K * llt.solve(y);
  Eigen::MatrixXd cov = K - K * llt.solve(K);
  cov = 0.5 * (cov + cov.transpose());
  for (double jitter : {1e-10, 1e-8, 1e-6, 1e-4}) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += jitter * std::max(1.0, cov.diagonal().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> f(c);
    if (f.info() == Eigen::Success) return {mean + f.matrixL() * z};
  }
  throw NumericalError("ground-truth posterior covariance is not positive definite");
}

/// Average of 8-12 random 2-D Gaussian densities on the unit square, evaluated
/// at the node coordinates (scaled to the unit square) and min-max normalized
/// to [0, 1].
inline GroundTruth sample_interest_map(const EnvGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(8, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.05, 0.25);
  std::uniform_real_distribution<double> corr(-0.5, 0.5);
  double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf;
  for (const Point& p : g.coords()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double wx = xmax > xmin ? xmax - xmin : 1.0, wy = ymax > ymin ? ymax - ymin : 1.0;
  const int components = count(rng);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.size());
  for (int c = 0; c < components; ++c) {
    const double mx = unit(rng), my = unit(rng), sx = scale(rng), sy = scale(rng), rho = corr(rng);
    const double norm = 1.0 / (2.0 * std::numbers::pi * sx * sy * std::sqrt(1.0 - rho * rho));
    for (NodeId i = 0; i < g.size(); ++i) {
      const double dx = ((g.coord(i).x - xmin) / wx - mx) / sx, dy = ((g.coord(i).y - ymin) / wy - my) / sy;
      const double q = (dx * dx - 2.0 * rho * dx * dy + dy * dy) / (1.0 - rho * rho);
      v(i) += norm * std::exp(-0.5 * q) / components;
    }
  }
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  if (hi > lo) v = (v.array() - lo) / (hi - lo);
  else v.setZero();
  return {v};
}

/// Sum of posterior variances over prediction points whose interest is at
/// least `threshold` (prediction points coincide with the nodes).
inline double high_interest_trace(const Belief& b, const GroundTruth& interest, double threshold = kHighInterest) {
  if (interest.values.size() != b.dim()) throw InvalidArgument("interest map must cover the prediction points");
  const Eigen::MatrixXd cov = b.posterior_cov();
  double t = 0.0;
  for (Eigen::Index j = 0; j < interest.values.size(); ++j)
    if (interest.values(j) >= threshold) t += cov(j, j);
  return t;
}

// ---------------------------------------------------------------------------
// Instances

/// Uniform points in [0, extent]^2 at least `min_separation` apart (the
/// separation is dropped after too many rejections).
inline std::vector<Point> random_prediction_points(double extent, int m, std::uint64_t seed, double min_separation = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, extent);
  std::vector<Point> points;
  int rejections = 0;
  while (static_cast<int>(points.size()) < m) {
    const Point p{coord(rng), coord(rng)};
    const bool clear = std::all_of(points.begin(), points.end(), [&](const Point& q) { return distance(p, q) >= min_separation; });
    if (clear || rejections > 10000) {
      points.push_back(p);
    } else {
      ++rejections;
    }
  }
  return points;
}

struct ExperimentInstance {
  Instance instance;
  Eigen::MatrixXd prior_cov;
  SensorModel model;
  Belief prior;
  World world;
  std::optional<GroundTruth> truth;     // adaptive runs
  std::optional<GroundTruth> interest;  // interest environment
};

/// Prior, sensor model and world of a stored instance. The world is silent
/// unless a ground truth is supplied.
inline ExperimentInstance assemble_instance(Instance inst) {
  ExperimentInstance ex;
  const EnvGraph& g = inst.graph;
  ex.prior_cov = build_prior(g.prediction_points(), inst.kernel);
  if (g.num_prediction_points() == g.size() && g.prediction_points() == g.coords()) {
    ex.model = SensorModel::uniform(Eigen::MatrixXd::Identity(g.size(), g.size()), inst.noise_sigma);
  } else {
    ex.model = default_characterization(g, ex.prior_cov, inst.kernel, inst.noise_sigma);
  }
  ex.prior = Belief::zero_mean(ex.prior_cov);
  ex.world = silent_world();
  ex.instance = std::move(inst);
  return ex;
}

/// y = truth(node) + noise(node), the noise drawn once per node from the seed
/// so every method sees the same values.
inline World truth_world(const GroundTruth& truth, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, sigma);
  Eigen::VectorXd y(truth.values.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = truth.values(i) + noise(rng);
  return [y](NodeId node) { return y(node); };
}

inline ExperimentInstance make_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  Instance inst;
  inst.kernel = cfg.kernel;
  inst.noise_sigma = cfg.noise_sigma;
  inst.objective = cfg.objective;
  inst.seed = seed;
  if (cfg.environment == Environment::interest) {
    // unit square, every node a prediction point
    const double spacing = 1.0 / (cfg.grid_side - 1);
    inst.graph = build_grid(cfg.grid_side, EdgeWeightMode::euclidean, spacing, cfg.grid_side * cfg.grid_side);
    inst.graph.set_prediction_points(inst.graph.coords());
  } else {
    inst.graph = build_grid(cfg.grid_side, cfg.edge_weights, 1.0, cfg.m);
    if (cfg.layout == PredictionLayout::random)
      inst.graph.set_prediction_points(random_prediction_points(cfg.grid_side - 1.0, cfg.m, seed));
  }
  const double shortest = shortest_costs_to_goal(inst.graph)[inst.graph.start()];
  inst.budget = cfg.budget > 0.0 ? cfg.budget : cfg.budget_multiple * shortest;
  ExperimentInstance ex = assemble_instance(std::move(inst));
  if (cfg.environment == Environment::interest) ex.interest = sample_interest_map(ex.instance.graph, seed);
  if (cfg.adaptive) {
    ex.truth = sample_ground_truth(ex.instance.graph, cfg.kernel, seed);
    ex.world = truth_world(*ex.truth, cfg.noise_sigma, seed);
  }
  return ex;
}

inline PlannerConfig planner_config(const ExperimentConfig& cfg, const ExperimentInstance& ex, std::uint64_t seed) {
  PlannerConfig pc;
  pc.objective = cfg.objective;
  pc.budget = ex.instance.budget;
  pc.execute_steps = cfg.execute_steps;
  pc.walk_memory = cfg.walk_memory;
  pc.runtime_cap_s = cfg.runtime_cap_s;
  pc.rng_seed = seed;
  return pc;
}

// ---------------------------------------------------------------------------
// Running methods

inline SolveReport static_path_report(const std::string& method, ObjectiveKind kind, const ExperimentInstance& ex,
                                      const PathEncoding& p, double wall, bool truncated) {
  SolveReport r;
  r.method = method;
  r.objective = kind;
  r.path = p.sequence;
  r.cost = p.total_cost;
  r.wall_time_s = wall;
  r.truncated = truncated;
  r.objective_value = path_objective(kind, DesignSpace(ex.model, ex.prior_cov), p.sequence);
  for (NodeId v : p.sequence) r.measurements.push_back({v, 0.0, ex.model.sigma(v)});
  return r;
}

/// Runs one method on an instance. Multimodal selection (static objectives)
/// is applied to the resulting path.
inline SolveReport run_method(const std::string& method, const ExperimentConfig& cfg, const ExperimentInstance& ex,
                              std::uint64_t seed) {
  const EnvGraph& g = ex.instance.graph;
  const PlannerConfig pc = planner_config(cfg, ex, seed);
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport r;
  if (method == "aspo" && cfg.agents > 1) {
    auto fleet = plan_fleet(g, ex.model, ex.prior, pc, cfg.agents, ex.world);
    r = fleet.reports.front();
    r.method = "aspo";
    r.objective_value = fleet.joint_objective;
    r.cost = 0.0;
    for (const auto& a : fleet.reports) {
      r.agent_paths.push_back(a.path);
      r.cost += a.cost;
      r.truncated = r.truncated || a.truncated;
    }
  } else if (method == "aspo") {
    r = aspo_plan(g, ex.model, ex.prior, pc, ex.world);
  } else if (method == "greedy") {
    r = greedy_baseline(g, ex.model, ex.prior, pc, ex.world);
  } else if (method == "random") {
    r = random_baseline(g, ex.model, ex.prior, pc, ex.world);
  } else if (method == "aspo_polish") {
    require_static(cfg.objective);
    const auto base = aspo_plan(g, ex.model, ex.prior, pc, ex.world);
    const auto polished = polish(g, ex.model, ex.prior_cov, cfg.objective, encode_path(g, base.path),
                                 SwapBudget{cfg.polish_n_loc, seed, false});
    r = static_path_report(method, cfg.objective, ex, polished.path, elapsed_seconds(t0), base.truncated);
  } else if (method == "exact") {
    const auto res = exact_small(g, ex.model, ex.prior_cov, cfg.objective, pc.budget, cfg.runtime_cap_s);
    r = static_path_report(method, cfg.objective, ex, res.path, elapsed_seconds(t0), res.truncated);
  } else if (method == "b_surrogate") {
    require_static(cfg.objective);
    const auto res = exact_small(g, ex.model, ex.prior_cov, ObjectiveKind::B, pc.budget, cfg.runtime_cap_s);
    r = static_path_report(method, cfg.objective, ex, res.path, elapsed_seconds(t0), res.truncated);
  } else if (method == "relax_round") {
    const auto p = relax_and_round(g, ex.model, ex.prior_cov, cfg.objective, pc.budget, FrankWolfeOptions{cfg.fw_iters, 1e-6});
    r = static_path_report(method, cfg.objective, ex, p, elapsed_seconds(t0), false);
  } else {
    throw InvalidArgument("unknown method: " + method);
  }
  r.method = method;
  if (cfg.multimodal && is_static(cfg.objective)) {
    const auto sa = select_sensors(g, ex.model, ex.prior_cov, cfg.objective, encode_path(g, r.path), cfg.multimodal->k,
                                   cfg.multimodal->ladder);
    r.sensors = sa.chosen;
    r.multimodal_value = sa.value;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string run_id;
  std::string method;
  std::uint64_t seed = 0;
  int n = 0;
  int m = 0;
  double budget = 0.0;
  ObjectiveKind objective = ObjectiveKind::A;
  double objective_value = std::nan("");
  double runtime_s = 0.0;
  std::optional<BoundReport> bounds;
  bool truncated = false;
  double cost = 0.0;
  int path_nodes = 0;
  std::optional<double> multimodal_value;
  std::optional<double> final_net_ei;        // normalized by graph size
  std::optional<double> high_interest_trace;  // interest environment
  std::string status = "ok";
  std::string error;
  std::string config;
};

struct MethodStats {
  std::string method;
  int count = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MethodStats summarize(const std::string& method, const std::vector<double>& values) {
  MethodStats s{method, static_cast<int>(values.size()), 0.0, 0.0};
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / (values.size() - 1) / values.size());
  }
  return s;
}

struct ExperimentSummary {
  std::vector<ResultRow> rows;
  std::vector<SolveReport> reports;  // parallel to rows
  std::vector<MethodStats> stats;    // over rows with status ok, in method order
};

inline std::vector<MethodStats> method_stats(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  std::vector<MethodStats> stats;
  for (const auto& method : cfg.methods) {
    std::vector<double> values;
    for (const auto& row : rows)
      if (row.method == method && row.status == "ok") values.push_back(row.objective_value);
    stats.push_back(summarize(method, values));
  }
  return stats;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline const char* kResultsHeader =
    "run_id,method,seed,n,m,budget,objective,objective_value,runtime_s,lower_bound,gap_delta,gap_ratio_A,gap_ratio_D,"
    "relaxation_kind,truncated,cost,path_nodes,multimodal_value,final_net_ei,high_interest_trace,status,error,config";

inline std::string csv_line(const ResultRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
  std::vector<std::string> f{r.run_id,
                             r.method,
                             std::to_string(r.seed),
                             std::to_string(r.n),
                             std::to_string(r.m),
                             detail::format_double(r.budget),
                             std::string(to_string(r.objective)),
                             detail::format_double(r.objective_value),
                             detail::format_double(r.runtime_s),
                             r.bounds ? detail::format_double(r.bounds->lower) : "",
                             r.bounds ? detail::format_double(r.bounds->gap_delta) : "",
                             r.bounds ? detail::format_double(r.bounds->gap_ratio_A) : "",
                             r.bounds ? detail::format_double(r.bounds->gap_ratio_D) : "",
                             r.bounds ? std::string(to_string(r.bounds->relaxation_kind)) : "",
                             r.truncated ? "true" : "false",
                             detail::format_double(r.cost),
                             std::to_string(r.path_nodes),
                             opt(r.multimodal_value),
                             opt(r.final_net_ei),
                             opt(r.high_interest_trace),
                             r.status,
                             r.error,
                             r.config};
  return detail::join(f, ',', csv_escape);
}

inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << kResultsHeader << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

namespace detail {

/// All methods on one seed: instance, optional bound, one row per method.
inline std::vector<std::pair<ResultRow, SolveReport>> run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                                               std::optional<ExperimentInstance>& instance_out) {
  std::vector<std::pair<ResultRow, SolveReport>> out;
  const std::string echo = echo_config(cfg);
  auto base_row = [&](const std::string& method) {
    ResultRow row;
    row.method = method;
    row.seed = seed;
    row.run_id = method + "-s" + std::to_string(seed);
    row.objective = cfg.objective;
    row.config = echo;
    return row;
  };
  std::optional<ExperimentInstance> ex;
  std::optional<RelaxationResult> relax;
  std::string instance_error;
  try {
    ex = make_instance(cfg, seed);
    if (cfg.compute_bounds && is_static(cfg.objective) && cfg.agents == 1)
      relax = relax_lower_bound(ex->instance.graph, ex->model, ex->prior_cov, cfg.objective, ex->instance.budget,
                                cfg.relaxation, FrankWolfeOptions{cfg.fw_iters, 1e-6});
  } catch (const std::exception& e) {
    instance_error = e.what();
  }
  for (const auto& method : cfg.methods) {
    ResultRow row = base_row(method);
    SolveReport report;
    report.method = method;
    report.objective = cfg.objective;
    try {
      if (!ex) throw InvalidArgument("instance: " + instance_error);
      row.n = ex->instance.graph.size();
      row.m = ex->instance.graph.num_prediction_points();
      row.budget = ex->instance.budget;
      report = run_method(method, cfg, *ex, seed);
      if (relax) report.bounds = bound_report(report.objective_value, *relax, row.m);
      row.objective_value = report.objective_value;
      row.runtime_s = report.wall_time_s;
      row.bounds = report.bounds;
      row.truncated = report.truncated;
      row.cost = report.cost;
      row.path_nodes = static_cast<int>(report.path.size());
      row.multimodal_value = report.multimodal_value;
      if (!report.net_ei_trace.empty()) row.final_net_ei = report.net_ei_trace.back();
      if (ex->interest) {
        Belief b = ex->prior;
        for (const auto& meas : report.measurements) b.absorb(meas.node, meas.y, meas.sigma, ex->model);
        row.high_interest_trace = high_interest_trace(b, *ex->interest);
      }
    } catch (const std::exception& e) {
      row.status = "error";
      row.error = e.what();
      report.error = e.what();
    }
    out.emplace_back(std::move(row), std::move(report));
  }
  instance_out = std::move(ex);
  return out;
}

}  // namespace detail

/// Every (method, seed) pair; seeds are spread over a worker pool and results
/// collected in seed order. With a non-empty out_dir writes results.csv,
/// reports/<run-id>.json and instance/<run-id>.json.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = {}) {
  cfg.validate();
  const std::size_t S = cfg.seeds.size();
  std::vector<std::vector<std::pair<ResultRow, SolveReport>>> per_seed(S);
  std::vector<std::optional<ExperimentInstance>> instances(S);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < S; i = next++) per_seed[i] = detail::run_seed(cfg, cfg.seeds[i], instances[i]);
  };
  const int threads =
      std::max(1, std::min<int>(static_cast<int>(S), cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentSummary summary;
  for (auto& seed_rows : per_seed)
    for (auto& [row, report] : seed_rows) {
      summary.rows.push_back(std::move(row));
      summary.reports.push_back(std::move(report));
    }
  summary.stats = method_stats(cfg, summary.rows);

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "reports");
    fs::create_directories(fs::path(out_dir) / "instance");
    write_results_csv((fs::path(out_dir) / "results.csv").string(), summary.rows);
    std::size_t k = 0;
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t q = 0; q < per_seed[i].size(); ++q, ++k) {
        const auto& row = summary.rows[k];
        Json report = to_json(summary.reports[k]);
        report["run_id"] = row.run_id;
        report["seed"] = row.seed;
        report["config"] = row.config;
        write_json((fs::path(out_dir) / "reports" / (row.run_id + ".json")).string(), report);
        if (instances[i]) write_json((fs::path(out_dir) / "instance" / (row.run_id + ".json")).string(), to_json(instances[i]->instance));
      }
    }
  }
  return summary;
}

inline void print_summary(std::ostream& os, const ExperimentSummary& summary) {
  os << std::left << std::setw(14) << "method" << std::setw(8) << "runs" << "objective (mean +- stderr)\n";
  for (const auto& s : summary.stats)
    os << std::left << std::setw(14) << s.method << std::setw(8) << s.count << s.mean << " +- " << s.stderr_ << '\n';
  int errors = 0;
  for (const auto& r : summary.rows) errors += r.status != "ok";
  if (errors) os << errors << " run(s) failed; see the error column\n";
}

// ---------------------------------------------------------------------------
// Gap study

struct GapRow {
  std::uint64_t seed = 0;
  double budget_multiple = 0.0;
  double budget = 0.0;
  BoundReport bound;
  double runtime_s = 0.0;
  std::string status = "ok";
  std::string error;
};

struct GapStudy {
  std::vector<GapRow> rows;
  std::vector<double> budgets;       // multiples, in study order
  std::vector<double> mean_ratio;    // per budget: m*delta/l (A), e^delta (D), delta (B)
  std::vector<double> median_ratio;  // per budget
  double nonincreasing_fraction = 1.0;
};

inline double gap_metric(ObjectiveKind kind, const BoundReport& b) {
  if (kind == ObjectiveKind::A) return b.gap_ratio_A;
  if (kind == ObjectiveKind::D) return b.gap_ratio_D;
  return b.gap_delta;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// ASPO against the relaxation bound for every (budget multiple, seed).
inline GapStudy gap_study(ExperimentConfig cfg, const std::vector<double>& budget_multiples, const std::string& out_dir = {}) {
  require_static(cfg.objective);
  cfg.budget = 0.0;
  cfg.methods = {"aspo"};
  cfg.validate();
  GapStudy study;
  study.budgets = budget_multiples;
  for (double mult : budget_multiples) {
    cfg.budget_multiple = mult;
    std::vector<double> ratios;
    for (std::uint64_t seed : cfg.seeds) {
      GapRow row;
      row.seed = seed;
      row.budget_multiple = mult;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto ex = make_instance(cfg, seed);
        row.budget = ex.instance.budget;
        const auto r = aspo_plan(ex.instance.graph, ex.model, ex.prior, planner_config(cfg, ex, seed), ex.world);
        const auto relax = relax_lower_bound(ex.instance.graph, ex.model, ex.prior_cov, cfg.objective, row.budget,
                                             cfg.relaxation, FrankWolfeOptions{cfg.fw_iters, 1e-6});
        row.bound = bound_report(r.objective_value, relax, ex.instance.graph.num_prediction_points());
        ratios.push_back(gap_metric(cfg.objective, row.bound));
      } catch (const std::exception& e) {
        row.status = "error";
        row.error = e.what();
      }
      row.runtime_s = elapsed_seconds(t0);
      study.rows.push_back(row);
    }
    study.median_ratio.push_back(median(ratios));
    study.mean_ratio.push_back(summarize("", ratios).mean);
  }
  int steps = 0, nonincreasing = 0;
  for (std::size_t i = 1; i < study.mean_ratio.size(); ++i, ++steps)
    nonincreasing += study.mean_ratio[i] <= study.mean_ratio[i - 1] + 1e-12;
  study.nonincreasing_fraction = steps ? static_cast<double>(nonincreasing) / steps : 1.0;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out((std::filesystem::path(out_dir) / "gap.csv").string());
    if (!out) throw InvalidArgument("cannot write gap.csv");
    out << "seed,budget_multiple,budget,objective,upper,lower,gap_delta,gap_ratio_A,gap_ratio_D,relaxation_kind,fw_gap,"
           "runtime_s,status,error\n";
    for (const auto& r : study.rows) {
      std::vector<std::string> f{std::to_string(r.seed),
                                 detail::format_double(r.budget_multiple),
                                 detail::format_double(r.budget),
                                 std::string(to_string(cfg.objective)),
                                 detail::format_double(r.bound.upper),
                                 detail::format_double(r.bound.lower),
                                 detail::format_double(r.bound.gap_delta),
                                 detail::format_double(r.bound.gap_ratio_A),
                                 detail::format_double(r.bound.gap_ratio_D),
                                 std::string(to_string(r.bound.relaxation_kind)),
                                 detail::format_double(r.bound.fw_gap),
                                 detail::format_double(r.runtime_s),
                                 r.status,
                                 r.error};
      out << detail::join(f, ',', csv_escape) << '\n';
    }
  }
  return study;
}

// ---------------------------------------------------------------------------
// Validation of stored runs

struct ValidationResult {
  int checked = 0;
  int skipped = 0;  // runs stored with an error
  std::vector<std::string> failures;
  [[nodiscard]] bool ok() const { return failures.empty(); }
};

/// Re-checks one stored run: every path is feasible on the stored instance and
/// the objective recomputed from the stored measurements matches.
inline std::vector<std::string> check_report(const Instance& inst, const SolveReport& r) {
  std::vector<std::string> problems;
  const ExperimentInstance ex = assemble_instance(inst);
  std::vector<std::vector<NodeId>> paths = r.agent_paths;
  if (paths.empty()) paths.push_back(r.path);
  for (const auto& path : paths) {
    const auto verdict = validate_path(ex.instance.graph, encode_path(ex.instance.graph, path), inst.budget);
    if (!verdict.valid) {
      std::string what = "infeasible path:";
      for (Constraint c : verdict.violations) what += " " + std::string(to_string(c));
      problems.push_back(what);
    }
  }
  Belief b = ex.prior;
  for (const auto& meas : r.measurements) b.absorb(meas.node, meas.y, meas.sigma, ex.model);
  const double value = detail::final_objective(r.objective, b, ex.model);
  if (std::abs(value - r.objective_value) > 1e-8 * std::max(1.0, std::abs(value)))
    problems.push_back("objective mismatch: stored " + detail::format_double(r.objective_value) + ", recomputed " +
                       detail::format_double(value));
  if (r.multimodal_value) {
    std::vector<NodeId> nodes = r.path;
    const double mm = assignment_value(r.objective, ex.model, ex.prior_cov, nodes, r.sensors);
    if (std::abs(mm - *r.multimodal_value) > 1e-8 * std::max(1.0, std::abs(mm)))
      problems.push_back("multimodal objective mismatch");
  }
  return problems;
}

inline ValidationResult validate_reports(const std::string& out_dir) {
  namespace fs = std::filesystem;
  ValidationResult result;
  const fs::path reports = fs::path(out_dir) / "reports";
  if (!fs::is_directory(reports)) throw InvalidArgument("no reports/ directory under " + out_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(reports))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string id = file.stem().string();
    try {
      const SolveReport r = report_from_json(read_json(file.string()));
      if (!r.error.empty()) {
        ++result.skipped;
        continue;
      }
      const Instance inst = instance_from_json(read_json((fs::path(out_dir) / "instance" / (id + ".json")).string()));
      ++result.checked;
      for (const auto& p : check_report(inst, r)) result.failures.push_back(id + ": " + p);
    } catch (const std::exception& e) {
      result.failures.push_back(id + ": " + e.what());
    }
  }
  return result;
}

}  // namespace ipp
