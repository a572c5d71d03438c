#pragma once

// JSON persistence of instances and solve reports.

#include <fstream>
#include <string>
#include <vector>

#include "ipp/belief.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/objectives.hpp"
#include "ipp/report.hpp"
#include "json.hpp"

namespace ipp {

using Json = nlohmann::json;

/// Everything needed to rebuild the measurement model of a run.
struct Instance {
  EnvGraph graph;
  KernelSpec kernel;
  double noise_sigma = 1.0;
  double budget = 0.0;
  ObjectiveKind objective = ObjectiveKind::A;
  std::uint64_t seed = 0;
};

inline Json to_json(const EnvGraph& g) {
  Json j;
  j["nodes"] = Json::array();
  for (NodeId i = 0; i < g.size(); ++i) j["nodes"].push_back({{"id", i}, {"x", g.coord(i).x}, {"y", g.coord(i).y}});
  j["edges"] = Json::array();
  for (NodeId i = 0; i < g.size(); ++i)
    for (const Edge& e : g.out_edges(i)) j["edges"].push_back({{"i", i}, {"j", e.node}, {"w", e.weight}});
  j["start"] = g.start();
  j["goal"] = g.goal();
  j["prediction_points"] = Json::array();
  for (const Point& p : g.prediction_points()) j["prediction_points"].push_back({{"x", p.x}, {"y", p.y}});
  return j;
}

inline EnvGraph graph_from_json(const Json& j) {
  try {
    std::vector<Point> coords(j.at("nodes").size());
    for (const auto& node : j.at("nodes")) {
      const int id = node.at("id").get<int>();
      if (id < 0 || id >= static_cast<int>(coords.size())) throw InvalidArgument("node id out of range");
      coords[id] = {node.at("x").get<double>(), node.at("y").get<double>()};
    }
    std::vector<Point> points;
    for (const auto& p : j.at("prediction_points")) points.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
    EnvGraph g(std::move(coords), j.at("start").get<NodeId>(), j.at("goal").get<NodeId>(), std::move(points));
    for (const auto& e : j.at("edges")) g.add_edge(e.at("i").get<NodeId>(), e.at("j").get<NodeId>(), e.at("w").get<double>());
    return g;
  } catch (const Json::exception& ex) {
    throw InvalidArgument(std::string("malformed graph JSON: ") + ex.what());
  }
}

inline Json to_json(const Instance& inst) {
  Json j = to_json(inst.graph);
  j["kernel"] = {{"family", std::string(to_string(inst.kernel.family))}, {"length_scale", inst.kernel.length_scale}};
  j["noise_sigma"] = inst.noise_sigma;
  j["budget"] = inst.budget;
  j["objective"] = std::string(to_string(inst.objective));
  j["seed"] = inst.seed;
  return j;
}

inline Instance instance_from_json(const Json& j) {
  try {
    Instance inst{graph_from_json(j), {}, 1.0, 0.0, ObjectiveKind::A, 0};
    inst.kernel.family = kernel_family_from_string(j.at("kernel").at("family").get<std::string>());
    inst.kernel.length_scale = j.at("kernel").at("length_scale").get<double>();
    inst.noise_sigma = j.at("noise_sigma").get<double>();
    inst.budget = j.at("budget").get<double>();
    inst.objective = objective_from_string(j.at("objective").get<std::string>());
    inst.seed = j.at("seed").get<std::uint64_t>();
    return inst;
  } catch (const Json::exception& ex) {
    throw InvalidArgument(std::string("malformed instance JSON: ") + ex.what());
  }
}

inline Json to_json(const BoundReport& b) {
  return {{"lower", b.lower},
          {"upper", b.upper},
          {"gap_delta", b.gap_delta},
          {"gap_ratio_A", b.gap_ratio_A},
          {"gap_ratio_D", b.gap_ratio_D},
          {"relaxation_kind", std::string(to_string(b.relaxation_kind))},
          {"iterations", b.iterations},
          {"fw_gap", b.fw_gap}};
}

inline BoundReport bound_from_json(const Json& j) {
  BoundReport b;
  b.lower = j.at("lower").get<double>();
  b.upper = j.at("upper").get<double>();
  b.gap_delta = j.at("gap_delta").get<double>();
  b.gap_ratio_A = j.at("gap_ratio_A").get<double>();
  b.gap_ratio_D = j.at("gap_ratio_D").get<double>();
  b.relaxation_kind =
      j.at("relaxation_kind").get<std::string>() == "box_budget" ? RelaxationKind::box_budget : RelaxationKind::walk_polytope;
  b.iterations = j.at("iterations").get<int>();
  b.fw_gap = j.at("fw_gap").get<double>();
  return b;
}

inline Json to_json(const SolveReport& r) {
  Json j;
  j["method"] = r.method;
  j["objective"] = std::string(to_string(r.objective));
  j["path"] = r.path;
  j["objective_value"] = r.objective_value;
  j["cost"] = r.cost;
  j["wall_time_s"] = r.wall_time_s;
  j["truncated"] = r.truncated;
  j["replans"] = r.replans;
  j["net_ei_trace"] = r.net_ei_trace;
  j["bounds"] = r.bounds ? to_json(*r.bounds) : Json();
  Json sensors = Json::array();
  for (const auto& [node, sigma] : r.sensors) sensors.push_back({{"node", node}, {"sigma", sigma}});
  j["sensors"] = sensors;
  j["multimodal_value"] = r.multimodal_value ? Json(*r.multimodal_value) : Json();
  Json meas = Json::array();
  for (const auto& m : r.measurements) meas.push_back({{"node", m.node}, {"y", m.y}, {"sigma", m.sigma}});
  j["measurements"] = meas;
  j["agent_paths"] = r.agent_paths;
  j["error"] = r.error;
  return j;
}

inline SolveReport report_from_json(const Json& j) {
  try {
    SolveReport r;
    r.method = j.at("method").get<std::string>();
    r.objective = objective_from_string(j.at("objective").get<std::string>());
    r.path = j.at("path").get<std::vector<NodeId>>();
    r.objective_value = j.at("objective_value").get<double>();
    r.cost = j.at("cost").get<double>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.truncated = j.at("truncated").get<bool>();
    r.replans = j.at("replans").get<int>();
    r.net_ei_trace = j.at("net_ei_trace").get<std::vector<double>>();
    if (!j.at("bounds").is_null()) r.bounds = bound_from_json(j.at("bounds"));
    for (const auto& s : j.at("sensors")) r.sensors[s.at("node").get<NodeId>()] = s.at("sigma").get<double>();
    if (!j.at("multimodal_value").is_null()) r.multimodal_value = j.at("multimodal_value").get<double>();
    for (const auto& m : j.at("measurements"))
      r.measurements.push_back({m.at("node").get<NodeId>(), m.at("y").get<double>(), m.at("sigma").get<double>()});
    r.agent_paths = j.at("agent_paths").get<std::vector<std::vector<NodeId>>>();
    r.error = j.at("error").get<std::string>();
    return r;
  } catch (const Json::exception& ex) {
    throw InvalidArgument(std::string("malformed report JSON: ") + ex.what());
  }
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& ex) {
    throw InvalidArgument(path + ": " + ex.what());
  }
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << j.dump(1) << '\n';
}

}  // namespace ipp
