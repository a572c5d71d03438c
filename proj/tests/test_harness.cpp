#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace ipp;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ipp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// drops the runtime column (index 8) from a results row
std::string without_runtime(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      f.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  f.push_back(cur);
  if (f.size() > 8) f.erase(f.begin() + 8);
  std::string out;
  for (const auto& s : f) out += s + "|";
  return out;
}

double lag_one_autocorrelation(const Eigen::VectorXd& v, int side) {
  const double mean = v.mean();
  double num = 0.0, den = 0.0;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c + 1 < side; ++c) num += (v(r * side + c) - mean) * (v(r * side + c + 1) - mean);
  for (Eigen::Index i = 0; i < v.size(); ++i) den += (v(i) - mean) * (v(i) - mean);
  return num / den;
}

}  // namespace

TEST(Config, DefaultsFollowTheExperimentalSetup) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.runtime_cap_s, 120.0);
  EXPECT_EQ(cfg.kernel.length_scale, 1.0);
  EXPECT_EQ(cfg.kernel.family, KernelFamily::squared_exponential);
  EXPECT_EQ(cfg.m, 20);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParsesKeyValueText) {
  const auto cfg = parse(
      "# comment\n"
      "grid_side = 7\n"
      "objective = d   # trailing comment\n"
      "methods = aspo, random\n"
      "seeds = 0-2,9\n"
      "multimodal = k=2,ladder=0.1;0.5\n");
  EXPECT_EQ(cfg.grid_side, 7);
  EXPECT_EQ(cfg.objective, ObjectiveKind::D);
  EXPECT_EQ(cfg.methods, (std::vector<std::string>{"aspo", "random"}));
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2, 9}));
  ASSERT_TRUE(cfg.multimodal);
  EXPECT_EQ(cfg.multimodal->k, 2);
  EXPECT_EQ(cfg.multimodal->ladder, (std::vector<double>{0.1, 0.5}));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse("colour = blue\n"), InvalidArgument);
  EXPECT_THROW(parse("grid_side = seven\n"), InvalidArgument);
  EXPECT_THROW(parse("just text\n"), InvalidArgument);
  EXPECT_THROW(parse("methods = aspo,teleport\n").validate(), InvalidArgument);
  EXPECT_THROW(parse("grid_side = 1\n").validate(), InvalidArgument);
  EXPECT_THROW(parse("multimodal = k=2,ladder=0.5;0.1\n").validate(), InvalidArgument);
}

TEST(Config, EchoRoundTrips) {
  auto cfg = parse("grid_side = 6\nobjective = ei\nseeds = 3,4\nmultimodal = none\nlength_scale = 0.7\n");
  const std::string echo = echo_config(cfg);
  std::string lines = echo;
  std::replace(lines.begin(), lines.end(), ';', '\n');
  // the ladder uses ';' too; there is none here
  const auto again = parse(lines);
  EXPECT_EQ(echo_config(again), echo);
}

TEST(GroundTruth, DeterministicPerSeed) {
  const EnvGraph g = build_grid(6);
  const auto a = sample_ground_truth(g, KernelSpec{}, 1);
  const auto b = sample_ground_truth(g, KernelSpec{}, 1);
  const auto c = sample_ground_truth(g, KernelSpec{}, 2);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_TRUE(a.values.allFinite());
}

TEST(GroundTruth, LongerLengthScaleIsSmoother) {
  const EnvGraph g = build_grid(10);
  double smooth = 0.0, rough = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    smooth += lag_one_autocorrelation(sample_ground_truth(g, KernelSpec{KernelFamily::squared_exponential, 3.0}, s).values, 10);
    rough += lag_one_autocorrelation(sample_ground_truth(g, KernelSpec{KernelFamily::squared_exponential, 0.1}, s).values, 10);
  }
  EXPECT_GT(smooth, rough);
}

TEST(InterestMap, DeterministicNonNegativeAndUsuallyInteresting) {
  const EnvGraph g = build_grid(20, EdgeWeightMode::euclidean, 1.0 / 19.0);
  EXPECT_EQ(sample_interest_map(g, 5).values, sample_interest_map(g, 5).values);
  int with_high = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = sample_interest_map(g, s);
    EXPECT_GE(m.values.minCoeff(), 0.0);
    with_high += m.values.maxCoeff() >= kHighInterest;
  }
  EXPECT_GE(with_high, 95);
}

TEST(RunExperiment, RandomOnlyGivesOneFeasibleRowPerSeed) {
  auto cfg = parse("grid_side = 4\nmethods = random\nseeds = 0-2\ncompute_bounds = false\n");
  const auto summary = run_experiment(cfg);
  ASSERT_EQ(summary.rows.size(), 3u);
  for (std::size_t q = 0; q < 3; ++q) {
    EXPECT_EQ(summary.rows[q].status, "ok");
    const auto inst = make_instance(cfg, summary.rows[q].seed);
    EXPECT_TRUE(validate_path(inst.instance.graph, encode_path(inst.instance.graph, summary.reports[q].path),
                              inst.instance.budget)
                    .valid);
  }
}

TEST(RunExperiment, FailuresBecomeRowsNotAborts) {
  auto cfg = parse("grid_side = 3\nmethods = aspo, exact\nseeds = 0\nbudget = 4\nobjective = ei\ncompute_bounds = false\n");
  const auto summary = run_experiment(cfg);
  ASSERT_EQ(summary.rows.size(), 2u);
  EXPECT_EQ(summary.rows[0].status, "ok");
  EXPECT_EQ(summary.rows[1].status, "error");
  EXPECT_FALSE(summary.rows[1].error.empty());
}

TEST(RunExperiment, AdaptiveRunsLogNormalizedNetEi) {
  auto cfg = parse("grid_side = 4\nmethods = aspo\nseeds = 0\nobjective = ei\n");
  const auto summary = run_experiment(cfg);
  ASSERT_EQ(summary.rows.front().status, "ok");
  ASSERT_TRUE(summary.rows.front().final_net_ei);
  EXPECT_NEAR(*summary.rows.front().final_net_ei * 16, summary.rows.front().objective_value, 1e-12);
}

TEST(RunExperiment, OutputsRoundTripAndValidate) {
  const auto dir = temp_dir("outputs");
  auto cfg = parse(
      "grid_side = 4\nmethods = aspo, greedy, random, exact, relax_round, b_surrogate, aspo_polish\nseeds = 0-1\n"
      "multimodal = k=2,ladder=0.2;0.5\n");
  const auto summary = run_experiment(cfg, dir.string());
  for (const auto& row : summary.rows) EXPECT_EQ(row.status, "ok") << row.method << ": " << row.error;
  EXPECT_EQ(read_lines(dir / "results.csv").size(), summary.rows.size() + 1);
  const auto v = validate_reports(dir.string());
  EXPECT_EQ(v.checked, static_cast<int>(summary.rows.size()));
  EXPECT_TRUE(v.ok()) << (v.failures.empty() ? "" : v.failures.front());
  for (const auto& row : summary.rows) {
    ASSERT_TRUE(row.bounds);
    EXPECT_LE(row.bounds->lower, row.objective_value + 1e-7);
    ASSERT_TRUE(row.multimodal_value);
  }
}

TEST(RunExperiment, ValidationCatchesTampering) {
  const auto dir = temp_dir("tamper");
  auto cfg = parse("grid_side = 4\nmethods = aspo\nseeds = 0\ncompute_bounds = false\n");
  run_experiment(cfg, dir.string());
  const auto file = dir / "reports" / "aspo-s0.json";
  auto j = read_json(file.string());
  j["objective_value"] = j["objective_value"].get<double>() - 0.5;
  write_json(file.string(), j);
  EXPECT_FALSE(validate_reports(dir.string()).ok());
}

TEST(RunExperiment, SummaryRecomputesFromRows) {
  auto cfg = parse("grid_side = 4\nmethods = aspo, random\nseeds = 0-4\ncompute_bounds = false\n");
  const auto summary = run_experiment(cfg);
  for (const auto& s : summary.stats) {
    std::vector<double> v;
    for (const auto& r : summary.rows)
      if (r.method == s.method) v.push_back(r.objective_value);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.stderr_, std::sqrt(ss / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size())), 1e-12);
  }
}

TEST(RunExperiment, DeterministicAcrossRunsAndThreads) {
  const auto d1 = temp_dir("det1"), d2 = temp_dir("det2");
  auto cfg = parse("grid_side = 4\nmethods = aspo, random, greedy\nseeds = 0-3\nthreads = 1\n");
  run_experiment(cfg, d1.string());
  cfg.threads = 3;
  run_experiment(cfg, d2.string());
  const auto a = read_lines(d1 / "results.csv"), b = read_lines(d2 / "results.csv");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t q = 1; q < a.size(); ++q) {
    // the config column echoes the thread count
    auto strip = [](std::string s) { return s.substr(0, s.find("environment=")); };
    EXPECT_EQ(strip(without_runtime(a[q])), strip(without_runtime(b[q])));
  }
}

TEST(RunExperiment, MultiAgentRowsCarryEveryPath) {
  auto cfg = parse("grid_side = 5\nmethods = aspo\nseeds = 0\nagents = 2\n");
  const auto summary = run_experiment(cfg);
  ASSERT_EQ(summary.rows.front().status, "ok");
  EXPECT_EQ(summary.reports.front().agent_paths.size(), 2u);
}

TEST(RunExperiment, InterestEnvironmentReportsHighInterestTrace) {
  auto cfg = parse(
      "environment = interest\ngrid_side = 8\nkernel = matern32\nlength_scale = 0.45\nnoise_sigma = 0.1\nbudget = 3\n"
      "methods = aspo\nseeds = 0\ncompute_bounds = false\n");
  const auto summary = run_experiment(cfg);
  ASSERT_EQ(summary.rows.front().status, "ok") << summary.rows.front().error;
  ASSERT_TRUE(summary.rows.front().high_interest_trace);
  EXPECT_GE(*summary.rows.front().high_interest_trace, 0.0);
}

TEST(GapStudy, FiniteNonNegativeGapsOnTenByTen) {
  const auto dir = temp_dir("gap");
  auto cfg = parse("grid_side = 10\nseeds = 0-1\nfw_iters = 60\n");
  const auto study = gap_study(cfg, {1.5, 2.0}, dir.string());
  ASSERT_EQ(study.rows.size(), 4u);
  for (const auto& r : study.rows) {
    EXPECT_EQ(r.status, "ok") << r.error;
    EXPECT_TRUE(std::isfinite(r.bound.gap_delta));
    EXPECT_GE(r.bound.gap_delta, 0.0);
  }
  EXPECT_EQ(read_lines(dir / "gap.csv").size(), 5u);
  EXPECT_GE(study.nonincreasing_fraction, 0.0);
}

TEST(Instances, JsonRoundTrip) {
  ExperimentConfig cfg;
  const auto ex = make_instance(cfg, 3);
  const Instance back = instance_from_json(to_json(ex.instance));
  EXPECT_EQ(back.graph.size(), ex.instance.graph.size());
  EXPECT_EQ(back.graph.edge_count(), ex.instance.graph.edge_count());
  EXPECT_EQ(back.budget, ex.instance.budget);
  ASSERT_EQ(back.graph.num_prediction_points(), ex.instance.graph.num_prediction_points());
  for (int j = 0; j < back.graph.num_prediction_points(); ++j) {
    EXPECT_EQ(back.graph.prediction_points()[j].x, ex.instance.graph.prediction_points()[j].x);
    EXPECT_EQ(back.graph.prediction_points()[j].y, ex.instance.graph.prediction_points()[j].y);
  }
}

TEST(SampleConfigs, AllParseAndValidate) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(IPP_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_config(entry.path().string()).validate());
    ++count;
  }
  EXPECT_GT(count, 0);
}
