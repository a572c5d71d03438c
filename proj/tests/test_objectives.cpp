#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace ipp;

namespace {

Eigen::MatrixXd diag2(double a, double b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

DesignWeights random_weights(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return DesignWeights::NullaryExpr(n, [&] { return unit(rng); });
}

}  // namespace

TEST(EvalCovariance, Identity) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_DOUBLE_EQ(eval_covariance(ObjectiveKind::A, I), 3.0);
  EXPECT_DOUBLE_EQ(eval_covariance(ObjectiveKind::B, I), -3.0);
  EXPECT_DOUBLE_EQ(eval_covariance(ObjectiveKind::D, I), 0.0);
  EXPECT_NEAR(eval_precision(ObjectiveKind::A, I), 3.0, 1e-15);
}

TEST(EvalCovariance, Diagonal) {
  const Eigen::MatrixXd S = diag2(0.5, 2.0);
  EXPECT_DOUBLE_EQ(eval_covariance(ObjectiveKind::A, S), 2.5);
  EXPECT_DOUBLE_EQ(eval_covariance(ObjectiveKind::B, S), -2.5);
  EXPECT_NEAR(eval_covariance(ObjectiveKind::D, S), 0.0, 1e-15);
  EXPECT_NEAR(eval_precision(ObjectiveKind::D, S.inverse()), 0.0, 1e-15);
}

TEST(EvalCovariance, ExpectedImprovementIsTheWrongObjective) {
  EXPECT_THROW(eval_covariance(ObjectiveKind::EI, Eigen::MatrixXd::Identity(2, 2)), WrongObjective);
  EXPECT_THROW(eval_precision(ObjectiveKind::EI, Eigen::MatrixXd::Identity(2, 2)), WrongObjective);
}

TEST(EvalDesign, ZeroWeightsGivePrior) {
  const auto inst = oracle::random_grid_instance(3, 5, 2);
  for (auto kind : {ObjectiveKind::A, ObjectiveKind::B, ObjectiveKind::D})
    EXPECT_NEAR(eval_design(kind, DesignWeights::Zero(9), inst.model, inst.prior_cov), oracle::objective(kind, inst.prior_cov),
                1e-9);
}

TEST(EvalDesign, IntegralWeightsMatchReplayedBelief) {
  const auto inst = oracle::random_grid_instance(4, 6, 3);
  const std::vector<NodeId> path{0, 1, 2, 6, 10, 14, 15};
  for (auto kind : {ObjectiveKind::A, ObjectiveKind::B, ObjectiveKind::D}) {
    Belief b = Belief::zero_mean(inst.prior_cov);
    for (NodeId v : path) b.absorb(v, 0.37 * v - 1.0, inst.model.sigma(v), inst.model);
    const DesignSpace space(inst.model, inst.prior_cov);
    EXPECT_NEAR(path_objective(kind, space, path), eval_belief(kind, b), 1e-10);
  }
}

TEST(EvalDesign, HalfWeightRankOne) {
  const int m = 3;
  const auto model = SensorModel::uniform(Eigen::MatrixXd::Identity(m, m), 1.0);
  DesignWeights w = DesignWeights::Zero(m);
  w(0) = 0.5;
  EXPECT_NEAR(eval_design(ObjectiveKind::A, w, model, Eigen::MatrixXd::Identity(m, m)), m - 1 + 1.0 / 1.5, 1e-14);
}

TEST(GradDesign, BIsConstant) {
  std::mt19937_64 rng(1);
  const auto inst = oracle::random_grid_instance(3, 4, 5);
  const auto g1 = grad_design(ObjectiveKind::B, random_weights(9, rng), inst.model, inst.prior_cov);
  const auto g2 = grad_design(ObjectiveKind::B, random_weights(9, rng), inst.model, inst.prior_cov);
  EXPECT_EQ(g1, g2);
}

TEST(GradDesign, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = oracle::random_grid_instance(3, 5, seed);
    const DesignWeights w = random_weights(9, rng);
    for (auto kind : {ObjectiveKind::A, ObjectiveKind::B, ObjectiveKind::D}) {
      const auto grad = grad_design(kind, w, inst.model, inst.prior_cov);
      const auto fd = oracle::finite_difference(
          [&](const Eigen::VectorXd& x) {
            Eigen::MatrixXd info = inst.prior_cov.inverse();
            for (int i = 0; i < 9; ++i) info += x(i) * inst.model.a.row(i).transpose() * inst.model.a.row(i);
            return oracle::objective(kind, info.inverse());
          },
          w, 1e-5);
      for (int i = 0; i < 9; ++i) {
        const double scale = std::max(std::abs(fd(i)), 1e-6);
        EXPECT_LE(std::abs(grad(i) - fd(i)) / scale, 1e-4) << to_string(kind) << " " << i;
      }
    }
  }
}

TEST(GradDesign, ZeroRowHasZeroGradient) {
  auto inst = oracle::random_grid_instance(3, 4, 9);
  inst.model.a.row(4).setZero();
  for (auto kind : {ObjectiveKind::A, ObjectiveKind::B, ObjectiveKind::D})
    EXPECT_EQ(grad_design(kind, DesignWeights::Constant(9, 0.3), inst.model, inst.prior_cov)(4), 0.0);
}

TEST(ExpectedImprovement, NoSpreadAboveIncumbent) { EXPECT_EQ(expected_improvement(1.0, 0.0, 0.5), 0.0); }

TEST(ExpectedImprovement, SymmetricCase) {
  EXPECT_NEAR(expected_improvement(0.7, 1.0, 0.7), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(expected_improvement(0.7, 1.0, 0.7), 0.3989, 1e-4);
}

TEST(ExpectedImprovement, CertainImprovement) { EXPECT_NEAR(expected_improvement(-1.0, 1e-9, 0.0), 1.0, 1e-9); }

TEST(ExpectedImprovement, EvalEiUsesLatentPrediction) {
  const auto inst = oracle::random_grid_instance(3, 4, 4);
  Belief b = Belief::zero_mean(inst.prior_cov);
  b.absorb(3, 0.4, 1.0, inst.model);
  b.absorb(5, -0.2, 1.0, inst.model);
  const auto ei = eval_ei(b, inst.model, -0.2);
  const Eigen::MatrixXd S = oracle::posterior_cov(inst.prior_cov, inst.model.a, inst.model.sigma, {3, 5});
  for (NodeId j = 0; j < 9; ++j) {
    const Eigen::VectorXd a = inst.model.row(j);
    const double sd = std::sqrt(a.dot(S * a));
    EXPECT_NEAR(ei(j), expected_improvement(a.dot(b.posterior_mean()), sd, -0.2), 1e-12);
  }
}

TEST(MutualInformation, NoMeasurementsIsZero) {
  const Belief b = Belief::zero_mean(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(mutual_information(b), 0.0);
}

TEST(MutualInformation, ClosedFormHalfLogTwo) {
  Belief b = Belief::zero_mean(Eigen::MatrixXd::Identity(2, 2));
  b.absorb(Eigen::Vector2d(1, 0), 0.0, 1.0);
  EXPECT_NEAR(mutual_information(b), 0.5 * std::log(2.0), 1e-14);
  EXPECT_NEAR(mutual_information(b), 0.3466, 1e-4);
}

// Properties

TEST(ObjectivesProperty, MeasurementsNeverIncreaseObjectives) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = oracle::random_grid_instance(4, 8, seed);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<NodeId> node(0, 15);
    Belief b = Belief::zero_mean(inst.prior_cov);
    for (int q = 0; q < 12; ++q) {
      const double a0 = eval_belief(ObjectiveKind::A, b), b0 = eval_belief(ObjectiveKind::B, b),
                   d0 = eval_belief(ObjectiveKind::D, b);
      b.absorb(node(rng), 0.0, 1.0, inst.model);
      EXPECT_LE(eval_belief(ObjectiveKind::A, b), a0 + 1e-12);
      EXPECT_LE(eval_belief(ObjectiveKind::B, b), b0 + 1e-12);
      EXPECT_LE(eval_belief(ObjectiveKind::D, b), d0 + 1e-12);
    }
  }
}

TEST(ObjectivesProperty, ConvexAlongSegments) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = oracle::random_grid_instance(4, 6, seed);
    const DesignSpace space(inst.model, inst.prior_cov);
    for (int t = 0; t < 10; ++t) {
      const DesignWeights u = random_weights(16, rng), v = random_weights(16, rng);
      for (auto kind : {ObjectiveKind::A, ObjectiveKind::D}) {
        const double mid = space.value(kind, 0.5 * (u + v));
        EXPECT_LE(mid, 0.5 * (space.value(kind, u) + space.value(kind, v)) + 1e-9);
      }
    }
  }
}

TEST(ObjectivesProperty, ExpectedImprovementNonNegative) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 3.0);
  std::uniform_real_distribution<double> sd(0.0, 5.0);
  for (int t = 0; t < 10000; ++t) EXPECT_GE(expected_improvement(z(rng), sd(rng), z(rng)), -1e-12);
}

TEST(ObjectivesProperty, ExpectedImprovementVanishesAtMeasuredIncumbent) {
  EnvGraph g = build_grid(3);
  g.set_prediction_points(g.coords());
  const auto prior = build_prior(g.prediction_points(), KernelSpec{});
  const auto model = SensorModel::uniform(Eigen::MatrixXd::Identity(9, 9), 1.0);
  Belief b = Belief::zero_mean(prior);
  b.absorb(4, -1.0, 1e-6, model);
  const auto ei = eval_ei(b, model, b.posterior_mean()(4));
  EXPECT_LT(ei(4), 1e-6);
}

TEST(ObjectivesProperty, MutualInformationMatchesLogdetDifference) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto inst = oracle::random_grid_instance(4, 7, seed);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<NodeId> node(0, 15);
    Belief b = Belief::zero_mean(inst.prior_cov);
    std::vector<NodeId> measured;
    for (int q = 0; q < 6; ++q) {
      measured.push_back(node(rng));
      b.absorb(measured.back(), 0.0, 1.0, inst.model);
    }
    const double d_prior = oracle::objective(ObjectiveKind::D, inst.prior_cov);
    Eigen::MatrixXd info = inst.prior_cov.inverse();
    for (NodeId v : measured) info += inst.model.a.row(v).transpose() * inst.model.a.row(v);
    const double d_after = oracle::objective(ObjectiveKind::D, info.inverse());
    EXPECT_NEAR(mutual_information(b), 0.5 * (d_prior - d_after), 1e-9);
  }
}

TEST(ObjectivesProperty, OneStepLookaheadMatchesExplicitUpdate) {
  const auto inst = oracle::random_grid_instance(3, 5, 8);
  Belief b = Belief::zero_mean(inst.prior_cov);
  b.absorb(2, 0.1, 1.0, inst.model);
  for (auto kind : {ObjectiveKind::A, ObjectiveKind::B, ObjectiveKind::D}) {
    const auto after = objective_after_each(kind, b, inst.model);
    for (NodeId j = 0; j < 9; ++j) {
      const double expected = oracle::objective(kind, oracle::posterior_cov(inst.prior_cov, inst.model.a, inst.model.sigma, {2, j}));
      // measuring node 2 twice counts twice
      if (j == 2) {
        Eigen::MatrixXd info = inst.prior_cov.inverse() + 2.0 * inst.model.a.row(2).transpose() * inst.model.a.row(2);
        EXPECT_NEAR(after(j), oracle::objective(kind, info.inverse()), 1e-9);
      } else {
        EXPECT_NEAR(after(j), expected, 1e-9);
      }
    }
  }
}
