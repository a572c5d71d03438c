#pragma once

// Scalar informativeness measures. All of them are minimized:
//   A:  tr(Sigma)
//   B: -tr(Sigma^{-1})
//   D:  logdet(Sigma)
//   EI: net expected improvement left at the prediction points (adaptive)

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "ipp/belief.hpp"
#include "ipp/errors.hpp"

namespace ipp {

enum class ObjectiveKind { A, B, D, EI };

inline std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::A: return "a";
    case ObjectiveKind::B: return "b";
    case ObjectiveKind::D: return "d";
    case ObjectiveKind::EI: return "ei";
  }
  return "?";
}

inline ObjectiveKind objective_from_string(std::string_view s) {
  if (s == "a" || s == "A") return ObjectiveKind::A;
  if (s == "b" || s == "B") return ObjectiveKind::B;
  if (s == "d" || s == "D") return ObjectiveKind::D;
  if (s == "ei" || s == "EI") return ObjectiveKind::EI;
  throw InvalidArgument("unknown objective: " + std::string(s));
}

inline bool is_static(ObjectiveKind kind) { return kind != ObjectiveKind::EI; }

inline void require_static(ObjectiveKind kind) {
  if (!is_static(kind)) throw WrongObjective("expected improvement needs eval_ei, not a covariance measure");
}

/// Objective of the covariance P^{-1}, computed from the Cholesky factor of P.
inline double eval_precision(ObjectiveKind kind, const Eigen::MatrixXd& precision) {
  require_static(kind);
  if (kind == ObjectiveKind::B) return -precision.trace();
  const auto llt = factorize_spd(precision, "precision");
  if (kind == ObjectiveKind::D) return -2.0 * llt.matrixLLT().diagonal().array().log().sum();
  // tr(P^{-1}) = ||L^{-1}||_F^2
  const Eigen::MatrixXd linv =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  return linv.squaredNorm();
}

inline double eval_covariance(ObjectiveKind kind, const Eigen::MatrixXd& cov) {
  require_static(kind);
  switch (kind) {
    case ObjectiveKind::A: return cov.trace();
    case ObjectiveKind::B: return -spd_inverse(cov, "covariance").trace();
    default: return spd_logdet(cov, "covariance");
  }
}

inline double eval_belief(ObjectiveKind kind, const Belief& b) { return eval_precision(kind, b.precision()); }

/// Objective after one more (hypothetical) measurement at every node, using
/// the rank-one forms
///   A: tr S - ||S a||^2 / (s^2 + a^T S a)
///   B: -tr P - ||a||^2 / s^2
///   D: logdet S - log(1 + a^T S a / s^2)
/// where S is the current covariance and P = S^{-1}. Values do not depend on
/// the measured y.
inline Eigen::VectorXd objective_after_each(ObjectiveKind kind, const Belief& b, const SensorModel& model) {
  require_static(kind);
  const Eigen::VectorXd inv_var = model.sigma.array().square().inverse();
  if (kind == ObjectiveKind::B) {
    const double base = -b.precision().trace();
    return (base - (model.a.rowwise().squaredNorm().array() * inv_var.array())).matrix();
  }
  const Eigen::MatrixXd cov = b.posterior_cov();
  const Eigen::MatrixXd projected = model.a * cov;  // row i = (S a_i)^T
  const Eigen::ArrayXd quad = (projected.array() * model.a.array()).rowwise().sum();
  if (kind == ObjectiveKind::A) {
    const Eigen::ArrayXd gain = projected.rowwise().squaredNorm().array() * inv_var.array() / (1.0 + quad * inv_var.array());
    return (cov.trace() - gain).matrix();
  }
  const double base = eval_precision(ObjectiveKind::D, b.precision());
  return (base - (quad * inv_var.array()).log1p()).matrix();
}

// ---------------------------------------------------------------------------
// Relaxed designs

/// Per-node visit weights w_i in [0, 1] (one per graph node).
using DesignWeights = Eigen::VectorXd;

/// Information matrix of a weighted design,
///   P(w) = Sigma_x^{-1} + sum_i w_i a_i a_i^T / sigma_i^2,
/// with the prior precision and the scaled rows a_i / sigma_i precomputed.
class DesignSpace {
 public:
  DesignSpace(const SensorModel& model, const Eigen::MatrixXd& prior_cov)
      : prior_precision_(spd_inverse(prior_cov, "prior covariance")),
        scaled_(model.a.array().colwise() / model.sigma.array()) {}

  DesignSpace(const Eigen::MatrixXd& scaled_rows, Eigen::MatrixXd prior_precision)
      : prior_precision_(std::move(prior_precision)), scaled_(scaled_rows) {}

  [[nodiscard]] int num_nodes() const { return static_cast<int>(scaled_.rows()); }
  [[nodiscard]] int dim() const { return static_cast<int>(scaled_.cols()); }
  [[nodiscard]] const Eigen::MatrixXd& prior_precision() const { return prior_precision_; }
  [[nodiscard]] const Eigen::MatrixXd& scaled_rows() const { return scaled_; }

  /// Sum_i w_i r_i r_i^T over the scaled rows (no prior term).
  [[nodiscard]] Eigen::MatrixXd information(const DesignWeights& w) const {
    check(w);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim(), dim());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (w(i) != 0.0) info.selfadjointView<Eigen::Lower>().rankUpdate(scaled_.row(i).transpose(), w(i));
    return info.selfadjointView<Eigen::Lower>();
  }

  [[nodiscard]] Eigen::MatrixXd precision(const DesignWeights& w) const { return prior_precision_ + information(w); }

  [[nodiscard]] double value(ObjectiveKind kind, const DesignWeights& w) const { return eval_precision(kind, precision(w)); }

  /// d phi / d w_i:  A -||S r_i||^2,  B -||r_i||^2,  D -r_i^T S r_i.
  [[nodiscard]] Eigen::VectorXd gradient(ObjectiveKind kind, const DesignWeights& w) const {
    require_static(kind);
    if (kind == ObjectiveKind::B) return -scaled_.rowwise().squaredNorm();
    const Eigen::MatrixXd cov = spd_inverse(precision(w), "design precision");
    const Eigen::MatrixXd projected = scaled_ * cov;
    if (kind == ObjectiveKind::A) return -projected.rowwise().squaredNorm();
    return -(projected.array() * scaled_.array()).rowwise().sum().matrix();
  }

  /// Indicator weights of a node set (each listed node counted once).
  [[nodiscard]] DesignWeights indicator(std::span<const NodeId> nodes) const {
    DesignWeights w = DesignWeights::Zero(num_nodes());
    for (NodeId v : nodes) w(v) = 1.0;
    return w;
  }

 private:
  void check(const DesignWeights& w) const {
    if (w.size() != num_nodes()) throw InvalidArgument("design weights have the wrong length");
  }

  Eigen::MatrixXd prior_precision_;
  Eigen::MatrixXd scaled_;
};

inline double eval_design(ObjectiveKind kind, const DesignWeights& w, const SensorModel& model, const Eigen::MatrixXd& prior_cov) {
  return DesignSpace(model, prior_cov).value(kind, w);
}

inline Eigen::VectorXd grad_design(ObjectiveKind kind, const DesignWeights& w, const SensorModel& model,
                                   const Eigen::MatrixXd& prior_cov) {
  return DesignSpace(model, prior_cov).gradient(kind, w);
}

/// Objective of the measurement set "every node of the path once".
inline double path_objective(ObjectiveKind kind, const DesignSpace& space, std::span<const NodeId> path) {
  return space.value(kind, space.indicator(path));
}

// ---------------------------------------------------------------------------
// Expected improvement

inline double standard_normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
inline double standard_normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

/// E[max(y_min - Y, 0)] for Y ~ N(mean, sd^2), written as
/// (y_min - mean) Phi(u) + sd phi(u), u = (y_min - mean) / sd, which equals
/// (y_min - mean) Phi(u) + sd^2 N(y_min | mean, sd^2).
inline double expected_improvement(double mean, double sd, double y_min) {
  const double diff = y_min - mean;
  if (!(sd > 0.0)) return std::max(diff, 0.0);
  const double u = diff / sd;
  return std::max(0.0, diff * standard_normal_cdf(u) + sd * standard_normal_pdf(u));
}

/// Smallest value observed so far, or the smallest prior prediction over the
/// nodes when nothing has been measured yet.
inline double incumbent_min(const Belief& b, const SensorModel& model) {
  if (!b.history().empty()) {
    double best = kInf;
    for (const auto& meas : b.history()) best = std::min(best, meas.y);
    return best;
  }
  return (model.a * b.prior_mean()).minCoeff();
}

/// EI at every node, with predictive mean a_j^T xhat and latent variance
/// a_j^T Sigma a_j.
inline Eigen::VectorXd eval_ei(const Belief& b, const SensorModel& model, double y_min) {
  const Eigen::VectorXd mean = model.a * b.posterior_mean();
  const Eigen::MatrixXd cov = b.posterior_cov();
  const Eigen::ArrayXd var = ((model.a * cov).array() * model.a.array()).rowwise().sum();
  Eigen::VectorXd ei(model.num_nodes());
  for (Eigen::Index j = 0; j < ei.size(); ++j) ei(j) = expected_improvement(mean(j), std::sqrt(std::max(var(j), 0.0)), y_min);
  return ei;
}

/// EI at the m prediction variables themselves (unit characterization e_j).
inline Eigen::VectorXd eval_ei_prediction_points(const Belief& b, double y_min) {
  const Eigen::VectorXd mean = b.posterior_mean();
  const Eigen::MatrixXd cov = b.posterior_cov();
  Eigen::VectorXd ei(b.dim());
  for (Eigen::Index j = 0; j < ei.size(); ++j) ei(j) = expected_improvement(mean(j), std::sqrt(std::max(cov(j, j), 0.0)), y_min);
  return ei;
}

/// Sum of EI over the prediction points: the adaptive objective.
inline double net_expected_improvement(const Belief& b, double y_min) { return eval_ei_prediction_points(b, y_min).sum(); }

// ---------------------------------------------------------------------------
// Mutual information

/// I(x; y) = (logdet Sigma_x - logdet Sigma) / 2.
inline double mutual_information(const Belief& b) {
  const double prior_logdet = spd_logdet(b.prior_cov(), "prior covariance");
  const double post_logdet = -spd_logdet(b.precision(), "posterior precision");
  return 0.5 * (prior_logdet - post_logdet);
}

}  // namespace ipp
