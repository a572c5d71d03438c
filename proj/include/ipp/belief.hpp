#pragma once

// Gaussian belief over the m prediction variables under linear noisy
// measurements y = a_i^T x + noise. The precision matrix is the primary state;
// the kernel-form routines at the bottom are an independent cross-check.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"

namespace ipp {

inline constexpr double kDefaultJitter = 1e-9;

// ---------------------------------------------------------------------------
// Kernels

enum class KernelFamily { squared_exponential, matern32 };

struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double length_scale = 1.0;

  [[nodiscard]] double operator()(const Point& p, const Point& q) const {
    if (!(length_scale > 0.0)) throw InvalidArgument("kernel length scale must be positive");
    const double d = distance(p, q);
    switch (family) {
      case KernelFamily::squared_exponential:
        return std::exp(-d * d / (2.0 * length_scale * length_scale));
      case KernelFamily::matern32: {
        const double r = std::sqrt(3.0) * d / length_scale;
        return (1.0 + r) * std::exp(-r);
      }
    }
    return 0.0;
  }
};

inline std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::squared_exponential ? "squared_exponential" : "matern32";
}

inline KernelFamily kernel_family_from_string(std::string_view s) {
  if (s == "squared_exponential" || s == "se") return KernelFamily::squared_exponential;
  if (s == "matern32" || s == "matern") return KernelFamily::matern32;
  throw InvalidArgument("unknown kernel family: " + std::string(s));
}

/// K(rows, cols) with entries k(rows[p], cols[q]).
inline Eigen::MatrixXd kernel_matrix(const std::vector<Point>& rows, const std::vector<Point>& cols, const KernelSpec& k) {
  Eigen::MatrixXd K(rows.size(), cols.size());
  for (std::size_t p = 0; p < rows.size(); ++p)
    for (std::size_t q = 0; q < cols.size(); ++q) K(p, q) = k(rows[p], cols[q]);
  return K;
}

// ---------------------------------------------------------------------------
// Factorization helpers

/// Cholesky factorization that refuses (numerically) singular input instead of
/// returning a factor with a vanishing pivot.
inline Eigen::LLT<Eigen::MatrixXd> factorize_spd(const Eigen::MatrixXd& M, std::string_view what) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": matrix is not positive definite");
  const double scale = M.diagonal().cwiseAbs().maxCoeff();
  const Eigen::VectorXd pivots = llt.matrixLLT().diagonal();
  if (M.rows() > 0 && pivots.cwiseAbs2().minCoeff() <= 1e-13 * scale)
    throw NumericalError(std::string(what) + ": matrix is numerically singular");
  return llt;
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& M, std::string_view what) {
  const auto llt = factorize_spd(M, what);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  return 0.5 * (inv + inv.transpose());
}

/// log det of an SPD matrix from its Cholesky pivots.
inline double spd_logdet(const Eigen::MatrixXd& M, std::string_view what) {
  const auto llt = factorize_spd(M, what);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// ---------------------------------------------------------------------------
// Prior and measurement model

/// Prior covariance (Sigma_x)_{pq} = k(x_p, x_q) with `jitter` on the diagonal.
inline Eigen::MatrixXd build_prior(const std::vector<Point>& points, const KernelSpec& k, double jitter = kDefaultJitter) {
  if (!(k.length_scale > 0.0)) throw InvalidArgument("kernel length scale must be positive");
  Eigen::MatrixXd cov = kernel_matrix(points, points, k);
  cov.diagonal().array() += jitter;
  factorize_spd(cov, "prior covariance");
  return cov;
}

/// Row i of `a` is the measurement characterization a_i of node i; sigma(i)
/// is the noise standard deviation used when measuring there.
struct SensorModel {
  Eigen::MatrixXd a;
  Eigen::VectorXd sigma;
  double sigma_min = 1.0;
  double sigma_max = 1.0;

  [[nodiscard]] int num_nodes() const { return static_cast<int>(a.rows()); }
  [[nodiscard]] int dim() const { return static_cast<int>(a.cols()); }
  [[nodiscard]] Eigen::VectorXd row(NodeId i) const { return a.row(i).transpose(); }

  static SensorModel uniform(Eigen::MatrixXd a, double noise_sigma) {
    if (!(noise_sigma > 0.0)) throw InvalidArgument("noise sigma must be positive");
    SensorModel model;
    model.sigma = Eigen::VectorXd::Constant(a.rows(), noise_sigma);
    model.a = std::move(a);
    model.sigma_min = noise_sigma;
    model.sigma_max = noise_sigma;
    return model;
  }

  void check() const {
    if (sigma.size() != a.rows()) throw InvalidArgument("sensor model: sigma length differs from node count");
    if (!a.allFinite()) throw InvalidArgument("sensor model: non-finite characterization");
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
      if (!(sigma(i) > 0.0) || sigma(i) < sigma_min - 1e-12 || sigma(i) > sigma_max + 1e-12)
        throw InvalidArgument("sensor model: sigma outside [sigma_min, sigma_max]");
  }
};

/// a_i = Sigma_x^{-1} k(X*, loc_i): measuring node i observes the kernel
/// interpolant of x at the node location, so Sigma_x A^T = K(X*, X).
inline SensorModel default_characterization(const EnvGraph& g, const Eigen::MatrixXd& prior_cov, const KernelSpec& k,
                                            double noise_sigma = 1.0) {
  const Eigen::MatrixXd cross = kernel_matrix(g.prediction_points(), g.coords(), k);  // m x n
  const auto llt = factorize_spd(prior_cov, "prior covariance");
  Eigen::MatrixXd at = llt.solve(cross);
  return SensorModel::uniform(at.transpose(), noise_sigma);
}

// ---------------------------------------------------------------------------
// Belief

struct Measurement {
  NodeId node = -1;
  double y = 0.0;
  double sigma = 1.0;
};

/// Immutable Gaussian belief snapshot. `update` returns a new snapshot.
class Belief {
 public:
  Belief() = default;

  Belief(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov)
      : prior_mean_(std::move(prior_mean)), prior_cov_(std::move(prior_cov)) {
    if (prior_mean_.size() != prior_cov_.rows() || prior_cov_.rows() != prior_cov_.cols())
      throw InvalidArgument("belief: prior mean/covariance size mismatch");
    prior_precision_ = spd_inverse(prior_cov_, "prior covariance");
    precision_ = prior_precision_;
    info_ = Eigen::VectorXd::Zero(prior_mean_.size());
  }

  static Belief zero_mean(Eigen::MatrixXd prior_cov) {
    const auto m = prior_cov.rows();
    return Belief(Eigen::VectorXd::Zero(m), std::move(prior_cov));
  }

  [[nodiscard]] Belief update(const Eigen::VectorXd& a, double y, double sigma, NodeId node = -1) const {
    Belief next = *this;
    next.absorb(a, y, sigma, node);
    return next;
  }

  [[nodiscard]] Belief update(NodeId node, double y, double sigma, const SensorModel& model) const {
    return update(model.row(node), y, sigma, node);
  }

  /// In-place rank-one update: precision += a a^T / sigma^2 and
  /// info += (y - a^T xbar) a / sigma^2.
  void absorb(const Eigen::VectorXd& a, double y, double sigma, NodeId node = -1) {
    if (!(sigma > 0.0)) throw InvalidArgument("measurement sigma must be positive");
    if (a.size() != dim()) throw InvalidArgument("measurement vector has the wrong length");
    const double inv_var = 1.0 / (sigma * sigma);
    precision_.noalias() += inv_var * a * a.transpose();
    info_ += inv_var * (y - a.dot(prior_mean_)) * a;
    history_.push_back({node, y, sigma});
  }

  void absorb(NodeId node, double y, double sigma, const SensorModel& model) { absorb(model.row(node), y, sigma, node); }

  [[nodiscard]] int dim() const { return static_cast<int>(prior_mean_.size()); }
  [[nodiscard]] const Eigen::VectorXd& prior_mean() const { return prior_mean_; }
  [[nodiscard]] const Eigen::MatrixXd& prior_cov() const { return prior_cov_; }
  [[nodiscard]] const Eigen::MatrixXd& prior_precision() const { return prior_precision_; }
  [[nodiscard]] const Eigen::MatrixXd& precision() const { return precision_; }
  [[nodiscard]] const Eigen::VectorXd& info_vector() const { return info_; }
  [[nodiscard]] const std::vector<Measurement>& history() const { return history_; }

  [[nodiscard]] Eigen::MatrixXd posterior_cov() const {
    if (history_.empty()) return prior_cov_;
    return spd_inverse(precision_, "posterior precision");
  }

  [[nodiscard]] Eigen::VectorXd posterior_mean() const {
    if (history_.empty()) return prior_mean_;
    const auto llt = factorize_spd(precision_, "posterior precision");
    return prior_mean_ + llt.solve(info_);
  }

 private:
  Eigen::VectorXd prior_mean_;
  Eigen::MatrixXd prior_cov_;
  Eigen::MatrixXd prior_precision_;
  Eigen::MatrixXd precision_;
  Eigen::VectorXd info_;
  std::vector<Measurement> history_;
};

/// Negative log-posterior gradient at x (Sigma_x^{-1}(x - xbar) minus the
/// scaled residual sum). Vanishes at the MAP estimate.
inline Eigen::VectorXd neg_log_posterior_gradient(const Belief& b, const SensorModel& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd grad = b.prior_precision() * (x - b.prior_mean());
  for (const Measurement& meas : b.history()) {
    const Eigen::VectorXd a = model.row(meas.node);
    grad -= (meas.y - a.dot(x)) / (meas.sigma * meas.sigma) * a;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Kernel (Gaussian-process) form

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// GP conditioning written directly in kernel form:
///   mu*    = m(X*) + K(X*,X) (K(X,X) + diag(sigma^2))^{-1} (y - m(X))
///   Sigma* = K(X*,X*) - K(X*,X) (K(X,X) + diag(sigma^2))^{-1} K(X,X*)
/// with K(X*,X*) = prior_cov, K(X*,X) from the kernel, and the measured
/// block K(X,X) = K(X,X*) K(X*,X*)^{-1} K(X*,X) induced by the m prediction
/// variables. Used as an oracle for the information form.
inline GaussianPosterior kernel_form_posterior(const EnvGraph& g, const KernelSpec& k, const Eigen::VectorXd& prior_mean,
                                               const Eigen::MatrixXd& prior_cov, const std::vector<Measurement>& measured) {
  if (measured.empty()) return {prior_mean, prior_cov};
  std::vector<Point> locations;
  locations.reserve(measured.size());
  for (const auto& meas : measured) locations.push_back(g.coord(meas.node));
  const Eigen::MatrixXd cross = kernel_matrix(g.prediction_points(), locations, k);  // m x L
  const auto prior_llt = factorize_spd(prior_cov, "prior covariance");
  const Eigen::MatrixXd projected = prior_llt.solve(cross);                          // Sigma_x^{-1} K(X*,X)
  Eigen::MatrixXd gram = cross.transpose() * projected;                              // K(X,X)
  const Eigen::VectorXd mean_at_measured = projected.transpose() * prior_mean;       // m(X)
  Eigen::VectorXd residual(measured.size());
  for (std::size_t q = 0; q < measured.size(); ++q) {
    gram(q, q) += measured[q].sigma * measured[q].sigma;
    residual(q) = measured[q].y - mean_at_measured(q);
  }
  gram = 0.5 * (gram + gram.transpose());
  const auto gram_llt = factorize_spd(gram, "measurement Gram matrix");
  GaussianPosterior post;
  post.mean = prior_mean + cross * gram_llt.solve(residual);
  post.cov = prior_cov - cross * gram_llt.solve(cross.transpose());
  post.cov = 0.5 * (post.cov + post.cov.transpose());
  return post;
}

}  // namespace ipp
