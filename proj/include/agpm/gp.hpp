#pragma once

#include "agpm/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>

namespace agpm {

class CholeskyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factor of a covariance matrix plus the diagonal jitter that made
/// it succeed.
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Tries diagonal jitter 0, 1e-10*tau, 1e-8*tau, 1e-6*tau with
/// tau = trace(K)/n. Throws CholeskyError when every rung fails.
Factorization factorize_with_jitter(const Eigen::MatrixXd& K);

/// Factorizes with exactly the given jitter; throws CholeskyError on failure.
Factorization factorize_fixed(const Eigen::MatrixXd& K, double jitter);

double log_marginal_likelihood(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                               const Eigen::VectorXd& Y);

/// Gradient with respect to raw theta, one entry per slot.
Eigen::VectorXd lml_gradient(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                             const Eigen::VectorXd& Y);

struct LmlEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double jitter = 0.0;
};

/// Value and gradient from a single factorization.
LmlEvaluation lml_with_gradient(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                                const Eigen::VectorXd& Y);

struct PredictOptions {
  bool full_covariance = false;
  /// Adds the noise variance to the reported variances (observation-level
  /// intervals). Off by default: the variance is that of the latent f.
  bool include_noise = false;
};

struct PredictiveDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  std::optional<Eigen::MatrixXd> covariance;
};

/// Frozen training data, hyperparameters and the cached factorization.
/// Immutable once built; safe to share between threads.
class TrainedModel {
 public:
  /// Factorizes K + noise*I (jitter ladder) and solves for alpha.
  static TrainedModel fit(KernelExpr expr, Eigen::VectorXd theta, Inputs X, Eigen::VectorXd Y);

  /// Rebuild with a known jitter, e.g. when loading a serialized model.
  static TrainedModel fit_with_jitter(KernelExpr expr, Eigen::VectorXd theta, Inputs X, Eigen::VectorXd Y,
                                      double jitter);

  PredictiveDistribution predict(const Inputs& Xstar, const PredictOptions& options = {}) const;

  /// Posterior mean only: K(X*, X) alpha.
  Eigen::VectorXd predict_mean(const Inputs& Xstar) const;

  /// d mean(xstar) / d xstar[dim] = grad_input(...) . alpha.
  double predictive_mean_gradient(std::span<const double> xstar, std::size_t dim) const;

  const KernelExpr& expr() const { return expr_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  const Inputs& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return Y_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  Eigen::MatrixXd cholesky_factor() const { return factor_.llt.matrixL(); }
  double jitter_used() const { return factor_.jitter; }
  double noise_variance() const { return theta_[expr_.noise_slot()]; }

  /// Relative Frobenius error of L L^T against K + noise*I + jitter*I.
  double reconstruction_error() const;
  /// Relative residual of (K + noise*I + jitter*I) alpha = Y.
  double alpha_residual() const;

 private:
  TrainedModel(KernelExpr expr, Eigen::VectorXd theta, Inputs X, Eigen::VectorXd Y);
  Eigen::MatrixXd training_covariance() const;

  KernelExpr expr_;
  Eigen::VectorXd theta_;
  Inputs X_;
  Eigen::VectorXd Y_;
  Factorization factor_;
  Eigen::VectorXd alpha_;
};

}  // namespace agpm
