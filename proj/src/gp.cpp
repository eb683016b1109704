#include "agpm/gp.hpp"

#include <cmath>
#include <algorithm>
#include <string>

namespace agpm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

void check_data(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X, const Eigen::VectorXd& Y) {
  validate_theta(expr, theta);
  if (X.rows() < 1) throw std::invalid_argument("need at least one training point");
  if (X.rows() != Y.size()) {
    throw std::invalid_argument("X has " + std::to_string(X.rows()) + " rows but Y has " +
                                std::to_string(Y.size()) + " entries");
  }
}

Eigen::MatrixXd noisy_gram(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X) {
  Eigen::MatrixXd K = gram_matrix(expr, theta, X);
  K.diagonal().array() += theta[expr.noise_slot()];
  return K;
}

bool try_factorize(const Eigen::MatrixXd& K, double jitter, Factorization& out) {
  Eigen::MatrixXd A = K;
  if (jitter > 0.0) A.diagonal().array() += jitter;
  out.llt.compute(A);
  if (out.llt.info() != Eigen::Success) return false;
  const auto diag = out.llt.matrixLLT().diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return false;
  out.jitter = jitter;
  return true;
}

}  // namespace

Factorization factorize_with_jitter(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols() || K.rows() == 0) throw std::invalid_argument("factorize: matrix must be square and non-empty");
  if (!K.allFinite()) throw CholeskyError("covariance matrix has non-finite entries");
  const double tau = K.trace() / static_cast<double>(K.rows());
  Factorization out;
  for (double scale : {0.0, 1e-10, 1e-8, 1e-6}) {
    if (try_factorize(K, scale * tau, out)) return out;
  }
  throw CholeskyError("Cholesky factorization failed after jitter up to 1e-6*trace/n; the kernel configuration is "
                      "not positive definite or is ill-conditioned");
}

Factorization factorize_fixed(const Eigen::MatrixXd& K, double jitter) {
  Factorization out;
  if (!K.allFinite() || !try_factorize(K, jitter, out)) {
    throw CholeskyError("Cholesky factorization failed with jitter " + std::to_string(jitter));
  }
  return out;
}

double log_marginal_likelihood(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                               const Eigen::VectorXd& Y) {
  check_data(expr, theta, X, Y);
  const auto f = factorize_with_jitter(noisy_gram(expr, theta, X));
  const Eigen::VectorXd alpha = f.llt.solve(Y);
  const double log_det_half = f.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * Y.dot(alpha) - log_det_half - 0.5 * static_cast<double>(Y.size()) * kLog2Pi;
}

LmlEvaluation lml_with_gradient(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                                const Eigen::VectorXd& Y) {
  check_data(expr, theta, X, Y);
  const auto f = factorize_with_jitter(noisy_gram(expr, theta, X));
  const Eigen::Index n = Y.size();
  const Eigen::VectorXd alpha = f.llt.solve(Y);

  LmlEvaluation out;
  out.jitter = f.jitter;
  out.value = -0.5 * Y.dot(alpha) - f.llt.matrixLLT().diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * kLog2Pi;

  // dL/dtheta_j = 1/2 tr((alpha alpha^T - K^-1) dK_j)
  Eigen::MatrixXd W = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  W = alpha * alpha.transpose() - W;
  const auto grads = grad_theta(expr, theta, X);
  out.gradient.resize(static_cast<Eigen::Index>(grads.size()));
  for (std::size_t j = 0; j < grads.size(); ++j) {
    out.gradient[static_cast<Eigen::Index>(j)] = 0.5 * W.cwiseProduct(grads[j]).sum();
  }
  return out;
}

Eigen::VectorXd lml_gradient(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                             const Eigen::VectorXd& Y) {
  return lml_with_gradient(expr, theta, X, Y).gradient;
}

TrainedModel::TrainedModel(KernelExpr expr, Eigen::VectorXd theta, Inputs X, Eigen::VectorXd Y)
    : expr_(std::move(expr)), theta_(std::move(theta)), X_(std::move(X)), Y_(std::move(Y)) {
  check_data(expr_, theta_, X_, Y_);
}

TrainedModel TrainedModel::fit(KernelExpr expr, Eigen::VectorXd theta, Inputs X, Eigen::VectorXd Y) {
  TrainedModel model(std::move(expr), std::move(theta), std::move(X), std::move(Y));
  model.factor_ = factorize_with_jitter(model.training_covariance());
  model.alpha_ = model.factor_.llt.solve(model.Y_);
  return model;
}

TrainedModel TrainedModel::fit_with_jitter(KernelExpr expr, Eigen::VectorXd theta, Inputs X, Eigen::VectorXd Y,
                                           double jitter) {
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be non-negative");
  TrainedModel model(std::move(expr), std::move(theta), std::move(X), std::move(Y));
  model.factor_ = factorize_fixed(model.training_covariance(), jitter);
  model.alpha_ = model.factor_.llt.solve(model.Y_);
  return model;
}

Eigen::MatrixXd TrainedModel::training_covariance() const { return noisy_gram(expr_, theta_, X_); }

double TrainedModel::reconstruction_error() const {
  Eigen::MatrixXd K = training_covariance();
  K.diagonal().array() += factor_.jitter;
  const Eigen::MatrixXd L = factor_.llt.matrixL();
  return (L * L.transpose() - K).norm() / K.norm();
}

double TrainedModel::alpha_residual() const {
  Eigen::MatrixXd K = training_covariance();
  K.diagonal().array() += factor_.jitter;
  const double scale = Y_.norm();
  const double residual = (K * alpha_ - Y_).norm();
  return scale > 0.0 ? residual / scale : residual;
}

Eigen::VectorXd TrainedModel::predict_mean(const Inputs& Xstar) const {
  return gram_matrix(expr_, theta_, Xstar, X_) * alpha_;
}

PredictiveDistribution TrainedModel::predict(const Inputs& Xstar, const PredictOptions& options) const {
  const Eigen::MatrixXd Kstar = gram_matrix(expr_, theta_, Xstar, X_);  // m x n
  PredictiveDistribution out;
  out.mean = Kstar * alpha_;

  // V = L^-1 K(X, X*), so K(X*,X) (K+noise I)^-1 K(X,X*) = V^T V.
  const Eigen::MatrixXd V = factor_.llt.matrixL().solve(Kstar.transpose());
  const Eigen::Index m = Xstar.rows();
  out.variance.resize(m);
  Eigen::MatrixXd cov;
  if (options.full_covariance) {
    cov = gram_matrix(expr_, theta_, Xstar);
    cov.noalias() -= V.transpose() * V;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::span<const double> row(Xstar.row(i).data(), static_cast<std::size_t>(Xstar.cols()));
    const double prior = eval_expr(expr_, theta_, row, row);
    double v = prior - V.col(i).squaredNorm();
    if (v < 0.0) {
      if (v < -1e-8 * std::max(1.0, prior)) {
        throw std::runtime_error("predictive variance " + std::to_string(v) + " is negative beyond round-off");
      }
      v = 0.0;
    }
    if (options.include_noise) v += noise_variance();
    out.variance[i] = v;
  }
  if (options.full_covariance) {
    if (options.include_noise) cov.diagonal().array() += noise_variance();
    cov.diagonal() = out.variance;
    out.covariance = std::move(cov);
  }
  return out;
}

double TrainedModel::predictive_mean_gradient(std::span<const double> xstar, std::size_t dim) const {
  return grad_input(expr_, theta_, xstar, X_, dim).dot(alpha_);
}

}  // namespace agpm
