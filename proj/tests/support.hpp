#pragma once

#include "agpm/kernels.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace agpm::testing {

inline Inputs random_inputs(Eigen::Index n, std::mt19937_64& rng, double lo = 0.0, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Inputs X(n, static_cast<Eigen::Index>(kNumCovariates));
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  return X;
}

/// Log-uniform positive entries in [lo, hi].
inline Eigen::VectorXd random_theta(const KernelExpr& expr, std::mt19937_64& rng, double lo = 0.5, double hi = 3.0) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Eigen::VectorXd theta(static_cast<Eigen::Index>(expr.theta_size()));
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = std::exp(u(rng));
  return theta;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Eigen::MatrixXd central_difference_matrix(const std::function<Eigen::MatrixXd(double)>& f, double x,
                                                 double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| / max(|b|, floor).
inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-8) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Plain-loop evaluations of the base kernels, written independently of the
/// library for use as oracles.
inline double oracle_base(KernelFamily family, const std::vector<double>& p, const std::vector<double>& a,
                          const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  switch (family) {
    case KernelFamily::SE: return std::exp(-sq / (2.0 * p[0] * p[0]));
    case KernelFamily::OU: return std::exp(-std::sqrt(sq) / p[0]);
    case KernelFamily::PE: {
      const double s = std::sin((a[0] - b[0]) / p[1]);
      return std::exp(-2.0 * s * s / (p[0] * p[0]));
    }
    case KernelFamily::CA: return a == b ? 1.0 : 0.0;
    case KernelFamily::BI: {
      bool all_one = true;
      for (std::size_t i = 0; i < a.size(); ++i) all_one = all_one && a[i] == 1.0 && b[i] == 1.0;
      return all_one ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

/// Sum over terms of variance times the product of factor oracles.
inline double oracle_expr(const KernelExpr& expr, const Eigen::VectorXd& theta, const double* x, const double* y) {
  double total = 0.0;
  for (std::size_t t = 0; t < expr.terms().size(); ++t) {
    double value = theta[static_cast<Eigen::Index>(expr.variance_slot(t))];
    const auto& factors = expr.terms()[t].factors;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const auto& factor = factors[f];
      std::vector<double> p;
      const std::size_t np = family_param_count(factor.family);
      for (std::size_t k = 0; k < np; ++k) p.push_back(theta[static_cast<Eigen::Index>(expr.factor_slot(t, f) + k)]);
      std::vector<double> a;
      std::vector<double> b;
      for (std::size_t d : factor.block.dims) {
        a.push_back(x[d]);
        b.push_back(y[d]);
      }
      value *= oracle_base(factor.family, p, a, b);
    }
    total += value;
  }
  return total;
}

}  // namespace agpm::testing
