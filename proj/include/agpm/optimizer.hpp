#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace agpm {

/// Objective returning f(x) and writing the gradient into `grad`. A
/// non-finite value marks an infeasible point; the line search backs off.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iters = 200;
  int memory = 10;
  double grad_tol = 1e-5;
  double rel_f_tol = 1e-6;
  double armijo = 1e-4;
  int max_backtracks = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  /// Objective after each accepted step, starting with f(x0).
  std::vector<double> trace;
};

/// Box-constrained minimization by projected L-BFGS with a backtracking
/// Armijo line search. Accepted steps never increase f.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                           const Eigen::VectorXd& upper, const LbfgsOptions& options = {});

}  // namespace agpm
