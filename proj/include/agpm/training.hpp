#pragma once

#include "agpm/gp.hpp"
#include "agpm/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agpm {

enum class InitMode { LogUniformRandom, Preset };

struct SlotBounds {
  double low = 0.0;
  double high = 0.0;
};

/// Maximum-marginal-likelihood settings. Optimization runs over log(theta).
struct TrainConfig {
  int restarts = 3;
  int max_iters = 200;
  double grad_tol = 1e-5;
  double rel_f_tol = 1e-6;
  /// Raw-unit bounds per slot; empty means default_bounds(expr).
  std::vector<SlotBounds> bounds;
  std::uint64_t seed = 0;
  InitMode init = InitMode::LogUniformRandom;
  /// Starting point of restart 0 when init == Preset. Later restarts draw
  /// uniformly in log-bounds.
  std::vector<double> preset;
  /// Slots held at their preset value. Requires init == Preset.
  std::vector<bool> frozen;
};

/// Length-scales and periods in [1e-3, 1e4]; variances and noise in [1e-6, 1e6].
std::vector<SlotBounds> default_bounds(const KernelExpr& expr);

/// Throws std::invalid_argument on an inconsistent configuration.
void validate_config(const TrainConfig& config, const KernelExpr& expr);

struct RestartResult {
  Eigen::VectorXd initial_theta;
  Eigen::VectorXd final_theta;
  double final_lml = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Non-empty when the restart could not be evaluated at its start point.
  std::string failure;
  /// Log marginal likelihood after each accepted step.
  std::vector<double> lml_trace;
};

struct TrainReport {
  Eigen::VectorXd best_theta;
  double best_lml = 0.0;
  std::vector<RestartResult> per_restart;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Multi-restart projected L-BFGS ascent of the log marginal likelihood in
/// log-parameter space. Deterministic for a fixed seed. Throws TrainingError
/// when every restart fails at its start point.
TrainReport optimize_hyperparams(const KernelExpr& expr, const Inputs& X, const Eigen::VectorXd& Y,
                                 const TrainConfig& config);

/// Averaged fitted AGPM-5 vectors reported for the matching and pickup
/// processes, layout [var1, l1_rc, l1_t, l1_d, var2, l2_rc, l2_t, l2_s, noise].
Eigen::VectorXd preset_theta(std::string_view name);

}  // namespace agpm
