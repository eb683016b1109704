#include "agpm/training.hpp"

#include "agpm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace agpm {

std::vector<SlotBounds> default_bounds(const KernelExpr& expr) {
  std::vector<SlotBounds> bounds;
  bounds.reserve(expr.theta_size());
  for (const auto& slot : expr.layout()) {
    switch (slot.kind) {
      case SlotKind::LengthScale:
      case SlotKind::Period: bounds.push_back({1e-3, 1e4}); break;
      case SlotKind::Variance:
      case SlotKind::Noise: bounds.push_back({1e-6, 1e6}); break;
    }
  }
  return bounds;
}

void validate_config(const TrainConfig& config, const KernelExpr& expr) {
  const auto slots = expr.theta_size();
  if (config.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (config.max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
  if (!config.bounds.empty()) {
    if (config.bounds.size() != slots) throw std::invalid_argument("bounds must list one pair per theta slot");
    for (const auto& b : config.bounds) {
      if (!(b.low > 0.0) || !(b.low < b.high)) throw std::invalid_argument("each bound needs 0 < low < high");
    }
  }
  if (config.init == InitMode::Preset && config.preset.size() != slots) {
    throw std::invalid_argument("preset init needs " + std::to_string(slots) + " values");
  }
  for (double v : config.preset) {
    if (!(v > 0.0)) throw std::invalid_argument("preset values must be positive");
  }
  if (!config.frozen.empty()) {
    if (config.frozen.size() != slots) throw std::invalid_argument("frozen mask must have one flag per slot");
    if (config.init != InitMode::Preset) throw std::invalid_argument("frozen slots require a preset init");
  }
}

TrainReport optimize_hyperparams(const KernelExpr& expr, const Inputs& X, const Eigen::VectorXd& Y,
                                 const TrainConfig& config) {
  validate_config(config, expr);
  if (X.rows() < 2) throw std::invalid_argument("training needs at least two observations");
  if (X.rows() != Y.size()) throw std::invalid_argument("X and Y disagree in length");

  const auto slots = static_cast<Eigen::Index>(expr.theta_size());
  const auto bounds = config.bounds.empty() ? default_bounds(expr) : config.bounds;
  Eigen::VectorXd log_low(slots);
  Eigen::VectorXd log_high(slots);
  for (Eigen::Index j = 0; j < slots; ++j) {
    log_low[j] = std::log(bounds[j].low);
    log_high[j] = std::log(bounds[j].high);
  }

  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < slots; ++j) {
    if (config.frozen.empty() || !config.frozen[j]) free.push_back(j);
  }
  const auto n_free = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd free_low(n_free);
  Eigen::VectorXd free_high(n_free);
  for (Eigen::Index k = 0; k < n_free; ++k) {
    free_low[k] = log_low[free[k]];
    free_high[k] = log_high[free[k]];
  }

  TrainReport report;
  report.best_lml = -std::numeric_limits<double>::infinity();
  bool any_success = false;

  for (int restart = 0; restart < config.restarts; ++restart) {
    std::seed_seq seq{static_cast<std::uint64_t>(config.seed), static_cast<std::uint64_t>(restart)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    RestartResult rr;
    rr.initial_theta.resize(slots);
    const bool from_preset = config.init == InitMode::Preset && restart == 0;
    for (Eigen::Index j = 0; j < slots; ++j) {
      const double u = unit(rng);
      if (from_preset || (!config.frozen.empty() && config.frozen[j])) {
        rr.initial_theta[j] = std::clamp(config.preset[j], bounds[j].low, bounds[j].high);
      } else {
        rr.initial_theta[j] = std::exp(log_low[j] + u * (log_high[j] - log_low[j]));
      }
    }
    const Eigen::VectorXd log_theta = rr.initial_theta.array().log();

    Eigen::VectorXd theta = rr.initial_theta;
    auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) -> double {
      for (Eigen::Index k = 0; k < n_free; ++k) theta[free[k]] = std::exp(u[k]);
      try {
        const auto eval = lml_with_gradient(expr, theta, X, Y);
        // Chain rule: dL/dlog(theta) = theta * dL/dtheta.
        grad.resize(n_free);
        for (Eigen::Index k = 0; k < n_free; ++k) grad[k] = -theta[free[k]] * eval.gradient[free[k]];
        return -eval.value;
      } catch (const CholeskyError&) {
        grad.setZero(n_free);
        return std::numeric_limits<double>::infinity();
      }
    };

    Eigen::VectorXd u0(n_free);
    for (Eigen::Index k = 0; k < n_free; ++k) u0[k] = log_theta[free[k]];

    LbfgsOptions options;
    options.max_iters = config.max_iters;
    options.grad_tol = config.grad_tol;
    options.rel_f_tol = config.rel_f_tol;
    try {
      const auto result = minimize_lbfgs(objective, u0, free_low, free_high, options);
      theta = rr.initial_theta;
      for (Eigen::Index k = 0; k < n_free; ++k) theta[free[k]] = std::exp(result.x[k]);
      rr.final_theta = theta;
      rr.final_lml = -result.f;
      rr.iterations = result.iterations;
      rr.converged = result.converged;
      rr.lml_trace.reserve(result.trace.size());
      for (double f : result.trace) rr.lml_trace.push_back(-f);
      if (!any_success || rr.final_lml > report.best_lml) {
        report.best_lml = rr.final_lml;
        report.best_theta = rr.final_theta;
      }
      any_success = true;
    } catch (const std::runtime_error& e) {
      rr.failure = e.what();
      rr.final_theta = rr.initial_theta;
      rr.final_lml = -std::numeric_limits<double>::infinity();
    }
    report.per_restart.push_back(std::move(rr));
  }

  if (!any_success) {
    throw TrainingError("every restart failed at its start point (" + report.per_restart.front().failure +
                        "); the data may be degenerate");
  }
  return report;
}

Eigen::VectorXd preset_theta(std::string_view name) {
  Eigen::VectorXd theta(9);
  if (name == "matching") {
    theta << 5.4, 7.4, 20.9, 19.9, 1.6, 0.2, 41.9, 12.3, 5.1;
  } else if (name == "pickup") {
    theta << 3.9, 1.0, 20.4, 29.5, 0.8, 0.2, 5.8, 1.3, 7.4;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'; expected 'matching' or 'pickup'");
  }
  return theta;
}

}  // namespace agpm
