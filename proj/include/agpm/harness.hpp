#pragma once

#include "agpm/market_data.hpp"
#include "agpm/models.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace agpm {

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Throws std::invalid_argument on a length mismatch, empty input, or a
/// constant observed vector (R^2 undefined).
Metrics compute_metrics(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted);

struct FoldSpec {
  std::string held_out_day;
  std::vector<std::string> training_days;
};

/// One fold per day, in day order.
std::vector<FoldSpec> leave_one_day_out(const std::vector<std::string>& days);

struct FoldResult {
  FoldSpec fold;
  Metrics metrics;
  Eigen::VectorXd observed;
  Eigen::VectorXd predicted;
  FittedModel model;
};

struct CrossValidationResult {
  ModelKind kind = ModelKind::Agpm;
  Target target = Target::Matches;
  std::vector<FoldResult> folds;
  /// Arithmetic mean of the per-fold values; n is the total count.
  Metrics averaged;
  /// Metrics of all held-out predictions taken together.
  Metrics pooled;
};

/// Leave-one-day-out over every day of the grid.
CrossValidationResult cross_validate(const ObservationGrid& grid, const ModelConfig& config, Target target);

/// CSV observed,predicted,on_diagonal with 17 significant digits;
/// on_diagonal is 1 when the two values are identical.
void emit_scatter(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted,
                  const std::filesystem::path& path);

}  // namespace agpm
