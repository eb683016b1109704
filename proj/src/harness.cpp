#include "agpm/harness.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace agpm {

Metrics compute_metrics(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted) {
  if (observed.size() != predicted.size()) {
    throw std::invalid_argument("observed and predicted differ in length (" + std::to_string(observed.size()) +
                                " vs " + std::to_string(predicted.size()) + ")");
  }
  if (observed.size() == 0) throw std::invalid_argument("metrics need at least one observation");
  const double n = static_cast<double>(observed.size());
  const Eigen::ArrayXd residual = (observed - predicted).array();
  const double ss_res = residual.square().sum();
  const double ss_tot = (observed.array() - observed.mean()).square().sum();
  if (!(ss_tot > 0.0)) throw std::invalid_argument("R^2 is undefined for a constant observed vector");
  Metrics m;
  m.n = static_cast<std::size_t>(observed.size());
  m.mae = residual.abs().sum() / n;
  m.rmse = std::sqrt(ss_res / n);
  m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

std::vector<FoldSpec> leave_one_day_out(const std::vector<std::string>& days) {
  if (days.size() < 2) throw std::invalid_argument("leave-one-day-out needs at least two days");
  std::vector<FoldSpec> folds;
  for (std::size_t i = 0; i < days.size(); ++i) {
    FoldSpec fold;
    fold.held_out_day = days[i];
    for (std::size_t j = 0; j < days.size(); ++j) {
      if (j != i) fold.training_days.push_back(days[j]);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

CrossValidationResult cross_validate(const ObservationGrid& grid, const ModelConfig& config, Target target) {
  check_model_target(config.kind, target);
  if (grid.num_days() < 2) throw std::invalid_argument("cross-validation needs at least two days");

  CrossValidationResult cv;
  cv.kind = config.kind;
  cv.target = target;
  Eigen::Index total = 0;
  for (const auto& fold : leave_one_day_out(grid.days())) {
    std::vector<std::size_t> train;
    for (const auto& label : fold.training_days) train.push_back(grid.day_index(label));
    const std::size_t held[] = {grid.day_index(fold.held_out_day)};

    FoldResult result{fold, {}, grid.targets(held, target), {}, fit_model(grid, train, config, target)};
    result.predicted = result.model.predict(grid, held);
    result.metrics = compute_metrics(result.observed, result.predicted);
    total += result.observed.size();
    cv.folds.push_back(std::move(result));
  }

  Eigen::VectorXd observed(total);
  Eigen::VectorXd predicted(total);
  Eigen::Index offset = 0;
  for (const auto& f : cv.folds) {
    cv.averaged.mae += f.metrics.mae;
    cv.averaged.rmse += f.metrics.rmse;
    cv.averaged.r2 += f.metrics.r2;
    observed.segment(offset, f.observed.size()) = f.observed;
    predicted.segment(offset, f.predicted.size()) = f.predicted;
    offset += f.observed.size();
  }
  const double k = static_cast<double>(cv.folds.size());
  cv.averaged.mae /= k;
  cv.averaged.rmse /= k;
  cv.averaged.r2 /= k;
  cv.averaged.n = static_cast<std::size_t>(total);
  cv.pooled = compute_metrics(observed, predicted);
  return cv;
}

void emit_scatter(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted,
                  const std::filesystem::path& path) {
  if (observed.size() != predicted.size()) throw std::invalid_argument("observed and predicted differ in length");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "observed,predicted,on_diagonal\n";
  for (Eigen::Index i = 0; i < observed.size(); ++i) {
    out << format_real(observed[i]) << ',' << format_real(predicted[i]) << ','
        << (observed[i] == predicted[i] ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace agpm
