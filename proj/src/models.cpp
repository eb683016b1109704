#include "agpm/models.hpp"

#include <functional>
#include <stdexcept>
#include <string>

namespace agpm {

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Agpm: return "agpm";
    case ModelKind::Pmq: return "pmq";
    case ModelKind::Spmq: return "spmq";
    case ModelKind::Cdmf: return "cdmf";
  }
  return "agpm";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "agpm") return ModelKind::Agpm;
  if (text == "pmq") return ModelKind::Pmq;
  if (text == "spmq") return ModelKind::Spmq;
  if (text == "cdmf") return ModelKind::Cdmf;
  throw std::invalid_argument("unknown model kind '" + std::string(text) + "'; expected agpm, pmq, spmq or cdmf");
}

void check_model_target(ModelKind kind, Target target) {
  if ((kind == ModelKind::Pmq || kind == ModelKind::Spmq) && target == Target::Pickups) {
    throw std::invalid_argument(std::string(model_kind_name(kind)) +
                                " has no pickup results: the queue models describe matching only, so target "
                                "'pickups' is unsupported");
  }
}

namespace {

Eigen::VectorXd flatten_days(const ObservationGrid& grid, std::span<const std::size_t> days,
                             const std::function<Eigen::MatrixXd(std::size_t)>& per_day) {
  const auto& s = grid.shape();
  const Eigen::Index per = static_cast<Eigen::Index>(s.zones()) * s.intervals;
  Eigen::VectorXd out(per * static_cast<Eigen::Index>(days.size()));
  for (std::size_t k = 0; k < days.size(); ++k) {
    const Eigen::MatrixXd m = per_day(days[k]);
    for (int z = 0; z < s.zones(); ++z)
      for (int t = 0; t < s.intervals; ++t) out[static_cast<Eigen::Index>(k) * per + z * s.intervals + t] = m(z, t);
  }
  return out;
}

}  // namespace

Eigen::VectorXd FittedModel::predict(const ObservationGrid& grid, std::span<const std::size_t> days) const {
  switch (kind) {
    case ModelKind::Agpm:
      if (!gp) throw std::logic_error("agpm model has no fitted GP");
      return gp->predict_mean(grid.inputs(days));
    case ModelKind::Cdmf: {
      const Inputs X = grid.inputs(days);
      return cdmf_predict(X.col(kDemand), X.col(kSupply), cdmf);
    }
    case ModelKind::Pmq:
    case ModelKind::Spmq: {
      const auto adjacency = grid_adjacency(grid.shape().rows, grid.shape().cols);
      const SpmqParams params = kind == ModelKind::Pmq ? SpmqParams{1.0, 0.0} : spmq;
      return flatten_days(grid, days, [&](std::size_t d) {
        const Eigen::MatrixXd demand = grid.field(d, Field::Demand);
        const Eigen::MatrixXd supply = grid.field(d, Field::Supply);
        if (kind == ModelKind::Pmq) return pmq_predict(demand, supply, grid.initial_queue(d));
        return spmq_predict(demand, supply, grid.initial_queue(d), params, adjacency);
      });
    }
  }
  throw std::logic_error("unhandled model kind");
}

FittedModel fit_model(const ObservationGrid& grid, std::span<const std::size_t> days, const ModelConfig& config,
                      Target target) {
  check_model_target(config.kind, target);
  if (days.empty()) throw std::invalid_argument("fitting needs at least one day");
  FittedModel model;
  model.kind = config.kind;
  model.target = target;
  switch (config.kind) {
    case ModelKind::Agpm: {
      const auto expr = parse_kernel_spec(config.kernel_spec);
      const Inputs X = grid.inputs(days);
      const Eigen::VectorXd Y = grid.targets(days, target);
      auto report = optimize_hyperparams(expr, X, Y, config.train);
      model.gp = TrainedModel::fit(expr, report.best_theta, X, Y);
      model.report = std::move(report);
      break;
    }
    case ModelKind::Cdmf: {
      const Inputs X = grid.inputs(days);
      model.cdmf = fit_cdmf(X.col(kDemand), X.col(kSupply), grid.targets(days, target)).params;
      break;
    }
    case ModelKind::Spmq:
      model.spmq = fit_spmq(grid.subset(days), grid_adjacency(grid.shape().rows, grid.shape().cols));
      break;
    case ModelKind::Pmq: break;
  }
  return model;
}

}  // namespace agpm
