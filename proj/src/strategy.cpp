#include "agpm/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace agpm {

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::QS: return "QS";
    case StrategyKind::GS: return "GS";
    case StrategyKind::CS: return "CS";
  }
  return "QS";
}

StrategyKind parse_strategy(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (upper == "QS") return StrategyKind::QS;
  if (upper == "GS") return StrategyKind::GS;
  if (upper == "CS") return StrategyKind::CS;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'; expected QS, GS or CS");
}

void StrategyConfig::validate() const {
  if (window_intervals < 1) throw std::invalid_argument("window_intervals must be at least 1");
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("fraction must lie in (0, 1)");
  if (!(qs_threshold >= 0.0) || !(gs_threshold >= 0.0) || !(cs_threshold >= 0.0)) {
    throw std::invalid_argument("thresholds must be non-negative");
  }
  if (!(no_donate_low <= no_donate_high) || !(no_donate_high <= gs_threshold)) {
    throw std::invalid_argument("no-donate band needs low <= high <= gs_threshold");
  }
}

int window_count(int intervals, int window_intervals) {
  if (window_intervals < 1) throw std::invalid_argument("window_intervals must be at least 1");
  return (intervals + window_intervals - 1) / window_intervals;
}

QueueReport queue_lengths(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& matches, const Eigen::VectorXd& q0,
                          int window_intervals, bool clamp) {
  if (demand.rows() != matches.rows() || demand.cols() != matches.cols()) {
    throw std::invalid_argument("demand and match panels differ in shape (" + std::to_string(demand.rows()) + "x" +
                                std::to_string(demand.cols()) + " vs " + std::to_string(matches.rows()) + "x" +
                                std::to_string(matches.cols()) + ")");
  }
  if (q0.size() != demand.rows()) throw std::invalid_argument("initial queue must have one entry per zone");
  if ((q0.array() < 0.0).any()) throw std::invalid_argument("initial queue must be non-negative");

  const Eigen::Index zones = demand.rows();
  const Eigen::Index T = demand.cols();
  const int W = window_count(static_cast<int>(T), window_intervals);

  QueueReport report;
  report.q0 = q0;
  report.q.resize(zones, T);
  report.per_window_Q = Eigen::MatrixXd::Zero(zones, W);
  report.Q_zone = Eigen::VectorXd::Zero(zones);
  for (Eigen::Index z = 0; z < zones; ++z) {
    double level = q0[z];
    for (Eigen::Index t = 0; t < T; ++t) {
      level += demand(z, t) - matches(z, t);
      if (clamp) level = std::max(0.0, level);
      report.q(z, t) = level;
    }
  }
  for (Eigen::Index z = 0; z < zones; ++z) {
    for (Eigen::Index t = 0; t < T; ++t) report.per_window_Q(z, t / window_intervals) += report.q(z, t);
    report.Q_zone[z] = report.q.row(z).sum();
  }
  report.Q_total = report.Q_zone.sum();
  return report;
}

Eigen::MatrixXd supply_gradient_field(const TrainedModel& model, const GridShape& shape,
                                      const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                                      int window_intervals) {
  const Inputs X = day_inputs(shape, demand, supply);
  const int W = window_count(shape.intervals, window_intervals);
  Eigen::MatrixXd field = Eigen::MatrixXd::Zero(shape.zones(), W);
  if (!model.expr().uses_dim(kSupply)) return field;
  for (Eigen::Index row = 0; row < X.rows(); ++row) {
    const Eigen::Index z = row / shape.intervals;
    const Eigen::Index t = row % shape.intervals;
    const double g = model.predictive_mean_gradient(
        std::span<const double>(X.row(row).data(), static_cast<std::size_t>(X.cols())), kSupply);
    field(z, t / window_intervals) += g;
  }
  return field;
}

TargetSets select_targets(StrategyKind kind, const QueueReport& queues, const Eigen::MatrixXd* gradient,
                          const StrategyConfig& config) {
  if (kind != StrategyKind::QS) {
    if (gradient == nullptr) {
      throw std::invalid_argument(std::string(strategy_name(kind)) + " target selection needs a gradient field");
    }
    if (gradient->rows() != queues.per_window_Q.rows() || gradient->cols() != queues.per_window_Q.cols()) {
      throw std::invalid_argument("gradient field and queue report cover different zones or windows");
    }
  }
  const Eigen::Index zones = queues.per_window_Q.rows();
  const Eigen::Index W = queues.per_window_Q.cols();
  TargetSets targets(static_cast<std::size_t>(W));
  for (Eigen::Index w = 0; w < W; ++w) {
    for (Eigen::Index z = 0; z < zones; ++z) {
      bool selected = false;
      switch (kind) {
        case StrategyKind::QS: selected = queues.per_window_Q(z, w) > config.qs_threshold; break;
        case StrategyKind::GS: selected = (*gradient)(z, w) > config.gs_threshold; break;
        case StrategyKind::CS:
          selected = queues.per_window_Q(z, w) * (*gradient)(z, w) > config.cs_threshold;
          break;
      }
      if (selected) targets[static_cast<std::size_t>(w)].push_back(static_cast<std::size_t>(z));
    }
  }
  return targets;
}

RelocationPlan apply_relocation(const Eigen::MatrixXd& supply, const TargetSets& targets, const Adjacency& adjacency,
                                const StrategyConfig& config, StrategyKind kind, const Eigen::MatrixXd* gradient) {
  const Eigen::Index zones = supply.rows();
  const Eigen::Index T = supply.cols();
  if (adjacency.size() != static_cast<std::size_t>(zones)) {
    throw std::invalid_argument("adjacency does not cover every zone");
  }
  if (targets.size() != static_cast<std::size_t>(window_count(static_cast<int>(T), config.window_intervals))) {
    throw std::invalid_argument("target sets do not match the number of windows");
  }
  if (kind == StrategyKind::GS && gradient == nullptr) {
    throw std::invalid_argument("GS relocation needs the gradient field for its no-donate band");
  }

  RelocationPlan plan;
  plan.targets = targets;
  plan.revised_supply = supply;
  for (std::size_t w = 0; w < targets.size(); ++w) {
    std::vector<bool> is_target(static_cast<std::size_t>(zones), false);
    for (std::size_t z : targets[w]) {
      if (z >= static_cast<std::size_t>(zones)) throw std::out_of_range("target zone outside the grid");
      is_target[z] = true;
    }
    const Eigen::Index t_begin = static_cast<Eigen::Index>(w) * config.window_intervals;
    const Eigen::Index t_end = std::min<Eigen::Index>(T, t_begin + config.window_intervals);

    for (std::size_t donor = 0; donor < static_cast<std::size_t>(zones); ++donor) {
      if (is_target[donor]) continue;
      std::vector<std::size_t> receivers;
      for (std::size_t n : adjacency[donor]) {
        if (is_target[n]) receivers.push_back(n);
      }
      if (receivers.empty()) continue;
      if (kind == StrategyKind::GS) {
        const double g = (*gradient)(static_cast<Eigen::Index>(donor), static_cast<Eigen::Index>(w));
        if (g >= config.no_donate_low && g <= config.no_donate_high) continue;
      }
      const double share = 1.0 / static_cast<double>(receivers.size());
      for (std::size_t target : receivers) {
        Transfer tr;
        tr.window = static_cast<int>(w);
        tr.donor = donor;
        tr.target = target;
        for (Eigen::Index t = t_begin; t < t_end; ++t) {
          tr.amounts.push_back(config.fraction * supply(static_cast<Eigen::Index>(donor), t) * share);
        }
        plan.transfers.push_back(std::move(tr));
      }
      for (Eigen::Index t = t_begin; t < t_end; ++t) {
        const double out = config.fraction * supply(static_cast<Eigen::Index>(donor), t);
        plan.revised_supply(static_cast<Eigen::Index>(donor), t) -= out;
        for (std::size_t target : receivers) plan.revised_supply(static_cast<Eigen::Index>(target), t) += out * share;
      }
    }
  }
  if ((plan.revised_supply.array() < 0.0).any()) {
    throw std::logic_error("relocation produced negative supply");
  }
  return plan;
}

StrategyEvaluation evaluate_strategy(const TrainedModel& model, const GridShape& shape, const Eigen::MatrixXd& demand,
                                     const Eigen::MatrixXd& supply, const Eigen::VectorXd& q0, StrategyKind kind,
                                     const StrategyConfig& config, const Adjacency& adjacency) {
  config.validate();
  if (demand.rows() != shape.zones() || demand.cols() != shape.intervals) {
    throw std::invalid_argument("day panel does not match the grid shape");
  }
  auto predict_panel = [&](const Eigen::MatrixXd& s) {
    const Eigen::VectorXd mean = model.predict_mean(day_inputs(shape, demand, s));
    Eigen::MatrixXd out(shape.zones(), shape.intervals);
    for (Eigen::Index i = 0; i < mean.size(); ++i) out(i / shape.intervals, i % shape.intervals) = mean[i];
    return out;
  };

  StrategyEvaluation ev;
  ev.kind = kind;
  ev.config = config;
  ev.shape = shape;
  ev.matches_before = predict_panel(supply);
  ev.before = queue_lengths(demand, ev.matches_before, q0, config.window_intervals, config.clamp_queue);
  const Eigen::MatrixXd* gradient = nullptr;
  if (kind != StrategyKind::QS) {
    ev.gradient = supply_gradient_field(model, shape, demand, supply, config.window_intervals);
    gradient = &ev.gradient;
  }
  const auto targets = select_targets(kind, ev.before, gradient, config);
  ev.plan = apply_relocation(supply, targets, adjacency, config, kind, gradient);
  if (ev.plan.transfers.empty()) {
    ev.matches_after = ev.matches_before;
    ev.after = ev.before;
  } else {
    ev.matches_after = predict_panel(ev.plan.revised_supply);
    ev.after = queue_lengths(demand, ev.matches_after, q0, config.window_intervals, config.clamp_queue);
  }
  return ev;
}

}  // namespace agpm
