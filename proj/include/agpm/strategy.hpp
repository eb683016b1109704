#pragma once

#include "agpm/gp.hpp"
#include "agpm/market_data.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace agpm {

enum class StrategyKind { QS, GS, CS };
std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view text);

struct StrategyConfig {
  int window_intervals = 10;
  double fraction = 0.10;
  double qs_threshold = 100.0;
  double gs_threshold = 1.2;
  /// Under GS, zones whose window gradient lies in [low, high] never donate.
  double no_donate_low = 1.0;
  double no_donate_high = 1.2;
  double cs_threshold = 100.0;
  /// Clamp each step of the queue recursion at zero.
  bool clamp_queue = false;

  void validate() const;
};

/// Number of windows covering `intervals`; the last one may be partial.
int window_count(int intervals, int window_intervals);

struct QueueReport {
  /// zones x intervals queue lengths.
  Eigen::MatrixXd q;
  Eigen::VectorXd Q_zone;
  double Q_total = 0.0;
  /// zones x windows sums of q.
  Eigen::MatrixXd per_window_Q;
  Eigen::VectorXd q0;
};

/// q_t = q0 + sum_{tau <= t} (demand_tau - matches_tau), Q_zone = sum_t q_t,
/// Q_total = sum over zones.
QueueReport queue_lengths(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& matches, const Eigen::VectorXd& q0,
                          int window_intervals, bool clamp = false);

/// zones x windows sums of d(predicted matches)/d(supply) at each cell of
/// the day panel.
Eigen::MatrixXd supply_gradient_field(const TrainedModel& model, const GridShape& shape,
                                      const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                                      int window_intervals);

/// Sorted target zone indices, one list per window.
using TargetSets = std::vector<std::vector<std::size_t>>;

/// Strict inequalities throughout. `gradient` may be null for QS only.
TargetSets select_targets(StrategyKind kind, const QueueReport& queues, const Eigen::MatrixXd* gradient,
                          const StrategyConfig& config);

struct Transfer {
  int window = 0;
  std::size_t donor = 0;
  std::size_t target = 0;
  /// Amount moved at each interval of the window.
  std::vector<double> amounts;
};

struct RelocationPlan {
  TargetSets targets;
  std::vector<Transfer> transfers;
  Eigen::MatrixXd revised_supply;
};

/// Each non-target zone next to at least one target gives `fraction` of its
/// supply at every interval of the window, split equally among those
/// targets. All moves of a window use the pre-revision supply. Under GS the
/// no-donate band applies, which needs `gradient`.
RelocationPlan apply_relocation(const Eigen::MatrixXd& supply, const TargetSets& targets, const Adjacency& adjacency,
                                const StrategyConfig& config, StrategyKind kind,
                                const Eigen::MatrixXd* gradient = nullptr);

struct StrategyEvaluation {
  StrategyKind kind = StrategyKind::QS;
  StrategyConfig config;
  GridShape shape;
  Eigen::MatrixXd gradient;
  Eigen::MatrixXd matches_before;
  Eigen::MatrixXd matches_after;
  QueueReport before;
  QueueReport after;
  RelocationPlan plan;
};

/// Predicts matches on the day panel, selects targets from the baseline
/// queues and gradients, relocates supply, predicts again and recomputes
/// the queues. Demand and q0 are held fixed.
StrategyEvaluation evaluate_strategy(const TrainedModel& model, const GridShape& shape, const Eigen::MatrixXd& demand,
                                     const Eigen::MatrixXd& supply, const Eigen::VectorXd& q0, StrategyKind kind,
                                     const StrategyConfig& config, const Adjacency& adjacency);

}  // namespace agpm
