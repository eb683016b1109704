#pragma once

#include "agpm/harness.hpp"
#include "agpm/models.hpp"
#include "agpm/strategy.hpp"
#include "agpm/synthetic.hpp"
#include "agpm/training.hpp"

#include <json.hpp>

#include <filesystem>

namespace agpm {

using Json = nlohmann::ordered_json;

/// Missing keys keep their defaults; unknown keys are rejected.
Json to_json(const GridConfig& config);
GridConfig grid_config_from_json(const Json& j);

Json to_json(const MarketSpec& spec);
MarketSpec market_spec_from_json(const Json& j);

/// "preset" may be a preset name ("matching", "pickup") or an explicit list.
Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const StrategyConfig& config);
StrategyConfig strategy_config_from_json(const Json& j);

Json to_json(const TrainReport& report);
Json to_json(const Metrics& metrics);
Json to_json(const CrossValidationResult& cv);

/// Envelope {model_kind, target, ...}. AGPM models carry the kernel spec,
/// theta, training data and the jitter used, and are refit exactly on load.
Json to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const Json& j);

Json strategy_report(const StrategyEvaluation& ev);
/// CSV r,c,window,Q_before,Q_after,gradient,target: one row per zone and window.
void save_strategy_metrics(const StrategyEvaluation& ev, const std::filesystem::path& path);

/// CSV day,r,c,t,predicted[,variance] in (day, r, c, t) order.
void save_predictions(const ObservationGrid& grid, std::span<const std::size_t> days, const Eigen::VectorXd& mean,
                      const Eigen::VectorXd* variance, const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
/// Two-space indentation and a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace agpm
