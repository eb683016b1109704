#pragma once

#include "agpm/baselines.hpp"
#include "agpm/gp.hpp"
#include "agpm/market_data.hpp"
#include "agpm/training.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace agpm {

enum class ModelKind { Agpm, Pmq, Spmq, Cdmf };
std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// What to fit: an AGPM kernel with its training settings, or a baseline.
struct ModelConfig {
  ModelKind kind = ModelKind::Agpm;
  std::string kernel_spec = "AGPM5";
  TrainConfig train;
};

/// Throws std::invalid_argument for pairings that are not defined, such as
/// a queue model asked for pickups.
void check_model_target(ModelKind kind, Target target);

/// A fitted predictor of one target.
struct FittedModel {
  ModelKind kind = ModelKind::Agpm;
  Target target = Target::Matches;
  std::optional<TrainedModel> gp;
  std::optional<TrainReport> report;
  CdmfParams cdmf;
  SpmqParams spmq;

  /// Predictions for the listed days, in the (day, r, c, t) row order of
  /// ObservationGrid::inputs. Queue models roll forward from each day's
  /// recorded initial queue.
  Eigen::VectorXd predict(const ObservationGrid& grid, std::span<const std::size_t> days) const;
};

FittedModel fit_model(const ObservationGrid& grid, std::span<const std::size_t> days, const ModelConfig& config,
                      Target target);

}  // namespace agpm
