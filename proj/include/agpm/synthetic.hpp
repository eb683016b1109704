#pragma once

#include "agpm/baselines.hpp"
#include "agpm/kernels.hpp"
#include "agpm/market_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace agpm {

/// Gaussian bump in (row, col, interval) space. Negative amplitudes carve
/// holes; the resulting intensity is clamped at zero.
struct Bump {
  double amplitude = 0.0;
  double row = 1.0;
  double col = 1.0;
  double interval = 1.0;
  double width_rc = 1.0;
  double width_t = 5.0;
};

/// Poisson rate per cell: day_factor * max(0, base + sum of bumps).
struct IntensitySurface {
  double base = 5.0;
  std::vector<Bump> bumps;
  /// Extra bumps placed uniformly at random over the grid.
  int random_bumps = 0;
  double random_amplitude = 0.0;
  double random_width_rc = 1.5;
  double random_width_t = 6.0;
  /// Standard deviation of the per-day lognormal multiplier.
  double day_sigma = 0.0;
};

enum class GeneratorKind { Agpm, Cdmf, Spmq };
std::string_view generator_name(GeneratorKind kind);
GeneratorKind parse_generator(std::string_view text);

struct MarketSpec {
  GridConfig grid;
  GeneratorKind generator = GeneratorKind::Agpm;
  IntensitySurface demand;
  IntensitySurface supply;

  /// Ground truth for the agpm generator: a latent GP draw over every cell
  /// of every day, shifted by a constant mean. The noise slot of each theta
  /// is ignored in favour of noise_variance.
  std::string kernel_spec = "SE(r,c)*SE(t)*SE(d) + SE(r,c)*SE(t)*SE(s)";
  Eigen::VectorXd theta_matches;
  Eigen::VectorXd theta_pickups;
  double mean_matches = 10.0;
  double mean_pickups = 10.0;

  CdmfParams cdmf_matches{1.0, 0.5, 0.5};
  CdmfParams cdmf_pickups{0.9, 0.5, 0.5};

  /// SPMQ generator; it produces no pickups.
  SpmqParams spmq{1.0, 0.0};

  /// Variance of the additive Gaussian noise on generated outputs, which
  /// are then truncated at zero.
  double noise_variance = 0.0;
  /// Mean of the Poisson draw for each zone's initial queue.
  double initial_queue_mean = 0.0;
  /// Round outputs to integers so order records reproduce the panel. With
  /// rounding off no records are emitted.
  bool round_outputs = true;

  void validate() const;
};

/// Small 4x4 grid, 20 intervals, 3 days, AGPM-5 matching truth.
MarketSpec default_market_spec();

struct SyntheticMarket {
  std::vector<OrderRecord> records;
  ObservationGrid grid;
  MarketSpec spec;
};

/// Fully deterministic for a given seed.
SyntheticMarket synthesize_market(std::uint64_t seed, const MarketSpec& spec);

/// Joint draws of the latent function (no noise) at the rows of X; returns
/// X.rows() x draws.
Eigen::MatrixXd draw_gp_samples(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X, int draws,
                                std::mt19937_64& rng);

/// Builds one order per event so that aggregate_orders over the records
/// reproduces the integer-valued panel and its initial queues. The grid's
/// initial queues are raised where matches outrun the waiting orders.
std::vector<OrderRecord> synthesize_records(ObservationGrid& grid, const GridConfig& config, std::mt19937_64& rng);

}  // namespace agpm
