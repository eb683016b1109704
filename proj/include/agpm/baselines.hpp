#pragma once

#include "agpm/market_data.hpp"

#include <Eigen/Dense>

namespace agpm {

/// Cobb-Douglas matching function A * d^alpha * s^beta.
struct CdmfParams {
  double A = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  friend bool operator==(const CdmfParams&, const CdmfParams&) = default;
};

/// Effective supply a * own + b * sum(adjacent).
struct SpmqParams {
  double a = 1.0;
  double b = 0.0;
  friend bool operator==(const SpmqParams&, const SpmqParams&) = default;
};

/// max(0, prev_xcd - prev_matches) + new_demand.
double rollforward_cumulative_demand(double prev_xcd, double prev_matches, double new_demand);

/// One day of queue-limited matching. Panels are zones x intervals and q0
/// holds the carried-over queue per zone; the queue evolves with the
/// predicted matches.
Eigen::MatrixXd pmq_predict(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                            const Eigen::VectorXd& q0);

Eigen::MatrixXd effective_supply(const Eigen::MatrixXd& supply, const SpmqParams& params,
                                 const Adjacency& adjacency);

Eigen::MatrixXd spmq_predict(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                             const Eigen::VectorXd& q0, const SpmqParams& params, const Adjacency& adjacency);

/// Sum over all days of squared match residuals.
double spmq_loss(const ObservationGrid& grid, const Adjacency& adjacency, const SpmqParams& params);

/// Grid search over a, b in {0, 0.05, ..., 2} then a pattern search that
/// only accepts strict improvements. Ties prefer smaller b, then smaller a.
SpmqParams fit_spmq(const ObservationGrid& grid, const Adjacency& adjacency);

/// Uses 0^e = 0 for e > 0; throws std::domain_error for a zero input with a
/// non-positive exponent.
double cdmf_predict(double demand, double supply, const CdmfParams& params);
Eigen::VectorXd cdmf_predict(const Eigen::VectorXd& demand, const Eigen::VectorXd& supply, const CdmfParams& params);

struct CdmfFit {
  CdmfParams params;
  CdmfParams initial;
  double initial_loss = 0.0;
  double loss = 0.0;
};

/// Log-linear least squares on the strictly positive samples, refined by
/// L-BFGS on the raw squared loss over every sample.
CdmfFit fit_cdmf(const Eigen::VectorXd& demand, const Eigen::VectorXd& supply, const Eigen::VectorXd& matches);

double cdmf_loss(const Eigen::VectorXd& demand, const Eigen::VectorXd& supply, const Eigen::VectorXd& matches,
                 const CdmfParams& params);

}  // namespace agpm
