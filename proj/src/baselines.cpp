#include "agpm/baselines.hpp"

#include "agpm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace agpm {

namespace {

void check_panels(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply, const Eigen::VectorXd& q0) {
  if (demand.rows() != supply.rows() || demand.cols() != supply.cols()) {
    throw std::invalid_argument("demand and supply panels differ in shape");
  }
  if (q0.size() != demand.rows()) throw std::invalid_argument("initial queue must have one entry per zone");
}

Eigen::MatrixXd queue_limited_matches(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                                      const Eigen::VectorXd& q0) {
  Eigen::MatrixXd matches(demand.rows(), demand.cols());
  for (Eigen::Index z = 0; z < demand.rows(); ++z) {
    double xcd = q0[z] + demand(z, 0);
    for (Eigen::Index t = 0; t < demand.cols(); ++t) {
      if (t > 0) xcd = rollforward_cumulative_demand(xcd, matches(z, t - 1), demand(z, t));
      matches(z, t) = std::min(xcd, supply(z, t));
    }
  }
  return matches;
}

// 0^e with the convention 0^e = 0 for e > 0; NaN when undefined.
double safe_pow(double x, double e) {
  if (x == 0.0) return e > 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  return std::pow(x, e);
}

}  // namespace

double rollforward_cumulative_demand(double prev_xcd, double prev_matches, double new_demand) {
  if (prev_xcd < 0.0 || prev_matches < 0.0 || new_demand < 0.0) {
    throw std::invalid_argument("cumulative demand roll-forward needs non-negative inputs");
  }
  return std::max(0.0, prev_xcd - prev_matches) + new_demand;
}

Eigen::MatrixXd pmq_predict(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                            const Eigen::VectorXd& q0) {
  check_panels(demand, supply, q0);
  if (demand.cols() == 0) return Eigen::MatrixXd(demand.rows(), 0);
  return queue_limited_matches(demand, supply, q0);
}

Eigen::MatrixXd effective_supply(const Eigen::MatrixXd& supply, const SpmqParams& params,
                                 const Adjacency& adjacency) {
  if (params.a < 0.0 || params.b < 0.0) throw std::invalid_argument("SPMQ weights must be non-negative");
  if (adjacency.size() != static_cast<std::size_t>(supply.rows())) {
    throw std::invalid_argument("adjacency lists " + std::to_string(adjacency.size()) + " zones but the panel has " +
                                std::to_string(supply.rows()));
  }
  Eigen::MatrixXd out(supply.rows(), supply.cols());
  for (Eigen::Index z = 0; z < supply.rows(); ++z) {
    for (Eigen::Index t = 0; t < supply.cols(); ++t) {
      double neighbors = 0.0;
      for (std::size_t n : adjacency[static_cast<std::size_t>(z)]) {
        if (n >= adjacency.size()) throw std::invalid_argument("adjacency refers to an unknown zone");
        neighbors += supply(static_cast<Eigen::Index>(n), t);
      }
      out(z, t) = params.a * supply(z, t) + params.b * neighbors;
    }
  }
  return out;
}

Eigen::MatrixXd spmq_predict(const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply,
                             const Eigen::VectorXd& q0, const SpmqParams& params, const Adjacency& adjacency) {
  check_panels(demand, supply, q0);
  return pmq_predict(demand, effective_supply(supply, params, adjacency), q0);
}

double spmq_loss(const ObservationGrid& grid, const Adjacency& adjacency, const SpmqParams& params) {
  double loss = 0.0;
  for (std::size_t d = 0; d < grid.num_days(); ++d) {
    const Eigen::MatrixXd pred = spmq_predict(grid.field(d, Field::Demand), grid.field(d, Field::Supply),
                                              grid.initial_queue(d), params, adjacency);
    loss += (grid.field(d, Field::Matches) - pred).squaredNorm();
  }
  return loss;
}

SpmqParams fit_spmq(const ObservationGrid& grid, const Adjacency& adjacency) {
  if (grid.num_days() == 0) throw std::invalid_argument("SPMQ fit needs at least one day of data");

  // Each day's panels are reused for every candidate.
  struct Day {
    Eigen::MatrixXd demand;
    Eigen::MatrixXd supply;
    Eigen::MatrixXd neighbor_supply;
    Eigen::MatrixXd matches;
    Eigen::VectorXd q0;
  };
  std::vector<Day> days;
  for (std::size_t d = 0; d < grid.num_days(); ++d) {
    Day day{grid.field(d, Field::Demand), grid.field(d, Field::Supply), {}, grid.field(d, Field::Matches),
            grid.initial_queue(d)};
    day.neighbor_supply = effective_supply(day.supply, {0.0, 1.0}, adjacency);
    days.push_back(std::move(day));
  }
  auto loss = [&](double a, double b) {
    double total = 0.0;
    for (const auto& day : days) {
      const Eigen::MatrixXd eff = a * day.supply + b * day.neighbor_supply;
      total += (day.matches - queue_limited_matches(day.demand, eff, day.q0)).squaredNorm();
    }
    return total;
  };

  SpmqParams best{0.0, 0.0};
  double best_loss = std::numeric_limits<double>::infinity();
  for (int ib = 0; ib <= 40; ++ib) {
    for (int ia = 0; ia <= 40; ++ia) {
      const double a = 0.05 * ia;
      const double b = 0.05 * ib;
      const double l = loss(a, b);
      if (l < best_loss) {
        best_loss = l;
        best = {a, b};
      }
    }
  }

  for (double step = 0.025; step >= 1e-4; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      const SpmqParams moves[] = {{best.a, best.b - step},
                                  {best.a - step, best.b},
                                  {best.a + step, best.b},
                                  {best.a, best.b + step}};
      for (const auto& m : moves) {
        if (m.a < 0.0 || m.b < 0.0) continue;
        const double l = loss(m.a, m.b);
        if (l < best_loss) {
          best_loss = l;
          best = m;
          improved = true;
          break;
        }
      }
    }
  }
  return best;
}

double cdmf_predict(double demand, double supply, const CdmfParams& params) {
  if (demand < 0.0 || supply < 0.0) throw std::invalid_argument("CDMF inputs must be non-negative");
  if (!(params.A > 0.0)) throw std::invalid_argument("CDMF productivity A must be positive");
  if ((demand == 0.0 && params.alpha <= 0.0) || (supply == 0.0 && params.beta <= 0.0)) {
    throw std::domain_error("CDMF is undefined for a zero input with a non-positive exponent");
  }
  if (demand == 0.0 || supply == 0.0) return 0.0;
  return params.A * std::pow(demand, params.alpha) * std::pow(supply, params.beta);
}

Eigen::VectorXd cdmf_predict(const Eigen::VectorXd& demand, const Eigen::VectorXd& supply, const CdmfParams& params) {
  if (demand.size() != supply.size()) throw std::invalid_argument("demand and supply differ in length");
  Eigen::VectorXd out(demand.size());
  for (Eigen::Index i = 0; i < demand.size(); ++i) out[i] = cdmf_predict(demand[i], supply[i], params);
  return out;
}

double cdmf_loss(const Eigen::VectorXd& demand, const Eigen::VectorXd& supply, const Eigen::VectorXd& matches,
                 const CdmfParams& params) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < demand.size(); ++i) {
    const double p = params.A * safe_pow(demand[i], params.alpha) * safe_pow(supply[i], params.beta);
    loss += (matches[i] - p) * (matches[i] - p);
  }
  return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
}

CdmfFit fit_cdmf(const Eigen::VectorXd& demand, const Eigen::VectorXd& supply, const Eigen::VectorXd& matches) {
  if (demand.size() != supply.size() || demand.size() != matches.size()) {
    throw std::invalid_argument("CDMF samples differ in length");
  }
  if ((demand.array() < 0.0).any() || (supply.array() < 0.0).any()) {
    throw std::invalid_argument("CDMF inputs must be non-negative");
  }

  std::vector<Eigen::Index> usable;
  for (Eigen::Index i = 0; i < demand.size(); ++i) {
    if (demand[i] > 0.0 && supply[i] > 0.0 && matches[i] > 0.0) usable.push_back(i);
  }
  if (usable.size() < 3) {
    throw std::invalid_argument("CDMF fit needs at least 3 samples with positive demand, supply and matches; found " +
                                std::to_string(usable.size()));
  }

  const auto m = static_cast<Eigen::Index>(usable.size());
  Eigen::MatrixXd design(m, 3);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = usable[static_cast<std::size_t>(k)];
    design.row(k) << 1.0, std::log(demand[i]), std::log(supply[i]);
    rhs[k] = std::log(matches[i]);
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);

  CdmfFit fit;
  fit.initial = {std::exp(coef[0]), coef[1], coef[2]};
  fit.initial_loss = cdmf_loss(demand, supply, matches, fit.initial);
  fit.params = fit.initial;
  fit.loss = fit.initial_loss;

  // Parameters: (log A, alpha, beta).
  auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) -> double {
    grad.setZero(3);
    const double A = std::exp(u[0]);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < demand.size(); ++i) {
      const double p = A * safe_pow(demand[i], u[1]) * safe_pow(supply[i], u[2]);
      if (!std::isfinite(p)) return std::numeric_limits<double>::infinity();
      const double r = matches[i] - p;
      loss += r * r;
      if (p != 0.0) {
        grad[0] -= 2.0 * r * p;
        grad[1] -= 2.0 * r * p * std::log(demand[i]);
        grad[2] -= 2.0 * r * p * std::log(supply[i]);
      }
    }
    return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
  };

  Eigen::VectorXd u0(3);
  u0 << coef[0], coef[1], coef[2];
  Eigen::VectorXd lower(3);
  Eigen::VectorXd upper(3);
  lower << -50.0, -20.0, -20.0;
  upper << 50.0, 20.0, 20.0;
  LbfgsOptions options;
  options.max_iters = 500;
  options.grad_tol = 1e-10;
  options.rel_f_tol = 1e-14;
  try {
    const auto result = minimize_lbfgs(objective, u0.cwiseMax(lower).cwiseMin(upper), lower, upper, options);
    const CdmfParams refined{std::exp(result.x[0]), result.x[1], result.x[2]};
    const double refined_loss = cdmf_loss(demand, supply, matches, refined);
    if (refined_loss <= fit.initial_loss) {
      fit.params = refined;
      fit.loss = refined_loss;
    }
  } catch (const std::runtime_error&) {
    // The log-space start is infeasible for the raw loss; keep it.
  }
  return fit;
}

}  // namespace agpm
