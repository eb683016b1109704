#include "agpm/synthetic.hpp"

#include "agpm/gp.hpp"
#include "agpm/training.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

namespace agpm {

namespace {

void draw_counts(const IntensitySurface& surface, const GridShape& shape, std::size_t num_days,
                            std::mt19937_64& rng, std::vector<Eigen::MatrixXd>& out) {
  std::vector<Bump> bumps = surface.bumps;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < surface.random_bumps; ++k) {
    Bump b;
    b.amplitude = surface.random_amplitude * unit(rng);
    b.row = 1.0 + (shape.rows - 1) * unit(rng);
    b.col = 1.0 + (shape.cols - 1) * unit(rng);
    b.interval = 1.0 + (shape.intervals - 1) * unit(rng);
    b.width_rc = surface.random_width_rc;
    b.width_t = surface.random_width_t;
    bumps.push_back(b);
  }

  Eigen::MatrixXd rate(shape.zones(), shape.intervals);
  for (int z = 0; z < shape.zones(); ++z) {
    const Zone zone = shape.zone_at(static_cast<std::size_t>(z));
    for (int t = 1; t <= shape.intervals; ++t) {
      double v = surface.base;
      for (const auto& b : bumps) {
        const double dr = zone.row - b.row;
        const double dc = zone.col - b.col;
        const double dt = t - b.interval;
        v += b.amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * b.width_rc * b.width_rc) -
                                    dt * dt / (2.0 * b.width_t * b.width_t));
      }
      rate(z, t - 1) = std::max(0.0, v);
    }
  }

  std::normal_distribution<double> day_noise(0.0, 1.0);
  out.clear();
  for (std::size_t d = 0; d < num_days; ++d) {
    const double factor = surface.day_sigma > 0.0 ? std::exp(surface.day_sigma * day_noise(rng)) : 1.0;
    Eigen::MatrixXd counts(shape.zones(), shape.intervals);
    for (int z = 0; z < shape.zones(); ++z) {
      for (int t = 0; t < shape.intervals; ++t) {
        const double lambda = factor * rate(z, t);
        counts(z, t) = lambda > 0.0 ? static_cast<double>(std::poisson_distribution<long>(lambda)(rng)) : 0.0;
      }
    }
    out.push_back(std::move(counts));
  }
}

double add_noise(double value, double noise_sd, bool round_outputs, std::mt19937_64& rng) {
  if (noise_sd > 0.0) value += std::normal_distribution<double>(0.0, noise_sd)(rng);
  value = std::max(0.0, value);
  return round_outputs ? std::round(value) : value;
}

// Planar offset in meters converted to a lat/lon displacement around the anchor.
LatLon jitter_point(const LatLon& center, const GridConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = 0.5 * config.hex_radius_m * std::sqrt(unit(rng));
  const double angle = 2.0 * std::numbers::pi * unit(rng);
  const double k = std::numbers::pi / 180.0 * 6371008.8;
  return {center.lat + radius * std::sin(angle) / k,
          center.lon + radius * std::cos(angle) / (k * std::cos(config.origin_lat * std::numbers::pi / 180.0))};
}

}  // namespace

std::string_view generator_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Agpm: return "agpm";
    case GeneratorKind::Cdmf: return "cdmf";
    case GeneratorKind::Spmq: return "spmq";
  }
  return "agpm";
}

GeneratorKind parse_generator(std::string_view text) {
  if (text == "agpm") return GeneratorKind::Agpm;
  if (text == "cdmf") return GeneratorKind::Cdmf;
  if (text == "spmq") return GeneratorKind::Spmq;
  throw std::invalid_argument("unknown generator '" + std::string(text) + "'; expected agpm, cdmf or spmq");
}

void MarketSpec::validate() const {
  grid.validate();
  if (grid.days.empty()) throw std::invalid_argument("market spec needs at least one day");
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("noise_variance must be non-negative");
  if (!(initial_queue_mean >= 0.0)) throw std::invalid_argument("initial_queue_mean must be non-negative");
  if (round_outputs && grid.horizon_start_s < 1800) {
    throw std::invalid_argument("record synthesis needs the horizon to start at 00:30:00 or later");
  }
  if (round_outputs && grid.interval_s < 4) {
    throw std::invalid_argument("record synthesis needs intervals of at least 4 seconds");
  }
  for (const auto* s : {&demand, &supply}) {
    if (s->random_bumps < 0) throw std::invalid_argument("random_bumps must be non-negative");
    if (s->day_sigma < 0.0) throw std::invalid_argument("day_sigma must be non-negative");
  }
  if (generator == GeneratorKind::Agpm) {
    const auto expr = parse_kernel_spec(kernel_spec);
    validate_theta(expr, theta_matches);
    validate_theta(expr, theta_pickups);
  }
  if (generator == GeneratorKind::Spmq && (spmq.a < 0.0 || spmq.b < 0.0)) {
    throw std::invalid_argument("SPMQ weights must be non-negative");
  }
}

MarketSpec default_market_spec() {
  MarketSpec spec;
  spec.grid.rows = 4;
  spec.grid.cols = 4;
  spec.grid.horizon_start_s = 7 * 3600 + 30 * 60;
  spec.grid.horizon_end_s = spec.grid.horizon_start_s + 20 * spec.grid.interval_s;
  spec.grid.days = {"2024-03-04", "2024-03-05", "2024-03-06"};
  spec.demand.base = 8.0;
  spec.demand.random_bumps = 3;
  spec.demand.random_amplitude = 10.0;
  spec.demand.day_sigma = 0.15;
  spec.supply.base = 8.0;
  spec.supply.random_bumps = 3;
  spec.supply.random_amplitude = 8.0;
  spec.supply.day_sigma = 0.15;
  spec.theta_matches = preset_theta("matching");
  spec.theta_pickups = preset_theta("pickup");
  spec.noise_variance = 0.5;
  spec.initial_queue_mean = 2.0;
  return spec;
}

Eigen::MatrixXd draw_gp_samples(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X, int draws,
                                std::mt19937_64& rng) {
  if (draws < 1) throw std::invalid_argument("need at least one draw");
  const Eigen::MatrixXd K = gram_matrix(expr, theta, X);
  const double tau = X.rows() > 0 ? std::max(K.trace() / static_cast<double>(X.rows()), 1e-300) : 1.0;
  std::optional<Factorization> f;
  for (double scale : {1e-10, 1e-8, 1e-6, 1e-4}) {
    try {
      f = factorize_fixed(K, scale * tau);
      break;
    } catch (const CholeskyError&) {
    }
  }
  if (!f) throw CholeskyError("cannot factorize the generating kernel matrix");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(X.rows(), draws);
  for (Eigen::Index j = 0; j < draws; ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) z(i, j) = normal(rng);
  return f->llt.matrixL() * z;
}

std::vector<OrderRecord> synthesize_records(ObservationGrid& grid, const GridConfig& config, std::mt19937_64& rng) {
  const auto& shape = grid.shape();
  if (shape.rows != config.rows || shape.cols != config.cols || shape.intervals != config.intervals()) {
    throw std::invalid_argument("grid shape disagrees with the grid configuration");
  }
  const Timestamp T = config.interval_s;
  const Timestamp quarter = std::max<Timestamp>(1, T / 4);
  std::uniform_int_distribution<Timestamp> in_quarter(0, quarter - 1);
  std::uniform_int_distribution<Timestamp> in_block(0, 299);

  auto count = [](double v, const char* what) {
    if (v < 0.0 || v != std::round(v)) {
      throw std::invalid_argument(std::string("record synthesis needs non-negative integer ") + what + " counts");
    }
    return static_cast<long>(v);
  };

  std::vector<OrderRecord> orders;
  for (std::size_t d = 0; d < grid.num_days(); ++d) {
    const Timestamp start = parse_date(grid.days()[d]) + config.horizon_start_s;
    std::vector<std::deque<std::size_t>> unmatched(static_cast<std::size_t>(shape.zones()));
    std::vector<std::deque<std::size_t>> unpicked(static_cast<std::size_t>(shape.zones()));
    std::deque<std::size_t> picked;

    auto new_order = [&](std::size_t zone, Timestamp create) {
      OrderRecord rec;
      const LatLon p = jitter_point(zone_center(shape.zone_at(zone), config), config, rng);
      rec.create_time = create;
      rec.origin_lat = rec.dest_lat = p.lat;
      rec.origin_lon = rec.dest_lon = p.lon;
      orders.push_back(rec);
      return orders.size() - 1;
    };

    for (int z = 0; z < shape.zones(); ++z) {
      const long q0 = count(grid.initial_queue(d, static_cast<std::size_t>(z)), "initial queue");
      for (long k = 0; k < q0; ++k) {
        unmatched[static_cast<std::size_t>(z)].push_back(
            new_order(static_cast<std::size_t>(z), start - 1800 + 2 * in_block(rng)));
      }
    }

    for (int t = 1; t <= shape.intervals; ++t) {
      const Timestamp base = start + (t - 1) * T;
      for (int z = 0; z < shape.zones(); ++z) {
        const auto zi = static_cast<std::size_t>(z);
        const Zone zone = shape.zone_at(zi);
        const auto& cell = grid.cell(d, zone.row, zone.col, t);

        for (long k = count(cell.demand, "demand"); k > 0; --k) {
          unmatched[zi].push_back(new_order(zi, base + in_quarter(rng)));
        }
        for (long k = count(cell.matches, "match"); k > 0; --k) {
          if (unmatched[zi].empty()) {
            unmatched[zi].push_back(new_order(zi, start - 1800 + 2 * in_block(rng)));
            grid.set_initial_queue(d, zi, grid.initial_queue(d, zi) + 1.0);
          }
          const auto id = unmatched[zi].front();
          unmatched[zi].pop_front();
          orders[id].match_time = base + quarter + in_quarter(rng);
          unpicked[zi].push_back(id);
        }
        for (long k = count(cell.pickups, "pickup"); k > 0; --k) {
          if (unpicked[zi].empty()) {
            const auto id = new_order(zi, start - 1800 + in_block(rng));
            orders[id].match_time = start - 1200 + in_block(rng);
            unpicked[zi].push_back(id);
          }
          const auto id = unpicked[zi].front();
          unpicked[zi].pop_front();
          orders[id].pickup_time = base + 2 * quarter + in_quarter(rng);
          picked.push_back(id);
        }
      }
      // Arrivals can come from any zone, so they draw on the shared pool
      // after every pickup of the interval has happened.
      for (int z = 0; z < shape.zones(); ++z) {
        const auto zi = static_cast<std::size_t>(z);
        const Zone zone = shape.zone_at(zi);
        for (long k = count(grid.cell(d, zone.row, zone.col, t).supply, "supply"); k > 0; --k) {
          std::size_t id;
          if (picked.empty()) {
            id = new_order(zi, start - 1800 + in_block(rng));
            orders[id].match_time = start - 1200 + in_block(rng);
            orders[id].pickup_time = start - 600 + in_block(rng);
          } else {
            id = picked.front();
            picked.pop_front();
          }
          const LatLon p = jitter_point(zone_center(zone, config), config, rng);
          orders[id].dest_lat = p.lat;
          orders[id].dest_lon = p.lon;
          orders[id].finish_time = base + 3 * quarter + in_quarter(rng);
        }
      }
    }
  }
  return orders;
}

SyntheticMarket synthesize_market(std::uint64_t seed, const MarketSpec& spec) {
  spec.validate();
  std::seed_seq seq{seed};
  std::mt19937_64 rng(seq);

  const GridShape shape{spec.grid.rows, spec.grid.cols, spec.grid.intervals()};
  SyntheticMarket out;
  out.spec = spec;
  out.grid = ObservationGrid(shape, spec.grid.days);
  const std::size_t num_days = spec.grid.days.size();

  std::vector<Eigen::MatrixXd> demand;
  std::vector<Eigen::MatrixXd> supply;
  draw_counts(spec.demand, shape, num_days, rng, demand);
  draw_counts(spec.supply, shape, num_days, rng, supply);
  for (std::size_t d = 0; d < num_days; ++d) {
    out.grid.set_field(d, Field::Demand, demand[d]);
    out.grid.set_field(d, Field::Supply, supply[d]);
    for (int z = 0; z < shape.zones(); ++z) {
      const double q0 = spec.initial_queue_mean > 0.0
                            ? static_cast<double>(std::poisson_distribution<long>(spec.initial_queue_mean)(rng))
                            : 0.0;
      out.grid.set_initial_queue(d, static_cast<std::size_t>(z), q0);
    }
  }

  const double noise_sd = std::sqrt(spec.noise_variance);
  switch (spec.generator) {
    case GeneratorKind::Agpm: {
      const auto expr = parse_kernel_spec(spec.kernel_spec);
      std::vector<std::size_t> all(num_days);
      for (std::size_t d = 0; d < num_days; ++d) all[d] = d;
      const Inputs X = out.grid.inputs(all);
      const Eigen::VectorXd fm = draw_gp_samples(expr, spec.theta_matches, X, 1, rng).col(0);
      const Eigen::VectorXd fp = draw_gp_samples(expr, spec.theta_pickups, X, 1, rng).col(0);
      Eigen::Index row = 0;
      for (std::size_t d = 0; d < num_days; ++d)
        for (int r = 1; r <= shape.rows; ++r)
          for (int c = 1; c <= shape.cols; ++c)
            for (int t = 1; t <= shape.intervals; ++t, ++row) {
              auto& cell = out.grid.cell(d, r, c, t);
              cell.matches = add_noise(spec.mean_matches + fm[row], noise_sd, spec.round_outputs, rng);
              cell.pickups = add_noise(spec.mean_pickups + fp[row], noise_sd, spec.round_outputs, rng);
            }
      break;
    }
    case GeneratorKind::Cdmf: {
      for (std::size_t d = 0; d < num_days; ++d)
        for (int r = 1; r <= shape.rows; ++r)
          for (int c = 1; c <= shape.cols; ++c)
            for (int t = 1; t <= shape.intervals; ++t) {
              auto& cell = out.grid.cell(d, r, c, t);
              cell.matches = add_noise(cdmf_predict(cell.demand, cell.supply, spec.cdmf_matches), noise_sd,
                                       spec.round_outputs, rng);
              cell.pickups = add_noise(cdmf_predict(cell.demand, cell.supply, spec.cdmf_pickups), noise_sd,
                                       spec.round_outputs, rng);
            }
      break;
    }
    case GeneratorKind::Spmq: {
      const auto adjacency = grid_adjacency(shape.rows, shape.cols);
      for (std::size_t d = 0; d < num_days; ++d) {
        Eigen::MatrixXd m =
            spmq_predict(demand[d], supply[d], out.grid.initial_queue(d), spec.spmq, adjacency);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
          m.data()[i] = add_noise(m.data()[i], noise_sd, spec.round_outputs, rng);
        }
        out.grid.set_field(d, Field::Matches, m);
      }
      break;
    }
  }

  if (spec.round_outputs) out.records = synthesize_records(out.grid, spec.grid, rng);
  return out;
}

}  // namespace agpm
