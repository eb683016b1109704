#include "agpm/baselines.hpp"

#include <doctest.h>

#include <cmath>
#include <deque>
#include <random>

using namespace agpm;

namespace {

Eigen::MatrixXd row(std::initializer_list<double> v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

Eigen::MatrixXd random_panel(Eigen::Index zones, Eigen::Index T, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(zones, T);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Random grid whose matches come from SPMQ with the given parameters.
ObservationGrid spmq_grid(const SpmqParams& params, std::mt19937_64& rng, double demand_hi = 12.0,
                          double supply_hi = 4.0) {
  GridShape shape{4, 4, 20};
  ObservationGrid grid(shape, {"d1", "d2", "d3"});
  const auto adj = grid_adjacency(4, 4);
  std::uniform_real_distribution<double> q(0.0, 3.0);
  for (std::size_t day = 0; day < 3; ++day) {
    const auto demand = random_panel(16, 20, 0.0, demand_hi, rng);
    const auto supply = random_panel(16, 20, 0.0, supply_hi, rng);
    for (std::size_t z = 0; z < 16; ++z) grid.set_initial_queue(day, z, q(rng));
    grid.set_field(day, Field::Demand, demand);
    grid.set_field(day, Field::Supply, supply);
    grid.set_field(day, Field::Matches, spmq_predict(demand, supply, grid.initial_queue(day), params, adj));
  }
  return grid;
}

}  // namespace

TEST_CASE("cumulative demand roll-forward") {
  CHECK(rollforward_cumulative_demand(0, 0, 3) == 3);
  CHECK(rollforward_cumulative_demand(3, 1, 4) == 6);
  CHECK(rollforward_cumulative_demand(2, 5, 0) == 0);
  CHECK_THROWS_AS(rollforward_cumulative_demand(-1, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(rollforward_cumulative_demand(0, -1, 0), std::invalid_argument);
  CHECK_THROWS_AS(rollforward_cumulative_demand(0, 0, -1), std::invalid_argument);
}

TEST_CASE("PMQ predictions") {
  CHECK(pmq_predict(row({0}), row({3}), Eigen::VectorXd::Constant(1, 5))(0, 0) == 3);
  CHECK(pmq_predict(row({3, 4}), row({1, 10}), Eigen::VectorXd::Zero(1)) == row({1, 6}));
  const auto none = pmq_predict(row({1, 2, 3}), row({0, 0, 0}), Eigen::VectorXd::Zero(1));
  CHECK(none.isZero(0.0));

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_panel(5, 12, 0, 6, rng);
    const auto s = random_panel(5, 12, 0, 6, rng);
    const Eigen::VectorXd q0 = random_panel(5, 1, 0, 3, rng);
    const auto m = pmq_predict(d, s, q0);
    for (Eigen::Index z = 0; z < 5; ++z) {
      double cd = q0[z] + d(z, 0);
      for (Eigen::Index t = 0; t < 12; ++t) {
        if (t > 0) cd = std::max(0.0, cd - m(z, t - 1)) + d(z, t);
        CHECK(m(z, t) <= s(z, t));
        CHECK(m(z, t) <= cd);
        CHECK(m(z, t) == std::min(cd, s(z, t)));
      }
    }
  }
}

TEST_CASE("PMQ agrees with a passenger-level queue simulation") {
  // Integer arrivals and drivers; each driver serves the oldest waiting
  // passenger in the zone.
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> count(0, 6);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd d(3, 15);
    Eigen::MatrixXd s(3, 15);
    Eigen::VectorXd q0(3);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d.data()[i] = count(rng);
      s.data()[i] = count(rng);
    }
    for (Eigen::Index z = 0; z < 3; ++z) q0[z] = count(rng);
    const auto m = pmq_predict(d, s, q0);
    for (Eigen::Index z = 0; z < 3; ++z) {
      std::deque<int> waiting(static_cast<std::size_t>(q0[z]), -1);
      for (Eigen::Index t = 0; t < 15; ++t) {
        for (int k = 0; k < static_cast<int>(d(z, t)); ++k) waiting.push_back(static_cast<int>(t));
        int served = 0;
        for (int k = 0; k < static_cast<int>(s(z, t)) && !waiting.empty(); ++k) {
          waiting.pop_front();
          ++served;
        }
        CHECK(m(z, t) == served);
      }
    }
  }
}

TEST_CASE("SPMQ predictions") {
  const auto adj = grid_adjacency(4, 4);
  std::mt19937_64 rng(17);
  const auto d = random_panel(16, 10, 0, 8, rng);
  const auto s = random_panel(16, 10, 0, 8, rng);
  const Eigen::VectorXd q0 = random_panel(16, 1, 0, 3, rng);

  const auto pmq = pmq_predict(d, s, q0);
  const auto spmq = spmq_predict(d, s, q0, SpmqParams{1.0, 0.0}, adj);
  CHECK(spmq == pmq);
  CHECK(spmq_predict(d, s, q0, SpmqParams{0.0, 0.0}, adj).isZero(0.0));

  // Extra neighbour supply drains the queue sooner, so dominance holds for
  // cumulative matches but not interval by interval.
  const auto more = spmq_predict(d, s, q0, SpmqParams{1.0, 0.4}, adj);
  Eigen::VectorXd cum_more = Eigen::VectorXd::Zero(16);
  Eigen::VectorXd cum_pmq = Eigen::VectorXd::Zero(16);
  for (Eigen::Index t = 0; t < 10; ++t) {
    cum_more += more.col(t);
    cum_pmq += pmq.col(t);
    CHECK((cum_more.array() >= cum_pmq.array() - 1e-12).all());
  }
  const Adjacency lone{{1}, {0}};
  Eigen::MatrixXd dd(2, 2);
  dd << 2, 0, 0, 0;
  Eigen::MatrixXd ss(2, 2);
  ss << 1, 1, 2, 0;
  const auto base = spmq_predict(dd, ss, Eigen::VectorXd::Zero(2), SpmqParams{1.0, 0.0}, lone);
  const auto wide = spmq_predict(dd, ss, Eigen::VectorXd::Zero(2), SpmqParams{1.0, 0.5}, lone);
  CHECK(base.row(0) == row({1, 1}));
  CHECK(wide.row(0) == row({2, 0}));

  // Two zones: demand 5, own supply 2, neighbour supply 4.
  const Adjacency pair{{1}, {0}};
  Eigen::MatrixXd d2(2, 1);
  d2 << 5, 0;
  Eigen::MatrixXd s2(2, 1);
  s2 << 2, 4;
  const auto m2 = spmq_predict(d2, s2, Eigen::VectorXd::Zero(2), SpmqParams{1.0, 0.5}, pair);
  CHECK(effective_supply(s2, SpmqParams{1.0, 0.5}, pair)(0, 0) == 4.0);
  CHECK(m2(0, 0) == 4.0);

  CHECK_THROWS_AS(spmq_predict(d2, s2, Eigen::VectorXd::Zero(2), SpmqParams{}, Adjacency{{1}}), std::invalid_argument);
  CHECK_THROWS_AS(pmq_predict(d2, s2.leftCols(0), Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("SPMQ fitting") {
  std::mt19937_64 rng(19);
  const auto adj = grid_adjacency(4, 4);
  SUBCASE("recovers known parameters") {
    const auto grid = spmq_grid({0.8, 0.3}, rng);
    const auto fit = fit_spmq(grid, adj);
    CHECK(std::abs(fit.a - 0.8) <= 0.05);
    CHECK(std::abs(fit.b - 0.3) <= 0.05);
    CHECK(spmq_loss(grid, adj, fit) <= spmq_loss(grid, adj, {0.8, 0.3}) + 1e-12);
  }
  SUBCASE("PMQ-generated data") {
    const auto grid = spmq_grid({1.0, 0.0}, rng);
    const auto fit = fit_spmq(grid, adj);
    CHECK(std::abs(fit.a - 1.0) <= 0.05);
    CHECK(std::abs(fit.b) <= 0.05);
  }
  SUBCASE("unidentifiable neighbour weight breaks toward zero") {
    auto grid = spmq_grid({0.9, 0.0}, rng);
    const Adjacency isolated(16);
    for (std::size_t day = 0; day < 3; ++day) {
      grid.set_field(day, Field::Matches,
                     spmq_predict(grid.field(day, Field::Demand), grid.field(day, Field::Supply),
                                  grid.initial_queue(day), {0.9, 0.0}, isolated));
    }
    const auto fit = fit_spmq(grid, isolated);
    CHECK(fit.b == 0.0);
    CHECK(std::abs(fit.a - 0.9) <= 0.05);
  }
  SUBCASE("empty grid") {
    CHECK_THROWS_AS(fit_spmq(ObservationGrid(GridShape{4, 4, 20}, {}), adj), std::invalid_argument);
  }
}

TEST_CASE("CDMF prediction") {
  CHECK(cdmf_predict(4, 9, {1.0, 0.5, 0.5}) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(cdmf_predict(0, 9, {1.0, 0.5, 0.5}) == 0.0);
  CHECK(cdmf_predict(3, 7.3, {2.0, 1.0, 0.0}) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK_THROWS_AS(cdmf_predict(0, 1, {1.0, 0.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(cdmf_predict(1, 0, {1.0, 0.5, -0.5}), std::domain_error);
  CHECK_THROWS_AS(cdmf_predict(-1, 1, {1.0, 0.5, 0.5}), std::invalid_argument);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const CdmfParams p{1.3, 0.7, 0.2};
  for (int k = 0; k < 100; ++k) {
    const double d = u(rng);
    const double s = u(rng);
    const double step = u(rng);
    CHECK(cdmf_predict(d + step, s, p) >= cdmf_predict(d, s, p));
    CHECK(cdmf_predict(d, s + step, p) >= cdmf_predict(d, s, p));
  }
}

TEST_CASE("CDMF fitting") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.5, 20.0);
  const Eigen::Index n = 200;
  Eigen::VectorXd d(n);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d[i] = u(rng);
    s[i] = u(rng);
  }
  SUBCASE("noise-free recovery") {
    const CdmfParams truth{1.2, 0.6, 0.4};
    const auto fit = fit_cdmf(d, s, cdmf_predict(d, s, truth));
    CHECK(std::abs(fit.params.A / truth.A - 1.0) < 0.01);
    CHECK(std::abs(fit.params.alpha / truth.alpha - 1.0) < 0.01);
    CHECK(std::abs(fit.params.beta / truth.beta - 1.0) < 0.01);
    CHECK(fit.loss <= fit.initial_loss);
  }
  SUBCASE("supply-free truth") {
    const auto fit = fit_cdmf(d, s, cdmf_predict(d, s, {1.0, 1.0, 0.0}));
    CHECK(std::abs(fit.params.beta) < 0.02);
  }
  SUBCASE("refinement never worsens the initializer") {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd y = cdmf_predict(d, s, {0.8, 0.5, 0.6});
    for (Eigen::Index i = 0; i < n; ++i) y[i] = std::max(0.0, y[i] + 2.0 * z(rng));
    for (Eigen::Index i = 0; i < n; i += 5) y[i] = 0.0;
    const auto fit = fit_cdmf(d, s, y);
    CHECK(fit.loss <= fit.initial_loss);
    CHECK(fit.loss == doctest::Approx(cdmf_loss(d, s, y, fit.params)).epsilon(1e-12));
    CHECK(fit.initial_loss == doctest::Approx(cdmf_loss(d, s, y, fit.initial)).epsilon(1e-12));
  }
  SUBCASE("needs positive samples") {
    CHECK_THROWS_AS(fit_cdmf(d, s, Eigen::VectorXd::Zero(n)), std::invalid_argument);
    CHECK_THROWS_AS(fit_cdmf(d.head(2), s.head(2), Eigen::VectorXd::Ones(2)), std::invalid_argument);
  }
}
