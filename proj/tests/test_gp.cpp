#include "agpm/gp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace agpm;
using agpm::testing::random_inputs;
using agpm::testing::random_theta;
using agpm::testing::rel_error;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::VectorXd random_targets(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = z(rng);
  return y;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Inputs single_point(double r) {
  Inputs X = Inputs::Zero(1, 5);
  X(0, kRow) = r;
  return X;
}

}  // namespace

TEST_CASE("log marginal likelihood closed forms") {
  // SE variance 0.5, noise 0.5 at a single point: K + noise = 1.
  const auto expr = parse_kernel_spec("SE(r)");
  const auto theta = vec({0.5, 1.0, 0.5});
  const auto X = single_point(0.0);
  CHECK(log_marginal_likelihood(expr, theta, X, vec({0.0})) == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-14));
  CHECK(log_marginal_likelihood(expr, theta, X, vec({0.0})) == doctest::Approx(-0.91894).epsilon(1e-5));
  CHECK(log_marginal_likelihood(expr, theta, X, vec({1.0})) == doctest::Approx(-1.41894).epsilon(1e-5));

  std::mt19937_64 rng(41);
  const auto multi = parse_kernel_spec("SE(r,c)*SE(t) + SE(d)");
  const auto th = random_theta(multi, rng);
  const auto Xm = random_inputs(7, rng);
  Eigen::MatrixXd K = gram_matrix(multi, th, Xm);
  K.diagonal().array() += th[static_cast<Eigen::Index>(multi.noise_slot())];
  const Eigen::LLT<Eigen::MatrixXd> llt(K);
  const Eigen::MatrixXd L = llt.matrixL();
  const double expected = -L.diagonal().array().log().sum() - 3.5 * kLog2Pi;
  CHECK(log_marginal_likelihood(multi, th, Xm, Eigen::VectorXd::Zero(7)) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("two-point likelihood equals the bivariate normal density") {
  std::mt19937_64 rng(43);
  const auto expr = parse_kernel_spec("SE(r,c) + OU(t)");
  for (int rep = 0; rep < 10; ++rep) {
    const auto theta = random_theta(expr, rng);
    const auto X = random_inputs(2, rng);
    const auto y = random_targets(2, rng);
    const double noise = theta[static_cast<Eigen::Index>(expr.noise_slot())];
    const double k11 = agpm::testing::oracle_expr(expr, theta, X.row(0).data(), X.row(0).data()) + noise;
    const double k22 = agpm::testing::oracle_expr(expr, theta, X.row(1).data(), X.row(1).data()) + noise;
    const double k12 = agpm::testing::oracle_expr(expr, theta, X.row(0).data(), X.row(1).data());
    const double det = k11 * k22 - k12 * k12;
    const double quad = (k22 * y[0] * y[0] - 2.0 * k12 * y[0] * y[1] + k11 * y[1] * y[1]) / det;
    const double density = std::exp(-0.5 * quad) / (2.0 * std::numbers::pi * std::sqrt(det));
    CHECK(rel_error(std::exp(log_marginal_likelihood(expr, theta, X, y)), density) < 1e-10);
  }
}

TEST_CASE("lml gradient") {
  std::mt19937_64 rng(47);
  SUBCASE("finite differences per slot") {
    int instances = 0;
    for (const char* spec : {"AGPM5", "SE(r,c)*PE(t) + OU(d,s)", "AGPM3"}) {
      const auto expr = parse_kernel_spec(spec);
      for (int rep = 0; rep < 3; ++rep) {
        const auto theta = random_theta(expr, rng);
        const auto X = random_inputs(6, rng);
        const auto y = random_targets(6, rng);
        const auto grad = lml_gradient(expr, theta, X, y);
        const auto both = lml_with_gradient(expr, theta, X, y);
        CHECK(both.value == log_marginal_likelihood(expr, theta, X, y));
        CHECK((both.gradient - grad).cwiseAbs().maxCoeff() == 0.0);
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
          const double h = 1e-6 * theta[j];
          auto f = [&](double v) {
            Eigen::VectorXd th = theta;
            th[j] = v;
            return log_marginal_likelihood(expr, th, X, y);
          };
          CHECK(rel_error(grad[j], agpm::testing::central_difference(f, theta[j], h), 1e-6) < 1e-4);
        }
        ++instances;
      }
    }
    CHECK(instances == 9);
  }
  SUBCASE("noise slot at zero targets") {
    const auto expr = parse_kernel_spec("SE(r,t)");
    const auto theta = random_theta(expr, rng);
    const auto X = random_inputs(5, rng);
    Eigen::MatrixXd K = gram_matrix(expr, theta, X);
    K.diagonal().array() += theta[2];
    const double expected = -0.5 * K.inverse().trace();
    const auto grad = lml_gradient(expr, theta, X, Eigen::VectorXd::Zero(5));
    CHECK(grad[2] == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("stationary point in the variance slot") {
    const auto expr = parse_kernel_spec("SE(r,c)");
    const auto X = random_inputs(10, rng);
    const auto y = random_targets(10, rng);
    Eigen::VectorXd theta = vec({1.0, 1.2, 0.3});
    // Coarse scan then golden-section refinement on the variance slot.
    auto L = [&](double v) {
      Eigen::VectorXd th = theta;
      th[0] = v;
      return log_marginal_likelihood(expr, th, X, y);
    };
    double best = 0.01;
    for (double v = 0.01; v < 50.0; v *= 1.01)
      if (L(v) > L(best)) best = v;
    double a = best / 1.01;
    double b = best * 1.01;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double c = b - g * (b - a);
      const double d = a + g * (b - a);
      (L(c) > L(d) ? b : a) = (L(c) > L(d) ? d : c);
    }
    theta[0] = 0.5 * (a + b);
    CHECK(std::abs(lml_gradient(expr, theta, X, y)[0]) < 1e-6);
  }
}

TEST_CASE("fit caches a consistent factorization") {
  std::mt19937_64 rng(53);
  const auto expr = parse_kernel_spec("AGPM5");
  const auto theta = random_theta(expr, rng);
  const auto X = random_inputs(25, rng);
  const auto y = random_targets(25, rng);
  const auto model = TrainedModel::fit(expr, theta, X, y);
  CHECK(model.reconstruction_error() < 1e-8);
  CHECK(model.alpha_residual() < 1e-6);
  CHECK(model.jitter_used() == 0.0);
  const auto again = TrainedModel::fit(expr, theta, X, y);
  CHECK(again.alpha() == model.alpha());
  const Eigen::MatrixXd L = model.cholesky_factor();
  CHECK(L.isLowerTriangular());

  const auto rebuilt = TrainedModel::fit_with_jitter(expr, theta, X, y, model.jitter_used());
  CHECK(rebuilt.alpha() == model.alpha());
}

TEST_CASE("jitter ladder") {
  const auto expr = parse_kernel_spec("SE(r)");
  Inputs X = Inputs::Zero(3, 5);  // identical rows: K is rank one
  const auto theta = vec({1.0, 1.0, 1e-6});
  SUBCASE("rank-deficient kernel with negligible noise needs jitter") {
    Eigen::VectorXd tiny = theta;
    tiny[2] = 1e-300;
    const auto model = TrainedModel::fit(expr, tiny, X, Eigen::VectorXd::Ones(3));
    CHECK(model.jitter_used() > 0.0);
    CHECK(model.reconstruction_error() < 1e-8);
    CHECK(TrainedModel::fit(expr, theta, X, Eigen::VectorXd::Ones(3)).jitter_used() == 0.0);
  }
  SUBCASE("direct factorization") {
    Eigen::MatrixXd K = Eigen::MatrixXd::Ones(3, 3);
    const auto f = factorize_with_jitter(K);
    CHECK(f.jitter > 0.0);
    CHECK(f.jitter <= 1e-6 + 1e-18);
    Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(factorize_with_jitter(bad), CholeskyError);
    CHECK_THROWS_AS(factorize_fixed(K, 0.0), CholeskyError);
    CHECK_NOTHROW(factorize_fixed(K, 1e-6));
  }
}

TEST_CASE("prediction closed forms") {
  SUBCASE("single training point") {
    const auto expr = parse_kernel_spec("SE(r)");
    const auto model = TrainedModel::fit_with_jitter(expr, vec({1.0, 1.0, 0.0}), single_point(0.0), vec({2.0}), 0.0);
    const auto p = model.predict(single_point(1.0));
    CHECK(std::abs(p.mean[0] - 2.0 * std::exp(-0.5)) < 1e-10);
    CHECK(p.mean[0] == doctest::Approx(1.21306).epsilon(1e-5));
    CHECK(std::abs(p.variance[0] - (1.0 - std::exp(-1.0))) < 1e-10);
    CHECK(p.variance[0] == doctest::Approx(0.63212).epsilon(1e-5));
    CHECK(model.predictive_mean_gradient(std::vector<double>{0, 0, 0, 0, 0}, kRow) == 0.0);
    CHECK(model.predictive_mean_gradient(std::vector<double>{1, 0, 0, 0, 0}, kCol) == 0.0);
  }
  SUBCASE("noiseless interpolation") {
    std::mt19937_64 rng(59);
    const auto expr = parse_kernel_spec("SE(r,c,t)");
    const auto X = random_inputs(15, rng);
    const auto y = random_targets(15, rng);
    const auto model = TrainedModel::fit(expr, vec({1.0, 1.5, 1e-10}), X, y);
    const auto p = model.predict(X.topRows(3));
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(std::abs(p.mean[i] - y[i]) < 1e-4);
      CHECK(p.variance[i] < 1e-3);
    }
  }
  SUBCASE("prior reversion far from data") {
    std::mt19937_64 rng(61);
    const auto expr = parse_kernel_spec("SE(r,c) + SE(t)");
    const auto theta = vec({1.5, 0.5, 0.7, 0.5, 0.2});
    const auto X = random_inputs(10, rng);
    const auto model = TrainedModel::fit(expr, theta, X, random_targets(10, rng));
    Inputs far = Inputs::Constant(1, 5, 1000.0);
    const auto p = model.predict(far);
    CHECK(std::abs(p.mean[0]) < 1e-6);
    CHECK(std::abs(p.variance[0] - 2.2) < 1e-6);
    PredictOptions with_noise;
    with_noise.include_noise = true;
    CHECK(model.predict(far, with_noise).variance[0] == doctest::Approx(2.4).epsilon(1e-12));
  }
}

TEST_CASE("full covariance agrees with marginal variances") {
  std::mt19937_64 rng(67);
  const auto expr = parse_kernel_spec("AGPM4");
  const auto theta = random_theta(expr, rng);
  const auto model = TrainedModel::fit(expr, theta, random_inputs(12, rng), random_targets(12, rng));
  const auto Xs = random_inputs(6, rng);
  PredictOptions opts;
  opts.full_covariance = true;
  const auto p = model.predict(Xs, opts);
  REQUIRE(p.covariance.has_value());
  CHECK((p.covariance->diagonal() - p.variance).cwiseAbs().maxCoeff() == 0.0);
  CHECK((*p.covariance - p.covariance->transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.variance.array() >= 0.0).all());
  CHECK((p.mean - model.predict_mean(Xs)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(model.predict(Xs).covariance.has_value());
  CHECK_THROWS_AS(model.predict(Inputs::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("posterior properties") {
  std::mt19937_64 rng(71);
  const auto expr = parse_kernel_spec("SE(r,c)*SE(t) + SE(d,s)");
  for (int rep = 0; rep < 5; ++rep) {
    const auto theta = random_theta(expr, rng);
    const auto X = random_inputs(10, rng);
    const auto y1 = random_targets(10, rng);
    const auto y2 = random_targets(10, rng);
    const auto Xs = random_inputs(8, rng);
    const auto m1 = TrainedModel::fit(expr, theta, X, y1).predict(Xs);
    const auto m2 = TrainedModel::fit(expr, theta, X, y2).predict(Xs);
    const auto m12 = TrainedModel::fit(expr, theta, X, y1 + y2).predict(Xs);
    CHECK((m12.mean - m1.mean - m2.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(m1.variance == m2.variance);

    Inputs bigger(11, 5);
    bigger << X, random_inputs(1, rng);
    Eigen::VectorXd ybig(11);
    ybig << y1, 0.3;
    const auto more = TrainedModel::fit(expr, theta, bigger, ybig).predict(Xs);
    CHECK(((more.variance - m1.variance).array() <= 1e-8).all());
  }
}

TEST_CASE("predictive mean gradient matches finite differences") {
  std::mt19937_64 rng(73);
  for (const char* spec : {"AGPM5", "SE(r,c)*OU(t) + SE(d,s)"}) {
    const auto expr = parse_kernel_spec(spec);
    const auto theta = random_theta(expr, rng);
    const auto X = random_inputs(20, rng);
    const auto model = TrainedModel::fit(expr, theta, X, random_targets(20, rng));
    for (int rep = 0; rep < 5; ++rep) {
      const Inputs xs = random_inputs(1, rng);
      for (std::size_t dim = 0; dim < kNumCovariates; ++dim) {
        const std::vector<double> x(xs.data(), xs.data() + 5);
        auto mean_at = [&](double v) {
          Inputs shifted = xs;
          shifted(0, static_cast<Eigen::Index>(dim)) = v;
          return model.predict_mean(shifted)[0];
        };
        const double fd = agpm::testing::central_difference(mean_at, x[dim], 1e-5);
        CHECK(rel_error(model.predictive_mean_gradient(x, dim), fd, 1e-6) < 1e-4);
      }
    }
  }
}
