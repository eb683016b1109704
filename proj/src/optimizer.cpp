#include "agpm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace agpm {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper) {
  return (x - project(x - g, lower, upper)).lpNorm<Eigen::Infinity>();
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                           const Eigen::VectorXd& upper, const LbfgsOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("minimize_lbfgs: bound size mismatch");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("minimize_lbfgs: lower bound above upper");

  LbfgsResult result;
  result.x = project(x0, lower, upper);
  Eigen::VectorXd g(n);
  result.f = objective(result.x, g);
  if (!std::isfinite(result.f)) throw std::runtime_error("minimize_lbfgs: objective is not finite at the start point");
  result.trace.push_back(result.f);

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;

  if (n == 0 || projected_gradient_norm(result.x, g, lower, upper) < options.grad_tol) {
    result.converged = true;
    result.stop_reason = "gradient tolerance";
    return result;
  }

  Eigen::VectorXd g_new(n);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    // Variables pinned at a bound with the gradient pushing outward stay put;
    // the two-loop recursion for d = -H g runs on the remaining free subspace.
    Eigen::VectorXd free_mask = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((result.x[i] <= lower[i] && g[i] > 0.0) || (result.x[i] >= upper[i] && g[i] < 0.0)) free_mask[i] = 0.0;
    }
    Eigen::VectorXd q = g.cwiseProduct(free_mask);
    std::vector<double> a(s_hist.size());
    std::vector<double> rho(s_hist.size());
    std::vector<Eigen::VectorXd> sm(s_hist.size());
    std::vector<Eigen::VectorXd> ym(s_hist.size());
    double gamma = 0.0;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      sm[k] = s_hist[k].cwiseProduct(free_mask);
      ym[k] = y_hist[k].cwiseProduct(free_mask);
      const double sy = sm[k].dot(ym[k]);
      rho[k] = sy > 1e-12 * sm[k].norm() * ym[k].norm() && sy > 0.0 ? 1.0 / sy : 0.0;
      if (rho[k] > 0.0) gamma = sy / ym[k].squaredNorm();
    }
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      a[k] = rho[k] * sm[k].dot(q);
      q -= a[k] * ym[k];
    }
    if (gamma > 0.0) q *= gamma;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double b = rho[k] * ym[k].dot(q);
      q += (a[k] - b) * sm[k];
    }
    Eigen::VectorXd direction = -q.cwiseProduct(free_mask);
    if (direction.dot(g) >= 0.0) {
      s_hist.clear();
      y_hist.clear();
      direction = -g.cwiseProduct(free_mask);
    }
    double step = 1.0;
    if (s_hist.empty()) {
      const double dn = direction.lpNorm<Eigen::Infinity>();
      if (dn > 1.0) step = 1.0 / dn;
    }

    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int bt = 0; bt < options.max_backtracks; ++bt, step *= 0.5) {
      x_new = project(result.x + step * direction, lower, upper);
      const Eigen::VectorXd delta = x_new - result.x;
      const double decrease = g.dot(delta);
      if (delta.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= result.f + options.armijo * decrease && f_new <= result.f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.stop_reason = "line search made no progress";
      result.converged = projected_gradient_norm(result.x, g, lower, upper) < options.grad_tol;
      return result;
    }

    const Eigen::VectorXd s = x_new - result.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }

    const double f_old = result.f;
    result.x = x_new;
    result.f = f_new;
    g = g_new;
    result.iterations = iter + 1;
    result.trace.push_back(result.f);

    if (projected_gradient_norm(result.x, g, lower, upper) < options.grad_tol) {
      result.converged = true;
      result.stop_reason = "gradient tolerance";
      return result;
    }
    if (std::abs(f_old - result.f) <= options.rel_f_tol * std::max(1.0, std::abs(f_old))) {
      result.converged = true;
      result.stop_reason = "relative improvement tolerance";
      return result;
    }
  }
  result.stop_reason = "iteration limit";
  return result;
}

}  // namespace agpm
