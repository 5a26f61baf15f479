#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace ranklab::optim {

struct Options {
  double grad_tol = 1e-6;      // max-norm of the gradient
  double rel_f_tol = 1e-10;    // relative change of the objective between iterations
  std::size_t max_iters = 500;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

struct Result {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string reason;
};

/// f(x, grad) -> value; must fill grad.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

namespace detail {

struct Probe {
  double alpha, f, slope;
  Eigen::VectorXd g;
};

inline double cubic_min(const Probe& a, const Probe& b) {
  // minimiser of the cubic through (alpha, f, slope) at both ends
  const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.slope * b.slope;
  const double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
  if (disc < 0.0) return 0.5 * (lo + hi);
  const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
  const double t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return 0.5 * (lo + hi);
  return t;
}

}  // namespace detail

/// Line search satisfying the strong Wolfe conditions. Returns false when no
/// acceptable step is found.
inline bool wolfe_search(const Objective& fn, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
                         const Eigen::VectorXd& dir, const Options& opt, detail::Probe& out, std::size_t& evals) {
  const double slope0 = g0.dot(dir);
  if (!(slope0 < 0.0)) return false;
  auto probe = [&](double alpha) {
    detail::Probe p{alpha, 0.0, 0.0, Eigen::VectorXd(x.size())};
    p.f = fn(x + alpha * dir, p.g);
    p.slope = p.g.dot(dir);
    ++evals;
    return p;
  };
  auto zoom = [&](detail::Probe lo, detail::Probe hi) {
    for (int it = 0; it < 40; ++it) {
      auto mid = probe(detail::cubic_min(lo, hi));
      if (!std::isfinite(mid.f) || mid.f > f0 + opt.wolfe_c1 * mid.alpha * slope0 || mid.f >= lo.f) {
        hi = mid;
      } else {
        if (std::abs(mid.slope) <= -opt.wolfe_c2 * slope0) {
          out = mid;
          return true;
        }
        if (mid.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = mid;
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
    }
    if (lo.alpha > 0.0 && lo.f < f0) {
      out = lo;
      return true;
    }
    return false;
  };

  detail::Probe prev{0.0, f0, slope0, g0};
  double alpha = 1.0;
  for (int it = 0; it < 60; ++it) {
    auto cur = probe(alpha);
    if (!std::isfinite(cur.f)) {
      // stepped into an overflow region: shrink
      alpha *= 0.1;
      continue;
    }
    if (cur.f > f0 + opt.wolfe_c1 * alpha * slope0 || (it > 0 && cur.f >= prev.f)) return zoom(prev, cur);
    if (std::abs(cur.slope) <= -opt.wolfe_c2 * slope0) {
      out = cur;
      return true;
    }
    if (cur.slope >= 0.0) return zoom(cur, prev);
    prev = cur;
    alpha *= 2.0;
  }
  return false;
}

/// BFGS minimisation using value and gradient only.
inline Result bfgs_minimize(const Objective& fn, Eigen::VectorXd x0, const Options& opt = {}) {
  const auto n = x0.size();
  Result res;
  res.x = std::move(x0);
  res.grad = Eigen::VectorXd::Zero(n);
  res.f = fn(res.x, res.grad);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) {
    res.reason = "objective not finite at start";
    return res;
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
    if (res.grad.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      res.reason = "gradient tolerance";
      return res;
    }
    Eigen::VectorXd dir = -h * res.grad;
    detail::Probe step;
    if (!wolfe_search(fn, res.x, res.f, res.grad, dir, opt, step, res.evaluations)) {
      // restart along steepest descent once before giving up
      h.setIdentity();
      scaled = false;
      dir = -res.grad / std::max(1.0, res.grad.norm());
      if (!wolfe_search(fn, res.x, res.f, res.grad, dir, opt, step, res.evaluations)) {
        res.reason = "line search failed";
        return res;
      }
    }
    const Eigen::VectorXd s = step.alpha * dir;
    const Eigen::VectorXd y = step.g - res.grad;
    const double f_prev = res.f;
    res.x += s;
    res.f = step.f;
    res.grad = step.g;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    if (std::abs(f_prev - res.f) <= opt.rel_f_tol * std::max(1.0, std::abs(f_prev))) {
      res.converged = true;
      res.reason = "relative objective change";
      ++res.iterations;
      return res;
    }
  }
  res.converged = res.grad.lpNorm<Eigen::Infinity>() <= opt.grad_tol;
  res.reason = res.converged ? "gradient tolerance" : "iteration limit";
  return res;
}

/// Hessian by central differences of an analytic gradient, symmetrised.
inline Eigen::MatrixXd hessian_from_gradient(const Objective& fn, const Eigen::VectorXd& x, double rel_step = 1e-5) {
  const auto n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd gp(n), gm(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    fn(xp, gp);
    fn(xm, gm);
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace ranklab::optim
