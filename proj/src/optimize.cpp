#include "pcgpwm/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace pcgpwm {

namespace {

Vector project(const Vector& x, const Vector& lo, const Vector& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

// Variables pinned at a bound with the gradient pushing outward.
std::vector<bool> active_set(const Vector& x, const Vector& g, const Vector& lo, const Vector& hi) {
  std::vector<bool> active(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i)
    active[static_cast<std::size_t>(i)] = (x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0);
  return active;
}

}  // namespace

LbfgsResult minimize_box(const Objective& f, Vector x0, const Vector& lower, const Vector& upper,
                         const LbfgsOptions& opts) {
  if (x0.size() != lower.size() || x0.size() != upper.size()) throw InputError("minimize_box: size mismatch");
  LbfgsResult res;
  res.x = project(x0, lower, upper);
  Vector grad(res.x.size());
  res.value = f(res.x, grad);
  if (!std::isfinite(res.value)) throw NumericalError("minimize_box: objective is not finite at the start");

  std::deque<Vector> s_hist, y_hist;
  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    const Vector pg = project(res.x - grad, lower, upper) - res.x;
    if (pg.lpNorm<Eigen::Infinity>() < opts.pgtol) {
      res.converged = true;
      return res;
    }

    const auto active = active_set(res.x, grad, lower, upper);
    auto mask = [&](Vector v) {
      for (Index i = 0; i < v.size(); ++i)
        if (active[static_cast<std::size_t>(i)]) v(i) = 0.0;
      return v;
    };

    // Two-loop recursion restricted to the free variables.
    Vector q = mask(grad);
    const std::size_t h = s_hist.size();
    std::vector<double> a(h), rho(h);
    for (std::size_t k = h; k-- > 0;) {
      const Vector s = mask(s_hist[k]);
      const Vector y = mask(y_hist[k]);
      const double sy = s.dot(y);
      rho[k] = sy > 1e-16 ? 1.0 / sy : 0.0;
      a[k] = rho[k] * s.dot(q);
      q -= a[k] * y;
    }
    if (h > 0) {
      const Vector y = mask(y_hist.back());
      const double yy = y.squaredNorm();
      const double sy = mask(s_hist.back()).dot(y);
      if (yy > 0.0 && sy > 0.0) q *= sy / yy;
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double b = rho[k] * mask(y_hist[k]).dot(q);
      q += (a[k] - b) * mask(s_hist[k]);
    }
    Vector dir = -q;
    if (dir.dot(grad) >= 0.0) {
      dir = -mask(grad);
      s_hist.clear();
      y_hist.clear();
    }
    if (h == 0) {
      const double norm = dir.lpNorm<Eigen::Infinity>();
      if (norm > 1.0) dir /= norm;
    }

    double step = 1.0;
    bool accepted = false;
    Vector x_new, g_new(res.x.size());
    double f_new = std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < opts.max_backtracks; ++bt, step *= 0.5) {
      x_new = project(res.x + step * dir, lower, upper);
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * grad.dot(x_new - res.x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        continue;
      }
      return res;
    }

    const Vector s = x_new - res.x;
    const Vector y = g_new - grad;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double decrease = res.value - f_new;
    res.x = x_new;
    grad = g_new;
    res.value = f_new;
    if (decrease <= opts.ftol * std::max({std::abs(res.value), std::abs(f_new), 1.0})) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace pcgpwm
