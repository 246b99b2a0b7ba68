#pragma once

#include "pcgpwm/types.hpp"

#include <functional>

namespace pcgpwm {

/// Objective returning f(x) and writing grad into the second argument.
/// Returning +inf marks x as infeasible; the line search then backtracks.
using Objective = std::function<double(const Vector&, Vector&)>;

struct LbfgsOptions {
  int max_iter = 200;
  int history = 8;
  double pgtol = 1e-6;
  double ftol = 1e-10;
  int max_backtracks = 40;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected L-BFGS on the box [lower, upper]. The starting point is
/// projected first; it must give a finite value.
LbfgsResult minimize_box(const Objective& f, Vector x0, const Vector& lower, const Vector& upper,
                         const LbfgsOptions& opts = {});

}  // namespace pcgpwm
