#pragma once

#include "pcgpwm/types.hpp"

namespace pcgpwm {

/// Orthonormal basis phi (m x kappa), component scales lambda (squared
/// singular values, descending) and the residual floor epsilon used to
/// extend phi diag(lambda) phi^T to full rank.
struct PrincipalSubspace {
  Matrix phi;
  Vector lambda;
  double epsilon = 0.0;

  Index kappa() const { return phi.cols(); }
  Index m() const { return phi.rows(); }
};

/// Default fraction of squared singular mass retained.
inline constexpr double kDefaultVarianceFraction = 0.999999;

/// Mean of the discarded squared singular values (indices >= kappa),
/// clamped to [1e-12 * lambda_1, 0.9 * lambda_kappa]. With nothing
/// discarded the lower clamp is returned.
double residual_epsilon(const Vector& all_sq_singular_values, Index kappa);

/// Smallest kappa whose leading squared singular values reach
/// `variance_fraction` of the total, capped at the numerical rank.
Index choose_kappa(const Vector& sq_singular_values, double variance_fraction);

/// PCA of a complete standardized matrix through a thin SVD. Each phi column
/// has its largest-magnitude entry made positive.
PrincipalSubspace svd_subspace(const Matrix& f_std, double variance_fraction = kDefaultVarianceFraction);

struct EmOptions {
  double variance_fraction = kDefaultVarianceFraction;
  double eps_m = 1e-5;
  int max_iter = 200;
  double tol = 1e-6;
};

struct EmResult {
  PrincipalSubspace subspace;
  /// Completed matrix after the last E step.
  Matrix completed;
  int iterations = 0;
  bool converged = false;
};

/// Alternates an SVD of the completed matrix with conditional-mean fills of
/// the missing entries (NaN in `f_std`). The fill regularizer is
/// max(eps_m, epsilon) with epsilon the residual floor of the current SVD. Missing entries start at their
/// column's available mean. Stops when the largest change of any filled
/// entry drops below `tol` or after `max_iter` rounds; the subspace returned
/// is the one from the final SVD. A complete input runs exactly one SVD.
EmResult em_subspace(const Matrix& f_std, const EmOptions& opts = {});

}  // namespace pcgpwm
