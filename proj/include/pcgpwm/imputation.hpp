#pragma once

#include "pcgpwm/data_model.hpp"
#include "pcgpwm/pca_em.hpp"
#include "pcgpwm/woodbury.hpp"

namespace pcgpwm {

/// Completed projections G~ (n x kappa), conditional variances u and their
/// scaled form w = u / lambda, which lies in [0, 1].
struct ImputedProjection {
  Matrix g_tilde;
  Matrix u;
  Matrix w;
};

/// Solver for B_{J,J} x = rhs where B = phi (Lambda - eps I) phi^T + eps I,
/// inverting only a kappa x kappa matrix.
class BSubmatrixSolver {
public:
  BSubmatrixSolver(const PrincipalSubspace& sub, const IndexSet& observed);

  template <typename Derived>
  Matrix solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return inverse_.solve(rhs);
  }

  const Matrix& phi_observed() const { return phi_observed_; }

private:
  Matrix phi_observed_;
  LowRankPlusIdentityInverse<double> inverse_;
};

/// B_{J,J}^{-1} rhs. J must be nonempty and match rhs in length.
Vector apply_B_submatrix_inverse(const PrincipalSubspace& sub, const IndexSet& observed, const Vector& rhs);

struct RowProjection {
  Vector g;
  Vector u;
};

/// Conditional-normal projection of one row given its observed entries f_J
/// (standardized scale). Empty J yields g = 0, u = lambda. u is clamped into
/// [0, lambda_k].
RowProjection project_row(const PrincipalSubspace& sub, const Vector& f_observed, const IndexSet& observed);

/// F Phi for a complete standardized matrix.
Matrix project_complete(const Matrix& f_std, const PrincipalSubspace& sub);

/// project_row on every row of a standardized dataset (rows are independent).
ImputedProjection impute_all(const Matrix& f_std, const PrincipalSubspace& sub);
inline ImputedProjection impute_all(const SimulationDataset& ds_std, const PrincipalSubspace& sub) {
  return impute_all(ds_std.responses(), sub);
}

}  // namespace pcgpwm
