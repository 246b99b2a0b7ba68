#include "pcgpwm/imputation.hpp"

#include "pcgpwm/parallel.hpp"

#include <algorithm>
#include <string>

namespace pcgpwm {

namespace {

Vector shrunk_scales(const PrincipalSubspace& sub) {
  if (!(sub.epsilon > 0.0) || (sub.lambda.array() <= sub.epsilon).any())
    throw NumericalError("subspace needs 0 < epsilon < min lambda");
  return sub.lambda.array() - sub.epsilon;
}

}  // namespace

BSubmatrixSolver::BSubmatrixSolver(const PrincipalSubspace& sub, const IndexSet& observed)
    : phi_observed_(sub.phi(observed, Eigen::all)),
      inverse_(phi_observed_, shrunk_scales(sub), sub.epsilon) {
  if (observed.empty()) throw InputError("B submatrix solve needs a nonempty index set");
}

Vector apply_B_submatrix_inverse(const PrincipalSubspace& sub, const IndexSet& observed, const Vector& rhs) {
  if (static_cast<Index>(observed.size()) != rhs.size())
    throw InputError("rhs length " + std::to_string(rhs.size()) + " does not match |J| = " +
                     std::to_string(observed.size()));
  return BSubmatrixSolver(sub, observed).solve(rhs);
}

RowProjection project_row(const PrincipalSubspace& sub, const Vector& f_observed, const IndexSet& observed) {
  const Index kappa = sub.kappa();
  if (observed.empty()) return {Vector::Zero(kappa), sub.lambda};
  if (static_cast<Index>(observed.size()) != f_observed.size())
    throw InputError("observed values and index set differ in length");

  // B_{J,.} phi = phi_J Lambda, so both conditional quantities only need
  // B_{J,J}^{-1} applied to f_J and to phi_J.
  const BSubmatrixSolver solver(sub, observed);
  const Matrix& phi_j = solver.phi_observed();
  const Vector weights = solver.solve(f_observed);
  const Matrix b_inv_phi = solver.solve(phi_j);

  RowProjection out;
  out.g = sub.lambda.cwiseProduct(phi_j.transpose() * weights);
  out.u.resize(kappa);
  for (Index k = 0; k < kappa; ++k) {
    const double lam = sub.lambda(k);
    const double explained = lam * lam * phi_j.col(k).dot(b_inv_phi.col(k));
    out.u(k) = std::clamp(lam - explained, 0.0, lam);
  }
  return out;
}

Matrix project_complete(const Matrix& f_std, const PrincipalSubspace& sub) {
  if (f_std.cols() != sub.m()) throw InputError("projection: column count does not match subspace");
  return f_std * sub.phi;
}

ImputedProjection impute_all(const Matrix& f_std, const PrincipalSubspace& sub) {
  if (f_std.cols() != sub.m())
    throw InputError("dataset has " + std::to_string(f_std.cols()) + " columns, subspace has " +
                     std::to_string(sub.m()));
  const Index n = f_std.rows();
  const Index kappa = sub.kappa();
  ImputedProjection out{Matrix(n, kappa), Matrix(n, kappa), Matrix(n, kappa)};
  // Complete rows take their projection from the same product the plain
  // model uses, so both agree to the last bit.
  const Matrix direct = project_complete(f_std.unaryExpr([](double x) { return is_missing(x) ? 0.0 : x; }), sub);
  parallel_for(n, [&](Index i) {
    IndexSet observed;
    for (Index j = 0; j < f_std.cols(); ++j)
      if (!is_missing(f_std(i, j))) observed.push_back(j);
    RowProjection row;
    if (static_cast<Index>(observed.size()) == f_std.cols()) {
      row.g = direct.row(i).transpose();
      row.u = Vector::Zero(kappa);
    } else {
      row = project_row(sub, f_std(i, observed).transpose(), observed);
    }
    out.g_tilde.row(i) = row.g.transpose();
    out.u.row(i) = row.u.transpose();
    out.w.row(i) = row.u.cwiseQuotient(sub.lambda).transpose();
  });
  return out;
}

}  // namespace pcgpwm
