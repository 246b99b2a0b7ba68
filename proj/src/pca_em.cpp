#include "pcgpwm/pca_em.hpp"

#include "pcgpwm/parallel.hpp"
#include "pcgpwm/woodbury.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <string>

namespace pcgpwm {

double residual_epsilon(const Vector& all_sq, Index kappa) {
  if (kappa < 1 || kappa > all_sq.size())
    throw InputError("residual_epsilon: kappa " + std::to_string(kappa) + " out of range");
  const double lo = 1e-12 * all_sq(0);
  const double hi = 0.9 * all_sq(kappa - 1);
  const Index discarded = all_sq.size() - kappa;
  if (discarded == 0) return lo;
  const double mean = all_sq.tail(discarded).mean();
  return std::clamp(mean, lo, hi);
}

Index choose_kappa(const Vector& sq, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw InputError("variance_fraction must lie in (0, 1]");
  const double total = sq.sum();
  if (!(total > 0.0)) throw InputError("cannot extract principal components from an all-zero matrix");

  // Numerical rank. The cutoff sits above the 1e-12 * lambda_1 floor of
  // residual_epsilon so every kept lambda exceeds epsilon.
  const double rank_tol = 1e-11 * sq(0);
  Index rank = 0;
  while (rank < sq.size() && sq(rank) > rank_tol) ++rank;

  double cum = 0.0;
  Index kappa = 0;
  while (kappa < sq.size()) {
    cum += sq(kappa);
    ++kappa;
    if (cum >= variance_fraction * total * (1.0 - 1e-12)) break;
  }
  return std::max<Index>(1, std::min(kappa, rank));
}

namespace {

struct SvdResult {
  Matrix v;
  Vector sq;
};

SvdResult thin_svd(const Matrix& f) {
  Eigen::BDCSVD<Matrix> svd(f, Eigen::ComputeThinV);
  return {svd.matrixV(), svd.singularValues().array().square()};
}

PrincipalSubspace subspace_from_matrix(const Matrix& f, double variance_fraction) {
  if (!f.allFinite()) throw InputError("svd_subspace needs a complete, finite matrix");
  SvdResult svd = thin_svd(f);
  const Index kappa = choose_kappa(svd.sq, variance_fraction);

  PrincipalSubspace sub;
  sub.phi = svd.v.leftCols(kappa);
  for (Index k = 0; k < kappa; ++k) {
    Index arg = 0;
    sub.phi.col(k).cwiseAbs().maxCoeff(&arg);
    if (sub.phi(arg, k) < 0.0) sub.phi.col(k) = -sub.phi.col(k);
  }
  sub.lambda = svd.sq.head(kappa);
  sub.epsilon = residual_epsilon(svd.sq, kappa);
  return sub;
}

}  // namespace

PrincipalSubspace svd_subspace(const Matrix& f_std, double variance_fraction) {
  return subspace_from_matrix(f_std, variance_fraction);
}

EmResult em_subspace(const Matrix& f_std, const EmOptions& opts) {
  const Index n = f_std.rows();
  const Index m = f_std.cols();

  std::vector<IndexSet> observed(static_cast<std::size_t>(n));
  std::vector<IndexSet> missing(static_cast<std::size_t>(n));
  EmResult result;
  result.completed = f_std;
  for (Index j = 0; j < m; ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      if (is_missing(f_std(i, j))) continue;
      sum += f_std(i, j);
      ++count;
    }
    if (count == 0) throw InputError("column " + std::to_string(j) + " has no available entries");
    const double mean = sum / static_cast<double>(count);
    for (Index i = 0; i < n; ++i)
      if (is_missing(f_std(i, j))) result.completed(i, j) = mean;
  }
  bool any_missing = false;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (is_missing(f_std(i, j)))
        missing[static_cast<std::size_t>(i)].push_back(j);
      else
        observed[static_cast<std::size_t>(i)].push_back(j);
    }
    any_missing = any_missing || !missing[static_cast<std::size_t>(i)].empty();
  }

  for (result.iterations = 1; result.iterations <= opts.max_iter; ++result.iterations) {
    // M step.
    result.subspace = subspace_from_matrix(result.completed, opts.variance_fraction);
    if (!any_missing) {
      result.converged = true;
      return result;
    }

    // E step: row-independent conditional-mean fill.
    const PrincipalSubspace& sub = result.subspace;
    const Vector shrunk = sub.lambda.array() - sub.epsilon;
    // eps_M alone lets rows with one or two observed entries extrapolate,
    // and the next SVD feeds on that; the residual floor keeps the fill tied
    // to the same B used for imputation.
    const double noise = std::max(opts.eps_m, sub.epsilon);
    Vector row_change = Vector::Zero(n);
    Matrix next = result.completed;
    parallel_for(n, [&](Index i) {
      const IndexSet& miss = missing[static_cast<std::size_t>(i)];
      if (miss.empty()) return;
      const IndexSet& obs = observed[static_cast<std::size_t>(i)];
      Vector fill = Vector::Zero(static_cast<Index>(miss.size()));
      if (!obs.empty()) {
        const Matrix phi_obs = sub.phi(obs, Eigen::all);
        const LowRankPlusIdentityInverse<double> inv(phi_obs, shrunk, noise);
        const Vector f_obs = f_std(i, obs).transpose();
        const Vector weights = inv.solve(f_obs);
        fill = sub.phi(miss, Eigen::all) * (shrunk.asDiagonal() * (phi_obs.transpose() * weights));
      }
      double change = 0.0;
      for (std::size_t a = 0; a < miss.size(); ++a) {
        const Index j = miss[a];
        change = std::max(change, std::abs(fill(static_cast<Index>(a)) - result.completed(i, j)));
        next(i, j) = fill(static_cast<Index>(a));
      }
      row_change(i) = change;
    });
    result.completed = std::move(next);
    if (row_change.maxCoeff() < opts.tol) {
      result.converged = true;
      return result;
    }
  }
  result.iterations = opts.max_iter;
  return result;
}

}  // namespace pcgpwm
