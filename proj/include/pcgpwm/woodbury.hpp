#pragma once

#include "pcgpwm/types.hpp"

#include <string>

namespace pcgpwm {

/// Inverse of A = sigma * I + U diag(c) U^T applied through the Woodbury
/// identity
///
///   A^{-1} = sigma^{-1} I - sigma^{-2} U (diag(c)^{-1} + sigma^{-1} U^T U)^{-1} U^T,
///
/// so only the k x k inner matrix is factorized (U is r x k, k usually << r).
/// Requires sigma > 0 and c > 0.
template <typename Scalar>
class LowRankPlusIdentityInverse {
public:
  using Mat = MatrixX<Scalar>;
  using Vec = VectorX<Scalar>;

  template <typename DerivedU, typename DerivedC>
  LowRankPlusIdentityInverse(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedC>& c,
                             Scalar sigma)
      : u_(u), sigma_(sigma) {
    if (!(sigma > Scalar(0))) throw NumericalError("Woodbury solve needs sigma > 0");
    if ((c.array() <= Scalar(0)).any()) throw NumericalError("Woodbury solve needs positive weights");
    Mat inner = u_.transpose() * u_ / sigma_;
    inner.diagonal() += c.cwiseInverse();
    factorize(inner);
  }

  /// A^{-1} * rhs for a vector or matrix right-hand side.
  template <typename Derived>
  MatrixX<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const {
    const Mat proj = llt_.solve(u_.transpose() * rhs);
    return (rhs - u_ * proj / sigma_) / sigma_;
  }

  /// Jitter added to the inner matrix's diagonal (0 when none was needed).
  Scalar jitter() const { return jitter_; }

private:
  void factorize(Mat inner) {
    const Index k = inner.rows();
    if (k == 0) return;
    llt_.compute(inner);
    if (llt_.info() == Eigen::Success) return;
    // Escalate a diagonal jitter before giving up.
    Scalar jitter = Scalar(1e-10) * inner.trace() / Scalar(k);
    for (int attempt = 0; attempt < 3; ++attempt, jitter *= Scalar(10)) {
      Mat trial = inner;
      trial.diagonal().array() += jitter;
      llt_.compute(trial);
      if (llt_.info() == Eigen::Success) {
        jitter_ = jitter;
        return;
      }
    }
    throw NumericalError("inner " + std::to_string(k) + "x" + std::to_string(k) +
                         " system is numerically singular; the subspace is ill-conditioned");
  }

  Mat u_;
  Scalar sigma_;
  Eigen::LLT<Mat> llt_;
  Scalar jitter_ = Scalar(0);
};

}  // namespace pcgpwm
