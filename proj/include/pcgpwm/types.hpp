#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcgpwm {

using Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;

/// Sorted column (or row) indices.
using IndexSet = std::vector<Index>;

/// Missing responses are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Bad user input: malformed files, wrong dimensions, violated preconditions.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A factorization or solve that failed even after regularization.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Gathers `v(idx)` into a dense vector.
template <typename Derived>
VectorX<typename Derived::Scalar> gather(const Eigen::MatrixBase<Derived>& v, const IndexSet& idx) {
  VectorX<typename Derived::Scalar> out(static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Index>(a)) = v(idx[a]);
  return out;
}

/// Gathers the rows `idx` of `m`.
template <typename Derived>
MatrixX<typename Derived::Scalar> gather_rows(const Eigen::MatrixBase<Derived>& m, const IndexSet& idx) {
  MatrixX<typename Derived::Scalar> out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t a = 0; a < idx.size(); ++a) out.row(static_cast<Index>(a)) = m.row(idx[a]);
  return out;
}

}  // namespace pcgpwm
