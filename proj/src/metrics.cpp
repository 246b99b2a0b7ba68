#include "pcgpwm/benchmarks.hpp"

#include <cmath>

namespace pcgpwm {

Metrics compute_metrics(const Matrix& mean, const Matrix& variance, const Matrix& truth, double z) {
  if (mean.rows() != truth.rows() || mean.cols() != truth.cols() || variance.rows() != truth.rows() ||
      variance.cols() != truth.cols())
    throw InputError("metrics: prediction and truth shapes differ");
  Metrics out;
  double sq = 0.0, covered = 0.0, width = 0.0;
  for (Index j = 0; j < truth.cols(); ++j) {
    for (Index i = 0; i < truth.rows(); ++i) {
      if (is_missing(truth(i, j))) continue;
      const double half = z * std::sqrt(std::max(variance(i, j), 0.0));
      const double err = truth(i, j) - mean(i, j);
      sq += err * err;
      // NaN predictions count as misses.
      if (std::abs(err) <= half) covered += 1.0;
      width += 2.0 * half;
      ++out.count;
    }
  }
  if (out.count == 0) throw InputError("metrics: holdout has no available entries");
  const auto cnt = static_cast<double>(out.count);
  out.rmse = std::sqrt(sq / cnt);
  out.coverage = covered / cnt;
  out.width = width / cnt;
  return out;
}

}  // namespace pcgpwm
