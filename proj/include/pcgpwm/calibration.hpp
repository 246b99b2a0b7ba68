#pragma once

#include "pcgpwm/surrogate.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace pcgpwm {

/// y ~ N(mu(theta), W + Sigma(theta)) with diagonal W and a Beta(2,2)
/// prior on each coordinate of theta in [0,1]^d.
class CalibrationProblem {
public:
  /// y and w_diag have one entry per response column. Columns where y is
  /// NaN, or which the surrogate dropped, are ignored.
  CalibrationProblem(Vector y, Vector w_diag, std::shared_ptr<const Surrogate> surrogate);

  const Vector& y() const { return y_; }
  const Vector& w_diag() const { return w_diag_; }
  const Surrogate& surrogate() const { return *surrogate_; }
  Index dims() const { return surrogate_->n_params(); }
  /// Response columns that enter the likelihood.
  const IndexSet& used_columns() const { return used_; }

  /// Log likelihood (without prior), up to an additive constant.
  double log_likelihood(const Vector& theta) const;

private:
  Vector y_;
  Vector w_diag_;
  std::shared_ptr<const Surrogate> surrogate_;
  IndexSet used_;
  // Restricted to used columns: y, 1/w, scaled basis D Phi and center.
  Vector y_used_;
  Vector w_inv_;
  Matrix basis_;
  Vector center_;
  double log_det_w_ = 0.0;
};

/// sum_l log(theta_l (1 - theta_l)) inside (0,1)^d, else -inf.
double log_prior(const Vector& theta);

double log_posterior(const CalibrationProblem& problem, const Vector& theta);

/// Central differences of log_posterior, step 1e-6 shrunk near the
/// boundary of the unit cube.
Vector grad_log_posterior(const CalibrationProblem& problem, const Vector& theta);

struct PtlmcOptions {
  int n_samples = 1000;
  /// Burn-in iterations; negative means equal to n_samples.
  int burn_in = -1;
  int n_temps = 4;
  double t_max = 100.0;
  double target_accept = 0.574;
  double initial_step = 0.05;
  std::uint64_t seed = 0;
};

struct PosteriorChain {
  /// Cold-chain draws after burn-in, S x d.
  Matrix samples;
  Vector log_post;
  /// Post burn-in MALA acceptance rate per temperature.
  Vector acceptance_rates;
  /// Swap acceptance rate per adjacent pair (length n_temps - 1).
  Vector swap_rates;
  Vector temperatures;
  Vector step_sizes;
};

/// Parallel-tempered Metropolis-adjusted Langevin sampler.
PosteriorChain ptlmc_sample(const CalibrationProblem& problem, const PtlmcOptions& opts = {});

/// Generic target form used by the sampler; exposed for testing.
using LogDensity = std::function<double(const Vector&)>;
using LogDensityGrad = std::function<Vector(const Vector&)>;
PosteriorChain ptlmc_sample(const LogDensity& log_density, const LogDensityGrad& grad, Index dims,
                            const PtlmcOptions& opts);

struct DimensionSummary {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double width = 0.0;
};

/// Empirical (1 - level) / 2 and (1 + level) / 2 quantiles per column,
/// linear interpolation between order statistics.
std::vector<DimensionSummary> posterior_summary(const Matrix& samples, double level = 0.9);

/// Quantile of a sample with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double q);

}  // namespace pcgpwm
