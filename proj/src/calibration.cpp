#include "pcgpwm/calibration.hpp"

#include "pcgpwm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace pcgpwm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool inside_unit_cube(const Vector& theta) { return ((theta.array() > 0.0) && (theta.array() < 1.0)).all(); }

}  // namespace

CalibrationProblem::CalibrationProblem(Vector y, Vector w_diag, std::shared_ptr<const Surrogate> surrogate)
    : y_(std::move(y)), w_diag_(std::move(w_diag)), surrogate_(std::move(surrogate)) {
  if (!surrogate_) throw InputError("calibration needs a fitted surrogate");
  const Index m = surrogate_->m_total;
  if (y_.size() != m || w_diag_.size() != m)
    throw InputError("observations have " + std::to_string(y_.size()) + " rows, model has " + std::to_string(m) +
                     " response columns");
  const auto& kept = surrogate_->kept_columns;
  std::vector<Index> local;
  for (std::size_t a = 0; a < kept.size(); ++a) {
    const Index j = kept[a];
    if (is_missing(y_(j))) continue;
    if (!(w_diag_(j) > 0.0)) throw InputError("observation variance in row " + std::to_string(j) + " is not positive");
    used_.push_back(j);
    local.push_back(static_cast<Index>(a));
  }
  if (used_.empty()) throw InputError("no observation overlaps a modeled column");
  y_used_ = y_(used_);
  w_inv_ = w_diag_(used_).cwiseInverse();
  log_det_w_ = w_diag_(used_).array().log().sum();
  basis_ = surrogate_->stats.col_scale(local).asDiagonal() * surrogate_->subspace.phi(local, Eigen::all);
  center_ = surrogate_->stats.col_center(local);
}

double CalibrationProblem::log_likelihood(const Vector& theta) const {
  const auto [mu, var] = surrogate_->predict_latent(Matrix(theta.transpose()));
  const Vector r = y_used_ - center_ - basis_ * mu.row(0).transpose();
  // (W + U S U^T)^{-1} through S^{1/2} so zero variances are harmless.
  const Vector s_half = var.row(0).transpose().cwiseSqrt();
  const Matrix us = basis_ * s_half.asDiagonal();
  const Matrix winv_us = w_inv_.asDiagonal() * us;
  Matrix inner = us.transpose() * winv_us;
  inner.diagonal().array() += 1.0;
  const Eigen::LLT<Matrix> llt(inner);
  const Vector b = winv_us.transpose() * r;
  const double log_det = log_det_w_ + 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = r.dot(w_inv_.cwiseProduct(r)) - b.dot(llt.solve(b));
  return -0.5 * log_det - 0.5 * quad;
}

double log_prior(const Vector& theta) {
  if (!inside_unit_cube(theta)) return kNegInf;
  return (theta.array() * (1.0 - theta.array())).log().sum();
}

double log_posterior(const CalibrationProblem& problem, const Vector& theta) {
  if (theta.size() != problem.dims())
    throw InputError("theta has " + std::to_string(theta.size()) + " entries, expected " +
                     std::to_string(problem.dims()));
  const double lp = log_prior(theta);
  if (!std::isfinite(lp)) return kNegInf;
  return lp + problem.log_likelihood(theta);
}

Vector grad_log_posterior(const CalibrationProblem& problem, const Vector& theta) {
  Vector grad(theta.size());
  for (Index l = 0; l < theta.size(); ++l) {
    const double h = std::min(1e-6, 0.5 * std::min(theta(l), 1.0 - theta(l)));
    Vector plus = theta, minus = theta;
    plus(l) += h;
    minus(l) -= h;
    grad(l) = (log_posterior(problem, plus) - log_posterior(problem, minus)) / (2.0 * h);
  }
  return grad;
}

namespace {

struct ChainState {
  Vector x;
  double logp = kNegInf;
  Vector grad;
};

// log q(to | from) for a MALA proposal at inverse temperature b, up to a constant.
double log_proposal(const Vector& to, const ChainState& from, double b, double step) {
  const Vector mean = from.x + 0.5 * step * step * b * from.grad;
  return -(to - mean).squaredNorm() / (2.0 * step * step);
}

Vector draw_beta22(Index d, Rng& rng) {
  std::gamma_distribution<double> gam(2.0, 1.0);
  Vector x(d);
  for (Index l = 0; l < d; ++l) {
    const double a = gam(rng);
    const double b = gam(rng);
    x(l) = a / (a + b);
  }
  return x;
}

}  // namespace

PosteriorChain ptlmc_sample(const LogDensity& log_density, const LogDensityGrad& grad, Index dims,
                            const PtlmcOptions& opts) {
  if (opts.n_samples < 1) throw InputError("n_samples must be at least 1");
  if (opts.n_temps < 1) throw InputError("n_temps must be at least 1");
  const int burn_in = opts.burn_in < 0 ? opts.n_samples : opts.burn_in;
  const Index n_temps = opts.n_temps;

  PosteriorChain out;
  out.temperatures.resize(n_temps);
  for (Index t = 0; t < n_temps; ++t)
    out.temperatures(t) =
        n_temps == 1 ? 1.0 : std::pow(opts.t_max, static_cast<double>(t) / static_cast<double>(n_temps - 1));
  const Vector inv_temp = out.temperatures.cwiseInverse();

  std::vector<Rng> rngs;
  for (Index t = 0; t < n_temps; ++t) rngs.push_back(make_rng(opts.seed, stream::kSampler, static_cast<std::uint64_t>(t)));
  Rng swap_rng = make_rng(opts.seed, stream::kSampler, static_cast<std::uint64_t>(n_temps));

  std::vector<ChainState> states(static_cast<std::size_t>(n_temps));
  for (Index t = 0; t < n_temps; ++t) {
    ChainState& s = states[static_cast<std::size_t>(t)];
    for (int attempt = 0; attempt < 100 && !std::isfinite(s.logp); ++attempt) {
      s.x = draw_beta22(dims, rngs[static_cast<std::size_t>(t)]);
      s.logp = log_density(s.x);
    }
    if (!std::isfinite(s.logp)) throw NumericalError("no initial point with finite posterior after 100 prior draws");
    s.grad = grad(s.x);
  }

  Vector log_step = Vector::Constant(n_temps, std::log(opts.initial_step));
  Vector accepts = Vector::Zero(n_temps);
  Vector swap_accepts = Vector::Zero(std::max<Index>(n_temps - 1, 0));
  Vector swap_tries = Vector::Zero(std::max<Index>(n_temps - 1, 0));
  out.samples.resize(opts.n_samples, dims);
  out.log_post.resize(opts.n_samples);

  const int total = burn_in + opts.n_samples;
  for (int iter = 0; iter < total; ++iter) {
    const bool burning = iter < burn_in;
    parallel_for(n_temps, [&](Index t) {
      ChainState& s = states[static_cast<std::size_t>(t)];
      Rng& rng = rngs[static_cast<std::size_t>(t)];
      std::normal_distribution<double> n01;
      std::uniform_real_distribution<double> u01;
      const double b = inv_temp(t);
      const double step = std::exp(log_step(t));
      Vector noise(dims);
      for (Index l = 0; l < dims; ++l) noise(l) = n01(rng);
      ChainState prop;
      prop.x = s.x + 0.5 * step * step * b * s.grad + step * noise;
      prop.logp = inside_unit_cube(prop.x) ? log_density(prop.x) : kNegInf;
      double accept_prob = 0.0;
      if (std::isfinite(prop.logp)) {
        prop.grad = grad(prop.x);
        const double log_ratio = b * (prop.logp - s.logp) + log_proposal(s.x, prop, b, step) -
                                 log_proposal(prop.x, s, b, step);
        accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
      }
      const bool accepted = u01(rng) < accept_prob;
      if (accepted) s = std::move(prop);
      if (burning) {
        const double gain = 1.0 / std::pow(static_cast<double>(iter) + 1.0, 0.6);
        log_step(t) = std::clamp(log_step(t) + gain * (accept_prob - opts.target_accept), std::log(1e-6), std::log(2.0));
      } else if (accepted) {
        accepts(t) += 1.0;
      }
    });

    std::uniform_real_distribution<double> u01;
    for (Index t = 0; t + 1 < n_temps; ++t) {
      ChainState& cold = states[static_cast<std::size_t>(t)];
      ChainState& hot = states[static_cast<std::size_t>(t + 1)];
      const double log_ratio = (inv_temp(t) - inv_temp(t + 1)) * (hot.logp - cold.logp);
      const bool swap = u01(swap_rng) < std::exp(std::min(0.0, log_ratio));
      if (!burning) swap_tries(t) += 1.0;
      if (swap) {
        std::swap(cold, hot);
        if (!burning) swap_accepts(t) += 1.0;
      }
    }

    if (!burning) {
      const int row = iter - burn_in;
      out.samples.row(row) = states[0].x.transpose();
      out.log_post(row) = states[0].logp;
    }
  }
  out.acceptance_rates = accepts / static_cast<double>(opts.n_samples);
  out.swap_rates = swap_tries.size() > 0 ? Vector(swap_accepts.cwiseQuotient(swap_tries.cwiseMax(1.0))) : Vector();
  out.step_sizes = log_step.array().exp();
  return out;
}

PosteriorChain ptlmc_sample(const CalibrationProblem& problem, const PtlmcOptions& opts) {
  return ptlmc_sample([&](const Vector& x) { return log_posterior(problem, x); },
                      [&](const Vector& x) { return grad_log_posterior(problem, x); }, problem.dims(), opts);
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<DimensionSummary> posterior_summary(const Matrix& samples, double level) {
  if (samples.rows() == 0) throw InputError("posterior summary of an empty chain");
  if (!(level > 0.0 && level < 1.0)) throw InputError("level must lie in (0, 1)");
  std::vector<DimensionSummary> out;
  for (Index l = 0; l < samples.cols(); ++l) {
    std::vector<double> col(samples.col(l).data(), samples.col(l).data() + samples.rows());
    DimensionSummary s;
    s.mean = samples.col(l).mean();
    s.lo = empirical_quantile(col, 0.5 * (1.0 - level));
    s.hi = empirical_quantile(col, 0.5 * (1.0 + level));
    s.width = s.hi - s.lo;
    out.push_back(s);
  }
  return out;
}

}  // namespace pcgpwm
