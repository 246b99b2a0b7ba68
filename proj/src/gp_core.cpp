#include "pcgpwm/gp_core.hpp"

#include "pcgpwm/optimize.hpp"
#include "pcgpwm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace pcgpwm {

std::string to_string(Kernel k) { return k == Kernel::sq_exp ? "sq_exp" : "matern52"; }

Kernel parse_kernel(const std::string& name) {
  if (name == "sq_exp") return Kernel::sq_exp;
  if (name == "matern52") return Kernel::matern52;
  throw InputError("unknown kernel '" + name + "' (expected sq_exp or matern52)");
}

double correlation_log_ell_factor(double s, Kernel kernel) {
  if (kernel == Kernel::sq_exp) return std::exp(-0.5 * s);
  const double r = std::sqrt(5.0 * s);
  return 5.0 / 3.0 * (1.0 + r) * std::exp(-r);
}

double correlation(const Vector& a, const Vector& b, const KernelHyper& hyper) {
  if (a.size() != hyper.dims() || b.size() != hyper.dims())
    throw InputError("correlation: input dimension does not match hyperparameters");
  return correlation(a, b, hyper.lengthscales(), hyper.kernel);
}

double variance_inflation(double w, double alpha, double eta) {
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return eta;
  return std::min(eta, w / std::pow(1.0 - w, alpha));
}

Vector variance_inflation(const Vector& w, double alpha, double eta) {
  return w.unaryExpr([&](double x) { return variance_inflation(x, alpha, eta); });
}

Matrix cross_correlation(const Matrix& a, const Matrix& b, const KernelHyper& hyper) {
  if (a.cols() != hyper.dims() || b.cols() != hyper.dims())
    throw InputError("correlation: input dimension does not match hyperparameters");
  const Vector inv_ell = (-hyper.log_lengthscales).array().exp();
  const Matrix as = a * inv_ell.asDiagonal();
  const Matrix bs = b * inv_ell.asDiagonal();
  Matrix out(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out(i, j) = correlation_of_sqdist((as.row(i) - bs.row(j)).squaredNorm(), hyper.kernel);
  return out;
}

Matrix correlation_matrix(const Matrix& theta, const KernelHyper& hyper) {
  Matrix r = cross_correlation(theta, theta, hyper);
  r.diagonal().setOnes();
  return r;
}

Matrix adjusted_corr_matrix(const Matrix& theta, const KernelHyper& hyper, double beta, const Vector& v) {
  if (v.size() != theta.rows()) throw InputError("inflation vector length does not match theta rows");
  if ((v.array() < 0.0).any() || beta < 0.0) throw InputError("inflation terms and beta must be nonnegative");
  Matrix r = correlation_matrix(theta, hyper);
  r.diagonal().array() += hyper.nugget();
  r.diagonal() += beta * v;
  return r;
}

AdjustedCorr build_adjusted_corr(const Matrix& theta, const KernelHyper& hyper, double beta, const Vector& v) {
  const Matrix r = adjusted_corr_matrix(theta, hyper, beta, v);
  AdjustedCorr out;
  out.llt.compute(r);
  if (out.llt.info() == Eigen::Success) return out;
  for (double jitter = 1e-10; jitter <= 1e-6; jitter *= 10.0) {
    Matrix trial = r;
    trial.diagonal().array() += jitter;
    out.llt.compute(trial);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
  }
  throw NumericalError("adjusted correlation matrix is not positive definite after jitter");
}

namespace {

// lambda <= 0 selects the profiled objective.
NllValue nll_impl(const KernelHyper& hyper, double beta, const Vector& g, const Vector& v, double lambda,
                  const Matrix& theta) {
  const Index n = theta.rows();
  const Index d = theta.cols();
  if (g.size() != n || v.size() != n) throw InputError("neg_log_lik: vector lengths do not match theta rows");

  NllValue out;
  out.gradient = Vector::Zero(d + 2);
  const Matrix r = correlation_matrix(theta, hyper);
  Matrix rt = r;
  const double nugget = hyper.nugget();
  rt.diagonal().array() += nugget;
  rt.diagonal() += beta * v;
  const Eigen::LLT<Matrix> llt(rt);
  if (llt.info() != Eigen::Success) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const Matrix& l = llt.matrixLLT();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const Vector a = llt.solve(g);
  if (lambda > 0.0) {
    out.value = 0.5 * logdet + g.dot(a) / (2.0 * lambda);
  } else {
    lambda = std::max(g.dot(a), 1e-300) / static_cast<double>(n);
    out.value = 0.5 * logdet + 0.5 * static_cast<double>(n) * std::log(lambda);
  }
  if (!std::isfinite(out.value)) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }

  // grad = 0.5 * sum_ij K_ij dR~_ij with K = R~^{-1} - a a^T / lambda.
  Matrix k = llt.solve(Matrix::Identity(n, n));
  k.noalias() -= a * a.transpose() / lambda;
  const Vector inv_ell2 = (-2.0 * hyper.log_lengthscales).array().exp();
  Matrix kr;
  if (hyper.kernel == Kernel::sq_exp) {
    kr = k.cwiseProduct(r);
  } else {
    const Matrix ts = theta * inv_ell2.cwiseSqrt().asDiagonal();
    kr.resize(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < j; ++i)
        kr(i, j) = k(i, j) * correlation_log_ell_factor((ts.row(i) - ts.row(j)).squaredNorm(), hyper.kernel);
  }
  for (Index dim = 0; dim < d; ++dim) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double tj = theta(j, dim);
      for (Index i = 0; i < j; ++i) {
        const double diff = theta(i, dim) - tj;
        acc += kr(i, j) * diff * diff;
      }
    }
    // Off-diagonal pairs counted twice, diagonal contributes 0.
    out.gradient(dim) = acc * inv_ell2(dim);
  }
  out.gradient(d) = 0.5 * nugget * k.trace();
  out.gradient(d + 1) = 0.5 * beta * k.diagonal().dot(v);
  return out;
}

}  // namespace

NllValue neg_log_lik_v(const KernelHyper& hyper, double beta, const Vector& g, const Vector& v, double lambda,
                       const Matrix& theta) {
  if (!(lambda > 0.0)) throw InputError("neg_log_lik: lambda must be positive");
  return nll_impl(hyper, beta, g, v, lambda, theta);
}

NllValue neg_log_lik_profiled(const KernelHyper& hyper, double beta, const Vector& g, const Vector& v,
                              const Matrix& theta) {
  return nll_impl(hyper, beta, g, v, 0.0, theta);
}

NllValue neg_log_lik(const KernelHyper& hyper, double beta, const Vector& g, const Vector& w, double lambda,
                     const Matrix& theta, double alpha, double eta) {
  if ((w.array() < 0.0).any() || (w.array() > 1.0).any()) throw InputError("neg_log_lik: w must lie in [0, 1]");
  return neg_log_lik_v(hyper, beta, g, variance_inflation(w, alpha, eta), lambda, theta);
}

ComponentGP make_component(const Matrix& theta, const Vector& g, const Vector& v, double lambda,
                           const KernelHyper& hyper, double beta) {
  if (hyper.dims() != theta.cols()) throw InputError("hyperparameter dimension does not match theta");
  if (g.size() != theta.rows()) throw InputError("component data length does not match theta rows");
  ComponentGP comp;
  comp.hyper = hyper;
  comp.beta = beta;
  comp.lambda = lambda;
  comp.v = v;
  comp.theta = theta;
  comp.g = g;
  comp.chol = build_adjusted_corr(theta, hyper, beta, v);
  comp.alpha_vec = comp.chol.llt.solve(g);
  const double logdet = 2.0 * comp.chol.llt.matrixLLT().diagonal().array().log().sum();
  comp.nll = 0.5 * logdet + g.dot(comp.alpha_vec) / (2.0 * lambda);
  return comp;
}

namespace {

Vector median_pairwise_distance(const Matrix& theta) {
  const Index n = theta.rows();
  Vector med(theta.cols());
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index l = 0; l < theta.cols(); ++l) {
    dist.clear();
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < j; ++i) dist.push_back(std::abs(theta(i, l) - theta(j, l)));
    const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    med(l) = *mid > 0.0 ? *mid : 1.0;
  }
  return med;
}

}  // namespace

ComponentGP fit_component(const Vector& g, const Vector& w, double lambda, const Matrix& theta, double alpha,
                          double eta, std::uint64_t seed, const FitOptions& opts) {
  const Index n = theta.rows();
  const Index d = theta.cols();
  if (n < 2) throw InputError("fit_component needs at least 2 runs");
  if (g.size() != n || w.size() != n) throw InputError("fit_component: vector lengths do not match theta rows");
  if (opts.restarts < 1) throw InputError("fit_component needs at least one restart");

  const Vector v = variance_inflation(w, alpha, eta);
  // beta only enters through beta * v; with v = 0 it stays at 1.
  const bool beta_free = !opts.fix_beta && (v.array() > 0.0).any();

  Vector lower(d + 2), upper(d + 2);
  lower.head(d).setConstant(std::log(kMinLengthscale));
  upper.head(d).setConstant(std::log(kMaxLengthscale));
  lower(d) = std::log(kMinNugget);
  upper(d) = std::log(kMaxNugget);
  lower(d + 1) = beta_free ? std::log(kMinBeta) : 0.0;
  upper(d + 1) = beta_free ? std::log(kMaxBeta) : 0.0;

  auto unpack = [d, &opts](const Vector& x) {
    KernelHyper h;
    h.kernel = opts.kernel;
    h.log_lengthscales = x.head(d);
    h.log_nugget = x(d);
    return std::make_pair(h, std::exp(x(d + 1)));
  };
  const Objective objective = [&](const Vector& x, Vector& grad) {
    const auto [h, beta] = unpack(x);
    NllValue val = opts.profile_scale ? neg_log_lik_profiled(h, beta, g, v, theta)
                                      : neg_log_lik_v(h, beta, g, v, lambda, theta);
    grad = val.gradient;
    return val.value;
  };

  const Vector med = median_pairwise_distance(theta).array().log();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double factors[] = {1.0, 0.5, 2.0};

  LbfgsOptions lopts;
  lopts.max_iter = opts.max_iter;
  double best_value = std::numeric_limits<double>::infinity();
  Vector best_x;
  for (int start = 0; start < opts.restarts; ++start) {
    Vector x0(d + 2);
    if (start < 3) {
      x0.head(d) = med.array() + std::log(factors[start]);
    } else {
      for (Index l = 0; l < d; ++l) x0(l) = med(l) + std::log(10.0) * unif(rng);
    }
    x0(d) = std::log(1e-6);
    x0(d + 1) = 0.0;
    x0 = x0.cwiseMax(lower).cwiseMin(upper);

    Vector scratch;
    if (!std::isfinite(objective(x0, scratch))) {
      x0(d) = upper(d);
      if (!std::isfinite(objective(x0, scratch))) continue;
    }
    const LbfgsResult res = minimize_box(objective, x0, lower, upper, lopts);
    if (res.value < best_value) {
      best_value = res.value;
      best_x = res.x;
    }
  }
  if (!std::isfinite(best_value))
    throw NumericalError("every restart produced a non positive definite correlation matrix");
  const auto [h, beta] = unpack(best_x);
  if (!opts.profile_scale) return make_component(theta, g, v, lambda, h, beta);
  const ComponentGP unit = make_component(theta, g, v, 1.0, h, beta);
  const double scale = std::max(g.dot(unit.alpha_vec) / static_cast<double>(n), 1e-300);
  return make_component(theta, g, v, scale, h, beta);
}

std::pair<Vector, Vector> predict_component_rows(const ComponentGP& comp, const Matrix& theta_star) {
  if (theta_star.cols() != comp.theta.cols())
    throw InputError("prediction input has " + std::to_string(theta_star.cols()) + " columns, expected " +
                     std::to_string(comp.theta.cols()));
  const Matrix r = cross_correlation(theta_star, comp.theta, comp.hyper);
  Vector mu = r * comp.alpha_vec;
  const Matrix half = comp.chol.llt.matrixL().solve(r.transpose());
  Vector var = (comp.lambda * (1.0 - half.colwise().squaredNorm().array())).cwiseMax(0.0).matrix();
  return {std::move(mu), std::move(var)};
}

std::pair<double, double> predict_component(const ComponentGP& comp, const Vector& theta_star) {
  const auto [mu, var] = predict_component_rows(comp, Matrix(theta_star.transpose()));
  return {mu(0), var(0)};
}

}  // namespace pcgpwm
