#pragma once

#include "pcgpwm/types.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace pcgpwm {

inline constexpr double kMinLengthscale = 1e-3;
inline constexpr double kMaxLengthscale = 1e3;
inline constexpr double kMinNugget = 1e-10;
inline constexpr double kMaxNugget = 1e-2;
inline constexpr double kMinBeta = 1e-3;
inline constexpr double kMaxBeta = 1e3;

enum class Kernel { sq_exp, matern52 };

std::string to_string(Kernel k);
/// "sq_exp" or "matern52"; anything else throws InputError.
Kernel parse_kernel(const std::string& name);

/// Stationary ARD hyperparameters, log domain.
struct KernelHyper {
  Vector log_lengthscales;
  double log_nugget = std::log(1e-6);
  Kernel kernel = Kernel::matern52;

  Vector lengthscales() const { return log_lengthscales.array().exp(); }
  double nugget() const { return std::exp(log_nugget); }
  Index dims() const { return log_lengthscales.size(); }
};

/// Correlation as a function of the scaled squared distance s = |z|^2,
/// z_l = (a_l - b_l) / ell_l.
///   sq_exp:   exp(-s / 2)
///   matern52: (1 + r + r^2 / 3) exp(-r), r = sqrt(5 s)
template <typename T>
T correlation_of_sqdist(T s, Kernel kernel) {
  using std::exp;
  using std::sqrt;
  if (kernel == Kernel::sq_exp) return exp(-0.5 * s);
  const T r = sqrt(5.0 * s);
  return (1.0 + r + r * r / 3.0) * exp(-r);
}

/// d correlation / d log ell_l divided by z_l^2 (same for every l).
double correlation_log_ell_factor(double s, Kernel kernel);

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar correlation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                      const VectorX<typename DerivedA::Scalar>& lengthscales,
                                      Kernel kernel = Kernel::matern52) {
  const auto z = (a.derived().transpose().array() - b.derived().transpose().array()) / lengthscales.array();
  return correlation_of_sqdist<typename DerivedA::Scalar>(z.square().sum(), kernel);
}

double correlation(const Vector& a, const Vector& b, const KernelHyper& hyper);

/// min(eta, w / (1 - w)^alpha); w = 1 maps to eta.
double variance_inflation(double w, double alpha, double eta);
Vector variance_inflation(const Vector& w, double alpha, double eta);

/// R (n x n) over the rows of theta, no nugget.
Matrix correlation_matrix(const Matrix& theta, const KernelHyper& hyper);
/// Cross correlations between rows of a (q x d) and rows of b (n x d): q x n.
Matrix cross_correlation(const Matrix& a, const Matrix& b, const KernelHyper& hyper);

/// R + nugget I + beta diag(v), assembled densely.
Matrix adjusted_corr_matrix(const Matrix& theta, const KernelHyper& hyper, double beta, const Vector& v);

struct AdjustedCorr {
  Eigen::LLT<Matrix> llt;
  /// Extra diagonal added on top of the nugget to reach SPD (0 normally).
  double jitter = 0.0;
};

/// Cholesky of R~ with diagonal jitter escalation. Throws NumericalError
/// when the matrix cannot be factorized.
AdjustedCorr build_adjusted_corr(const Matrix& theta, const KernelHyper& hyper, double beta, const Vector& v);

struct NllValue {
  double value = 0.0;
  /// d/d(log ell_1..d, log nugget, log beta).
  Vector gradient;
};

/// 0.5 log|R~| + g^T R~^{-1} g / (2 lambda) with R~ built from v =
/// variance_inflation(w). A non-SPD R~ gives value = +inf.
NllValue neg_log_lik(const KernelHyper& hyper, double beta, const Vector& g, const Vector& w, double lambda,
                     const Matrix& theta, double alpha, double eta);

/// Same objective with the inflation terms v given directly.
NllValue neg_log_lik_v(const KernelHyper& hyper, double beta, const Vector& g, const Vector& v, double lambda,
                       const Matrix& theta);

/// Objective with the scale maximized out: 0.5 log|R~| + (n/2) log(g^T R~^{-1} g / n).
NllValue neg_log_lik_profiled(const KernelHyper& hyper, double beta, const Vector& g, const Vector& v,
                              const Matrix& theta);

/// One fitted latent GP.
struct ComponentGP {
  KernelHyper hyper;
  double beta = 1.0;
  double lambda = 1.0;
  Vector v;
  Matrix theta;
  Vector g;
  AdjustedCorr chol;
  Vector alpha_vec;
  double nll = 0.0;
};

/// Factorizes a component at fixed hyperparameters.
ComponentGP make_component(const Matrix& theta, const Vector& g, const Vector& v, double lambda,
                           const KernelHyper& hyper, double beta);

struct FitOptions {
  int restarts = 4;
  int max_iter = 200;
  /// Keep beta at its initial value (1) instead of optimizing it.
  bool fix_beta = false;
  /// Estimate the scale by maximum likelihood; `lambda` is then ignored.
  bool profile_scale = false;
  Kernel kernel = Kernel::matern52;
};

/// Multistart maximum likelihood over (lengthscales, nugget, beta). Starts:
/// per-dimension median pairwise distance times 0.5, 1 and 2, then random
/// draws. Deterministic in `seed`.
ComponentGP fit_component(const Vector& g, const Vector& w, double lambda, const Matrix& theta, double alpha,
                          double eta, std::uint64_t seed, const FitOptions& opts = {});

/// Predictive mean r^T R~^{-1} g and variance lambda (1 - r^T R~^{-1} r),
/// clamped at 0.
std::pair<double, double> predict_component(const ComponentGP& comp, const Vector& theta_star);
/// Batch form over the rows of theta_star.
std::pair<Vector, Vector> predict_component_rows(const ComponentGP& comp, const Matrix& theta_star);

}  // namespace pcgpwm
