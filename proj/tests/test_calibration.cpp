#include "oracles.hpp"

#include "pcgpwm/calibration.hpp"

#include <doctest.h>

#include <cmath>

using namespace pcgpwm;

namespace {

std::shared_ptr<const Surrogate> small_surrogate(Index m) {
  const Matrix theta = latin_hypercube(40, 3, 4);
  Matrix x(m, 1);
  for (Index j = 0; j < m; ++j) x(j, 0) = static_cast<double>(j) / static_cast<double>(m - 1);
  Matrix f(40, m);
  for (Index i = 0; i < 40; ++i)
    for (Index j = 0; j < m; ++j)
      f(i, j) = theta(i, 0) + std::sin(2.0 * theta(i, 1) + x(j, 0)) + theta(i, 2) * x(j, 0);
  return std::make_shared<const Surrogate>(fit_surrogate(SimulationDataset(theta, x, f)));
}

// Direct evaluation with the full m x m covariance.
double dense_log_post(const Surrogate& sur, const Vector& y, const Vector& w, const Vector& theta) {
  const Prediction p = sur.predict(theta);
  Matrix c = p.cov;
  c.diagonal() += w;
  const Eigen::LLT<Matrix> llt(c);
  const Vector r = y - p.mean;
  return -llt.matrixLLT().diagonal().array().log().sum() - 0.5 * r.dot(llt.solve(r)) + log_prior(theta);
}

// Batch-means standard error of a chain.
double batch_stderr(const Vector& x, Index batches = 20) {
  const Index len = x.size() / batches;
  Vector means(batches);
  for (Index b = 0; b < batches; ++b) means(b) = x.segment(b * len, len).mean();
  const double mu = means.mean();
  return std::sqrt((means.array() - mu).square().sum() / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

}  // namespace

TEST_CASE("Beta(2,2) log prior") {
  CHECK(log_prior(Vector::Constant(13, 0.5)) == doctest::Approx(13 * std::log(0.25)));
  Vector t = Vector::Constant(2, 0.3);
  t(1) = 0.0;
  CHECK(log_prior(t) == -std::numeric_limits<double>::infinity());
  t(1) = 1.2;
  CHECK(log_prior(t) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("Woodbury posterior matches the dense covariance") {
  const auto sur = small_surrogate(8);
  Rng rng(1);
  const Vector y = oracle::gaussian(8, 1, rng).array() + 1.0;
  const Vector w = (oracle::uniform(8, 1, rng).array() * 0.1 + 0.01).matrix();
  const CalibrationProblem prob(y, w, sur);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector theta = (oracle::uniform(3, 1, rng).array() * 0.9 + 0.05).matrix();
    const double a = log_posterior(prob, theta);
    const double b = dense_log_post(*sur, y, w, theta);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
  CHECK_THROWS_AS(CalibrationProblem(Vector::Zero(7), Vector::Ones(7), sur), InputError);
}

TEST_CASE("NaN observations and permutation invariance") {
  const auto sur = small_surrogate(6);
  Rng rng(2);
  Vector y = oracle::gaussian(6, 1, rng);
  const Vector w = Vector::Constant(6, 0.05);
  Vector y_nan = y;
  y_nan(2) = kMissing;
  const CalibrationProblem prob(y_nan, w, sur);
  CHECK(prob.used_columns() == IndexSet{0, 1, 3, 4, 5});
  const Vector theta = Vector::Constant(3, 0.4);
  IndexSet keep{0, 1, 3, 4, 5};
  const Vector y_red = y(keep);
  const Prediction p = sur->predict(theta);
  Matrix c = p.cov(keep, keep);
  c.diagonal() += w(keep);
  const Eigen::LLT<Matrix> llt(c);
  const Vector r = y_red - p.mean(keep);
  const double dense = -llt.matrixLLT().diagonal().array().log().sum() - 0.5 * r.dot(llt.solve(r)) + log_prior(theta);
  CHECK(log_posterior(prob, theta) == doctest::Approx(dense).epsilon(1e-9));
}

TEST_CASE("finite-difference gradient") {
  const auto sur = small_surrogate(8);
  Rng rng(3);
  const Vector y = oracle::gaussian(8, 1, rng).array() + 1.0;
  const CalibrationProblem prob(y, Vector::Constant(8, 0.05), sur);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector theta = (oracle::uniform(3, 1, rng).array() * 0.8 + 0.1).matrix();
    const Vector g = grad_log_posterior(prob, theta);
    Vector g4(3);
    const double h = 1e-3;
    for (Index l = 0; l < 3; ++l) {
      auto at = [&](double s) {
        Vector t = theta;
        t(l) += s * h;
        return log_posterior(prob, t);
      };
      g4(l) = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h);
    }
    CHECK((g - g4).norm() <= 1e-4 * std::max(1.0, g4.norm()));
  }

  const CalibrationProblem flat(y, Vector::Constant(8, 1e12), sur);
  const Vector theta = Vector::Constant(3, 0.3);
  const Vector g = grad_log_posterior(flat, theta);
  for (Index l = 0; l < 3; ++l) CHECK(g(l) == doctest::Approx(1 / 0.3 - 1 / 0.7).epsilon(1e-4));
}

TEST_CASE("prior-only sampling recovers Beta(2,2) moments") {
  const auto sur = small_surrogate(6);
  const CalibrationProblem flat(Vector::Zero(6), Vector::Constant(6, 1e12), sur);
  PtlmcOptions opts;
  opts.n_samples = 4000;
  opts.n_temps = 3;
  opts.seed = 11;
  const PosteriorChain chain = ptlmc_sample(flat, opts);
  CHECK(chain.samples.rows() == 4000);
  CHECK(((chain.samples.array() > 0.0) && (chain.samples.array() < 1.0)).all());
  CHECK(chain.log_post.allFinite());
  for (Index l = 0; l < 3; ++l) {
    const Vector col = chain.samples.col(l);
    CHECK(std::abs(col.mean() - 0.5) <= 3.0 * batch_stderr(col));
    const Vector sq = (col.array() - 0.5).square().matrix();
    CHECK(std::abs(sq.mean() - 0.05) <= 3.0 * batch_stderr(sq) + 1e-3);
  }
  CHECK(chain.swap_rates.size() == 2);

  const PosteriorChain again = ptlmc_sample(flat, opts);
  CHECK(again.samples == chain.samples);
}

TEST_CASE("single temperature is plain MALA on a Gaussian target") {
  const Vector center = Vector::Constant(2, 0.4);
  const LogDensity dens = [&](const Vector& x) { return -0.5 * (x - center).squaredNorm() / 0.01; };
  const LogDensityGrad grad = [&](const Vector& x) { return Vector(-(x - center) / 0.01); };
  PtlmcOptions opts;
  opts.n_samples = 3000;
  opts.n_temps = 1;
  opts.seed = 5;
  const PosteriorChain chain = ptlmc_sample(dens, grad, 2, opts);
  CHECK(chain.swap_rates.size() == 0);
  CHECK(chain.acceptance_rates(0) > 0.3);
  for (Index l = 0; l < 2; ++l) {
    const Vector col = chain.samples.col(l);
    CHECK(std::abs(col.mean() - 0.4) <= 3.0 * batch_stderr(col));
  }
}

TEST_CASE("quantile summaries") {
  const Matrix same = Matrix::Constant(50, 2, 0.3);
  CHECK(posterior_summary(same)[0].width == 0.0);
  CHECK_THROWS_AS(posterior_summary(Matrix(0, 2)), InputError);

  Rng rng(9);
  const Matrix u = oracle::uniform(100000, 1, rng);
  CHECK(posterior_summary(u)[0].width == doctest::Approx(0.9).epsilon(0.01));

  std::vector<double> v{1, 2, 3, 4};
  CHECK(empirical_quantile(v, 0.5) == 2.5);
  CHECK(empirical_quantile(v, 0.0) == 1.0);
}
