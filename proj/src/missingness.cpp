#include "pcgpwm/benchmarks.hpp"

#include "pcgpwm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace pcgpwm {

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::mcar: return "MCAR";
    case Mechanism::mar: return "MAR";
    case Mechanism::mnar: return "MNAR";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "MCAR") return Mechanism::mcar;
  if (up == "MAR") return Mechanism::mar;
  if (up == "MNAR") return Mechanism::mnar;
  throw InputError("unknown missingness mechanism '" + std::string(name) + "'");
}

Matrix threshold_mask(const Matrix& values, const Vector& reference, double c) {
  Matrix out = values;
  for (Index j = 0; j < values.cols(); ++j)
    for (Index i = 0; i < values.rows(); ++i)
      if (values(i, j) > c * reference(j)) out(i, j) = kMissing;
  return out;
}

namespace {

double missing_fraction(const Matrix& m) {
  return static_cast<double>(m.unaryExpr([](double x) { return is_missing(x) ? 1.0 : 0.0; }).sum()) /
         static_cast<double>(m.size());
}

// Largest step-function root: the smallest c whose exceedance fraction is
// at most `rate`, located by bisection on [lo, hi].
double bisect_threshold(const Matrix& ratio, double rate) {
  auto exceed = [&](double c) {
    return static_cast<double>((ratio.array() > c).count()) / static_cast<double>(ratio.size());
  };
  double lo = ratio.minCoeff() - 1e-12 * std::abs(ratio.minCoeff()) - 1e-300;
  double hi = ratio.maxCoeff();
  if (!(exceed(lo) >= rate && exceed(hi) <= rate))
    throw InputError("threshold rate " + std::to_string(rate) + " outside achievable range [0, " +
                     std::to_string(exceed(lo)) + "]");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (exceed(mid) <= rate)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

Matrix mask_bernoulli(const Matrix& values, const Matrix& prob, Rng& rng) {
  Matrix out = values;
  std::uniform_real_distribution<double> u01;
  for (Index j = 0; j < values.cols(); ++j)
    for (Index i = 0; i < values.rows(); ++i)
      if (u01(rng) < prob(i, j)) out(i, j) = kMissing;
  return out;
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

Matrix apply_missingness(const Matrix& values, const MissingnessSpec& spec, TestFunction tf,
                         const Matrix& locations) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw InputError("missingness rate must lie in [0, 1)");
  if (locations.rows() != values.cols()) throw InputError("locations do not match response columns");
  if (spec.rate == 0.0 && !spec.threshold) return values;
  const Index n = values.rows();
  const Index m = values.cols();
  Rng rng = make_rng(spec.seed, stream::kMissingness);

  switch (spec.mechanism) {
    case Mechanism::mcar:
      return mask_bernoulli(values, Matrix::Constant(n, m, spec.rate), rng);

    case Mechanism::mar: {
      IndexSet cols(static_cast<std::size_t>(m));
      std::iota(cols.begin(), cols.end(), Index{0});
      std::shuffle(cols.begin(), cols.end(), rng);
      const auto subset =
          std::max<Index>(1, static_cast<Index>(std::lround(spec.mar_subset_fraction * static_cast<double>(m))));
      const double p = spec.rate * static_cast<double>(m) / static_cast<double>(subset);
      if (p >= 1.0)
        throw InputError("MAR rate " + std::to_string(spec.rate) + " not achievable on " + std::to_string(subset) +
                         " of " + std::to_string(m) + " locations");
      Matrix prob = Matrix::Zero(n, m);
      for (Index a = 0; a < subset; ++a) prob.col(cols[static_cast<std::size_t>(a)]).setConstant(p);
      return mask_bernoulli(values, prob, rng);
    }

    case Mechanism::mnar: {
      const TestFunctionInfo& fi = info(tf);
      if (tf == TestFunction::borehole || tf == TestFunction::wingweight) {
        Vector center(fi.d());
        for (Index l = 0; l < fi.d(); ++l)
          center(l) = 0.5 * (fi.theta_ranges[static_cast<std::size_t>(l)].lo + fi.theta_ranges[static_cast<std::size_t>(l)].hi);
        Vector reference(m);
        for (Index j = 0; j < m; ++j) reference(j) = eval_function(tf, center, locations.row(j).transpose());
        if ((reference.array() <= 0.0).any()) throw InputError("threshold rule needs a positive reference output");
        if (spec.threshold) return threshold_mask(values, reference, *spec.threshold);
        const Matrix ratio = values.array().rowwise() / reference.transpose().array();
        return threshold_mask(values, reference, bisect_threshold(ratio, spec.rate));
      }
      // Logistic rule: column weights from location features, intercept tuned.
      Matrix feat = locations;
      for (Index l = 0; l < feat.cols(); ++l) {
        const double mu = feat.col(l).mean();
        const double sd = std::sqrt((feat.col(l).array() - mu).square().mean());
        feat.col(l) = ((feat.col(l).array() - mu) / scale_floor(sd, mu)).matrix();
      }
      std::normal_distribution<double> n01;
      Vector gamma(feat.cols());
      for (Index l = 0; l < gamma.size(); ++l) gamma(l) = n01(rng);
      const Vector weight = feat * gamma;
      Matrix z = values;
      for (Index j = 0; j < m; ++j) {
        const double mu = values.col(j).mean();
        const double sd = std::sqrt((values.col(j).array() - mu).square().mean());
        z.col(j) = (((values.col(j).array() - mu) / scale_floor(sd, mu)) * weight(j)).matrix();
      }
      auto mean_prob = [&](double b) { return z.unaryExpr([&](double t) { return logistic(t + b); }).mean(); };
      double lo = -50.0, hi = 50.0;
      if (!(mean_prob(lo) <= spec.rate && mean_prob(hi) >= spec.rate))
        throw InputError("logistic rate " + std::to_string(spec.rate) + " outside achievable range [" +
                         std::to_string(mean_prob(lo)) + ", " + std::to_string(mean_prob(hi)) + "]");
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_prob(mid) < spec.rate ? lo : hi) = mid;
      }
      const double b = 0.5 * (lo + hi);
      return mask_bernoulli(values, z.unaryExpr([&](double t) { return logistic(t + b); }), rng);
    }
  }
  throw InputError("unknown mechanism");
}

double realized_missing_fraction(const Matrix& m) { return missing_fraction(m); }

}  // namespace pcgpwm
