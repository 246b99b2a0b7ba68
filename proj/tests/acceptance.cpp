// One line per acceptance criterion. `--only k` runs a single criterion.
// Exit status: 0 all selected passed, 1 a failure, 77 every selected
// criterion was blocked on missing data.

#include "pcgpwm/benchmarks.hpp"
#include "pcgpwm/calibration.hpp"
#include "pcgpwm/csv.hpp"
#include "pcgpwm/gp_core.hpp"
#include "pcgpwm/imputation.hpp"
#include "pcgpwm/parallel.hpp"
#include "pcgpwm/surrogate.hpp"

#include <CLI11.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace pcgpwm;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, blocked };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict verdict(bool ok, const std::string& detail) { return {ok ? Outcome::pass : Outcome::fail, detail}; }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix gaussian(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> n01;
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = n01(rng);
  return m;
}

Matrix uniform(Index r, Index c, Rng& rng) {
  std::uniform_real_distribution<double> u;
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

// Exact rank-r responses: sum_k a_k(theta) b_k(x) with smooth a_k.
SimulationDataset low_rank_dataset(Index n, Index m, Index d, Index r, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix theta = latin_hypercube(n, d, seed + 100);
  const Matrix loc = uniform(m, 1, rng);
  const Matrix freq = 0.5 + 2.0 * uniform(r, d, rng).array();
  const Matrix phase = 6.0 * uniform(r, 1, rng);
  const Matrix b = gaussian(r, m, rng);
  Matrix f = Matrix::Zero(n, m);
  for (Index k = 0; k < r; ++k) {
    const double amp = std::pow(0.5, static_cast<double>(k));
    for (Index i = 0; i < n; ++i) {
      const double a = amp * std::sin(theta.row(i).dot(freq.row(k)) + phase(k, 0));
      f.row(i) += a * b.row(k);
    }
  }
  f.array() += 3.0;
  return SimulationDataset(theta, loc, f);
}

// Theorem 1: complete training rows are reproduced and carry ~no variance.
Verdict criterion1() {
  double worst_mean = 0.0, worst_var_ratio = 0.0, worst_identity = 0.0, worst_nugget = 0.0;
  Index rows_checked = 0, max_kappa = 0;
  for (int s = 0; s < 10; ++s) {
    const Index n = 40 + 6 * s, m = 8 + s, r = 1 + s % 4, d = 2 + s % 2;
    SimulationDataset ds = low_rank_dataset(n, m, d, r, 1000 + static_cast<std::uint64_t>(s));
    Matrix f = ds.responses();
    Rng rng(2000 + static_cast<std::uint64_t>(s));
    std::uniform_int_distribution<Index> col(0, m - 1);
    for (Index i = 0; i < n; i += 3) {
      const Index holes = 1 + (i % (m / 2));
      for (Index h = 0; h < holes; ++h) f(i, col(rng)) = kMissing;
    }
    ds = ds.with_responses(f);
    SurrogateConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    cfg.restarts = 2;
    const Surrogate sur = fit_surrogate(ds, cfg);
    max_kappa = std::max(max_kappa, sur.kappa());
    const Matrix& phi = sur.subspace.phi;
    for (Index i : ds.complete_rows()) {
      const Vector t = ds.theta().row(i).transpose();
      const Vector fi_std =
          (ds.responses().row(i).transpose() - sur.stats.col_center).cwiseQuotient(sur.stats.col_scale);
      const Vector recon = phi * (phi.transpose() * fi_std);
      const auto [mu, var] = sur.predict_latent(t.transpose());
      const Vector mu_std = phi * mu.row(0).transpose();
      worst_mean = std::max(worst_mean, (mu_std - recon).cwiseAbs().maxCoeff());
      for (Index k = 0; k < sur.kappa(); ++k) {
        const auto& c = sur.components[static_cast<std::size_t>(k)];
        worst_var_ratio = std::max(worst_var_ratio, var(0, k) / (2.0 * c.lambda * c.hyper.nugget()));
        // With a nugget the residual at a complete row is exactly nugget * (R~^{-1} g)_i.
        const double resid = c.g(i) - mu(0, k);
        worst_identity = std::max(worst_identity, std::abs(resid - c.hyper.nugget() * c.alpha_vec(i)));
        worst_nugget = std::max(worst_nugget, c.hyper.nugget());
      }
      ++rows_checked;
    }
  }
  const bool ok = worst_mean <= 1e-5 && worst_var_ratio <= 1.0 && max_kappa <= 5;
  return verdict(ok, std::to_string(rows_checked) + " complete rows over 10 datasets, max kappa " +
                         std::to_string(max_kappa) + ", max |mean - reconstruction| " + fmt("%.2e", worst_mean) +
                          " (tol 1e-5), max var / (2 lambda nugget) " + fmt("%.3f", worst_var_ratio) +
                         " (tol 1); largest fitted nugget " + fmt("%.1e", worst_nugget) +
                         ", max |residual - nugget R~^-1 g| " + fmt("%.1e", worst_identity));
}

// Theorem 2: fully missing rows are ignored when eta is huge. The theorem
// holds for a shared basis, so the second fit reuses the first fit's basis;
// the gap with a refitted basis is reported alongside.
Verdict criterion2() {
  double worst_mean = 0.0, worst_var = 0.0, refit_mean = 0.0, refit_var = 0.0;
  for (int s = 0; s < 3; ++s) {
    const SimulationDataset base = low_rank_dataset(40, 10, 2, 3, 3000 + static_cast<std::uint64_t>(s));
    Matrix f = base.responses();
    Rng rng(3100 + static_cast<std::uint64_t>(s));
    std::bernoulli_distribution drop(0.05);
    for (Index i = 0; i < f.rows(); ++i)
      for (Index j = 0; j < f.cols(); ++j)
        if (drop(rng)) f(i, j) = kMissing;
    const SimulationDataset small = base.with_responses(f);

    Matrix theta_big(43, 2), f_big(43, 10);
    theta_big << small.theta(), uniform(3, 2, rng);
    f_big << f, Matrix::Constant(3, 10, kMissing);
    const SimulationDataset big(theta_big, small.locations(), f_big);

    SurrogateConfig cfg;
    cfg.eta = 1e6;
    cfg.seed = 7;
    cfg.restarts = 2;
    const Surrogate a = fit_surrogate(small, cfg);
    cfg.fixed_hyper = a.hyperparameters();
    const Surrogate refit = fit_surrogate(big, cfg);
    cfg.fixed_subspace = a.subspace;
    const Surrogate b = fit_surrogate(big, cfg);

    const Matrix test = uniform(100, 2, rng);
    const auto [ma, va] = a.predict_diag(test);
    // Standardized scale: divide by column scale (mean) and scale^2 (variance).
    const Vector s1 = a.stats.col_scale.cwiseInverse();
    const Vector s2 = s1.cwiseProduct(s1);
    auto gap = [&](const Surrogate& other, double& dm, double& dv) {
      const auto [mo, vo] = other.predict_diag(test);
      dm = std::max(dm, ((ma - mo) * s1.asDiagonal()).cwiseAbs().maxCoeff());
      dv = std::max(dv, ((va - vo) * s2.asDiagonal()).cwiseAbs().maxCoeff());
    };
    gap(b, worst_mean, worst_var);
    gap(refit, refit_mean, refit_var);
  }
  return verdict(worst_mean <= 1e-6 && worst_var <= 1e-6,
                 "3 datasets x 100 test points, eta 1e6, frozen hyperparameters and basis: max |d mean| " +
                     fmt("%.2e", worst_mean) + ", max |d var| " + fmt("%.2e", worst_var) +
                     " (standardized scale, tol 1e-6); with the basis refitted by EM: " + fmt("%.2e", refit_mean) +
                     ", " + fmt("%.2e", refit_var));
}

// Woodbury solve of B_JJ against the dense inverse.
Verdict criterion3() {
  Rng rng(4242);
  std::uniform_real_distribution<double> u01;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index m = 5 + static_cast<Index>(u01(rng) * 40);
    const Index kappa = 1 + static_cast<Index>(u01(rng) * std::min<Index>(m - 1, 8));
    const Matrix q = gaussian(m, kappa, rng).householderQr().householderQ() * Matrix::Identity(m, kappa);
    PrincipalSubspace sub;
    sub.phi = q;
    sub.lambda.resize(kappa);
    for (Index k = 0; k < kappa; ++k) sub.lambda(k) = std::pow(10.0, 3.0 * u01(rng));
    std::sort(sub.lambda.data(), sub.lambda.data() + kappa, std::greater<>());
    sub.epsilon = sub.lambda(kappa - 1) * (1e-6 + 0.5 * u01(rng));
    IndexSet j;
    for (Index i = 0; i < m; ++i)
      if (u01(rng) < 0.6) j.push_back(i);
    if (j.empty()) j.push_back(0);
    const Vector rhs = gaussian(static_cast<Index>(j.size()), 1, rng);
    const Matrix b = q * (sub.lambda.array() - sub.epsilon).matrix().asDiagonal() * q.transpose() +
                     sub.epsilon * Matrix::Identity(m, m);
    const Matrix bjj = b(j, j);
    const Vector dense = bjj.inverse() * rhs;
    const Vector fast = apply_B_submatrix_inverse(sub, j, rhs);
    worst = std::max(worst, (fast - dense).norm() / dense.norm());
  }
  return verdict(worst <= 1e-8, "200 instances, max relative error " + fmt("%.2e", worst) + " (tol 1e-8)");
}

// w in [0, 1] on every benchmark function and mechanism.
Verdict criterion4() {
  const ExperimentConfig cfg = parse_experiment_config(R"({"scenarios":"full"})");
  Index cells = 0, entries = 0, violations = 0;
  for (TestFunction tf : kAllTestFunctions)
    for (const auto& [mech, rate] : cfg.scenarios)
      for (Index n : {50, 250}) {
        const CellData d = make_cell_data(cfg, tf, n, mech, rate, 0);
        const CompletedResponses done = complete_responses(d.train, cfg.surrogate);
        for (Index i = 0; i < done.w.size(); ++i) {
          const double w = done.w.data()[i];
          if (!(w >= 0.0 && w <= 1.0)) ++violations;
        }
        entries += done.w.size();
        ++cells;
      }
  return verdict(violations == 0, std::to_string(cells) + " datasets (4 functions x 9 scenarios x n in {50,250}), " +
                                      std::to_string(entries) + " weights, " + std::to_string(violations) +
                                      " outside [0,1]");
}

// Complete data: missing-aware fit equals plain PCGP.
Verdict criterion5() {
  const ExperimentConfig cfg = parse_experiment_config(R"({"scenarios":[{"mechanism":"MCAR","rate":0.0}]})");
  double worst = 0.0;
  int datasets = 0;
  for (TestFunction tf : kAllTestFunctions) {
    const CellData d = make_cell_data(cfg, tf, 50, Mechanism::mcar, 0.0, 0);
    SurrogateConfig sc;
    sc.seed = 9;
    sc.restarts = 2;
    const Surrogate plain = fit_pcgp(d.train, sc);
    sc.fixed_hyper = plain.hyperparameters();
    const Surrogate aware = fit_surrogate(d.train, sc);
    for (Index t = 0; t < 20; ++t) {
      const Vector th = d.holdout_theta.row(t).transpose();
      const Prediction a = plain.predict(th);
      const Prediction b = aware.predict(th);
      const double scale = std::max(1.0, a.cov.cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.mean - b.mean).cwiseAbs().maxCoeff() / std::max(1.0, a.mean.cwiseAbs().maxCoeff()));
      worst = std::max(worst, (a.cov - b.cov).cwiseAbs().maxCoeff() / scale);
    }
    ++datasets;
  }
  return verdict(worst <= 1e-12, std::to_string(datasets) + " functions x 20 points, max relative discrepancy " +
                                     fmt("%.2e", worst) + " (tol 1e-12)");
}

// Analytic likelihood gradient against central differences.
Verdict criterion6() {
  Rng rng(6006);
  std::uniform_real_distribution<double> u01;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 10 + static_cast<Index>(u01(rng) * 30), d = 1 + static_cast<Index>(u01(rng) * 4);
    const Matrix theta = uniform(n, d, rng);
    const Vector g = gaussian(n, 1, rng);
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = u01(rng) < 0.5 ? 0.0 : u01(rng);
    Vector x(d + 2);
    for (Index l = 0; l < d; ++l) x(l) = std::log(0.1 + u01(rng));
    x(d) = std::log(1e-6 + 1e-3 * u01(rng));
    x(d + 1) = std::log(0.1 + 3.0 * u01(rng));
    const double lambda = 0.5 + 10.0 * u01(rng);
    const Kernel kernel = trial % 2 ? Kernel::sq_exp : Kernel::matern52;
    auto eval = [&](const Vector& p) {
      KernelHyper h;
      h.kernel = kernel;
      h.log_lengthscales = p.head(d);
      h.log_nugget = p(d);
      return neg_log_lik(h, std::exp(p(d + 1)), g, w, lambda, theta, 0.3, 10.0);
    };
    const Vector grad = eval(x).gradient;
    Vector fd(d + 2);
    for (Index p = 0; p < d + 2; ++p) {
      Vector xp = x, xm = x;
      xp(p) += 1e-5;
      xm(p) -= 1e-5;
      fd(p) = (eval(xp).value - eval(xm).value) / 2e-5;
    }
    worst = std::max(worst, (grad - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  return verdict(worst < 1e-4, "20 configurations, h = 1e-5, max relative error " + fmt("%.2e", worst) +
                                   " (tol 1e-4)");
}

// Borehole MNAR 5%: PCGPwM against kNN imputation.
Verdict criterion7() {
  const ExperimentConfig cfg = parse_experiment_config(
      R"({"functions":["borehole"],"n":[50,250],"scenarios":[{"mechanism":"MNAR","rate":0.05}],)"
      R"("replications":5,"methods":["pcgpwm","pcgp_knn"],"record_timing":false})");
  const auto rows = run_experiment(cfg);
  std::vector<double> rmse_p, rmse_k, width_p, width_k, cov_p;
  int errors = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") {
      ++errors;
      continue;
    }
    if (r.method == "pcgpwm") {
      rmse_p.push_back(r.metrics.rmse);
      width_p.push_back(r.metrics.width);
      cov_p.push_back(r.metrics.coverage);
    } else {
      rmse_k.push_back(r.metrics.rmse);
      width_k.push_back(r.metrics.width);
    }
  }
  if (errors > 0 || rmse_p.size() != 10 || rmse_k.size() != 10)
    return verdict(false, std::to_string(errors) + " cells failed to run");
  const double mp = median(rmse_p), mk = median(rmse_k), wp = median(width_p), wk = median(width_k);
  const double cp = median(cov_p);
  const bool a = mp < mk, b = cp >= 0.80 && cp <= 1.00, c = wp <= wk;
  return verdict(a && b && c, std::string("(a) median RMSE ") + fmt("%.3g", mp) + " vs kNN " + fmt("%.3g", mk) +
                                  (a ? " ok" : " FAIL") + "; (b) median coverage " + fmt("%.3f", cp) + " [min " +
                                  fmt("%.3f", *std::min_element(cov_p.begin(), cov_p.end())) + "]" +
                                  (b ? " ok" : " FAIL") + "; (c) median width " + fmt("%.3g", wp) + " vs kNN " +
                                  fmt("%.3g", wk) + (c ? " ok" : " FAIL"));
}

// Beta(2,2) 90% width from 1e5 draws; the exact value solves 3x^2 - 2x^3 = 0.05.
Verdict criterion8() {
  Rng rng(8);
  std::gamma_distribution<double> g2(2.0, 1.0);
  Matrix draws(100000, 1);
  for (Index i = 0; i < draws.rows(); ++i) {
    const double a = g2(rng), b = g2(rng);
    draws(i, 0) = a / (a + b);
  }
  const double width = posterior_summary(draws, 0.9).front().width;
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (3 * mid * mid - 2 * mid * mid * mid < 0.05 ? lo : hi) = mid;
  }
  const double exact = 1.0 - 2.0 * lo;
  return verdict(std::abs(width - 0.730) <= 0.01,
                 "sampled width " + fmt("%.4f", width) + ", exact " + fmt("%.4f", exact) + ", target 0.730 +/- 0.01");
}

double synth(const Vector& t, double x) {
  return std::exp(0.8 * t(0) * x) + 1.5 * t(1) * (1 - x) * (1 - x) + 0.5 * std::sin(3.0 * t(2) + 2.0 * x);
}

// Synthetic three-parameter calibration, 20 seeded runs.
Verdict criterion9() {
  const Index n = 80, m = 12;
  const Matrix theta = latin_hypercube(n, 3, 909);
  Matrix loc(m, 1);
  for (Index j = 0; j < m; ++j) loc(j, 0) = static_cast<double>(j) / static_cast<double>(m - 1);
  Matrix f(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) f(i, j) = synth(theta.row(i).transpose(), loc(j, 0));
  // A few holes so the missing-data path is exercised.
  Rng hole_rng(910);
  std::bernoulli_distribution drop(0.05);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j)
      if (drop(hole_rng)) f(i, j) = kMissing;
  SurrogateConfig cfg;
  cfg.seed = 911;
  auto sur = std::make_shared<const Surrogate>(fit_surrogate(SimulationDataset(theta, loc, f), cfg));

  const double sd = 0.02;
  int contained = 0, narrow = 0;
  double widest = 0.0;
  for (int run = 0; run < 20; ++run) {
    Rng rng(derive_seed(912, 1, static_cast<std::uint64_t>(run)));
    std::uniform_real_distribution<double> mid(0.2, 0.8);
    std::normal_distribution<double> noise(0.0, sd);
    Vector truth(3);
    for (Index l = 0; l < 3; ++l) truth(l) = mid(rng);
    Vector y(m);
    for (Index j = 0; j < m; ++j) y(j) = synth(truth, loc(j, 0)) + noise(rng);
    const CalibrationProblem problem(y, Vector::Constant(m, sd * sd), sur);
    PtlmcOptions opts;
    opts.n_samples = 2000;
    opts.seed = derive_seed(912, 2, static_cast<std::uint64_t>(run));
    const PosteriorChain chain = ptlmc_sample(problem, opts);

    // Elliptical 90% region from the posterior draws.
    const Vector mean = chain.samples.colwise().mean();
    const Matrix centered = chain.samples.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(chain.samples.rows() - 1);
    const Eigen::LLT<Matrix> llt(cov);
    std::vector<double> dist(static_cast<std::size_t>(chain.samples.rows()));
    for (Index s = 0; s < chain.samples.rows(); ++s)
      dist[static_cast<std::size_t>(s)] = llt.matrixL().solve(centered.row(s).transpose()).squaredNorm();
    const double cutoff = empirical_quantile(dist, 0.9);
    if (llt.matrixL().solve(truth - mean).squaredNorm() <= cutoff) ++contained;

    bool all_narrow = true;
    for (const auto& s : posterior_summary(chain.samples, 0.9)) {
      widest = std::max(widest, s.width);
      all_narrow = all_narrow && s.width < 0.730;
    }
    narrow += all_narrow ? 1 : 0;
  }
  const bool ok = contained >= 16 && narrow == 20;
  return verdict(ok, "theta* inside the 90% region in " + std::to_string(contained) +
                         "/20 runs (need 16); all widths below 0.730 in " + std::to_string(narrow) +
                         "/20 runs, widest " + fmt("%.3f", widest));
}

fs::path fayans_dir() {
  if (const char* env = std::getenv("PCGPWM_FAYANS_DIR")) return env;
  return fs::path(PCGPWM_SOURCE_DIR) / "data" / "fayans";
}

// Fayans smoke test; expects theta.csv, locations.csv, responses.csv.
Verdict criterion10() {
  const fs::path dir = fayans_dir();
  for (const char* name : {"theta.csv", "locations.csv", "responses.csv"})
    if (!fs::is_regular_file(dir / name))
      return {Outcome::blocked, "Fayans data not found (looked for " + (dir / name).string() +
                                    "; set PCGPWM_FAYANS_DIR)"};
  const SimulationDataset ds = load_dataset(dir / "theta.csv", dir / "locations.csv", dir / "responses.csv");
  const double missing =
      1.0 - static_cast<double>(ds.n_available()) / static_cast<double>(ds.n_runs() * ds.n_locations());
  const Index complete = static_cast<Index>(ds.complete_rows().size());
  SurrogateConfig cfg;
  cfg.seed = 10;
  const Surrogate full = fit_surrogate(ds, cfg);
  const Surrogate rows = baseline_complete_rows(ds, cfg);
  const Matrix probe = ds.theta().topRows(std::min<Index>(5, ds.n_runs()));
  const bool predicted = full.predict_diag(probe).first.rows() == probe.rows() &&
                         rows.predict_diag(probe).first.rows() == probe.rows();
  const bool ok = ds.n_runs() == 500 && ds.n_locations() == 198 && complete == 141 && predicted;
  return verdict(ok, std::to_string(ds.n_runs()) + " x " + std::to_string(ds.n_locations()) + ", missing " +
                         fmt("%.3f", missing) + ", complete rows " + std::to_string(complete) + " (expect 141)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10};
  int failed = 0, blocked = 0, ran = 0;
  for (int k = 1; k <= 10; ++k) {
    if (only != 0 && k != only) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[static_cast<std::size_t>(k - 1)]();
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "BLOCKED";
    std::printf("criterion %2d: %-7s %s [%.1f s]\n", k, tag, v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.outcome == Outcome::fail ? 1 : 0;
    blocked += v.outcome == Outcome::blocked ? 1 : 0;
  }
  if (failed > 0) return 1;
  if (blocked == ran) return 77;
  return 0;
}
