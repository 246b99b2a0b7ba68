#include "pcgpwm/surrogate.hpp"

#include "pcgpwm/parallel.hpp"

#include <string>

namespace pcgpwm {

IndexSet Surrogate::dropped_columns() const {
  IndexSet out;
  std::size_t a = 0;
  for (Index j = 0; j < m_total; ++j) {
    if (a < kept_columns.size() && kept_columns[a] == j)
      ++a;
    else
      out.push_back(j);
  }
  return out;
}

std::vector<ComponentHyper> Surrogate::hyperparameters() const {
  std::vector<ComponentHyper> out;
  for (const auto& c : components) out.push_back({c.hyper, c.beta});
  return out;
}

std::pair<Matrix, Matrix> Surrogate::predict_latent(const Matrix& theta_star) const {
  if (theta_star.cols() != n_params())
    throw InputError("theta has " + std::to_string(theta_star.cols()) + " columns, model expects " +
                     std::to_string(n_params()));
  Matrix mu(theta_star.rows(), kappa());
  Matrix var(theta_star.rows(), kappa());
  parallel_for(kappa(), [&](Index k) {
    auto [m, v] = predict_component_rows(components[static_cast<std::size_t>(k)], theta_star);
    mu.col(k) = m;
    var.col(k) = v;
  });
  return {mu, var};
}

Prediction Surrogate::predict(const Vector& theta_star) const {
  const auto [mu, var] = predict_latent(Matrix(theta_star.transpose()));
  const Matrix& phi = subspace.phi;
  const Vector mean_std = phi * mu.row(0).transpose();
  const Matrix dphi = stats.col_scale.asDiagonal() * phi;
  Matrix cov = dphi * var.row(0).asDiagonal() * dphi.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();

  Prediction out{Vector::Constant(m_total, kMissing), Matrix::Constant(m_total, m_total, kMissing)};
  const Vector mean = stats.col_center + stats.col_scale.cwiseProduct(mean_std);
  for (std::size_t a = 0; a < kept_columns.size(); ++a) {
    const Index ja = kept_columns[a];
    out.mean(ja) = mean(static_cast<Index>(a));
    for (std::size_t b = 0; b < kept_columns.size(); ++b)
      out.cov(ja, kept_columns[b]) = cov(static_cast<Index>(a), static_cast<Index>(b));
  }
  return out;
}

std::pair<Matrix, Matrix> Surrogate::predict_diag(const Matrix& theta_star) const {
  const auto [mu, var] = predict_latent(theta_star);
  const Matrix& phi = subspace.phi;
  const Matrix mean_std = mu * phi.transpose();
  const Matrix var_std = var * phi.array().square().matrix().transpose();
  Matrix mean = Matrix::Constant(theta_star.rows(), m_total, kMissing);
  Matrix variance = Matrix::Constant(theta_star.rows(), m_total, kMissing);
  for (std::size_t a = 0; a < kept_columns.size(); ++a) {
    const Index col = static_cast<Index>(a);
    const double sc = stats.col_scale(col);
    mean.col(kept_columns[a]) = (mean_std.col(col) * sc).array() + stats.col_center(col);
    variance.col(kept_columns[a]) = var_std.col(col) * (sc * sc);
  }
  return {mean, variance};
}

namespace {

IndexSet kept_columns_of(const SimulationDataset& ds) {
  const IndexSet& dropped = ds.all_missing_columns();
  IndexSet kept;
  std::size_t a = 0;
  for (Index j = 0; j < ds.n_locations(); ++j) {
    if (a < dropped.size() && dropped[a] == j)
      ++a;
    else
      kept.push_back(j);
  }
  if (kept.empty()) throw InputError("every response column is missing");
  return kept;
}

void fit_components(Surrogate& sur, const Matrix& theta, const Matrix& g, const Matrix& w,
                    const SurrogateConfig& config) {
  const Index kappa = sur.subspace.kappa();
  if (config.fixed_hyper && static_cast<Index>(config.fixed_hyper->size()) != kappa)
    throw InputError("fixed hyperparameters given for " + std::to_string(config.fixed_hyper->size()) +
                     " components, model has " + std::to_string(kappa));
  sur.components.assign(static_cast<std::size_t>(kappa), ComponentGP{});
  FitOptions opts;
  opts.restarts = config.restarts;
  opts.max_iter = config.max_opt_iter;
  opts.fix_beta = config.fix_beta;
  opts.kernel = config.kernel;
  parallel_for(kappa, [&](Index k) {
    const Vector gk = g.col(k);
    const Vector wk = w.col(k);
    const double lam = sur.subspace.lambda(k);
    auto& slot = sur.components[static_cast<std::size_t>(k)];
    if (config.fixed_hyper) {
      const ComponentHyper& h = (*config.fixed_hyper)[static_cast<std::size_t>(k)];
      slot = make_component(theta, gk, variance_inflation(wk, config.alpha, config.eta), lam, h.hyper, h.beta);
    } else {
      slot = fit_component(gk, wk, lam, theta, config.alpha, config.eta,
                           derive_seed(config.seed, stream::kHyperStart, static_cast<std::uint64_t>(k)), opts);
    }
  });
}

Surrogate prepare(const SimulationDataset& ds, const SurrogateConfig& config, SimulationDataset& kept_std) {
  Surrogate sur;
  sur.alpha_infl = config.alpha;
  sur.eta_cap = config.eta;
  sur.m_total = ds.n_locations();
  sur.kept_columns = kept_columns_of(ds);
  const SimulationDataset kept = ds.select_columns(sur.kept_columns);
  auto [std_ds, stats] = standardize(kept);
  sur.stats = std::move(stats);
  kept_std = std::move(std_ds);
  return sur;
}

}  // namespace

Surrogate fit_surrogate(const SimulationDataset& ds, const SurrogateConfig& config) {
  SimulationDataset std_ds = ds;
  Surrogate sur = prepare(ds, config, std_ds);
  if (config.fixed_subspace) {
    if (config.fixed_subspace->phi.rows() != std_ds.n_locations())
      throw InputError("fixed subspace has " + std::to_string(config.fixed_subspace->phi.rows()) +
                       " rows, data has " + std::to_string(std_ds.n_locations()) + " usable columns");
    sur.subspace = *config.fixed_subspace;
    sur.em_converged = true;
  } else {
    EmOptions em = config.em;
    em.variance_fraction = config.variance_fraction;
    EmResult res = em_subspace(std_ds.responses(), em);
    sur.subspace = std::move(res.subspace);
    sur.em_iterations = res.iterations;
    sur.em_converged = res.converged;
  }
  const ImputedProjection imp = impute_all(std_ds.responses(), sur.subspace);
  fit_components(sur, ds.theta(), imp.g_tilde, imp.w, config);
  return sur;
}

CompletedResponses complete_responses(const SimulationDataset& ds, const SurrogateConfig& config) {
  SimulationDataset std_ds = ds;
  const Surrogate sur = prepare(ds, config, std_ds);
  EmOptions em = config.em;
  em.variance_fraction = config.variance_fraction;
  const EmResult res = em_subspace(std_ds.responses(), em);
  CompletedResponses out;
  out.responses = Matrix::Constant(ds.n_runs(), ds.n_locations(), kMissing);
  out.responses(Eigen::all, sur.kept_columns) = destandardize(res.completed, sur.stats);
  for (Index j = 0; j < ds.n_locations(); ++j)
    for (Index i = 0; i < ds.n_runs(); ++i)
      if (!ds.is_missing(i, j)) out.responses(i, j) = ds.responses()(i, j);
  out.w = impute_all(std_ds.responses(), res.subspace).w;
  out.kept_columns = sur.kept_columns;
  out.em_iterations = res.iterations;
  out.em_converged = res.converged;
  return out;
}

Surrogate fit_pcgp(const SimulationDataset& ds, const SurrogateConfig& config) {
  if (ds.has_missing()) throw InputError("plain PCGP needs complete data; use fit_surrogate");
  SimulationDataset std_ds = ds;
  Surrogate sur = prepare(ds, config, std_ds);
  sur.subspace = svd_subspace(std_ds.responses(), config.variance_fraction);
  sur.em_iterations = 1;
  const Matrix g = project_complete(std_ds.responses(), sur.subspace);
  fit_components(sur, ds.theta(), g, Matrix::Zero(g.rows(), g.cols()), config);
  return sur;
}

}  // namespace pcgpwm
