#include "pcgpwm/benchmarks.hpp"

#include "pcgpwm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pcgpwm {

Surrogate baseline_complete_rows(const SimulationDataset& ds, const SurrogateConfig& config) {
  const IndexSet rows = ds.complete_rows();
  if (rows.size() < 2)
    throw InputError("only " + std::to_string(rows.size()) + " complete rows; need at least 2");
  return fit_pcgp(ds.select_rows(rows), config);
}

namespace {

Matrix unit_scaled(const Matrix& a) {
  Matrix out = a;
  for (Index l = 0; l < a.cols(); ++l) {
    const double lo = a.col(l).minCoeff();
    const double span = a.col(l).maxCoeff() - lo;
    out.col(l) = span > 0.0 ? Vector((a.col(l).array() - lo) / span) : Vector::Zero(a.rows());
  }
  return out;
}

Matrix squared_distances(const Matrix& a) {
  Matrix d(a.rows(), a.rows());
  for (Index j = 0; j < a.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i) d(i, j) = (a.row(i) - a.row(j)).squaredNorm();
  return d;
}

}  // namespace

Matrix knn_impute(const SimulationDataset& ds, int k) {
  if (k < 1) throw InputError("k must be at least 1");
  const Matrix& f = ds.responses();
  const Matrix dt = squared_distances(unit_scaled(ds.theta()));
  const Matrix dx = squared_distances(unit_scaled(ds.locations()));
  std::vector<std::pair<Index, Index>> available;
  for (Index j = 0; j < f.cols(); ++j)
    for (Index i = 0; i < f.rows(); ++i)
      if (!is_missing(f(i, j))) available.emplace_back(i, j);
  if (available.empty()) throw InputError("kNN imputation needs at least one available entry");

  std::vector<std::pair<Index, Index>> holes;
  for (Index j = 0; j < f.cols(); ++j)
    for (Index i = 0; i < f.rows(); ++i)
      if (is_missing(f(i, j))) holes.emplace_back(i, j);

  Matrix out = f;
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), available.size());
  parallel_for(static_cast<Index>(holes.size()), [&](Index h) {
    const auto [i, j] = holes[static_cast<std::size_t>(h)];
    std::vector<std::pair<double, std::size_t>> dist(available.size());
    for (std::size_t a = 0; a < available.size(); ++a)
      dist[a] = {dt(i, available[a].first) + dx(j, available[a].second), a};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    double sum = 0.0;
    for (std::size_t a = 0; a < kk; ++a) {
      const auto [ii, jj] = available[dist[a].second];
      sum += f(ii, jj);
    }
    out(i, j) = sum / static_cast<double>(kk);
  });
  return out;
}

Surrogate baseline_knn_impute(const SimulationDataset& ds, int k, const SurrogateConfig& config) {
  return fit_pcgp(ds.with_responses(knn_impute(ds, k)), config);
}

ColumnGP baseline_colgp(const SimulationDataset& ds, int restarts, std::uint64_t seed) {
  const Index m = ds.n_locations();
  ColumnGP out;
  out.columns.assign(static_cast<std::size_t>(m), std::nullopt);
  out.stats.col_center = Vector::Zero(m);
  out.stats.col_scale = Vector::Ones(m);
  FitOptions opts;
  opts.restarts = restarts;
  opts.profile_scale = true;
  parallel_for(m, [&](Index j) {
    IndexSet rows;
    for (Index i = 0; i < ds.n_runs(); ++i)
      if (!ds.is_missing(i, j)) rows.push_back(i);
    if (rows.empty()) return;
    const Vector y = ds.responses()(rows, j);
    const double mu = y.mean();
    out.stats.col_center(j) = mu;
    if (rows.size() < 2) return;
    const double sd = scale_floor(std::sqrt((y.array() - mu).square().mean()), mu);
    out.stats.col_scale(j) = sd;
    const Vector g = (y.array() - mu) / sd;
    out.columns[static_cast<std::size_t>(j)] =
        fit_component(g, Vector::Zero(g.size()), 1.0, gather_rows(ds.theta(), rows), 0.3, 10.0,
                      derive_seed(seed, stream::kHyperStart, static_cast<std::uint64_t>(j)), opts);
  });
  return out;
}

std::pair<Matrix, Matrix> ColumnGP::predict_diag(const Matrix& theta_star) const {
  const auto m = static_cast<Index>(columns.size());
  Matrix mean(theta_star.rows(), m), var(theta_star.rows(), m);
  for (Index j = 0; j < m; ++j) {
    const double c = stats.col_center(j);
    const double s = stats.col_scale(j);
    const auto& col = columns[static_cast<std::size_t>(j)];
    if (!col) {
      // Prior only: mean at the center, unit variance on the standardized scale.
      mean.col(j).setConstant(c);
      var.col(j).setConstant(s * s);
      continue;
    }
    const auto [mu, v] = predict_component_rows(*col, theta_star);
    mean.col(j) = (mu.array() * s + c).matrix();
    var.col(j) = v * (s * s);
  }
  return {mean, var};
}

}  // namespace pcgpwm
