#include "pcgpwm/data_model.hpp"

#include "pcgpwm/csv.hpp"
#include "pcgpwm/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace pcgpwm {

SimulationDataset::SimulationDataset(Matrix theta, Matrix locations, Matrix responses)
    : theta_(std::move(theta)), locations_(std::move(locations)), responses_(std::move(responses)) {
  const Index n = responses_.rows();
  const Index m = responses_.cols();
  if (n < 2) throw InputError("dataset needs at least 2 runs, got " + std::to_string(n));
  if (m < 1) throw InputError("dataset needs at least 1 location");
  if (theta_.rows() != n)
    throw InputError("theta has " + std::to_string(theta_.rows()) + " rows but responses have " +
                     std::to_string(n));
  if (locations_.rows() != m)
    throw InputError("locations has " + std::to_string(locations_.rows()) +
                     " rows but responses have " + std::to_string(m) + " columns");
  if (theta_.hasNaN()) throw InputError("theta contains missing values");
  if (locations_.hasNaN()) throw InputError("locations contain missing values");

  // Distinct design rows: sort lexicographically and compare neighbours.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index l = 0; l < theta_.cols(); ++l)
      if (theta_(a, l) != theta_(b, l)) return theta_(a, l) < theta_(b, l);
    return false;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (theta_.row(order[k]) == theta_.row(order[k - 1]))
      throw InputError("theta rows " + std::to_string(std::min(order[k], order[k - 1])) + " and " +
                       std::to_string(std::max(order[k], order[k - 1])) + " coincide");
  }

  n_available_ = 0;
  for (Index j = 0; j < m; ++j) {
    Index count = 0;
    for (Index i = 0; i < n; ++i) count += is_missing(i, j) ? 0 : 1;
    if (count == 0) all_missing_columns_.push_back(j);
    n_available_ += count;
  }
}

IndexSet SimulationDataset::observed_indices(Index i) const {
  if (i < 0 || i >= n_runs())
    throw InputError("row index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(n_runs()) + ")");
  IndexSet out;
  out.reserve(static_cast<std::size_t>(n_locations()));
  for (Index j = 0; j < n_locations(); ++j)
    if (!is_missing(i, j)) out.push_back(j);
  return out;
}

IndexSet SimulationDataset::complete_rows() const {
  IndexSet out;
  for (Index i = 0; i < n_runs(); ++i)
    if (!responses_.row(i).hasNaN()) out.push_back(i);
  return out;
}

SimulationDataset SimulationDataset::select_rows(const IndexSet& rows) const {
  return SimulationDataset(gather_rows(theta_, rows), locations_, gather_rows(responses_, rows));
}

SimulationDataset SimulationDataset::select_columns(const IndexSet& cols) const {
  return SimulationDataset(theta_, gather_rows(locations_, cols), responses_(Eigen::all, cols));
}

SimulationDataset SimulationDataset::with_responses(Matrix responses) const {
  return SimulationDataset(theta_, locations_, std::move(responses));
}

SimulationDataset load_dataset(const std::filesystem::path& theta_csv,
                               const std::filesystem::path& locations_csv,
                               const std::filesystem::path& responses_csv) {
  for (const auto& p : {theta_csv, locations_csv, responses_csv})
    if (!std::filesystem::exists(p)) throw InputError("file not found: " + p.string());
  Matrix theta = read_csv_matrix(theta_csv, {.allow_missing = false});
  Matrix locations = read_csv_matrix(locations_csv, {.allow_missing = false});
  Matrix responses = read_csv_matrix(responses_csv, {.allow_missing = true});
  return SimulationDataset(std::move(theta), std::move(locations), std::move(responses));
}

std::pair<SimulationDataset, StandardizationStats> standardize(const SimulationDataset& ds) {
  const Matrix& f = ds.responses();
  StandardizationStats stats{Vector(f.cols()), Vector(f.cols())};
  for (Index j = 0; j < f.cols(); ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < f.rows(); ++i) {
      if (is_missing(f(i, j))) continue;
      sum += f(i, j);
      ++count;
    }
    if (count < 2)
      throw InputError("column " + std::to_string(j) + " has " + std::to_string(count) +
                       " available entries; standardization needs at least 2");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (Index i = 0; i < f.rows(); ++i)
      if (!is_missing(f(i, j))) ss += (f(i, j) - mean) * (f(i, j) - mean);
    stats.col_center(j) = mean;
    stats.col_scale(j) = scale_floor(std::sqrt(ss / static_cast<double>(count)), mean);
  }
  return {ds.with_responses(apply_standardization(f, stats)), std::move(stats)};
}

Matrix apply_standardization(const Matrix& responses, const StandardizationStats& stats) {
  // NaN propagates through the arithmetic, so the mask is preserved.
  return (responses.rowwise() - stats.col_center.transpose()).array().rowwise() /
         stats.col_scale.transpose().array();
}

Matrix destandardize(const Matrix& standardized, const StandardizationStats& stats) {
  return (standardized.array().rowwise() * stats.col_scale.transpose().array()).matrix().rowwise() +
         stats.col_center.transpose();
}

Matrix latin_hypercube(Index n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw InputError("latin_hypercube needs n >= 1 and d >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out(n, d);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index l = 0; l < d; ++l) {
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Index i = 0; i < n; ++i) {
      // Keep the jitter away from the bin edges so floor(n * x) is exact.
      const double u = 1e-9 + (1.0 - 2e-9) * unif(rng);
      out(i, l) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + u) / static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace pcgpwm
