#pragma once

#include "pcgpwm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>

namespace pcgpwm {

/// Per-column centering and scaling computed over available entries.
struct StandardizationStats {
  Vector col_center;
  Vector col_scale;
};

/// Simulation runs at a design of parameters, observed on a fixed location
/// set, with some responses possibly missing (NaN). Immutable once built.
class SimulationDataset {
public:
  /// theta: n x d, locations: m x p, responses: n x m.
  /// Throws InputError when n < 2, m < 1, shapes disagree, theta/locations
  /// contain NaN, or two theta rows coincide.
  SimulationDataset(Matrix theta, Matrix locations, Matrix responses);

  const Matrix& theta() const { return theta_; }
  const Matrix& locations() const { return locations_; }
  const Matrix& responses() const { return responses_; }

  Index n_runs() const { return responses_.rows(); }
  Index n_locations() const { return responses_.cols(); }
  Index n_params() const { return theta_.cols(); }

  /// N, the number of non-missing responses.
  Index n_available() const { return n_available_; }
  bool has_missing() const { return n_available_ < responses_.size(); }
  bool is_missing(Index i, Index j) const { return pcgpwm::is_missing(responses_(i, j)); }

  /// J(i): sorted observed column indices of row i.
  IndexSet observed_indices(Index i) const;
  /// Rows with no missing entry.
  IndexSet complete_rows() const;
  /// Columns without a single available entry. These are dropped from
  /// modeling and reported back as missing in predictions.
  const IndexSet& all_missing_columns() const { return all_missing_columns_; }

  SimulationDataset select_rows(const IndexSet& rows) const;
  SimulationDataset select_columns(const IndexSet& cols) const;
  SimulationDataset with_responses(Matrix responses) const;

private:
  Matrix theta_;
  Matrix locations_;
  Matrix responses_;
  Index n_available_ = 0;
  IndexSet all_missing_columns_;
};

/// Loads theta.csv (n x d), locations.csv (m x p), responses.csv (n x m).
SimulationDataset load_dataset(const std::filesystem::path& theta_csv,
                               const std::filesystem::path& locations_csv,
                               const std::filesystem::path& responses_csv);

/// Floor applied to a column standard deviation.
inline double scale_floor(double std_dev, double mean) {
  return std::max(std_dev, 1e-10 * std::abs(mean) + 1e-12);
}

/// Centers and scales each column to zero mean, unit (population) variance
/// over its available entries. Requires >= 2 available entries per column.
std::pair<SimulationDataset, StandardizationStats> standardize(const SimulationDataset& ds);

/// Applies saved stats to a response matrix (NaN preserved).
Matrix apply_standardization(const Matrix& responses, const StandardizationStats& stats);
Matrix destandardize(const Matrix& standardized, const StandardizationStats& stats);

/// Latin hypercube sample on [0,1]^d: column l, scaled by n and floored, is
/// a permutation of 0..n-1. Deterministic in `seed`.
Matrix latin_hypercube(Index n, Index d, std::uint64_t seed);

}  // namespace pcgpwm
