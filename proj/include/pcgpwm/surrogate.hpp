#pragma once

#include "pcgpwm/data_model.hpp"
#include "pcgpwm/gp_core.hpp"
#include "pcgpwm/imputation.hpp"
#include "pcgpwm/pca_em.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace pcgpwm {

/// Hyperparameters of one component, used to bypass optimization.
struct ComponentHyper {
  KernelHyper hyper;
  double beta = 1.0;
};

struct SurrogateConfig {
  double variance_fraction = kDefaultVarianceFraction;
  double alpha = 0.3;
  double eta = 10.0;
  int restarts = 4;
  int max_opt_iter = 200;
  std::uint64_t seed = 0;
  EmOptions em;
  bool fix_beta = false;
  Kernel kernel = Kernel::matern52;
  /// When set (one entry per component), hyperparameters are not fitted.
  std::optional<std::vector<ComponentHyper>> fixed_hyper;
  /// When set, EM is skipped and this basis (over the kept columns) is used.
  std::optional<PrincipalSubspace> fixed_subspace;
};

struct Prediction {
  /// Length m; dropped columns are NaN.
  Vector mean;
  /// m x m; rows and columns of dropped columns are NaN.
  Matrix cov;
};

/// Fitted emulator. Immutable after fitting; safe to share across threads.
struct Surrogate {
  PrincipalSubspace subspace;
  /// Stats over the kept columns.
  StandardizationStats stats;
  std::vector<ComponentGP> components;
  double alpha_infl = 0.3;
  double eta_cap = 10.0;
  /// Columns of the original response matrix that were modeled.
  IndexSet kept_columns;
  Index m_total = 0;
  int em_iterations = 0;
  bool em_converged = true;

  Index kappa() const { return static_cast<Index>(components.size()); }
  Index n_params() const { return components.empty() ? 0 : components.front().theta.cols(); }
  IndexSet dropped_columns() const;
  std::vector<ComponentHyper> hyperparameters() const;

  /// Latent means and variances (q x kappa) at the rows of theta_star.
  std::pair<Matrix, Matrix> predict_latent(const Matrix& theta_star) const;
  /// Mean and full covariance on the original response scale.
  Prediction predict(const Vector& theta_star) const;
  /// Means and marginal variances (q x m) on the original response scale.
  std::pair<Matrix, Matrix> predict_diag(const Matrix& theta_star) const;
};

/// standardize -> EM (or SVD when complete) -> imputation -> one GP per
/// component. All-missing columns are dropped first.
Surrogate fit_surrogate(const SimulationDataset& ds, const SurrogateConfig& config = {});

struct CompletedResponses {
  /// n x m on the original scale; all-missing columns stay NaN.
  Matrix responses;
  /// n x kappa scaled imputation variances.
  Matrix w;
  IndexSet kept_columns;
  int em_iterations = 0;
  bool em_converged = true;
};

/// The EM fill of the missing responses and the imputation weights, without
/// fitting any GP.
CompletedResponses complete_responses(const SimulationDataset& ds, const SurrogateConfig& config = {});

/// Plain principal-component GP on complete data: SVD basis, projections
/// F Phi and uninflated correlation. Throws InputError on missing data.
Surrogate fit_pcgp(const SimulationDataset& ds, const SurrogateConfig& config = {});

/// Single JSON document; factorizations are rebuilt on load.
void save_surrogate(const Surrogate& sur, const std::filesystem::path& path);
Surrogate load_surrogate(const std::filesystem::path& path);

}  // namespace pcgpwm
