#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gradhess/linalg.hpp"

namespace gradhess::data {

enum class XDistribution { kGaussian, kRademacher };

/// Covariance of the synthetic feature distribution: either std^2 * I or a
/// dense PSD matrix.
class CovarianceSpec {
 public:
  static CovarianceSpec identity_scaled(double std);
  static CovarianceSpec dense(linalg::SymMatrix sigma);

  bool is_dense() const { return dense_.has_value(); }
  double std() const { return std_; }
  const linalg::SymMatrix& dense_matrix() const { return *dense_; }
  /// The covariance as a d-by-d matrix.
  linalg::SymMatrix materialize(Eigen::Index d) const;

 private:
  CovarianceSpec() = default;
  double std_ = 1.0;
  std::optional<linalg::SymMatrix> dense_;
};

struct SyntheticConfig {
  int d = 1;
  CovarianceSpec covariance = CovarianceSpec::identity_scaled(1.0);
  Vector w0;
  double inherent_noise_std = 0.0;
  long n_samples = 0;
  XDistribution x_distribution = XDistribution::kGaussian;
  std::uint64_t seed = 0;
};

struct ColumnScale {
  std::string column;
  double divisor = 1.0;
};

struct FileProvenance {
  std::string path;
  std::string target_column;
  std::vector<std::string> feature_columns;
  std::vector<ColumnScale> scalings;
};

using Provenance = std::variant<SyntheticConfig, FileProvenance>;

struct RegressionDataset {
  Matrix X;
  Vector y;
  Provenance provenance;

  long n_samples() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }
};

enum class CalibrationMode { kExact, kConservative };

/// Record of how much target noise to inject for batch size n so that the
/// total target-noise variance is n (exact mode, inherent variance known)
/// or lands in [n, 2n) (conservative mode, inherent variance unknown).
struct NoiseCalibration {
  int batch_size_n = 0;
  std::optional<double> inherent_variance;
  double injected_variance = 0.0;
  CalibrationMode mode = CalibrationMode::kExact;

  /// Inherent-plus-injected variance; for conservative mode the unknown
  /// inherent part is omitted, so this is a lower bound.
  double total_variance() const {
    return inherent_variance.value_or(0.0) + injected_variance;
  }
};

struct Batch {
  Matrix X;
  Vector y;
};

struct BatchSet {
  std::vector<Batch> batches;
  int n = 0;
  int k = 0;
  std::optional<NoiseCalibration> calibration;
  bool centered = false;
  double injected_variance = 0.0;
  /// Pipeline stages applied so far, in order ("partition", "center",
  /// "inject").
  std::vector<std::string> pipeline;
};

/// Draws X rows i.i.d. from the configured distribution and sets
/// y = X w0 + eps with eps i.i.d. N(0, inherent_noise_std^2). The result
/// is a pure function of the config (bit-identical for identical seeds).
RegressionDataset generate_synthetic(const SyntheticConfig& config);

/// Splits the dataset into k = floor(N/n) batches of size n from a seeded
/// shuffle; remainder samples are dropped.
BatchSet partition_batches(const RegressionDataset& dataset, int n,
                           std::uint64_t seed);

/// Shifts every batch's feature columns and targets to zero empirical mean.
BatchSet center_batches(const BatchSet& batches);

/// Centers feature columns and targets over the whole dataset (the
/// global-centering variant used by some experiment protocols).
RegressionDataset center_dataset(const RegressionDataset& dataset);

NoiseCalibration calibrate_noise(int n,
                                 std::optional<double> inherent_variance);

/// Adds one independent N(0, injected_variance) draw to every target.
/// Injection happens once, before any training loop.
BatchSet inject_target_noise(const BatchSet& batches,
                             const NoiseCalibration& calibration,
                             std::uint64_t seed);

/// Same, with an explicit variance (used by ablations and noise sweeps).
BatchSet inject_target_noise(const BatchSet& batches, double injected_variance,
                             std::uint64_t seed);

/// Loads a comma separated file (first row headers, UTF-8, '.' decimal).
/// Feature columns default to every non-target column when empty. Scaling
/// rules divide the named column (or the target) by the given divisor.
RegressionDataset load_csv(const std::string& path,
                           const std::string& target_column,
                           const std::vector<std::string>& feature_columns,
                           const std::vector<ColumnScale>& scaling_rules);

/// Seeded holdout split; returns (train, test) with ceil(fraction * N)
/// samples in test.
std::pair<RegressionDataset, RegressionDataset> split_holdout(
    const RegressionDataset& dataset, double fraction, std::uint64_t seed);

/// (1/(n k)) sum_j sum_i x x^T over all batches; the data-derived reference
/// covariance used when the true covariance is unknown.
linalg::SymMatrix pooled_empirical_covariance(const BatchSet& batches);

/// Random dense PSD covariance A A^T / d (A standard Gaussian d-by-d), the
/// default dense feature covariance for synthetic experiments.
linalg::SymMatrix make_random_dense_covariance(int d, std::uint64_t seed);

/// Random PSD matrix with eigenvalues log-spaced in [1/kappa, 1].
linalg::SymMatrix make_spd_with_condition(int d, double kappa,
                                          std::uint64_t seed);

}  // namespace gradhess::data
