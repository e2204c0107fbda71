#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradhess/data.hpp"
#include "gradhess/gradops.hpp"

namespace gradhess::estimator {

enum class CenterMode { kNone, kPerBatch, kGlobal };

/// How the pipeline sets the injected target-noise variance.
struct InjectionPolicy {
  enum class Kind {
    kAuto,          // exact when inherent variance known, else conservative
    kConservative,  // inject n regardless
    kManual,        // inject manual_variance
    kNone,          // clean targets
  };
  Kind kind = Kind::kAuto;
  double manual_variance = 0.0;

  static InjectionPolicy automatic() { return {}; }
  static InjectionPolicy conservative() {
    return {Kind::kConservative, 0.0};
  }
  static InjectionPolicy manual(double variance) {
    return {Kind::kManual, variance};
  }
  static InjectionPolicy none() { return {Kind::kNone, 0.0}; }
};

struct PipelineOptions {
  CenterMode center = CenterMode::kPerBatch;
  InjectionPolicy injection = InjectionPolicy::automatic();
  /// Reference covariance override for the r diagnostic; when absent the
  /// reference is the true covariance for synthetic data and the pooled
  /// empirical covariance for file data.
  std::optional<linalg::SymMatrix> reference;
  int threads = 1;
  /// Cap on the number of batches used (0 = all).
  int max_batches = 0;
};

/// Reference matrix for r: true covariance when the dataset is synthetic,
/// pooled empirical covariance otherwise.
std::pair<linalg::SymMatrix, gradops::ReferenceKind> reference_covariance(
    const data::RegressionDataset& dataset, const data::BatchSet& batches,
    const PipelineOptions& options);

/// Partition plus centering per the options; no noise yet.
data::BatchSet prepare_batches(const data::RegressionDataset& dataset, int n,
                               std::uint64_t seed,
                               const PipelineOptions& options);

/// Applies the injection policy (calibrated, conservative, manual, none)
/// to already prepared batches.
data::BatchSet apply_injection(const data::BatchSet& batches,
                               std::optional<double> inherent_variance,
                               std::uint64_t seed,
                               const InjectionPolicy& policy);

/// Full estimation pipeline: partition -> (center) -> calibrate -> inject
/// -> gradient sample -> gradient covariance, with the r diagnostic against
/// the reference attached.
gradops::HessianEstimate estimate_hessian(
    const data::RegressionDataset& dataset, const Vector& w, int n,
    std::optional<double> inherent_variance, std::uint64_t seed,
    const PipelineOptions& options = {});

/// w0 + c * v for a uniformly random unit vector v; the result is at
/// distance exactly c from w0.
Vector distort_weights(const Vector& w0, double c, std::uint64_t seed);

enum class SweepAxis {
  kNumBatchesK,
  kBatchSizeN,
  kNumFeaturesD,
  kDistortionC,
  kNoiseStd,
};

std::string to_string(SweepAxis axis);

/// Sensitivity sweep over one axis, `repeats` seeds per point. The base
/// configuration follows the synthetic sensitivity protocol; every field
/// is overridable.
struct SweepSpec {
  SweepAxis axis = SweepAxis::kNumBatchesK;
  std::vector<double> values;
  data::SyntheticConfig base;
  int batch_size_n = 256;
  std::optional<double> inherent_variance;  // defaults to base noise std^2
  CenterMode center = CenterMode::kPerBatch;
  /// Weights for the estimate: distortion c when set, else random init.
  std::optional<double> distortion_c;
  int repeats = 10;
  std::vector<std::uint64_t> seeds;  // defaults to {0, 10, ..., 10*(repeats-1)}
  int threads = 1;
};

/// Sweep defaults mirroring the synthetic sensitivity protocol:
/// d = 6, N = 800000, sigma_x = 2 (diagonal), inherent noise std 0.1,
/// n = 256 (so k = 3125), random init.
SweepSpec default_sweep_spec(SweepAxis axis, std::vector<double> values);

struct SweepPoint {
  double value = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;
  std::optional<double> r;
  std::string error;  // non-empty when this point failed
  int k = 0;
  int n = 0;
  int d = 0;
  double injected_variance = 0.0;
  gradops::ReferenceKind reference = gradops::ReferenceKind::kTrueSigma;
};

struct SweepAggregate {
  double value = 0.0;
  double mean_r = 0.0;
  double std_r = 0.0;
  int successes = 0;
  int failures = 0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepPoint> points;
  std::vector<SweepAggregate> aggregates;
};

/// Runs the sweep; infeasible points are recorded as failed rows and the
/// sweep continues.
SweepResult run_sweep(const SweepSpec& spec);

/// The three-way ablation of the estimator: clean-target covariance, the
/// same rescaled by n, and the calibrated estimator, each scored by r
/// against the reference.
struct EstimatorComparison {
  double r_no_noise = 0.0;
  double r_times_n = 0.0;
  double r_noise_eq_n = 0.0;
  gradops::ReferenceKind reference = gradops::ReferenceKind::kTrueSigma;
  int k = 0;
  int n = 0;
};

EstimatorComparison compare_estimators(const data::RegressionDataset& dataset,
                                       const Vector& w, int n,
                                       std::optional<double> inherent_variance,
                                       std::uint64_t seed,
                                       const PipelineOptions& options = {});

}  // namespace gradhess::estimator
