#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gradhess/data.hpp"
#include "gradhess/gradops.hpp"

namespace gradhess::optim {

enum class Optimizer { kGd, kAdam };

/// Learning rate over an inclusive 1-based epoch range.
struct RateSegment {
  int first_epoch = 1;
  int last_epoch = 1;
  double rate = 0.0;
};

struct UpdateCadence {
  enum class Kind { kPerEpoch, kPerMBatches };
  Kind kind = Kind::kPerEpoch;
  int m = 0;

  static UpdateCadence per_epoch() { return {}; }
  static UpdateCadence per_m_batches(int m) {
    return {Kind::kPerMBatches, m};
  }
};

struct TrainConfig {
  int epochs = 0;
  std::vector<RateSegment> schedule;  // must cover [1, epochs] without overlap
  Optimizer optimizer = Optimizer::kGd;
  bool precondition = false;
  double ridge_damping = 0.0;
  UpdateCadence cadence = UpdateCadence::per_epoch();
  std::uint64_t seed = 0;
};

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index d);
};

struct EpochRecord {
  int epoch = 0;
  Vector w;  // parameters at the start of the epoch
  double train_loss = 0.0;
  std::optional<double> test_mse;
  std::optional<double> dist_to_ref;
  std::optional<double> r;
  std::optional<double> risk_error;
};

struct Trajectory {
  std::vector<EpochRecord> records;
  Vector final_w;
};

/// Optional diagnostics fed into run_training.
struct TrainingReferences {
  /// Reference parameters (for example the analytic least-squares
  /// solution); enables the per-epoch distance column.
  std::optional<Vector> w_reference;
  /// Reference covariance; enables r(S_g(w_t), sigma) per epoch.
  std::optional<linalg::SymMatrix> sigma_reference;
  /// True parameters; together with sigma_reference enables the per-epoch
  /// quadratic-form risk error column.
  std::optional<Vector> w0;
  /// Clean batches for loss evaluation when training on noisy targets.
  std::optional<data::BatchSet> eval_batches;
  /// Holdout set for the test MSE column.
  std::optional<data::RegressionDataset> test_set;
};

/// (S_g + ridge I)^{-1} grad via an SPD solve.
Vector precondition(const gradops::HessianEstimate& estimate,
                    const Vector& grad, double ridge);

Vector gd_step(const Vector& w, const Vector& g, double rate);

/// Standard bias-corrected adaptive update.
std::pair<Vector, AdamState> adam_step(const AdamState& state, const Vector& w,
                                       const Vector& g, double rate);

/// Per-epoch loop over noisy batch gradients: mean, covariance, optional
/// preconditioned update. Target noise must already be injected; it is
/// never re-sampled here. With per-m-batches cadence the parameters update
/// every m batches while the covariance refreshes once per epoch.
Trajectory run_training(const data::BatchSet& batches, const Vector& w1,
                        const TrainConfig& config,
                        const TrainingReferences& references = {},
                        int threads = 1);

/// Mean squared residual (1/N) ||X w - y||^2.
double mean_squared_error(const data::RegressionDataset& dataset,
                          const Vector& w);

/// Simulates w_{t+1} = w_t - inverse_estimate * sigma (w_t - w_star) and
/// returns the iterates (including w1).
std::vector<Vector> simulate_preconditioned_quadratic(
    const linalg::SymMatrix& sigma, const Vector& w_star, const Vector& w1,
    const Matrix& inverse_estimate, int steps);

/// Checks the per-step contraction ||w_{t+1} - w*|| <= eps ||w_t - w*||
/// along a path (the step-size-1 identity for preconditioned descent on a
/// quadratic with sigma <= I).
bool convergence_contraction_check(const linalg::SymMatrix& sigma, double eps,
                                   const std::vector<Vector>& w_path,
                                   const Vector& w_star);

}  // namespace gradhess::optim
