#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gradhess/data.hpp"
#include "gradhess/gradops.hpp"
#include "gradhess/linalg.hpp"

namespace gradhess::mlp {

/// Fully connected ReLU network with identity output (single output unit).
/// The parameter vector flattens layer-major, row-major within each layer
/// weight matrix, bias vector (when enabled) after its layer's weights —
/// Hessian blocks align with layers through this order.
struct MlpModel {
  std::vector<int> layer_sizes;  // input d, hidden sizes..., 1
  std::vector<Matrix> weights;   // weights[l] is (out x in)
  std::vector<Vector> biases;    // per layer, only when bias_enabled
  bool bias_enabled = false;

  int param_count() const;
  Vector flatten() const;
  void set_params(const Vector& params);

  static MlpModel random_init(const std::vector<int>& layer_sizes,
                              std::uint64_t seed, bool bias_enabled = false);
};

Vector mlp_forward(const MlpModel& model, const Matrix& X);

/// Exact gradient of (1/2n) ||f(X) - y||^2 with respect to the flattened
/// parameters; the ReLU subgradient at 0 is 0.
Vector mlp_gradient(const MlpModel& model, const Matrix& X, const Vector& y);

struct BlockRange {
  int layer = 0;
  int offset = 0;
  int size = 0;
};

struct HessianBlockReport {
  linalg::SymMatrix hessian;  // symmetrized FD Hessian, p x p
  std::vector<BlockRange> blocks;
  /// Frobenius norm of (H_raw - H_raw^T) before symmetrization.
  double raw_asymmetry = 0.0;

  Matrix diagonal_block(const BlockRange& block) const;
};

/// Central finite differences of mlp_gradient, one column per parameter,
/// symmetrized. Per-coordinate step step_scale * (1 + |param|), halved
/// whenever the perturbation would flip an activation pattern (the Hessian
/// is only defined within one linear region). Guarded to p <= 2000.
HessianBlockReport mlp_hessian_fd(const MlpModel& model, const Matrix& X,
                                  const Vector& y, double step_scale = 1e-4,
                                  int threads = 1);

/// Op-norms of the per-layer diagonal block differences between the FD
/// Hessians for two target vectors.
std::vector<double> hessian_block_target_dependence(const MlpModel& model,
                                                    const Matrix& X,
                                                    const Vector& y1,
                                                    const Vector& y2,
                                                    double step_scale = 1e-4);

/// Gradient covariance over the batches with the model at `params`;
/// attaches r against the reference Hessian when one is supplied.
gradops::HessianEstimate mlp_hessian_estimate(
    const MlpModel& model, const data::BatchSet& batches, const Vector& params,
    const std::optional<HessianBlockReport>& reference = std::nullopt,
    int threads = 1);

/// Per-block r of the estimate against the reference diagonal blocks.
std::vector<double> blockwise_r(const linalg::SymMatrix& estimate,
                                const HessianBlockReport& reference);

/// True when every hidden pre-activation satisfies |z| > margin for every
/// sample.
bool clear_of_activation_boundaries(const MlpModel& model, const Matrix& X,
                                    double margin);

/// Synthetic data drawn through a randomly initialised generator network.
struct MlpSyntheticConfig {
  int d = 2;
  std::vector<int> hidden = {5};
  double x_std = 5.0;
  long n_samples = 10000;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  /// Samples are re-drawn until no pre-activation of any margin model lies
  /// within this distance of 0.
  double boundary_margin = 1e-3;
};

struct MlpDataset {
  Matrix X;
  Vector y;
  MlpModel generator;
};

MlpModel make_mlp_generator(const MlpSyntheticConfig& config);

/// Draws X with rows resampled until clear of the activation boundaries of
/// the generator and every extra margin model; y = generator(X) + noise.
MlpDataset sample_mlp_dataset(const MlpSyntheticConfig& config,
                              const MlpModel& generator,
                              const std::vector<const MlpModel*>&
                                  extra_margin_models = {});

/// Seeded partition of an MLP dataset into batches of size n.
data::BatchSet partition_mlp(const MlpDataset& dataset, int n,
                             std::uint64_t seed);

}  // namespace gradhess::mlp
