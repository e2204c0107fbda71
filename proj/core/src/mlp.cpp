#include "gradhess/mlp.hpp"

#include <cmath>
#include <string>

#include "gradhess/errors.hpp"
#include "gradhess/parallel.hpp"
#include "gradhess/rng.hpp"

namespace gradhess::mlp {

namespace {

constexpr int kParamGuard = 2000;

void validate_model(const MlpModel& model) {
  if (model.layer_sizes.size() < 2) {
    throw InvalidInputError("MlpModel: need at least input and output sizes");
  }
  if (model.layer_sizes.back() != 1) {
    throw InvalidInputError("MlpModel: output layer must have size 1");
  }
  const std::size_t layers = model.layer_sizes.size() - 1;
  if (model.weights.size() != layers) {
    throw InvalidInputError("MlpModel: weight count does not match layers");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (model.weights[l].rows() != model.layer_sizes[l + 1] ||
        model.weights[l].cols() != model.layer_sizes[l]) {
      throw DimensionError("MlpModel: weight matrix " + std::to_string(l) +
                           " has wrong shape");
    }
  }
  if (model.bias_enabled && model.biases.size() != layers) {
    throw InvalidInputError("MlpModel: bias count does not match layers");
  }
}

struct ForwardPass {
  std::vector<Matrix> activations;  // activations[0] = X
  std::vector<Matrix> pre_activations;
};

ForwardPass forward_pass(const MlpModel& model, const Matrix& X) {
  ForwardPass pass;
  pass.activations.push_back(X);
  Matrix a = X;
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = a * model.weights[l].transpose();
    if (model.bias_enabled) z.rowwise() += model.biases[l].transpose();
    pass.pre_activations.push_back(z);
    a = (l + 1 < layers) ? z.cwiseMax(0.0) : z;
    pass.activations.push_back(a);
  }
  return pass;
}

// FNV over the hidden activation signs; used to detect pattern flips
// between finite-difference evaluations.
std::uint64_t pattern_hash(const MlpModel& model, const Matrix& X) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  Matrix a = X;
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Matrix z = a * model.weights[l].transpose();
    if (model.bias_enabled) z.rowwise() += model.biases[l].transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        h ^= z(i, j) > 0.0 ? 0x9eULL : 0x31ULL;
        h *= 0x100000001b3ULL;
      }
    }
    a = z.cwiseMax(0.0);
  }
  return h;
}

}  // namespace

int MlpModel::param_count() const {
  int count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    count += layer_sizes[l + 1] * layer_sizes[l];
    if (bias_enabled) count += layer_sizes[l + 1];
  }
  return count;
}

Vector MlpModel::flatten() const {
  Vector params(param_count());
  int offset = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Matrix& W = weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) params[offset++] = W(i, j);
    }
    if (bias_enabled) {
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) {
        params[offset++] = biases[l][i];
      }
    }
  }
  return params;
}

void MlpModel::set_params(const Vector& params) {
  if (params.size() != param_count()) {
    throw DimensionError("MlpModel::set_params: expected " +
                         std::to_string(param_count()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  int offset = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Matrix& W = weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = params[offset++];
    }
    if (bias_enabled) {
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) {
        biases[l][i] = params[offset++];
      }
    }
  }
}

MlpModel MlpModel::random_init(const std::vector<int>& layer_sizes,
                               std::uint64_t seed, bool bias_enabled) {
  MlpModel model;
  model.layer_sizes = layer_sizes;
  model.bias_enabled = bias_enabled;
  RngStream root = RngStream(seed).substream("mlp-init");
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    RngStream stream = root.substream(static_cast<std::uint64_t>(l));
    const double scale = 1.0 / std::sqrt(double(layer_sizes[l]));  // fan-in
    Matrix W(layer_sizes[l + 1], layer_sizes[l]);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        W(i, j) = scale * stream.next_gaussian();
      }
    }
    model.weights.push_back(std::move(W));
    if (bias_enabled) {
      Vector b(layer_sizes[l + 1]);
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        b[i] = scale * stream.next_gaussian();
      }
      model.biases.push_back(std::move(b));
    }
  }
  validate_model(model);
  return model;
}

Vector mlp_forward(const MlpModel& model, const Matrix& X) {
  validate_model(model);
  if (X.cols() != model.layer_sizes.front()) {
    throw DimensionError("mlp_forward: X has " + std::to_string(X.cols()) +
                         " columns, model expects " +
                         std::to_string(model.layer_sizes.front()));
  }
  return forward_pass(model, X).activations.back().col(0);
}

Vector mlp_gradient(const MlpModel& model, const Matrix& X, const Vector& y) {
  validate_model(model);
  if (X.cols() != model.layer_sizes.front() || X.rows() != y.size()) {
    throw DimensionError("mlp_gradient: shape mismatch");
  }
  const long n = X.rows();
  const ForwardPass pass = forward_pass(model, X);
  const std::size_t layers = model.weights.size();

  Vector grad(model.param_count());
  // delta holds dL/dz for the current layer; start at the identity output.
  Matrix delta =
      (pass.activations.back().col(0) - y) / static_cast<double>(n);

  std::vector<Matrix> weight_grads(layers);
  std::vector<Vector> bias_grads(layers);
  for (std::size_t l = layers; l-- > 0;) {
    weight_grads[l] = delta.transpose() * pass.activations[l];
    if (model.bias_enabled) {
      bias_grads[l] = delta.colwise().sum().transpose();
    }
    if (l > 0) {
      Matrix back = delta * model.weights[l];
      delta = back.cwiseProduct(
          (pass.pre_activations[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }

  int offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& gW = weight_grads[l];
    for (Eigen::Index i = 0; i < gW.rows(); ++i) {
      for (Eigen::Index j = 0; j < gW.cols(); ++j) grad[offset++] = gW(i, j);
    }
    if (model.bias_enabled) {
      for (Eigen::Index i = 0; i < bias_grads[l].size(); ++i) {
        grad[offset++] = bias_grads[l][i];
      }
    }
  }
  return grad;
}

Matrix HessianBlockReport::diagonal_block(const BlockRange& block) const {
  return hessian.mat().block(block.offset, block.offset, block.size,
                             block.size);
}

namespace {

std::vector<BlockRange> layer_blocks(const MlpModel& model) {
  std::vector<BlockRange> blocks;
  int offset = 0;
  for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    int size = model.layer_sizes[l + 1] * model.layer_sizes[l];
    if (model.bias_enabled) size += model.layer_sizes[l + 1];
    blocks.push_back({static_cast<int>(l), offset, size});
    offset += size;
  }
  return blocks;
}

}  // namespace

HessianBlockReport mlp_hessian_fd(const MlpModel& model, const Matrix& X,
                                  const Vector& y, double step_scale,
                                  int threads) {
  validate_model(model);
  const int p = model.param_count();
  if (p > kParamGuard) {
    throw CostGuardError("mlp_hessian_fd: " + std::to_string(p) +
                         " parameters exceed the cost guard of " +
                         std::to_string(kParamGuard));
  }
  const Vector theta = model.flatten();
  const std::uint64_t base_pattern = pattern_hash(model, X);

  Matrix raw(p, p);
  parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t j) {
    MlpModel probe = model;
    double h = step_scale * (1.0 + std::abs(theta[static_cast<long>(j)]));
    for (int attempt = 0; attempt < 40; ++attempt) {
      Vector plus = theta;
      plus[static_cast<long>(j)] += h;
      probe.set_params(plus);
      const bool plus_ok = pattern_hash(probe, X) == base_pattern;
      Vector g_plus = plus_ok ? mlp_gradient(probe, X, y) : Vector();

      Vector minus = theta;
      minus[static_cast<long>(j)] -= h;
      probe.set_params(minus);
      const bool minus_ok = pattern_hash(probe, X) == base_pattern;
      if (plus_ok && minus_ok) {
        const Vector g_minus = mlp_gradient(probe, X, y);
        raw.col(static_cast<long>(j)) = (g_plus - g_minus) / (2.0 * h);
        return;
      }
      h *= 0.5;  // perturbation crossed an activation boundary
    }
    throw NumericError(
        "mlp_hessian_fd: could not find a pattern-stable step for parameter " +
        std::to_string(j) + "; samples sit too close to activation "
        "boundaries");
  });

  HessianBlockReport report{
      linalg::SymMatrix::from_symmetric(0.5 * (raw + raw.transpose())),
      layer_blocks(model), (raw - raw.transpose()).norm()};
  return report;
}

std::vector<double> hessian_block_target_dependence(const MlpModel& model,
                                                    const Matrix& X,
                                                    const Vector& y1,
                                                    const Vector& y2,
                                                    double step_scale) {
  const auto h1 = mlp_hessian_fd(model, X, y1, step_scale);
  const auto h2 = mlp_hessian_fd(model, X, y2, step_scale);
  std::vector<double> norms;
  norms.reserve(h1.blocks.size());
  for (const auto& block : h1.blocks) {
    const Matrix diff = h1.diagonal_block(block) - h2.diagonal_block(block);
    norms.push_back(
        linalg::operator_norm(linalg::SymMatrix(0.5 * (diff + diff.transpose()))));
  }
  return norms;
}

gradops::HessianEstimate mlp_hessian_estimate(
    const MlpModel& model, const data::BatchSet& batches, const Vector& params,
    const std::optional<HessianBlockReport>& reference, int threads) {
  MlpModel eval = model;
  eval.set_params(params);
  if (batches.batches.empty()) {
    throw InvalidInputError("mlp_hessian_estimate: empty batch set");
  }

  gradops::GradientSample sample;
  sample.w = params;
  sample.n = batches.n;
  sample.noise_variance =
      batches.calibration
          ? batches.calibration->inherent_variance.value_or(0.0) +
                batches.injected_variance
          : batches.injected_variance;
  sample.gradients.resize(batches.batches.size());
  parallel_for(batches.batches.size(), threads, [&](std::size_t j) {
    const auto& batch = batches.batches[j];
    sample.gradients[j] = mlp_gradient(eval, batch.X, batch.y);
  });

  auto estimate = gradops::gradient_covariance(sample);
  if (reference) {
    estimate.diagnostics = gradops::Diagnostics{
        linalg::relative_op_distance(estimate.s_g, reference->hessian),
        gradops::ReferenceKind::kTrueSigma};
  }
  return estimate;
}

std::vector<double> blockwise_r(const linalg::SymMatrix& estimate,
                                const HessianBlockReport& reference) {
  if (estimate.dim() != reference.hessian.dim()) {
    throw DimensionError("blockwise_r: dimension mismatch");
  }
  std::vector<double> rs;
  rs.reserve(reference.blocks.size());
  for (const auto& block : reference.blocks) {
    const Matrix ref = reference.diagonal_block(block);
    const Matrix est = estimate.mat().block(block.offset, block.offset,
                                            block.size, block.size);
    rs.push_back(linalg::relative_op_distance(
        linalg::SymMatrix(est), linalg::SymMatrix(ref)));
  }
  return rs;
}

bool clear_of_activation_boundaries(const MlpModel& model, const Matrix& X,
                                    double margin) {
  Matrix a = X;
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Matrix z = a * model.weights[l].transpose();
    if (model.bias_enabled) z.rowwise() += model.biases[l].transpose();
    if ((z.cwiseAbs().array() <= margin).any()) return false;
    a = z.cwiseMax(0.0);
  }
  return true;
}

MlpModel make_mlp_generator(const MlpSyntheticConfig& config) {
  std::vector<int> sizes;
  sizes.push_back(config.d);
  for (int h : config.hidden) sizes.push_back(h);
  sizes.push_back(1);
  return MlpModel::random_init(sizes,
                               RngStream(config.seed).substream("gen").next_u64());
}

MlpDataset sample_mlp_dataset(
    const MlpSyntheticConfig& config, const MlpModel& generator,
    const std::vector<const MlpModel*>& extra_margin_models) {
  if (config.n_samples < 1) {
    throw InvalidInputError("sample_mlp_dataset: n_samples >= 1");
  }
  RngStream root(config.seed);
  RngStream xs = root.substream("x");
  RngStream es = root.substream("eps");

  std::vector<const MlpModel*> margin_models = extra_margin_models;
  margin_models.push_back(&generator);

  Matrix X(config.n_samples, config.d);
  Matrix row(1, config.d);
  for (long i = 0; i < config.n_samples; ++i) {
    RngStream stream = xs.substream(static_cast<std::uint64_t>(i));
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000) {
        throw NumericError(
            "sample_mlp_dataset: cannot draw a sample clear of activation "
            "boundaries");
      }
      for (int j = 0; j < config.d; ++j) {
        row(0, j) = config.x_std * stream.next_gaussian();
      }
      bool ok = true;
      for (const auto* m : margin_models) {
        if (!clear_of_activation_boundaries(*m, row, config.boundary_margin)) {
          ok = false;
          break;
        }
      }
      if (ok) break;
    }
    X.row(i) = row.row(0);
  }

  Vector y = mlp_forward(generator, X);
  if (config.noise_std > 0.0) {
    for (long i = 0; i < config.n_samples; ++i) {
      y[i] += config.noise_std *
              es.substream(static_cast<std::uint64_t>(i)).next_gaussian();
    }
  }
  return MlpDataset{std::move(X), std::move(y), generator};
}

data::BatchSet partition_mlp(const MlpDataset& dataset, int n,
                             std::uint64_t seed) {
  data::RegressionDataset wrapper{dataset.X, dataset.y,
                                  data::FileProvenance{"<mlp-synthetic>",
                                                       "y",
                                                       {},
                                                       {}}};
  return data::partition_batches(wrapper, n, seed);
}

}  // namespace gradhess::mlp
