#include "gradhess/gradops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gradhess/errors.hpp"
#include "gradhess/parallel.hpp"
#include "gradhess/rng.hpp"

namespace gradhess::gradops {

Vector batch_gradient(const Matrix& X, const Vector& y, const Vector& w) {
  if (X.rows() != y.size() || X.cols() != w.size()) {
    throw DimensionError("batch_gradient: X is " + std::to_string(X.rows()) +
                         "x" + std::to_string(X.cols()) + ", y has " +
                         std::to_string(y.size()) + ", w has " +
                         std::to_string(w.size()));
  }
  return (X.transpose() * (X * w - y)) / static_cast<double>(X.rows());
}

GradientSample gradient_sample(const data::BatchSet& batches, const Vector& w,
                               int threads) {
  if (batches.batches.empty()) {
    throw InvalidInputError("gradient_sample: empty batch set");
  }
  GradientSample sample;
  sample.w = w;
  sample.n = batches.n;
  sample.noise_variance =
      batches.calibration
          ? batches.calibration->inherent_variance.value_or(0.0) +
                batches.injected_variance
          : batches.injected_variance;
  sample.gradients.resize(batches.batches.size());
  parallel_for(batches.batches.size(), threads, [&](std::size_t j) {
    const auto& batch = batches.batches[j];
    sample.gradients[j] = batch_gradient(batch.X, batch.y, w);
  });
  for (const auto& g : sample.gradients) {
    if (!g.allFinite()) {
      throw NumericError("gradient_sample: non-finite gradient");
    }
  }
  return sample;
}

Vector gradient_mean(const GradientSample& sample) {
  if (sample.gradients.empty()) {
    throw InvalidInputError("gradient_mean: no gradients");
  }
  Vector sum = Vector::Zero(sample.gradients.front().size());
  for (const auto& g : sample.gradients) sum += g;
  return sum / static_cast<double>(sample.gradients.size());
}

HessianEstimate gradient_covariance(const GradientSample& sample) {
  const int k = sample.k();
  if (k < 2) {
    throw InsufficientBatchesError(
        "gradient_covariance: k = " + std::to_string(k) +
        " batches, need at least 2");
  }
  const Vector mean = gradient_mean(sample);
  const Eigen::Index d = mean.size();
  Matrix cov = Matrix::Zero(d, d);
  for (const auto& g : sample.gradients) {
    const Vector diff = g - mean;
    cov.noalias() += diff * diff.transpose();
  }
  cov /= static_cast<double>(k);  // 1/k normalization, not 1/(k-1)
  HessianEstimate estimate{linalg::SymMatrix::from_symmetric(std::move(cov)),
                           sample.w,
                           k,
                           sample.n,
                           sample.noise_variance,
                           std::nullopt};
  return estimate;
}

linalg::SymMatrix gradient_second_moment(const GradientSample& sample) {
  if (sample.gradients.empty()) {
    throw InvalidInputError("gradient_second_moment: no gradients");
  }
  const Eigen::Index d = sample.gradients.front().size();
  Matrix moment = Matrix::Zero(d, d);
  for (const auto& g : sample.gradients) {
    moment.noalias() += g * g.transpose();
  }
  moment /= static_cast<double>(sample.gradients.size());
  return linalg::SymMatrix::from_symmetric(std::move(moment));
}

linalg::SymMatrix population_cov_gaussian(const linalg::SymMatrix& sigma,
                                          const Vector& w, const Vector& w0,
                                          double sigma2, int n) {
  const Eigen::Index d = sigma.dim();
  if (w.size() != d || w0.size() != d) {
    throw DimensionError("population_cov_gaussian: w/w0 length mismatch");
  }
  if (n < 1 || sigma2 < 0.0) {
    throw InvalidInputError("population_cov_gaussian: need n >= 1, sigma2 >= 0");
  }
  const Vector u = w - w0;
  const Vector su = sigma.mat() * u;
  Matrix cov = (sigma2 / n) * sigma.mat();
  cov.noalias() += (su * su.transpose()) / n;
  cov += (u.dot(su) / n) * sigma.mat();
  return linalg::SymMatrix::from_symmetric(std::move(cov));
}

SmallBatchBound population_cov_smallbatch_bound(double sigma_op,
                                                const Vector& w,
                                                const Vector& w0,
                                                double sigma2, int n,
                                                double C) {
  SmallBatchBound bound;
  bound.leading = sigma2 / n;
  bound.nuisance_bound = C * (w - w0).squaredNorm() / n;
  bound.nuisance_relative =
      sigma_op > 0.0 ? bound.nuisance_bound / sigma_op
                     : std::numeric_limits<double>::infinity();
  return bound;
}

std::pair<linalg::SymMatrix, linalg::SymMatrix> equal_hessian_identity(
    const linalg::SymMatrix& sigma, const std::vector<Vector>& optima,
    const Vector& w) {
  if (optima.size() < 2) {
    throw InvalidInputError("equal_hessian_identity: need k >= 2 optima");
  }
  const Eigen::Index d = sigma.dim();
  GradientSample sample;
  sample.w = w;
  sample.n = 0;
  for (const auto& opt : optima) {
    if (opt.size() != d || w.size() != d) {
      throw DimensionError("equal_hessian_identity: dimension mismatch");
    }
    sample.gradients.push_back(sigma.mat() * (w - opt));
  }
  const linalg::SymMatrix lhs = gradient_covariance(sample).s_g;

  Vector mean_opt = Vector::Zero(d);
  for (const auto& opt : optima) mean_opt += opt;
  mean_opt /= static_cast<double>(optima.size());
  Matrix s_opt = Matrix::Zero(d, d);
  for (const auto& opt : optima) {
    const Vector diff = opt - mean_opt;
    s_opt.noalias() += diff * diff.transpose();
  }
  s_opt /= static_cast<double>(optima.size());
  Matrix rhs = sigma.mat() * s_opt * sigma.mat();
  return {lhs, linalg::SymMatrix(rhs)};
}

MonteCarloCov monte_carlo_population_cov(const GradientSampler& sampler,
                                         const Vector& w, double sigma2, int n,
                                         long trials, std::uint64_t seed,
                                         int threads) {
  if (trials < 1000) {
    throw InvalidInputError(
        "monte_carlo_population_cov: trials >= 1000 required");
  }
  const Eigen::Index d = sampler.sigma.dim();
  if (w.size() != d || sampler.w0.size() != d) {
    throw DimensionError("monte_carlo_population_cov: dimension mismatch");
  }
  if (sampler.x_distribution == data::XDistribution::kRademacher && d != 1) {
    throw InvalidInputError(
        "monte_carlo_population_cov: rademacher requires d == 1");
  }

  const Matrix root_sigma =
      sampler.x_distribution == data::XDistribution::kGaussian
          ? linalg::psd_sqrt(sampler.sigma)
          : Matrix::Identity(1, 1);
  const double noise_std = std::sqrt(sigma2);
  RngStream root = RngStream(seed).substream("mc-cov");

  Matrix grads(trials, d);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    RngStream stream = root.substream(static_cast<std::uint64_t>(t));
    Matrix X(n, d);
    if (sampler.x_distribution == data::XDistribution::kRademacher) {
      for (int i = 0; i < n; ++i) {
        X(i, 0) = (stream.next_u64() & 1) ? 1.0 : -1.0;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = stream.next_gaussian();
      }
      X *= root_sigma;  // root is symmetric
    }
    Vector y = X * sampler.w0;
    for (int i = 0; i < n; ++i) y[i] += noise_std * stream.next_gaussian();
    grads.row(t) = batch_gradient(X, y, w).transpose();
  });

  const Vector mean = grads.colwise().mean();
  Matrix centered = grads.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(trials);

  // Entrywise standard error from the sample variance of the products.
  Matrix se(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto prods =
          (centered.col(i).array() * centered.col(j).array()).eval();
      const double m = prods.mean();
      const double var = (prods - m).square().sum() / (trials - 1);
      se(i, j) = se(j, i) = std::sqrt(var / trials);
    }
  }
  return MonteCarloCov{linalg::SymMatrix(0.5 * (cov + cov.transpose())),
                       std::move(se), trials};
}

}  // namespace gradhess::gradops
