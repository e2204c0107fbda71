#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gradhess/data.hpp"
#include "gradhess/linalg.hpp"

namespace gradhess::gradops {

/// One gradient per batch, all evaluated at the same parameter point.
struct GradientSample {
  Vector w;
  std::vector<Vector> gradients;
  int n = 0;
  /// Total target-noise variance in effect (inherent + injected, as far as
  /// known).
  double noise_variance = 0.0;

  int k() const { return static_cast<int>(gradients.size()); }
};

enum class ReferenceKind { kTrueSigma, kPooledEmpirical };

struct Diagnostics {
  double r = 0.0;
  ReferenceKind reference = ReferenceKind::kTrueSigma;
};

/// Empirical gradient covariance S_g(w) plus the context it was computed
/// in. S_g is PSD by construction (up to roundoff).
struct HessianEstimate {
  linalg::SymMatrix s_g;
  Vector w;
  int k = 0;
  int n = 0;
  double noise_variance = 0.0;
  std::optional<Diagnostics> diagnostics;
};

/// (1/n) X^T (X w - y), the gradient of (1/2n) ||X w - y||^2.
Vector batch_gradient(const Matrix& X, const Vector& y, const Vector& w);

/// Evaluates every batch gradient at the shared point w.
GradientSample gradient_sample(const data::BatchSet& batches, const Vector& w,
                               int threads = 1);

/// Arithmetic mean of the k gradients.
Vector gradient_mean(const GradientSample& sample);

/// S_g = (1/k) sum_j (g_j - mean)(g_j - mean)^T. Requires k >= 2.
HessianEstimate gradient_covariance(const GradientSample& sample);

/// Uncentered second moment (1/k) sum_j g_j g_j^T — the empirical-Fisher
/// style diagnostic; S_g equals this minus mean mean^T.
linalg::SymMatrix gradient_second_moment(const GradientSample& sample);

/// Exact population gradient covariance for Gaussian features:
/// (sigma^2/n) S + S u u^T S / n + (u^T S u) S / n with u = w - w0.
linalg::SymMatrix population_cov_gaussian(const linalg::SymMatrix& sigma,
                                          const Vector& w, const Vector& w0,
                                          double sigma2, int n);

struct SmallBatchBound {
  double leading = 0.0;         // coefficient of Sigma
  double nuisance_bound = 0.0;  // C ||w - w0||^2 / n
  double nuisance_relative = 0.0;  // nuisance_bound / ||Sigma||_op
};

/// Leading coefficient sigma^2/n and nuisance bound C ||w-w0||^2 / n of the
/// small-batch covariance decomposition. C is configurable; the default 3
/// covers the Gaussian case with padding.
SmallBatchBound population_cov_smallbatch_bound(double sigma_op,
                                                const Vector& w,
                                                const Vector& w0,
                                                double sigma2, int n,
                                                double C = 3.0);

/// Builds k quadratic losses with shared Hessian sigma and the given
/// optima, evaluates the gradient covariance at w, and returns it next to
/// sigma * cov(optima) * sigma. The two sides agree to machine precision
/// at every w.
std::pair<linalg::SymMatrix, linalg::SymMatrix> equal_hessian_identity(
    const linalg::SymMatrix& sigma, const std::vector<Vector>& optima,
    const Vector& w);

/// Feature sampler for the Monte-Carlo covariance oracle.
struct GradientSampler {
  data::XDistribution x_distribution = data::XDistribution::kGaussian;
  linalg::SymMatrix sigma;  // 1x1 with entry 1 for rademacher
  Vector w0;
};

struct MonteCarloCov {
  linalg::SymMatrix cov;
  /// Entrywise standard error of the covariance estimate.
  Matrix standard_error;
  long trials = 0;
};

/// Empirical covariance of `trials` i.i.d. batch gradients, each from a
/// fresh size-n batch with target noise N(0, sigma2). Independent oracle
/// for the closed-form covariance results.
MonteCarloCov monte_carlo_population_cov(const GradientSampler& sampler,
                                         const Vector& w, double sigma2, int n,
                                         long trials, std::uint64_t seed,
                                         int threads = 1);

}  // namespace gradhess::gradops
