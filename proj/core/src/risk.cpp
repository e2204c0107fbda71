#include "gradhess/risk.hpp"

#include <cmath>

#include "gradhess/errors.hpp"
#include "gradhess/rng.hpp"

namespace gradhess::risk {

double adversarial_risk_closed_form(const Vector& w, const Vector& w0,
                                    const linalg::SymMatrix& sigma,
                                    double beta) {
  if (w.size() != w0.size() || w.size() != sigma.dim()) {
    throw DimensionError("adversarial_risk_closed_form: dimension mismatch");
  }
  if (beta < 0.0) {
    throw InvalidInputError("adversarial_risk_closed_form: beta >= 0");
  }
  const Vector diff = w - w0;
  const double quad = diff.dot(sigma.mat() * diff);
  const double sigma_norm = std::sqrt(std::max(quad, 0.0));
  const double w_norm = w.norm();
  return quad + beta * beta * w_norm * w_norm +
         2.0 * kC0 * beta * sigma_norm * w_norm;
}

double quad_form_estimate(const Vector& grad_mean,
                          const gradops::HessianEstimate& estimate,
                          double ridge) {
  if (grad_mean.size() != estimate.s_g.dim()) {
    throw DimensionError("quad_form_estimate: gradient length mismatch");
  }
  const linalg::SymMatrix damped =
      ridge == 0.0
          ? estimate.s_g
          : linalg::SymMatrix::from_symmetric(
                estimate.s_g.mat() +
                ridge * Matrix::Identity(estimate.s_g.dim(),
                                         estimate.s_g.dim()));
  const double value = grad_mean.dot(linalg::spd_solve(damped, grad_mean));
  if (value < -1e-12) {
    throw NumericError("quad_form_estimate: quadratic form is negative (" +
                       std::to_string(value) + ")");
  }
  return std::max(value, 0.0);
}

RiskReport adversarial_risk_gradient_only(
    const Vector& w, const Vector& grad_mean,
    const gradops::HessianEstimate& estimate, double beta, double ridge,
    const std::optional<linalg::SymMatrix>& sigma,
    const std::optional<Vector>& w0) {
  if (beta < 0.0) {
    throw InvalidInputError("adversarial_risk_gradient_only: beta >= 0");
  }
  RiskReport report;
  report.beta = beta;
  report.quad_form = quad_form_estimate(grad_mean, estimate, ridge);
  const double sigma_norm = std::sqrt(report.quad_form);
  const double w_norm = w.norm();
  report.risk_estimate = report.quad_form + beta * beta * w_norm * w_norm +
                         2.0 * kC0 * beta * sigma_norm * w_norm;
  if (sigma && w0) {
    report.oracle_risk = adversarial_risk_closed_form(w, *w0, *sigma, beta);
    report.abs_error = std::abs(report.risk_estimate - *report.oracle_risk);
  }
  return report;
}

MonteCarloRisk adversarial_risk_monte_carlo(const Vector& w, const Vector& w0,
                                            const linalg::SymMatrix& sigma,
                                            double beta, long trials,
                                            std::uint64_t seed) {
  if (trials < 1) {
    throw InvalidInputError("adversarial_risk_monte_carlo: trials >= 1");
  }
  if (beta < 0.0) {
    throw InvalidInputError("adversarial_risk_monte_carlo: beta >= 0");
  }
  const Eigen::Index d = sigma.dim();
  if (w.size() != d || w0.size() != d) {
    throw DimensionError("adversarial_risk_monte_carlo: dimension mismatch");
  }
  const Matrix root_sigma = linalg::psd_sqrt(sigma);
  const Vector diff = w - w0;
  const double w_norm = w.norm();
  RngStream root = RngStream(seed).substream("mc-risk");

  double sum = 0.0;
  double sum_sq = 0.0;
  Vector z(d);
  for (long t = 0; t < trials; ++t) {
    RngStream stream = root.substream(static_cast<std::uint64_t>(t));
    for (Eigen::Index i = 0; i < d; ++i) z[i] = stream.next_gaussian();
    const Vector x = root_sigma * z;
    const double margin = std::abs(x.dot(diff)) + beta * w_norm;
    const double value = margin * margin;
    sum += value;
    sum_sq += value * value;
  }
  const double mean = sum / trials;
  const double var =
      std::max(sum_sq / trials - mean * mean, 0.0) * trials / (trials - 1.0);
  return MonteCarloRisk{mean, std::sqrt(var / trials), trials};
}

}  // namespace gradhess::risk
