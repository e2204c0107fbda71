#pragma once

#include <cstdint>
#include <optional>

#include "gradhess/gradops.hpp"
#include "gradhess/linalg.hpp"

namespace gradhess::risk {

/// c0 of the closed-form adversarial risk.
inline constexpr double kC0 = 0.7978845608028653558798921198687;  // sqrt(2/pi)

struct RiskReport {
  double beta = 0.0;
  double quad_form = 0.0;      // estimate of ||w - w0||^2_Sigma
  double risk_estimate = 0.0;  // closed form with the estimated quad form
  std::optional<double> oracle_risk;
  std::optional<double> abs_error;
};

/// ||w - w0||^2_Sigma + beta^2 ||w||^2 + 2 c0 beta ||w - w0||_Sigma ||w||.
double adversarial_risk_closed_form(const Vector& w, const Vector& w0,
                                    const linalg::SymMatrix& sigma,
                                    double beta);

/// grad^T (S_g + ridge I)^{-1} grad, clamped at 0 when roundoff pushes it
/// slightly negative.
double quad_form_estimate(const Vector& grad_mean,
                          const gradops::HessianEstimate& estimate,
                          double ridge);

/// Adversarial risk from gradients alone: the quadratic-form estimate
/// plugged into the closed form. When sigma and w0 are supplied, the exact
/// risk and the absolute error are attached.
RiskReport adversarial_risk_gradient_only(
    const Vector& w, const Vector& grad_mean,
    const gradops::HessianEstimate& estimate, double beta, double ridge,
    const std::optional<linalg::SymMatrix>& sigma = std::nullopt,
    const std::optional<Vector>& w0 = std::nullopt);

struct MonteCarloRisk {
  double value = 0.0;
  double standard_error = 0.0;
  long trials = 0;
};

/// Direct Monte-Carlo evaluation of the sup-expectation definition of the
/// adversarial risk over Gaussian test points; the worst-case perturbation
/// is beta sign(x^T (w - w0)) w / ||w||, so each sample contributes
/// (|x^T (w - w0)| + beta ||w||)^2. Independent oracle for the closed form.
MonteCarloRisk adversarial_risk_monte_carlo(const Vector& w, const Vector& w0,
                                            const linalg::SymMatrix& sigma,
                                            double beta, long trials,
                                            std::uint64_t seed);

}  // namespace gradhess::risk
