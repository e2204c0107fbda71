#include "gradhess/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "gradhess/errors.hpp"
#include "gradhess/risk.hpp"

namespace gradhess::optim {

namespace {

void validate_schedule(const TrainConfig& config) {
  if (config.epochs < 0) {
    throw InvalidInputError("run_training: epochs must be >= 0");
  }
  if (config.epochs == 0) return;
  std::vector<RateSegment> segs = config.schedule;
  std::sort(segs.begin(), segs.end(),
            [](const RateSegment& a, const RateSegment& b) {
              return a.first_epoch < b.first_epoch;
            });
  int expected = 1;
  for (const auto& seg : segs) {
    if (seg.first_epoch != expected || seg.last_epoch < seg.first_epoch) {
      throw InvalidInputError(
          "run_training: learning-rate schedule must cover [1, epochs] "
          "without gaps or overlap");
    }
    if (!(seg.rate > 0.0)) {
      throw InvalidInputError("run_training: rates must be positive");
    }
    expected = seg.last_epoch + 1;
  }
  if (expected != config.epochs + 1) {
    throw InvalidInputError(
        "run_training: schedule does not cover epochs 1.." +
        std::to_string(config.epochs));
  }
  if (config.cadence.kind == UpdateCadence::Kind::kPerMBatches &&
      config.cadence.m < 1) {
    throw InvalidInputError("run_training: per-m-batches cadence needs m >= 1");
  }
}

double rate_at(const std::vector<RateSegment>& schedule, int epoch) {
  for (const auto& seg : schedule) {
    if (epoch >= seg.first_epoch && epoch <= seg.last_epoch) return seg.rate;
  }
  throw InvalidInputError("run_training: no rate for epoch " +
                          std::to_string(epoch));
}

double batch_loss(const data::Batch& batch, const Vector& w) {
  return (batch.X * w - batch.y).squaredNorm() /
         (2.0 * static_cast<double>(batch.X.rows()));
}

double mean_batch_loss(const data::BatchSet& batches, const Vector& w) {
  double total = 0.0;
  for (const auto& batch : batches.batches) total += batch_loss(batch, w);
  return total / static_cast<double>(batches.batches.size());
}

}  // namespace

AdamState AdamState::zeros(Eigen::Index d) {
  AdamState state;
  state.first_moment = Vector::Zero(d);
  state.second_moment = Vector::Zero(d);
  return state;
}

Vector precondition(const gradops::HessianEstimate& estimate,
                    const Vector& grad, double ridge) {
  if (estimate.s_g.dim() != grad.size()) {
    throw DimensionError("precondition: gradient length does not match S_g");
  }
  if (ridge < 0.0) {
    throw InvalidInputError("precondition: ridge must be >= 0");
  }
  const linalg::SymMatrix damped =
      ridge == 0.0
          ? estimate.s_g
          : linalg::SymMatrix::from_symmetric(
                estimate.s_g.mat() +
                ridge * Matrix::Identity(estimate.s_g.dim(),
                                         estimate.s_g.dim()));
  try {
    return linalg::spd_solve(damped, grad);
  } catch (const SingularMatrixError& err) {
    throw SingularMatrixError(
        std::string("precondition: gradient covariance is singular (k <= d?); "
                    "enable ridge damping or increase the number of batches "
                    "[") +
            err.what() + "]",
        err.pivot());
  }
}

Vector gd_step(const Vector& w, const Vector& g, double rate) {
  return w - rate * g;
}

std::pair<Vector, AdamState> adam_step(const AdamState& state, const Vector& w,
                                       const Vector& g, double rate) {
  if (state.first_moment.size() != w.size() || g.size() != w.size()) {
    throw DimensionError("adam_step: state/gradient dimensions mismatch");
  }
  AdamState next = state;
  next.step = state.step + 1;
  next.first_moment = state.beta1 * state.first_moment +
                      (1.0 - state.beta1) * g;
  next.second_moment = state.beta2 * state.second_moment +
                       (1.0 - state.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(next.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(next.step));
  const Vector m_hat = next.first_moment / c1;
  const Vector v_hat = next.second_moment / c2;
  const Vector update =
      m_hat.array() / (v_hat.array().sqrt() + state.eps);
  return {w - rate * update.matrix(), std::move(next)};
}

Trajectory run_training(const data::BatchSet& batches, const Vector& w1,
                        const TrainConfig& config,
                        const TrainingReferences& references, int threads) {
  validate_schedule(config);
  if (batches.batches.empty()) {
    throw InvalidInputError("run_training: empty batch set");
  }
  if (config.precondition && !batches.calibration &&
      batches.injected_variance == 0.0) {
    std::cerr << "run_training: warning: preconditioning on uncalibrated "
                 "batches; S_g may not track the Hessian\n";
  }

  const data::BatchSet& eval =
      references.eval_batches ? *references.eval_batches : batches;
  const bool want_cov = config.precondition ||
                        references.sigma_reference.has_value() ||
                        (references.w0 && references.sigma_reference);

  Trajectory trajectory;
  trajectory.final_w = w1;
  if (config.epochs == 0) return trajectory;

  Vector w = w1;
  AdamState adam = AdamState::zeros(w.size());
  std::optional<gradops::HessianEstimate> cov;

  // Stateless per-epoch preconditioner for the mid-epoch cadence: the first
  // epoch uses a frozen pre-pass at w1, later epochs reuse the covariance
  // collected during the previous epoch.
  if (config.cadence.kind == UpdateCadence::Kind::kPerMBatches && want_cov) {
    cov = gradops::gradient_covariance(
        gradops::gradient_sample(batches, w, threads));
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double rate = rate_at(config.schedule, epoch);

    EpochRecord record;
    record.epoch = epoch;
    record.w = w;
    record.train_loss = mean_batch_loss(eval, w);
    if (!std::isfinite(record.train_loss)) {
      throw DivergenceError(
          "run_training: non-finite loss at epoch " + std::to_string(epoch),
          epoch);
    }
    if (references.test_set) {
      record.test_mse = mean_squared_error(*references.test_set, w);
    }
    if (references.w_reference) {
      record.dist_to_ref = (w - *references.w_reference).norm();
    }

    auto apply_update = [&](const Vector& mean_grad) {
      const Vector g = config.precondition
                           ? precondition(*cov, mean_grad,
                                          config.ridge_damping)
                           : mean_grad;
      if (config.optimizer == Optimizer::kGd) {
        w = gd_step(w, g, rate);
      } else {
        auto [w_next, adam_next] = adam_step(adam, w, g, rate);
        w = std::move(w_next);
        adam = std::move(adam_next);
      }
    };

    if (config.cadence.kind == UpdateCadence::Kind::kPerEpoch) {
      const auto sample = gradops::gradient_sample(batches, w, threads);
      const Vector mean_grad = gradops::gradient_mean(sample);
      if (want_cov) cov = gradops::gradient_covariance(sample);
      if (cov && references.sigma_reference) {
        record.r = linalg::relative_op_distance(cov->s_g,
                                                *references.sigma_reference);
        if (references.w0) {
          const double qf =
              risk::quad_form_estimate(mean_grad, *cov, config.ridge_damping);
          const Vector diff = w - *references.w0;
          const double truth =
              diff.dot(references.sigma_reference->mat() * diff);
          record.risk_error = std::abs(qf - truth);
        }
      }
      apply_update(mean_grad);
    } else {
      // Gradients are evaluated at the evolving parameters; the covariance
      // of these slightly mismatched gradients becomes the next epoch's
      // preconditioner.
      gradops::GradientSample collected;
      collected.w = w;
      collected.n = batches.n;
      Vector group_sum = Vector::Zero(w.size());
      int group_count = 0;
      for (int j = 0; j < batches.k; ++j) {
        const auto& batch = batches.batches[j];
        const Vector g = gradops::batch_gradient(batch.X, batch.y, w);
        collected.gradients.push_back(g);
        group_sum += g;
        ++group_count;
        if (group_count == config.cadence.m || j == batches.k - 1) {
          apply_update(group_sum / group_count);
          group_sum.setZero();
          group_count = 0;
        }
      }
      if (want_cov) {
        const auto next_cov = gradops::gradient_covariance(collected);
        if (references.sigma_reference) {
          record.r = linalg::relative_op_distance(
              next_cov.s_g, *references.sigma_reference);
        }
        cov = next_cov;
      }
    }

    trajectory.records.push_back(std::move(record));
  }
  trajectory.final_w = w;
  return trajectory;
}

double mean_squared_error(const data::RegressionDataset& dataset,
                          const Vector& w) {
  return (dataset.X * w - dataset.y).squaredNorm() /
         static_cast<double>(dataset.n_samples());
}

std::vector<Vector> simulate_preconditioned_quadratic(
    const linalg::SymMatrix& sigma, const Vector& w_star, const Vector& w1,
    const Matrix& inverse_estimate, int steps) {
  std::vector<Vector> path;
  path.reserve(steps + 1);
  path.push_back(w1);
  Vector w = w1;
  for (int t = 0; t < steps; ++t) {
    const Vector grad = sigma.mat() * (w - w_star);
    w = w - inverse_estimate * grad;
    path.push_back(w);
  }
  return path;
}

bool convergence_contraction_check(const linalg::SymMatrix& sigma, double eps,
                                   const std::vector<Vector>& w_path,
                                   const Vector& w_star) {
  (void)sigma;  // the bound holds for any sigma <= I; kept for the call site
  for (std::size_t t = 0; t + 1 < w_path.size(); ++t) {
    const double before = (w_path[t] - w_star).norm();
    const double after = (w_path[t + 1] - w_star).norm();
    if (after > eps * before * (1.0 + 1e-9)) return false;
  }
  return true;
}

}  // namespace gradhess::optim
