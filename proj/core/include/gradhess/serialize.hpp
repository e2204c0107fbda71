#pragma once

#include <string>

#include "gradhess/data.hpp"
#include "gradhess/estimator.hpp"
#include "gradhess/gradops.hpp"
#include "gradhess/optim.hpp"

namespace gradhess::serialize {

/// Shortest round-trippable decimal (17 significant digits).
std::string format_double(double value);

/// Writes via a temporary file in the same directory plus rename, so
/// readers never observe a partial file.
void write_text_atomic(const std::string& path, const std::string& content);

std::string to_string(gradops::ReferenceKind kind);

/// Dense matrix as CSV rows.
std::string matrix_csv(const Matrix& m);

/// Dense binary layout: row-major 64-bit floats at `path` plus a JSON
/// sidecar `path`.json recording {rows, cols, dtype, order}.
void write_matrix_binary(const std::string& path, const Matrix& m);

/// Sweep rows: axis,value,repeat,seed,r,reference_kind,k,n,d,
/// injected_variance. Aggregate rows use repeat = -1 (mean) and -2 (std).
std::string sweep_csv(const estimator::SweepResult& result);
std::string sweep_json(const estimator::SweepResult& result);

/// estimator,r,reference_kind,k,n rows for the three-way ablation.
std::string comparison_csv(const estimator::EstimatorComparison& comparison);

/// epoch,loss,test_mse,dist_to_ref,r,risk_error rows.
std::string trajectory_csv(const optim::Trajectory& trajectory);
std::string trajectory_json(const optim::Trajectory& trajectory,
                            const optim::TrainConfig& config);

std::string provenance_json(const data::Provenance& provenance);

std::string estimate_json(const gradops::HessianEstimate& estimate);

}  // namespace gradhess::serialize
