#include "gradhess/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "gradhess/errors.hpp"
#include "gradhess/rng.hpp"

namespace gradhess::linalg {

namespace {

constexpr Eigen::Index kDenseEigLimit = 512;

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) {
    throw InvalidInputError(std::string(who) + ": non-finite entries");
  }
}

// Power iteration on A^2; the square keeps the iteration convergent even
// when the extreme eigenvalues are +/- the same magnitude.
double power_iteration_abs_max(const Matrix& a) {
  const Eigen::Index d = a.rows();
  RngStream rng(0x5eed5eedULL);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.next_gaussian();
  v.normalize();
  double lambda_sq = 0.0;
  for (int iter = 0; iter < 20000; ++iter) {
    Vector av = a * v;
    Vector a2v = a * av;
    const double norm = a2v.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(a2v);
    v = a2v / norm;
    if (iter > 0 && std::abs(next - lambda_sq) <= 1e-13 * std::abs(next)) {
      lambda_sq = next;
      break;
    }
    lambda_sq = next;
  }
  return std::sqrt(std::max(lambda_sq, 0.0));
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("SymMatrix: matrix must be square");
  }
  if (a.rows() < 1) {
    throw InvalidInputError("SymMatrix: dimension must be >= 1");
  }
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-12 * std::max(scale, 1e-300))) {
    throw InvalidInputError(
        "SymMatrix: asymmetry " + std::to_string(asym) +
        " exceeds 1e-12 of the matrix scale (or entries are not finite)");
  }
  mat_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index d) {
  return from_symmetric(Matrix::Identity(d, d));
}

SymMatrix SymMatrix::zero(Eigen::Index d) {
  return from_symmetric(Matrix::Zero(d, d));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
  return from_symmetric(Matrix(diag.asDiagonal()));
}

SymMatrix SymMatrix::from_symmetric(Matrix a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw DimensionError("SymMatrix: matrix must be square, d >= 1");
  }
  SymMatrix s;
  s.mat_ = std::move(a);
  return s;
}

double operator_norm(const SymMatrix& a) {
  require_finite(a.mat(), "operator_norm");
  if (a.dim() <= kDenseEigLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a.mat(),
                                              Eigen::EigenvaluesOnly);
    const auto& vals = eig.eigenvalues();
    return std::max(std::abs(vals[0]), std::abs(vals[vals.size() - 1]));
  }
  return power_iteration_abs_max(a.mat());
}

double relative_op_distance(const SymMatrix& estimate,
                            const SymMatrix& reference) {
  if (estimate.dim() != reference.dim()) {
    throw DimensionError("relative_op_distance: dimension mismatch");
  }
  const double ref_norm = operator_norm(reference);
  if (ref_norm <= 0.0) {
    throw InvalidInputError(
        "relative_op_distance: reference has zero operator norm");
  }
  const SymMatrix diff =
      SymMatrix::from_symmetric(estimate.mat() - reference.mat());
  return operator_norm(diff) / ref_norm;
}

Vector spd_solve(const SymMatrix& a, const Vector& v) {
  require_finite(a.mat(), "spd_solve");
  if (v.size() != a.dim()) {
    throw DimensionError("spd_solve: vector length does not match matrix");
  }
  Eigen::LDLT<Matrix> ldlt(a.mat());
  const Vector pivots = ldlt.vectorD();
  const double min_pivot = pivots.cwiseAbs().minCoeff();
  const double threshold = 1e-12 * operator_norm(a);
  if (!(min_pivot > threshold)) {
    throw SingularMatrixError(
        "spd_solve: matrix numerically singular, pivot " +
            std::to_string(min_pivot) + " below " +
            std::to_string(threshold),
        min_pivot);
  }
  return ldlt.solve(v);
}

Matrix psd_sqrt(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.mat());
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() *
         eig.eigenvectors().transpose();
}

SpectralReport spectral_report(const SymMatrix& a) {
  require_finite(a.mat(), "spectral_report");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.mat(), Eigen::EigenvaluesOnly);
  const auto& vals = eig.eigenvalues();
  SpectralReport report;
  report.min_eigenvalue = vals[0];
  report.op_norm = std::max(std::abs(vals[0]), std::abs(vals[vals.size() - 1]));
  report.condition_number =
      report.min_eigenvalue > 0.0
          ? report.op_norm / report.min_eigenvalue
          : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace gradhess::linalg
