#pragma once

#include <Eigen/Dense>

namespace gradhess {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace linalg {

/// Symmetric d-by-d real matrix. Symmetry is enforced at construction:
/// asymmetry below 1e-12 times the matrix scale is averaged away, anything
/// larger is rejected. Empirical covariances are symmetric by construction
/// but accumulate roundoff, which this absorbs.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& a);

  static SymMatrix identity(Eigen::Index d);
  static SymMatrix zero(Eigen::Index d);
  static SymMatrix diagonal(const Vector& diag);
  /// Skips the symmetry check; `a` must already be exactly symmetric.
  static SymMatrix from_symmetric(Matrix a);

  Eigen::Index dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }
  double operator()(Eigen::Index i, Eigen::Index j) const {
    return mat_(i, j);
  }

 private:
  SymMatrix() = default;
  Matrix mat_;
};

/// Eigenvalue extremes and condition number of a symmetric matrix.
/// condition_number is +inf unless min_eigenvalue > 0.
struct SpectralReport {
  double op_norm = 0.0;
  double min_eigenvalue = 0.0;
  double condition_number = 0.0;
};

/// Largest absolute eigenvalue. Full eigendecomposition up to d = 512,
/// power iteration beyond that, accurate to 1e-10 relative.
double operator_norm(const SymMatrix& a);

/// ||estimate - reference||_op / ||reference||_op.
double relative_op_distance(const SymMatrix& estimate,
                            const SymMatrix& reference);

/// Solves a * u = v through an LDL^T factorization; never forms the
/// inverse. Throws SingularMatrixError (carrying the offending pivot) when
/// a pivot falls below 1e-12 * ||a||_op.
Vector spd_solve(const SymMatrix& a, const Vector& v);

SpectralReport spectral_report(const SymMatrix& a);

/// Symmetric PSD square root; eigenvalues below zero (roundoff) clamp to 0.
Matrix psd_sqrt(const SymMatrix& a);

}  // namespace linalg
}  // namespace gradhess
