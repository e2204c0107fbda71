#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradhess/errors.hpp"
#include "gradhess/linalg.hpp"
#include "gradhess/rng.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gradhess;
using linalg::SymMatrix;

TEST_CASE("operator_norm on identity and diagonal matrices") {
  CHECK(linalg::operator_norm(SymMatrix::identity(3)) == doctest::Approx(1.0));
  Vector diag(2);
  diag << 4.0, 1.0;
  CHECK(linalg::operator_norm(SymMatrix::diagonal(diag)) ==
        doctest::Approx(4.0));
}

TEST_CASE("operator_norm matches the characteristic-polynomial eigensolver") {
  RngStream stream(42);
  for (int trial = 0; trial < 25; ++trial) {
    const auto a = testutil::random_symmetric(5, stream);
    const double expected = oracles::charpoly_operator_norm(a);
    const double actual = linalg::operator_norm(a);
    CHECK(actual == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("operator_norm is even: ||A|| == ||-A||") {
  RngStream stream(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testutil::random_symmetric(4, stream);
    const auto neg = SymMatrix::from_symmetric(-a.mat());
    CHECK(linalg::operator_norm(a) ==
          doctest::Approx(linalg::operator_norm(neg)).epsilon(1e-14));
  }
}

TEST_CASE("operator_norm rejects non-finite entries") {
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto a = SymMatrix::from_symmetric(bad);
  CHECK_THROWS_AS(linalg::operator_norm(a), InvalidInputError);
  CHECK_THROWS_AS(linalg::spectral_report(a), InvalidInputError);
}

TEST_CASE("operator_norm iterative path agrees with dense path") {
  // d > 512 exercises power iteration; embed a known spectrum.
  const int d = 600;
  RngStream stream(11);
  Vector diag(d);
  for (int i = 0; i < d; ++i) diag[i] = stream.next_double() * 2.0 - 1.0;
  diag[17] = 3.5;   // dominant
  diag[400] = -3.2; // opposite sign, close in magnitude
  const auto a = SymMatrix::diagonal(diag);
  CHECK(linalg::operator_norm(a) == doctest::Approx(3.5).epsilon(1e-9));
}

TEST_CASE("relative_op_distance basics") {
  RngStream stream(3);
  const auto sigma = testutil::random_spd(4, stream);
  CHECK(linalg::relative_op_distance(sigma, sigma) == doctest::Approx(0.0));
  const auto twice = SymMatrix::from_symmetric(2.0 * sigma.mat());
  CHECK(linalg::relative_op_distance(twice, sigma) == doctest::Approx(1.0));
  CHECK(linalg::relative_op_distance(SymMatrix::zero(4), sigma) ==
        doctest::Approx(1.0));

  CHECK_THROWS_AS(linalg::relative_op_distance(SymMatrix::identity(3), sigma),
                  DimensionError);
  CHECK_THROWS_AS(linalg::relative_op_distance(sigma, SymMatrix::zero(4)),
                  InvalidInputError);
}

TEST_CASE("relative_op_distance obeys the triangle-derived bound") {
  RngStream stream(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testutil::random_symmetric(4, stream);
    const auto b = testutil::random_symmetric(4, stream);
    const auto c = testutil::random_spd(4, stream);
    const double lhs = linalg::relative_op_distance(a, c);
    const double ab = linalg::operator_norm(
        SymMatrix::from_symmetric(a.mat() - b.mat()));
    const double bc = linalg::operator_norm(
        SymMatrix::from_symmetric(b.mat() - c.mat()));
    const double rhs = (ab + bc) / linalg::operator_norm(c);
    CHECK(lhs <= rhs * (1.0 + 1e-12));
  }
}

TEST_CASE("spd_solve identity and diagonal cases") {
  Vector v(2);
  v << 2.0, 4.0;
  CHECK((linalg::spd_solve(SymMatrix::identity(2), v) - v).norm() == 0.0);

  Vector diag(2);
  diag << 2.0, 4.0;
  const Vector u = linalg::spd_solve(SymMatrix::diagonal(diag), v);
  CHECK(u[0] == doctest::Approx(1.0));
  CHECK(u[1] == doctest::Approx(1.0));
}

TEST_CASE("spd_solve recovers a known solution") {
  RngStream stream(9);
  const auto a = testutil::random_spd(6, stream);
  const Vector u = testutil::random_vector(6, stream);
  const Vector v = a.mat() * u;
  const Vector solved = linalg::spd_solve(a, v);
  CHECK((solved - u).norm() <= 1e-8 * u.norm());
}

TEST_CASE("spd_solve residual stays small up to condition 1e6") {
  RngStream stream(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 5;
    const Matrix g = testutil::random_matrix(d, d, stream);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Vector eigs(d);
    for (int i = 0; i < d; ++i) {
      eigs[i] = std::pow(1e-6, 1.0 - static_cast<double>(i) / (d - 1));
    }
    const Matrix m = q * eigs.asDiagonal() * q.transpose();
    const auto a = SymMatrix(0.5 * (m + m.transpose()));
    const Vector u = testutil::random_vector(d, stream);
    const Vector v = a.mat() * u;
    const Vector solved = linalg::spd_solve(a, v);
    CHECK((a.mat() * solved - v).norm() <= 1e-8 * v.norm());
  }
}

TEST_CASE("spd_solve reports the offending pivot for singular input") {
  Vector diag(3);
  diag << 1.0, 2.0, 0.0;
  const auto a = SymMatrix::diagonal(diag);
  Vector v(3);
  v << 1.0, 1.0, 1.0;
  try {
    linalg::spd_solve(a, v);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& err) {
    CHECK(std::abs(err.pivot()) <= 1e-12 * 2.0);
  }
}

TEST_CASE("spectral_report extremes and condition number") {
  Vector diag(2);
  diag << 9.0, 1.0;
  const auto report = linalg::spectral_report(SymMatrix::diagonal(diag));
  CHECK(report.op_norm == doctest::Approx(9.0));
  CHECK(report.min_eigenvalue == doctest::Approx(1.0));
  CHECK(report.condition_number == doctest::Approx(9.0));

  const auto eye = linalg::spectral_report(SymMatrix::identity(4));
  CHECK(eye.condition_number == doctest::Approx(1.0));

  Vector rank_def(2);
  rank_def << 1.0, 0.0;
  const auto flagged = linalg::spectral_report(SymMatrix::diagonal(rank_def));
  CHECK(!std::isfinite(flagged.condition_number));
}

TEST_CASE("SymMatrix symmetrizes small asymmetry and rejects large") {
  Matrix nearly = Matrix::Identity(2, 2);
  nearly(0, 1) = 1e-14;
  const SymMatrix fixed(nearly);
  CHECK(fixed(0, 1) == fixed(1, 0));

  Matrix skewed = Matrix::Identity(2, 2);
  skewed(0, 1) = 0.5;
  CHECK_THROWS_AS(SymMatrix{skewed}, InvalidInputError);
}
