#include <cmath>
#include <random>

#include "doctest.h"
#include "e2tc/linalg.hpp"

using namespace e2tc;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

SymMatrix random_spd(int dim, std::mt19937_64& rng) {
  const Matrix m = random_matrix(dim, dim, rng);
  return SymMatrix(m.transpose() * m);
}

}  // namespace

TEST_CASE("SymMatrix rejects asymmetric input and stores a symmetric copy") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  CHECK_THROWS_AS(SymMatrix{m}, LinalgError);
  Matrix s(2, 2);
  s << 2, 1, 1, 3;
  const SymMatrix a(s);
  CHECK(a(0, 1) == a(1, 0));
  CHECK(a.trace() == doctest::Approx(5.0));
}

TEST_CASE("sym_eig on diagonal and identity matrices") {
  Vector d(2);
  d << 1, 3;
  const Spectrum s = sym_eig(SymMatrix::diagonal(d));
  CHECK(s.eigenvalues(0) == doctest::Approx(3.0));
  CHECK(s.eigenvalues(1) == doctest::Approx(1.0));
  CHECK(std::abs(s.eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.eigenvectors(0, 1)) == doctest::Approx(1.0));

  const Spectrum id = sym_eig(SymMatrix::identity(4));
  for (int i = 0; i < 4; ++i) CHECK(id.eigenvalues(i) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs random SPD matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + trial % 8;
    const SymMatrix a = random_spd(dim, rng);
    const Spectrum s = sym_eig(a);
    const double rel = (s.reconstruct() - a.dense()).norm() / a.dense().norm();
    CHECK(rel < 1e-10);
    const Matrix vtv = s.eigenvectors.transpose() * s.eigenvectors;
    CHECK((vtv - Matrix::Identity(dim, dim)).norm() < 1e-10);
    for (int i = 1; i < dim; ++i) CHECK(s.eigenvalues(i - 1) >= s.eigenvalues(i));
    CHECK(std::abs(s.eigenvalues.sum() - a.trace()) <= 1e-9 * std::abs(a.trace()));
    CHECK(s.eigenvalues(dim - 1) >= -1e-9);
  }
}

TEST_CASE("spd_solve identity cases and residual on random SPD") {
  Vector b(3);
  b << 1, -2, 5;
  CHECK((spd_solve(SymMatrix::identity(3), 0.0, b) - b).norm() == 0.0);
  CHECK((spd_solve(SymMatrix::identity(3), 1.0, b) - b / 2.0).norm() < 1e-15);

  std::mt19937_64 rng(5);
  const SymMatrix a = random_spd(5, rng);
  const Vector rhs = random_matrix(5, 1, rng);
  const Vector x = spd_solve(a, 0.1, rhs);
  CHECK(((a.dense() + 0.1 * Matrix::Identity(5, 5)) * x - rhs).norm() < 1e-10 * rhs.norm());

  const Matrix B = random_matrix(5, 3, rng);
  const Matrix X = spd_solve(a, 0.1, B);
  CHECK(((a.dense() + 0.1 * Matrix::Identity(5, 5)) * X - B).norm() < 1e-10 * B.norm());
}

TEST_CASE("Cholesky jitters a singular matrix once and rejects indefinite input") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  const Cholesky c(SymMatrix(m), 0.0);
  CHECK(c.jittered());

  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(Cholesky(SymMatrix(bad), 0.0), LinalgError);
}

TEST_CASE("spd_inv_sqrt closed forms and product identity") {
  const SymMatrix r1 = spd_inv_sqrt(SymMatrix(3.0 * Matrix::Identity(3, 3)), 1.0);
  CHECK((r1.dense() - 0.5 * Matrix::Identity(3, 3)).norm() < 1e-14);
  const SymMatrix r2 = spd_inv_sqrt(SymMatrix::zeros(2), 4.0);
  CHECK((r2.dense() - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK_THROWS(spd_inv_sqrt(SymMatrix::identity(2), 0.0));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const SymMatrix a = random_spd(4, rng);
    const Matrix s = spd_inv_sqrt(a, 0.5).dense();
    const Matrix prod = s * s * (a.dense() + 0.5 * Matrix::Identity(4, 4));
    CHECK((prod - Matrix::Identity(4, 4)).norm() < 1e-8);
    const Matrix r = spd_sqrt(a, 0.5).dense();
    CHECK((r * s - Matrix::Identity(4, 4)).norm() < 1e-8);
  }
}

TEST_CASE("weighted_norm against closed forms and a naive quadratic form") {
  std::mt19937_64 rng(3);
  const Vector v = random_matrix(4, 1, rng);
  CHECK(weighted_norm(v, SymMatrix::identity(4), 0.0) == doctest::Approx(v.norm()).epsilon(1e-14));

  Vector e(2);
  e << 1, 0;
  Vector d(2);
  d << 4, 9;
  CHECK(weighted_norm(e, SymMatrix::diagonal(d), 0.0) == doctest::Approx(2.0));

  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix a = random_spd(5, rng);
    const Vector x = random_matrix(5, 1, rng);
    double quad = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) quad += x(i) * a.dense()(i, j) * x(j);
    CHECK(weighted_norm(x, a, 0.0) == doctest::Approx(std::sqrt(quad)).epsilon(1e-12));
    const double s = 0.3;
    const double lhs = std::pow(weighted_norm(x, a, s), 2);
    const double rhs = quad + s * x.squaredNorm();
    CHECK(std::abs(lhs - rhs) <= 1e-10 * rhs);
  }
}

TEST_CASE("spectral_norm equals the largest absolute eigenvalue") {
  Vector d(3);
  d << -5, 2, 1;
  CHECK(spectral_norm(SymMatrix::diagonal(d)) == doctest::Approx(5.0));
}
