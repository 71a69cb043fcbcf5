#pragma once

// Small dense symmetric / PSD linear algebra shared by every other module.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace e2tc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense symmetric matrix. Construction from a general matrix checks symmetry
/// up to a relative tolerance and stores the exactly symmetrized part.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix zeros(std::size_t dim);
  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(const Vector& diag);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Matrix& dense() const { return m_; }
  double trace() const { return m_.trace(); }

  SymMatrix shifted(double shift) const;

 private:
  Matrix m_;
};

struct Spectrum {
  Vector eigenvalues;  // descending
  Matrix eigenvectors; // columns, orthonormal

  Matrix reconstruct() const;
};

/// Cyclic Jacobi eigensolver. Converges when the off-diagonal Frobenius norm
/// drops below 1e-12 * ||A||_F; throws after 100 sweeps.
Spectrum sym_eig(const SymMatrix& a);

/// Cholesky factor of A + shift*I. On a non-positive pivot the factorization is
/// retried once with jitter 1e-12 * trace / dim, then gives up.
class Cholesky {
 public:
  Cholesky(const SymMatrix& a, double shift);

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  const Matrix& lower() const { return l_; }
  bool jittered() const { return jittered_; }

 private:
  Matrix l_;
  bool jittered_ = false;
};

Vector spd_solve(const SymMatrix& a, double shift, const Vector& b);
Matrix spd_solve(const SymMatrix& a, double shift, const Matrix& b);

/// (A + shift*I)^{-1/2}; shift must be positive.
SymMatrix spd_inv_sqrt(const SymMatrix& a, double shift);
/// (A + shift*I)^{1/2} with negative eigenvalues (round-off) clamped to zero.
SymMatrix spd_sqrt(const SymMatrix& a, double shift);

/// sqrt(v^T (A + shift*I) v).
double weighted_norm(const Vector& v, const SymMatrix& a, double shift);

/// Largest absolute eigenvalue.
double spectral_norm(const SymMatrix& a);

}  // namespace e2tc
