#include "e2tc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace e2tc {

namespace {

constexpr int kMaxJacobiSweeps = 100;
constexpr double kJacobiTol = 1e-12;
constexpr double kSymmetryTol = 1e-10;

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

bool try_cholesky(const Matrix& a, Matrix& l, Eigen::Index& failed_pivot) {
  const Eigen::Index n = a.rows();
  l.setZero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) {
      failed_pivot = j;
      return false;
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw LinalgError("SymMatrix: matrix must be square with dim >= 1");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
    throw LinalgError("SymMatrix: matrix is not symmetric");
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zeros(std::size_t dim) {
  return SymMatrix(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  return SymMatrix(Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) { return SymMatrix(Matrix(diag.asDiagonal())); }

SymMatrix SymMatrix::shifted(double shift) const {
  Matrix m = m_;
  m.diagonal().array() += shift;
  return SymMatrix(m);
}

Matrix Spectrum::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

Spectrum sym_eig(const SymMatrix& input) {
  Matrix a = input.dense();
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  const double threshold = kJacobiTol * a.norm();

  int sweep = 0;
  for (; sweep < kMaxJacobiSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= threshold) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == kMaxJacobiSweeps && off_diagonal_norm(a) > threshold) {
    std::ostringstream msg;
    msg << "sym_eig: no convergence after " << kMaxJacobiSweeps
        << " sweeps, off-diagonal residual " << off_diagonal_norm(a);
    throw LinalgError(msg.str());
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  Spectrum out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    out.eigenvectors.col(k) = v.col(src);
  }
  return out;
}

Cholesky::Cholesky(const SymMatrix& a, double shift) {
  if (shift < 0.0) throw LinalgError("Cholesky: shift must be nonnegative");
  Matrix m = a.dense();
  m.diagonal().array() += shift;
  Eigen::Index pivot = 0;
  if (try_cholesky(m, l_, pivot)) return;

  const double n = static_cast<double>(m.rows());
  const double jitter = 1e-12 * std::max(m.trace(), 0.0) / n;
  if (jitter > 0.0) {
    m.diagonal().array() += jitter;
    if (try_cholesky(m, l_, pivot)) {
      jittered_ = true;
      return;
    }
  }
  std::ostringstream msg;
  msg << "Cholesky: singular system, non-positive pivot at index " << pivot;
  throw LinalgError(msg.str());
}

Vector Cholesky::solve(const Vector& b) const {
  if (b.size() != l_.rows()) throw LinalgError("Cholesky::solve: dimension mismatch");
  const auto lower = l_.triangularView<Eigen::Lower>();
  Vector y = lower.solve(b);
  return lower.transpose().solve(y);
}

Matrix Cholesky::solve(const Matrix& b) const {
  if (b.rows() != l_.rows()) throw LinalgError("Cholesky::solve: dimension mismatch");
  const auto lower = l_.triangularView<Eigen::Lower>();
  Matrix y = lower.solve(b);
  return lower.transpose().solve(y);
}

Vector spd_solve(const SymMatrix& a, double shift, const Vector& b) {
  return Cholesky(a, shift).solve(b);
}

Matrix spd_solve(const SymMatrix& a, double shift, const Matrix& b) {
  return Cholesky(a, shift).solve(b);
}

SymMatrix spd_inv_sqrt(const SymMatrix& a, double shift) {
  if (!(shift > 0.0)) throw LinalgError("spd_inv_sqrt: shift must be positive");
  const Spectrum s = sym_eig(a);
  Vector scaled(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < scaled.size(); ++i) {
    const double lam = std::max(s.eigenvalues(i), 0.0) + shift;
    scaled(i) = 1.0 / std::sqrt(lam);
  }
  return SymMatrix(s.eigenvectors * scaled.asDiagonal() * s.eigenvectors.transpose());
}

SymMatrix spd_sqrt(const SymMatrix& a, double shift) {
  const Spectrum s = sym_eig(a);
  Vector scaled(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < scaled.size(); ++i)
    scaled(i) = std::sqrt(std::max(s.eigenvalues(i) + shift, 0.0));
  return SymMatrix(s.eigenvectors * scaled.asDiagonal() * s.eigenvectors.transpose());
}

double weighted_norm(const Vector& v, const SymMatrix& a, double shift) {
  if (static_cast<std::size_t>(v.size()) != a.dim())
    throw LinalgError("weighted_norm: dimension mismatch");
  const double q = v.dot(a.dense() * v) + shift * v.squaredNorm();
  if (q < -1e-9) throw LinalgError("weighted_norm: quadratic form negative, matrix is not PSD");
  return std::sqrt(std::max(q, 0.0));
}

double spectral_norm(const SymMatrix& a) {
  const Spectrum s = sym_eig(a);
  return s.eigenvalues.cwiseAbs().maxCoeff();
}

}  // namespace e2tc
