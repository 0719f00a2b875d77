#include "lowrank/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

template <typename Decomposition>
void check_info(const Decomposition& dec) {
  if (dec.info() != Eigen::Success) {
    throw DecompositionError("singular value decomposition did not converge");
  }
}

Vector singular_values(const Matrix& x) {
  if (x.size() == 0) return Vector();
  Eigen::BDCSVD<Matrix> dec(x);
  check_info(dec);
  return dec.singularValues();
}

Index count_above(const Vector& sigma, double rank_tol) {
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  const double cutoff = rank_tol * sigma(0);
  Index k = 0;
  while (k < sigma.size() && sigma(k) > cutoff) ++k;
  return k;
}

}  // namespace

Matrix SvdFactors::reconstruct() const {
  return u * sigma.asDiagonal() * v.transpose();
}

void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) {
    throw ArgumentError(std::string(what) + ": matrix has non-finite entries");
  }
}

SvdFactors svd(const Matrix& x, double rank_tol) {
  require_finite(x, "svd");
  if (!(rank_tol > 0.0)) throw ArgumentError("svd: rank_tol must be positive");

  SvdFactors out;
  out.rank_tol = rank_tol;
  if (x.size() == 0) {
    out.u = Matrix(x.rows(), 0);
    out.v = Matrix(x.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> dec(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  check_info(dec);
  const Index k = count_above(dec.singularValues(), rank_tol);
  out.u = dec.matrixU().leftCols(k);
  out.sigma = dec.singularValues().head(k);
  out.v = dec.matrixV().leftCols(k);
  return out;
}

Index numeric_rank(const Matrix& x, double rank_tol) {
  require_finite(x, "numeric_rank");
  return count_above(singular_values(x), rank_tol);
}

double inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError("inner: dimension mismatch");
  }
  return a.cwiseProduct(b).sum();
}

double nuclear_norm(const Matrix& x) {
  require_finite(x, "nuclear_norm");
  return singular_values(x).sum();
}

double operator_norm(const Matrix& x) {
  require_finite(x, "operator_norm");
  const Vector s = singular_values(x);
  return s.size() == 0 ? 0.0 : s(0);
}

double frobenius_norm(const Matrix& x) {
  require_finite(x, "frobenius_norm");
  return x.norm();
}

Matrix truncated_approx(const Matrix& x, Index k) {
  require_finite(x, "truncated_approx");
  if (k < 0 || k > std::min(x.rows(), x.cols())) {
    throw ArgumentError("truncated_approx: k = " + std::to_string(k) + " outside [0, min(m, n)]");
  }
  if (k == 0) return Matrix::Zero(x.rows(), x.cols());
  Eigen::BDCSVD<Matrix> dec(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  check_info(dec);
  return dec.matrixU().leftCols(k) * dec.singularValues().head(k).asDiagonal() *
         dec.matrixV().leftCols(k).transpose();
}

Matrix nuclear_subgradient(const Matrix& x, double rank_tol) {
  const SvdFactors f = svd(x, rank_tol);
  return f.u * f.v.transpose();
}

PolarResult polar_factor_halley(const Matrix& x, int max_iter, double tol, double rank_tol) {
  require_finite(x, "polar_factor_halley");
  const Index n = x.cols();
  if (x.rows() < n) {
    throw SingularSystemError("polar_factor_halley: a " + std::to_string(x.rows()) + "x" +
                              std::to_string(n) + " matrix cannot have full column rank");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(rank_tol);
  if (x.size() == 0 || qr.rank() < n) {
    throw SingularSystemError("polar_factor_halley: input is column rank deficient");
  }

  const Matrix eye = Matrix::Identity(n, n);
  PolarResult out;
  out.q = x / operator_norm(x);
  for (int it = 0; it <= max_iter; ++it) {
    const Matrix gram = out.q.transpose() * out.q;
    out.residual = (gram - eye).norm();
    out.iterations = it;
    if (out.residual <= tol) return out;
    if (it == max_iter) break;
    // Solve from the right: X (X'X + 3I) (3X'X + I)^{-1}; both factors are
    // polynomials in the symmetric X'X, so they commute.
    const Matrix numer = out.q * (gram + 3.0 * eye);
    const Matrix denom = 3.0 * gram + eye;
    out.q = denom.ldlt().solve(numer.transpose()).transpose();
  }
  throw NonConvergenceError("polar_factor_halley: no convergence in " + std::to_string(max_iter) +
                                " iterations",
                            out.residual);
}

RankPartition rank_partition(const Matrix& a, const Matrix& b, double rank_tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError("rank_partition: dimension mismatch");
  }
  require_finite(a, "rank_partition");
  require_finite(b, "rank_partition");

  // Needs complete orthogonal bases for both sides.
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  check_info(dec);
  const Index r = count_above(dec.singularValues(), rank_tol);
  const Matrix& u = dec.matrixU();
  const Matrix& v = dec.matrixV();

  // In the rotated frame B^ = U'BV, B2 keeps only the block that is
  // orthogonal to both the column and row space of A.
  const Matrix rotated = u.transpose() * b * v;
  Matrix lower = Matrix::Zero(rotated.rows(), rotated.cols());
  const Index mr = rotated.rows() - r;
  const Index nr = rotated.cols() - r;
  lower.bottomRightCorner(mr, nr) = rotated.bottomRightCorner(mr, nr);

  RankPartition out;
  out.b2 = u * lower * v.transpose();
  out.b1 = u * (rotated - lower) * v.transpose();
  return out;
}

bool additive_nuclear_check(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError("additive_nuclear_check: dimension mismatch");
  }
  const double tol = 1e-9 * std::max(1.0, a.norm() * b.norm());
  return (a * b.transpose()).norm() <= tol && (a.transpose() * b).norm() <= tol;
}

Vector vec(const Matrix& x) {
  // Eigen storage is column-major, which is exactly column stacking.
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw ArgumentError("unvec: length does not match shape");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace lowrank
