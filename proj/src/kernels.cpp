#include "lowrank/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace lowrank::kernels {

namespace {

// Column blocks small enough to stay in cache across the row sweep.
constexpr Index kColumnBlock = 256;

}  // namespace

Vector dense_apply(const RowMatrix& a, const Vector& x) {
  const Index p = a.rows();
  Vector out(p);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < p; ++i) out(i) = a.row(i).dot(x);
  return out;
}

Vector dense_apply_serial(const RowMatrix& a, const Vector& x) {
  Vector out(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < a.cols(); ++j) acc += a(i, j) * x(j);
    out(i) = acc;
  }
  return out;
}

Vector dense_adjoint(const RowMatrix& a, const Vector& y) {
  const Index p = a.rows();
  const Index d = a.cols();
  Vector out = Vector::Zero(d);
  const Index blocks = (d + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const Index j0 = blk * kColumnBlock;
    const Index len = std::min(kColumnBlock, d - j0);
    auto seg = out.segment(j0, len);
    for (Index i = 0; i < p; ++i) seg.noalias() += y(i) * a.row(i).segment(j0, len).transpose();
  }
  return out;
}

Vector dense_adjoint_serial(const RowMatrix& a, const Vector& y) {
  Vector out = Vector::Zero(a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out(j) += y(i) * a(i, j);
  }
  return out;
}

Vector factored_apply(const Matrix& u, const Matrix& v, const Matrix& x) {
  const Index p = u.cols();
  Vector out(p);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < p; ++i) out(i) = u.col(i).dot(x * v.col(i));
  return out;
}

Vector factored_apply_serial(const Matrix& u, const Matrix& v, const Matrix& x) {
  Vector out(u.cols());
  for (Index i = 0; i < u.cols(); ++i) {
    double acc = 0.0;
    for (Index r = 0; r < x.rows(); ++r) {
      double row = 0.0;
      for (Index c = 0; c < x.cols(); ++c) row += x(r, c) * v(c, i);
      acc += u(r, i) * row;
    }
    out(i) = acc;
  }
  return out;
}

Matrix factored_adjoint(const Matrix& u, const Matrix& v, const Vector& y) {
  const Index n = v.rows();
  Matrix out(u.rows(), n);
  const Matrix weighted = u * y.asDiagonal();
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < n; ++c) out.col(c).noalias() = weighted * v.row(c).transpose();
  return out;
}

Matrix factored_adjoint_serial(const Matrix& u, const Matrix& v, const Vector& y) {
  Matrix out = Matrix::Zero(u.rows(), v.rows());
  for (Index i = 0; i < u.cols(); ++i) {
    for (Index c = 0; c < v.rows(); ++c) {
      for (Index r = 0; r < u.rows(); ++r) out(r, c) += y(i) * u(r, i) * v(c, i);
    }
  }
  return out;
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace lowrank::kernels
