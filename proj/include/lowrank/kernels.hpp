#pragma once

// Data-parallel kernels behind MeasurementOp. Each OpenMP kernel has a plain
// serial reference that walks the same arithmetic with explicit loops; tests
// compare the two and bench/ times them against each other.
//
// Every parallel kernel assigns each output entry to exactly one thread and
// accumulates it in a fixed order, so results do not depend on the thread
// count.

#include <Eigen/Dense>

#include "lowrank/linalg.hpp"

namespace lowrank::kernels {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// out = A x for a row-major p x D matrix.
Vector dense_apply(const RowMatrix& a, const Vector& x);
Vector dense_apply_serial(const RowMatrix& a, const Vector& x);

/// out = A' y.
Vector dense_adjoint(const RowMatrix& a, const Vector& y);
Vector dense_adjoint_serial(const RowMatrix& a, const Vector& y);

/// out_i = u_i' X v_i where u_i, v_i are the columns of u (m x p), v (n x p).
Vector factored_apply(const Matrix& u, const Matrix& v, const Matrix& x);
Vector factored_apply_serial(const Matrix& u, const Matrix& v, const Matrix& x);

/// out = sum_i y_i u_i v_i'.
Matrix factored_adjoint(const Matrix& u, const Matrix& v, const Vector& y);
Matrix factored_adjoint_serial(const Matrix& u, const Matrix& v, const Vector& y);

/// Number of threads the parallel kernels will use.
int max_threads();
void set_threads(int n);

}  // namespace lowrank::kernels
