#include "lowrank/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lowrank/errors.hpp"

namespace lowrank {

AffineProjector::AffineProjector(const MeasurementOp& op, ProjectionOptions options)
    : op_(&op), options_(options) {
  sampling_ = std::holds_alternative<MeasurementOp::Sampling>(op.form());
  if (sampling_) {
    rank_ = op.measurements();
    return;
  }
  use_factorization_ = options_.method == ProjectionMethod::factorization ||
                       (options_.method == ProjectionMethod::automatic &&
                        op.measurements() <= kFactorizationLimit);
  if (!use_factorization_) {
    rank_ = op.measurements();
    return;
  }

  // A' P = Q R, so A = P R' Q' and the first rank columns of Q span the row
  // space of A.
  const Matrix at = op.to_dense().transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(at);
  qr.setThreshold(options_.rank_tol);
  rank_ = qr.rank();
  row_basis_ = qr.householderQ() * Matrix::Identity(at.rows(), rank_);
  r_factor_ = qr.matrixR().topLeftCorner(rank_, rank_).triangularView<Eigen::Upper>();
  perm_ = qr.colsPermutation();
}

Vector AffineProjector::solve_normal_cg(const Vector& r) const {
  // CG on (A A*) w = r.
  const auto normal = [this](const Vector& w) { return op_->apply(op_->adjoint(w)); };
  Vector w = Vector::Zero(r.size());
  Vector res = r;
  Vector dir = res;
  double rr = res.squaredNorm();
  const double stop = 1e-28 * std::max(1.0, rr);
  double top_ratio = 0.0;  // largest Rayleigh quotient seen, a lower bound on ||A||^2
  for (int it = 0; it < options_.cg_max_iters && rr > stop; ++it) {
    const Vector q = normal(dir);
    const double curvature = dir.dot(q);
    const double ratio = curvature / dir.squaredNorm();
    top_ratio = std::max(top_ratio, ratio);
    if (!(ratio > 1e-14 * top_ratio) || !(curvature > 0.0)) {
      throw SingularSystemError("project_affine: normal system A A* is singular (CG breakdown at iteration " +
                                std::to_string(it) + ")");
    }
    const double alpha = rr / curvature;
    w += alpha * dir;
    res -= alpha * q;
    const double rr_next = res.squaredNorm();
    dir = res + (rr_next / rr) * dir;
    rr = rr_next;
  }
  return w;
}

Matrix AffineProjector::least_norm_solution(const Vector& r) const {
  const Index m = op_->rows();
  const Index n = op_->cols();
  if (sampling_) {
    Matrix out = Matrix::Zero(m, n);
    const auto& entries = std::get<MeasurementOp::Sampling>(op_->form()).entries;
    for (std::size_t i = 0; i < entries.size(); ++i) out(entries[i].row, entries[i].col) = r(static_cast<Index>(i));
    return out;
  }
  if (!use_factorization_) return op_->adjoint(solve_normal_cg(r));

  const Vector permuted = perm_.transpose() * r;
  const Vector w = r_factor_.transpose().triangularView<Eigen::Lower>().solve(permuted.head(rank_));
  return unvec(row_basis_ * w, m, n);
}

Matrix AffineProjector::project(const Matrix& x, const Vector& b) const {
  if (b.size() != op_->measurements()) {
    throw ArgumentError("project_affine: b has length " + std::to_string(b.size()) + ", expected " +
                        std::to_string(op_->measurements()));
  }
  const Vector residual = op_->apply(x) - b;
  Matrix z = x - least_norm_solution(residual);
  if (sampling_) {
    // Exact: overwrite the sampled entries.
    const auto& entries = std::get<MeasurementOp::Sampling>(op_->form()).entries;
    for (std::size_t i = 0; i < entries.size(); ++i) z(entries[i].row, entries[i].col) = b(static_cast<Index>(i));
    return z;
  }
  const double infeas = (op_->apply(z) - b).norm();
  const double limit = options_.feas_tol * std::max(1.0, b.norm());
  if (!(infeas <= limit)) {
    throw InfeasibleError("project_affine: system A(X) = b is inconsistent (residual " +
                          std::to_string(infeas) + " after projection, tolerance " +
                          std::to_string(limit) + ")");
  }
  return z;
}

Matrix AffineProjector::project_kernel(const Matrix& x) const {
  if (sampling_) {
    Matrix z = x;
    for (const auto& e : std::get<MeasurementOp::Sampling>(op_->form()).entries) z(e.row, e.col) = 0.0;
    return z;
  }
  if (!use_factorization_) return x - op_->adjoint(solve_normal_cg(op_->apply(x)));
  const Vector v = vec(x);
  return unvec(v - row_basis_ * (row_basis_.transpose() * v), x.rows(), x.cols());
}

Matrix project_affine(const MeasurementOp& op, const Matrix& x, const Vector& b, ProjectionOptions options) {
  return AffineProjector(op, options).project(x, b);
}

}  // namespace lowrank
