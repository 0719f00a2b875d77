#pragma once

#include <optional>

#include "lowrank/linalg.hpp"
#include "lowrank/measurement.hpp"

namespace lowrank {

enum class ProjectionMethod {
  automatic,          // factorization for p <= kFactorizationLimit, CG otherwise
  factorization,      // rank-revealing QR of A', reused across calls
  conjugate_gradient  // CG on the p x p normal system A A*
};

struct ProjectionOptions {
  ProjectionMethod method = ProjectionMethod::automatic;
  double feas_tol = 1e-9;  // relative to max(1, ||b||)
  double rank_tol = 1e-10;
  int cg_max_iters = 2000;
};

/// Orthogonal projection onto {X : A(X) = b} and onto ker A.
///
/// The factorization path accepts rank-deficient A as long as the system is
/// consistent; the CG path reports a singular normal system when it breaks
/// down. Inconsistent right-hand sides raise InfeasibleError.
class AffineProjector {
 public:
  static constexpr Index kFactorizationLimit = 1500;

  explicit AffineProjector(const MeasurementOp& op, ProjectionOptions options = {});

  /// Frobenius-nearest Z to x with A(Z) = b.
  Matrix project(const Matrix& x, const Vector& b) const;

  /// Orthogonal projection onto ker A.
  Matrix project_kernel(const Matrix& x) const;

  /// Numeric rank of A (factorization path only; p for CG).
  Index rank() const { return rank_; }

 private:
  // Minimum-norm w with A(w) = r, as an m x n matrix.
  Matrix least_norm_solution(const Vector& r) const;
  Vector solve_normal_cg(const Vector& r) const;

  const MeasurementOp* op_;
  ProjectionOptions options_;
  bool use_factorization_ = true;
  bool sampling_ = false;
  Index rank_ = 0;
  // Row space basis of A (mn x rank) and the triangular factor that maps
  // permuted measurements onto it.
  Matrix row_basis_;
  Matrix r_factor_;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> perm_;
};

/// One-shot projection onto {X : A(X) = b}.
Matrix project_affine(const MeasurementOp& op, const Matrix& x, const Vector& b,
                      ProjectionOptions options = {});

}  // namespace lowrank
