#pragma once

// Dense matrix primitives built on a thin SVD: norms, the nuclear-norm
// subgradient, polar factors and the structural decompositions used by the
// recovery analysis.

#include <Eigen/Dense>

namespace lowrank {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-9;

/// Thin SVD truncated to numeric rank: sigma_i > rank_tol * sigma_1.
struct SvdFactors {
  Matrix u;      // m x k, orthonormal columns
  Vector sigma;  // k, nonincreasing
  Matrix v;      // n x k, orthonormal columns
  double rank_tol = kDefaultRankTol;

  Index rank() const { return sigma.size(); }
  Matrix reconstruct() const;
};

/// Throws ArgumentError when any entry is NaN or infinite.
void require_finite(const Matrix& x, const char* what);

SvdFactors svd(const Matrix& x, double rank_tol = kDefaultRankTol);

/// Number of singular values above rank_tol * sigma_1.
Index numeric_rank(const Matrix& x, double rank_tol = kDefaultRankTol);

/// Frobenius inner product trace(A'B).
double inner(const Matrix& a, const Matrix& b);

double nuclear_norm(const Matrix& x);
double operator_norm(const Matrix& x);
double frobenius_norm(const Matrix& x);

/// Best rank-k approximation (Eckart-Young), 0 <= k <= min(m, n).
Matrix truncated_approx(const Matrix& x, Index k);

/// The W = 0 element U V' of the nuclear-norm subdifferential.
Matrix nuclear_subgradient(const Matrix& x, double rank_tol = kDefaultRankTol);

struct PolarResult {
  Matrix q;  // orthonormal columns
  int iterations = 0;
  double residual = 0.0;  // ||Q'Q - I||_F at exit
};

/// Polar factor of a full-column-rank m x n matrix (m >= n) by the Halley
/// iteration X <- X (X'X + 3I)(3X'X + I)^{-1}, after scaling by 1/||X||.
///
/// Throws SingularSystemError if x is column rank deficient (relative to
/// rank_tol) and NonConvergenceError if max_iter is exhausted.
PolarResult polar_factor_halley(const Matrix& x, int max_iter = 100, double tol = 1e-12,
                                double rank_tol = kDefaultRankTol);

/// B = B1 + B2 with rank(B1) <= 2 rank(A), A B2' = 0, A' B2 = 0 and
/// <B1, B2> = 0.
struct RankPartition {
  Matrix b1;
  Matrix b2;
};

RankPartition rank_partition(const Matrix& a, const Matrix& b, double rank_tol = kDefaultRankTol);

/// True when A B' and A' B both vanish, i.e. A and B have orthogonal row
/// and column spaces and the nuclear norm is additive on them.
bool additive_nuclear_check(const Matrix& a, const Matrix& b);

/// Column-stacking vec: entry (i, j) of an m x n matrix lands at j*m + i.
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Index rows, Index cols);

}  // namespace lowrank
