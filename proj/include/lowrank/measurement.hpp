#pragma once

// Linear maps A : R^{m x n} -> R^p in three storage forms, the random
// ensembles that generate them, and the Hankel realization encoding.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lowrank/kernels.hpp"
#include "lowrank/linalg.hpp"

namespace lowrank {

enum class EnsembleKind { gaussian, bernoulli, sparse_ternary, projection, factored_gaussian, completion };

std::string_view to_string(EnsembleKind kind);
/// Throws ArgumentError on an unknown name.
EnsembleKind parse_ensemble(std::string_view name);

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::gaussian;
  Index m = 1;
  Index n = 1;
  Index p = 1;
  std::uint64_t seed = 0;
};

struct SampleIndex {
  Index row;
  Index col;
  bool operator==(const SampleIndex&) const = default;
};

class MeasurementOp {
 public:
  /// Row i of a (p x mn) acts on vec(X) (column stacking).
  struct Dense {
    kernels::RowMatrix a;
  };
  /// Component i is u_i' X v_i with u_i = u.col(i), v_i = v.col(i).
  struct Factored {
    Matrix u;  // m x p
    Matrix v;  // n x p
  };
  struct Sampling {
    std::vector<SampleIndex> entries;
  };

  static MeasurementOp dense(kernels::RowMatrix a, Index m, Index n);
  static MeasurementOp factored(Matrix u, Matrix v);
  static MeasurementOp sampling(std::vector<SampleIndex> entries, Index m, Index n);
  /// The p = mn map X -> vec(X).
  static MeasurementOp identity(Index m, Index n);

  Index rows() const { return m_; }
  Index cols() const { return n_; }
  Index measurements() const { return p_; }

  Vector apply(const Matrix& x) const;
  Matrix adjoint(const Vector& y) const;

  /// The p x mn matrix representation.
  kernels::RowMatrix to_dense() const;

  /// c * A, kept in the same storage form where possible.
  MeasurementOp scaled(double c) const;

  const std::variant<Dense, Factored, Sampling>& form() const { return form_; }

 private:
  MeasurementOp(std::variant<Dense, Factored, Sampling> form, Index m, Index n, Index p)
      : form_(std::move(form)), m_(m), n_(n), p_(p) {}

  std::variant<Dense, Factored, Sampling> form_;
  Index m_;
  Index n_;
  Index p_;
};

/// Draws an operator from the ensemble; bit-identical for equal specs.
///
///   gaussian          A_ij ~ N(0, 1/p)
///   bernoulli         A_ij = +-1/sqrt(p) with equal probability
///   sparse_ternary    A_ij = +-sqrt(3/p) w.p. 1/6 each, 0 w.p. 2/3
///   projection        p orthonormal rows of a Gaussian matrix, scaled by sqrt(mn/p)
///   factored_gaussian u_i, v_i with N(0,1) entries, each component scaled by 1/sqrt(p)
///   completion        p distinct entries, uniform without replacement
MeasurementOp sample(const EnsembleSpec& spec);

/// sqrt of the top eigenvalue of A*A by power iteration. The returned value
/// is the running maximum of the Rayleigh quotients, so it never decreases
/// with more iterations and never exceeds ||A||.
double operator_norm_estimate(const MeasurementOp& op, int iters, std::uint64_t seed);

/// hank(h) for h of length 2N + 1: the (N+1) x (N+1) matrix H_ij = h(i + j).
Matrix hankel_matrix(const Vector& h);

/// Impulse response read back from a Hankel-structured X (first row, then
/// last column).
Vector hankel_impulse(const Matrix& x);

struct HankelProblem {
  MeasurementOp op;
  Vector b;
};

/// Encodes "X is Hankel and A h = y" as one dense system on the
/// (N+1) x (N+1) decision variable. input_matrix is p x (N+1) with entry
/// (i, j) multiplying h(j) = X_{0, j}; the first p rows carry the
/// observations, the remaining rows tie every X_{i,j} to the canonical
/// entry on the same antidiagonal with right-hand side 0.
HankelProblem hankel_problem(const Vector& observations, const Matrix& input_matrix);

}  // namespace lowrank
