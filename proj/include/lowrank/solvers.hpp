#pragma once

// Minimum nuclear norm solvers for A(X) = b:
//
//  * projected subgradient: X <- Pi(X - s_k Y_k) with Y_k = U V' from the
//    thin SVD (or the Halley polar iteration) and Pi the affine projection;
//  * method of multipliers on the factored problem
//        min 1/2 (||L||_F^2 + ||R||_F^2)  s.t.  A(L R') = b,
//    whose augmented Lagrangian is
//        La = 1/2 (||L||^2 + ||R||^2) - y'(A(LR') - b) + sigma/2 ||A(LR') - b||^2.
//
// Both return a SolveResult; certificates are checked against the
// optimality conditions A(X) = b, A*(z) in d||X||_*.

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "lowrank/linalg.hpp"
#include "lowrank/measurement.hpp"
#include "lowrank/projection.hpp"

namespace lowrank {

enum class SolveStatus { converged, max_iters, stalled };

std::string_view to_string(SolveStatus status);
SolveStatus parse_status(std::string_view name);

struct Certificate {
  Vector z;
  double dual_opnorm = 0.0;  // ||A*(z)||
  // Numeric rank of y -> [A*(y) R; A*(y)' L] at the final factors (ALM
  // only, -1 otherwise). Equal to p when the map has a trivial kernel; at a
  // rank r solution it is at most r(m + n - r).
  Index multiplier_map_rank = -1;
};

struct SolveResult {
  Matrix x;
  double objective = 0.0;      // ||x||_*
  double feas_residual = 0.0;  // ||A(x) - b||
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iters;
  std::optional<Certificate> certificate;
  std::optional<Matrix> left;   // L, m x r_d
  std::optional<Matrix> right;  // R, n x r_d
};

enum class StepSchedule {
  harmonic,     // s_k = step0 / k
  inverse_sqrt  // s_k = step0 / sqrt(k)
};

struct SubgradientConfig {
  int max_iters = 2000;
  double step0 = 1.0;
  StepSchedule step_schedule = StepSchedule::harmonic;
  double feas_tol = 1e-9;  // relative to max(1, ||b||)
  double obj_tol = 1e-10;  // relative improvement of the best objective over the window
  int window = 50;
  bool use_polar_iteration = false;  // Halley polar factor instead of the SVD when possible
  ProjectionMethod projection = ProjectionMethod::automatic;
};

/// s_k for k >= 1.
double step_size(const SubgradientConfig& cfg, int k);

SolveResult solve_subgradient(const MeasurementOp& op, const Vector& b, const SubgradientConfig& cfg = {});

struct AlmProgress {
  int outer = 0;
  int inner_iterations = 0;  // cumulative
  bool inner_converged = false;
  double residual = 0.0;  // ||A(LR') - b|| on the working system
  double sigma = 0.0;
};

struct AlmConfig {
  int factor_rank = 0;  // r_d; 0 picks default_factor_rank
  double sigma0 = 1.0;
  double sigma_growth = 10.0;
  double residual_decrease = 0.25;  // grow sigma unless the residual shrinks by this factor
  double sigma_max = 1e6;  // stop (stalled) instead of growing sigma beyond this
  int max_outer = 60;
  double inner_grad_tol = 1e-7;  // relative to max(1, ||(L, R)||_F)
  int inner_max_iters = 5000;
  double feas_tol = 1e-9;  // relative to max(1, ||b||)
  double armijo = 1e-4;
  // Solve on the equivalent system with orthonormal rows (same feasible
  // set); the returned certificate refers to the original A.
  bool whiten = true;
  std::function<void(const AlmProgress&)> on_outer;  // called after each multiplier update
};

/// min(min(m, n), r* + 2) with r* the smallest rank whose manifold
/// dimension r(m + n - r) is at least p.
int default_factor_rank(Index m, Index n, Index p);

SolveResult solve_alm(const MeasurementOp& op, const Vector& b, const AlmConfig& cfg = {},
                      std::uint64_t seed = 0);

/// Value and gradients of the augmented Lagrangian at (L, R; y, sigma).
struct LagrangianEval {
  double value = 0.0;
  Matrix grad_left;
  Matrix grad_right;
  Vector residual;  // A(LR') - b
};

LagrangianEval augmented_lagrangian(const MeasurementOp& op, const Vector& b, const Matrix& left,
                                    const Matrix& right, const Vector& y, double sigma,
                                    bool with_gradient = true);

enum class OptimalityFailure {
  none,
  infeasible,         // ||A(x) - b|| > tol
  tangent_mismatch,   // ||U'GV - I||_F > tol
  row_leak,           // ||U'G(I - VV')||_F > tol
  column_leak,        // ||(I - UU')GV||_F > tol
  complement_norm     // ||(I - UU')G(I - VV')|| > 1 + tol
};

std::string_view to_string(OptimalityFailure failure);

struct OptimalityReport {
  bool optimal = false;
  OptimalityFailure failure = OptimalityFailure::none;
  double value = 0.0;  // the quantity that failed (or the largest checked)

  explicit operator bool() const { return optimal; }
};

/// Checks A(x) = b and A*(z) in d||x||_*, using the thin SVD of x at the
/// relative rank threshold rank_tol.
OptimalityReport check_optimality(const MeasurementOp& op, const Matrix& x, const Vector& b,
                                  const Vector& z, double tol, double rank_tol = 1e-6);

/// b'z; a lower bound on ||X||_* for every feasible X when ||A*(z)|| <= 1.
double dual_value(const Vector& b, const Vector& z);

/// z / max(1, ||A*(z)||), which is dual feasible.
Vector admissible_certificate(const MeasurementOp& op, const Vector& z);

/// ||x||_* - b'z for the admissible rescaling of z.
double duality_gap(const MeasurementOp& op, const Matrix& x, const Vector& b, const Vector& z);

}  // namespace lowrank
