#pragma once

// Empirical restricted-isometry diagnostics. Everything here produces LOWER
// bounds on the restricted isometry constant
//     delta_r = min { d : (1-d)||X||_F <= ||A(X)|| <= (1+d)||X||_F, rank X <= r }
// by exhibiting low-rank matrices with large distortion. Computing delta_r
// exactly is intractable.

#include <cstdint>
#include <optional>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/measurement.hpp"

namespace lowrank {

struct RipEstimate {
  int r = 0;
  double delta_lower = 0.0;
  int trials = 0;
  Matrix worst_case;  // unit Frobenius norm, rank <= r
  bool refined = false;
  // ||A(X)|| for the unit-Frobenius sample of each trial, in trial order.
  std::vector<double> sample_gains;
};

/// |‖A(X)‖ / ‖X‖_F - 1|.
double distortion(const MeasurementOp& op, const Matrix& x);

/// Max distortion over `trials` samples X = G H' (Gaussian m x r, n x r
/// factors, seeds derived per trial so a longer run extends a shorter one),
/// optionally followed by 200 steps of alternating gradient ascent on
/// (G, H) from the worst sample.
RipEstimate estimate_delta_lower(const MeasurementOp& op, int r, int trials, std::uint64_t seed,
                                 bool refine = false);

/// Lower bounds for r = 1..r_max from nested samples: the rank-r sample of
/// a trial uses the first r columns of that trial's factors, and each entry
/// also takes the max of the previous one, so the sequence is nondecreasing.
std::vector<double> monotonicity_check(const MeasurementOp& op, int r_max, int trials, std::uint64_t seed);

/// ||P1 - P2|| for orthogonal projection matrices (the sine of the largest
/// principal angle when ranks agree).
double subspace_distance(const Matrix& p1, const Matrix& p2);

struct PerturbationReport {
  bool holds = true;
  double rho = 0.0;             // distance between the two subspaces
  double op_norm = 0.0;         // estimate of ||A||
  double bound = 0.0;           // delta + (1 + ||A||) rho
  double max_distortion = 0.0;  // over the samples drawn from U2
  std::optional<Matrix> violating_sample;
};

/// Samples matrices from span(u2_basis) and checks that their distortion
/// stays below delta + (1 + ||A||) * rho(U1, U2) (with 1e-6 slack).
///
/// Bases are mn x d matrices whose columns are vec'd matrices. delta must
/// bound the distortion on span(u1_basis); this is verified exactly (the
/// distortion over a subspace is read off the singular values of A Q1) and
/// an ArgumentError is raised otherwise.
PerturbationReport perturbation_bound_check(const MeasurementOp& op, const Matrix& u1_basis,
                                            const Matrix& u2_basis, double delta, int samples,
                                            std::uint64_t seed);

}  // namespace lowrank
