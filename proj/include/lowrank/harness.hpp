#pragma once

// Recovery experiments: phase-transition grids over (n, p, r), the
// error-vs-measurements curve on a structured image, and minimum-order
// realization from random input/output data.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/measurement.hpp"
#include "lowrank/solvers.hpp"

namespace lowrank {

enum class SolverKind { alm, subgradient };

std::string_view to_string(SolverKind kind);
SolverKind parse_solver(std::string_view name);

/// Recovered when ||X - Y0||_F / ||Y0||_F < success_tol.
inline constexpr double kDefaultSuccessTol = 1e-3;

struct SolverOptions {
  SolverKind kind = SolverKind::alm;
  AlmConfig alm;
  SubgradientConfig subgradient;
};

/// Runs the chosen solver; the seed only matters for ALM initialization.
SolveResult run_solver(const MeasurementOp& op, const Vector& b, const SolverOptions& options,
                       std::uint64_t seed);

struct PhaseGridSpec {
  Index n = 20;
  std::vector<Index> p_values;
  int trials_per_cell = 10;
  EnsembleKind ensemble = EnsembleKind::gaussian;
  SolverOptions solver;
  std::uint64_t base_seed = 0;
  double success_tol = kDefaultSuccessTol;
  bool record_time = true;  // false writes wall_time = 0 for byte-stable output
};

/// {r >= 1 : r(2n - r) <= p}.
std::vector<int> admissible_ranks(Index n, Index p);

/// p values n^2/steps, 2n^2/steps, ..., n^2 (rounded, deduplicated).
std::vector<Index> default_p_values(Index n, int steps = 20);

struct TrialRecord {
  Index n = 0;
  Index p = 0;
  int r = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double rel_error = 0.0;
  bool success = false;
  SolveStatus status = SolveStatus::max_iters;
  double wall_time = 0.0;

  bool operator==(const TrialRecord&) const = default;
};

struct PhaseGridResult {
  std::vector<TrialRecord> records;  // sorted by (n, p, r, trial)
  std::map<std::pair<Index, int>, double> rates;  // (p, r) -> successes / trials

  bool operator==(const PhaseGridResult&) const = default;
};

/// Seed of one grid trial: hash(base_seed, n, p, r, trial).
std::uint64_t trial_seed(std::uint64_t base_seed, Index n, Index p, int r, int trial);

/// One recovery trial: Y0 = YL YR' with standard Gaussian n x r factors,
/// an operator from the ensemble, b = A(Y0), solve, compare. Fully
/// determined by the seed (except wall_time).
TrialRecord run_trial(Index n, Index p, int r, std::uint64_t seed, const PhaseGridSpec& spec);

/// All admissible cells of the grid. With a csv_path, finished records are
/// appended as they complete, records already in the file are not rerun,
/// and the file is rewritten in canonical order at the end.
PhaseGridResult run_phase_grid(const PhaseGridSpec& spec,
                               const std::optional<std::filesystem::path>& csv_path = std::nullopt);

/// Recomputes the per-cell rates of a record list.
std::map<std::pair<Index, int>, double> cell_rates(const std::vector<TrialRecord>& records);

struct ImagePoint {
  Index p = 0;
  double rel_error = 0.0;
  SolveStatus status = SolveStatus::max_iters;
};

using OperatorFactory = std::function<MeasurementOp(Index p, std::uint64_t seed)>;

/// For each p: sample an operator, measure the image, solve, record the
/// relative Frobenius error.
std::vector<ImagePoint> run_image_recovery(const Matrix& image, const std::vector<Index>& p_values,
                                           EnsembleKind ensemble, const SolverOptions& solver,
                                           std::uint64_t seed);
std::vector<ImagePoint> run_image_recovery(const Matrix& image, const std::vector<Index>& p_values,
                                           const OperatorFactory& factory, const SolverOptions& solver,
                                           std::uint64_t seed);

/// 46 x 81 stand-in for a three-letter block logo: five distinct row
/// patterns (rank 5) of vertical bars over a zero background, with three
/// distinct nonzero intensities.
Matrix synthetic_logo();

struct HankelReport {
  int order = 0;
  Index horizon = 0;  // N
  Index p = 0;
  Vector impulse;           // ground truth h(0..2N)
  Vector recovered;         // read back from the solution
  Index true_rank = 0;      // numeric rank of hank(h)
  Index recovered_rank = 0; // numeric rank of the solution (relative 1e-6)
  double impulse_rel_error = 0.0;
  SolveStatus status = SolveStatus::max_iters;
};

/// Random stable impulse response h(t) = sum_l c_l a_l^t with `order`
/// distinct real poles |a_l| in [0.3, 0.9], Gaussian inputs, y = A h(0..N),
/// then minimum nuclear norm over Hankel-consistent X.
HankelReport run_hankel_demo(int order, Index horizon, Index p, std::uint64_t seed,
                             const SolverOptions& solver = {});

/// Random stable impulse response of length 2N+1 as used by the demo.
Vector random_impulse_response(int order, Index horizon, std::uint64_t seed);

}  // namespace lowrank
