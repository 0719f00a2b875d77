#include "lowrank/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <tuple>

#include "lowrank/errors.hpp"
#include "lowrank/io.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

namespace {

using Clock = std::chrono::steady_clock;

auto record_key(const TrialRecord& r) { return std::make_tuple(r.n, r.p, r.r, r.trial); }

double relative_error(const Matrix& x, const Matrix& truth) {
  const double scale = truth.norm();
  return scale > 0.0 ? (x - truth).norm() / scale : x.norm();
}

}  // namespace

std::string_view to_string(SolverKind kind) {
  return kind == SolverKind::alm ? "alm" : "subgradient";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "alm") return SolverKind::alm;
  if (name == "subgradient") return SolverKind::subgradient;
  throw ArgumentError("unknown solver '" + std::string(name) + "' (expected alm or subgradient)");
}

SolveResult run_solver(const MeasurementOp& op, const Vector& b, const SolverOptions& options,
                       std::uint64_t seed) {
  if (options.kind == SolverKind::subgradient) return solve_subgradient(op, b, options.subgradient);
  return solve_alm(op, b, options.alm, seed);
}

std::vector<int> admissible_ranks(Index n, Index p) {
  std::vector<int> out;
  for (Index r = 1; r <= n && r * (2 * n - r) <= p; ++r) out.push_back(static_cast<int>(r));
  return out;
}

std::vector<Index> default_p_values(Index n, int steps) {
  if (n < 1 || steps < 1) throw ArgumentError("default_p_values: n and steps must be positive");
  std::vector<Index> out;
  const double full = static_cast<double>(n * n);
  for (int k = 1; k <= steps; ++k) {
    const auto p = static_cast<Index>(std::llround(full * k / steps));
    if (p >= 1 && (out.empty() || out.back() != p)) out.push_back(p);
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t base_seed, Index n, Index p, int r, int trial) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p),
                                 static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(trial)});
}

TrialRecord run_trial(Index n, Index p, int r, std::uint64_t seed, const PhaseGridSpec& spec) {
  if (n < 1 || p < 1 || p > n * n) {
    throw ArgumentError("run_trial: need n >= 1 and 1 <= p <= n^2 (n = " + std::to_string(n) +
                        ", p = " + std::to_string(p) + ")");
  }
  if (r < 1 || r > n || r * (2 * n - r) > p) {
    throw ArgumentError("run_trial: rank " + std::to_string(r) + " is not admissible for p = " +
                        std::to_string(p) + " (need r(2n - r) <= p)");
  }
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {0}));
  const Matrix left = rng.gaussian(n, r);
  const Matrix right = rng.gaussian(n, r);
  const Matrix truth = left * right.transpose();

  const MeasurementOp op = sample({spec.ensemble, n, n, p, derive_seed(seed, {1})});
  const Vector b = op.apply(truth);
  const SolveResult solved = run_solver(op, b, spec.solver, derive_seed(seed, {2}));

  TrialRecord rec;
  rec.n = n;
  rec.p = p;
  rec.r = r;
  rec.seed = seed;
  rec.rel_error = relative_error(solved.x, truth);
  rec.success = rec.rel_error < spec.success_tol;
  rec.status = solved.status;
  if (spec.record_time) rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  return rec;
}

std::map<std::pair<Index, int>, double> cell_rates(const std::vector<TrialRecord>& records) {
  std::map<std::pair<Index, int>, std::pair<int, int>> counts;
  for (const auto& rec : records) {
    auto& [hits, total] = counts[{rec.p, rec.r}];
    hits += rec.success ? 1 : 0;
    ++total;
  }
  std::map<std::pair<Index, int>, double> rates;
  for (const auto& [cell, c] : counts) rates[cell] = static_cast<double>(c.first) / c.second;
  return rates;
}

PhaseGridResult run_phase_grid(const PhaseGridSpec& spec, const std::optional<std::filesystem::path>& csv_path) {
  if (spec.n < 1 || spec.trials_per_cell < 1) {
    throw ArgumentError("run_phase_grid: n and trials_per_cell must be positive");
  }
  for (const Index p : spec.p_values) {
    if (p < 1 || p > spec.n * spec.n) {
      throw ArgumentError("run_phase_grid: p = " + std::to_string(p) + " outside [1, n^2]");
    }
  }

  std::vector<TrialRecord> records;
  if (csv_path && std::filesystem::exists(*csv_path)) records = io::read_grid_csv(*csv_path);
  std::set<std::tuple<Index, Index, int, int>> done;
  for (const auto& rec : records) done.insert(record_key(rec));

  struct Job {
    Index p;
    int r;
    int trial;
  };
  std::vector<Job> jobs;
  for (const Index p : spec.p_values) {
    for (const int r : admissible_ranks(spec.n, p)) {
      for (int t = 0; t < spec.trials_per_cell; ++t) {
        if (!done.contains({spec.n, p, r, t})) jobs.push_back({p, r, t});
      }
    }
  }

  std::ofstream journal;
  if (csv_path && !jobs.empty()) {
    const bool fresh = !std::filesystem::exists(*csv_path);
    journal.open(*csv_path, std::ios::binary | std::ios::app);
    if (!journal) throw IoError(csv_path->string() + ": cannot open for writing");
    if (fresh) journal << io::kGridCsvHeader << '\n' << std::flush;
  }

  std::vector<TrialRecord> fresh(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    TrialRecord rec = run_trial(spec.n, job.p, job.r, trial_seed(spec.base_seed, spec.n, job.p, job.r, job.trial), spec);
    rec.trial = job.trial;
    fresh[k] = rec;
    if (journal.is_open()) {
#pragma omp critical(lowrank_grid_journal)
      journal << io::csv_line(rec) << '\n' << std::flush;
    }
  }
  if (journal.is_open()) journal.close();

  records.insert(records.end(), fresh.begin(), fresh.end());
  std::sort(records.begin(), records.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return record_key(a) < record_key(b); });
  if (csv_path) io::write_grid_csv(*csv_path, records);

  PhaseGridResult result;
  result.records = std::move(records);
  result.rates = cell_rates(result.records);
  return result;
}

std::vector<ImagePoint> run_image_recovery(const Matrix& image, const std::vector<Index>& p_values,
                                           const OperatorFactory& factory, const SolverOptions& solver,
                                           std::uint64_t seed) {
  require_finite(image, "run_image_recovery");
  std::vector<ImagePoint> out;
  out.reserve(p_values.size());
  for (const Index p : p_values) {
    const MeasurementOp op = factory(p, derive_seed(seed, {static_cast<std::uint64_t>(p)}));
    const Vector b = op.apply(image);
    const SolveResult solved = run_solver(op, b, solver, derive_seed(seed, {static_cast<std::uint64_t>(p), 1}));
    out.push_back({p, relative_error(solved.x, image), solved.status});
  }
  return out;
}

std::vector<ImagePoint> run_image_recovery(const Matrix& image, const std::vector<Index>& p_values,
                                           EnsembleKind ensemble, const SolverOptions& solver,
                                           std::uint64_t seed) {
  const Index m = image.rows();
  const Index n = image.cols();
  return run_image_recovery(
      image, p_values,
      [&](Index p, std::uint64_t op_seed) { return sample({ensemble, m, n, p, op_seed}); }, solver, seed);
}

Matrix synthetic_logo() {
  constexpr Index kRows = 46;
  constexpr Index kCols = 81;
  constexpr double kRed = 0.6;
  constexpr double kGrey = 0.35;
  constexpr double kWhite = 1.0;

  // Bars are 8 columns wide on a 10-column pitch; `span` also fills the gap
  // so adjacent bars join into a crossbar.
  const auto bar = [kCols](Vector& row, int k, double value, bool span = false) {
    for (Index c = k * 10; c < std::min<Index>(k * 10 + (span ? 10 : 8), kCols); ++c) row(c) = value;
  };
  std::vector<Vector> patterns(5, Vector::Zero(kCols));
  for (int k : {0, 1, 2}) bar(patterns[0], k, kRed);
  bar(patterns[0], 4, kGrey);
  for (int k = 5; k < 8; ++k) bar(patterns[0], k, kWhite, true);

  for (int k : {0, 1, 2}) bar(patterns[1], k, kRed);
  for (int k = 5; k < 8; ++k) bar(patterns[1], k, kWhite, true);

  for (int k : {0, 1, 2, 4}) bar(patterns[2], k, kRed);
  bar(patterns[2], 6, kWhite);

  for (int k : {0, 2, 4}) bar(patterns[3], k, kRed);
  bar(patterns[3], 6, kWhite);

  for (int k : {0, 2, 4}) bar(patterns[4], k, kRed);
  bar(patterns[4], 6, kGrey);

  constexpr Index kBands[] = {0, 6, 12, 30, 40, kRows};
  Matrix image(kRows, kCols);
  for (int band = 0; band < 5; ++band) {
    for (Index r = kBands[band]; r < kBands[band + 1]; ++r) image.row(r) = patterns[band].transpose();
  }
  return image;
}

Vector random_impulse_response(int order, Index horizon, std::uint64_t seed) {
  if (order < 1 || horizon < 1) throw ArgumentError("random_impulse_response: order and N must be positive");
  Rng rng(seed);
  std::vector<double> poles;
  while (static_cast<int>(poles.size()) < order) {
    const double magnitude = 0.3 + 0.6 * rng.uniform();
    const double pole = (rng.bits() >> 63) ? magnitude : -magnitude;
    const bool distinct = std::all_of(poles.begin(), poles.end(),
                                      [pole](double q) { return std::abs(q - pole) >= 0.05; });
    if (distinct) poles.push_back(pole);
  }
  Vector h = Vector::Zero(2 * horizon + 1);
  for (const double pole : poles) {
    double gain = rng.normal();
    while (std::abs(gain) < 0.2) gain = rng.normal();
    double power = 1.0;
    for (Index t = 0; t < h.size(); ++t, power *= pole) h(t) += gain * power;
  }
  return h;
}

HankelReport run_hankel_demo(int order, Index horizon, Index p, std::uint64_t seed, const SolverOptions& solver) {
  if (order < 1 || order > horizon) {
    throw ArgumentError("run_hankel_demo: need 1 <= order <= N (order = " + std::to_string(order) +
                        ", N = " + std::to_string(horizon) + ")");
  }
  if (p < 1) throw ArgumentError("run_hankel_demo: p must be positive");

  HankelReport report;
  report.order = order;
  report.horizon = horizon;
  report.p = p;
  report.impulse = random_impulse_response(order, horizon, derive_seed(seed, {0}));
  report.true_rank = numeric_rank(hankel_matrix(report.impulse), 1e-6);

  // Row i holds input i reversed in time: entry (i, j) = a_i(N - j).
  Rng rng(derive_seed(seed, {1}));
  const Matrix inputs = rng.gaussian(p, horizon + 1);
  const Vector observed = inputs * report.impulse.head(horizon + 1);

  const HankelProblem problem = hankel_problem(observed, inputs);
  const SolveResult solved = run_solver(problem.op, problem.b, solver, derive_seed(seed, {2}));
  report.recovered = hankel_impulse(solved.x);
  report.recovered_rank = numeric_rank(solved.x, 1e-6);
  report.impulse_rel_error = (report.recovered - report.impulse).norm() / report.impulse.norm();
  report.status = solved.status;
  return report;
}

}  // namespace lowrank
