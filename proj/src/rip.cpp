#include "lowrank/rip.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lowrank/errors.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

namespace {

constexpr int kRefineSteps = 200;

struct Factors {
  Matrix g;
  Matrix h;
};

Factors draw_factors(const MeasurementOp& op, int r, std::uint64_t seed, int trial) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(trial)}));
  Factors f;
  f.g = rng.gaussian(op.rows(), r);
  f.h = rng.gaussian(op.cols(), r);
  return f;
}

Matrix unit(const Matrix& x) {
  const double norm = x.norm();
  return norm > 0.0 ? Matrix(x / norm) : x;
}

// (||A(GH')|| / ||GH'||_F - 1)^2 and its gradient with respect to X = GH'.
double objective(const MeasurementOp& op, const Matrix& x, Matrix* grad) {
  const double fro = x.norm();
  if (fro == 0.0) {
    if (grad) *grad = Matrix::Zero(x.rows(), x.cols());
    return 1.0;
  }
  const Vector ax = op.apply(x);
  const double gain = ax.norm();
  const double q = gain / fro;
  if (grad) {
    Matrix dq = -(gain / (fro * fro * fro)) * x;
    if (gain > 0.0) dq += op.adjoint(ax) / (gain * fro);
    *grad = 2.0 * (q - 1.0) * dq;
  }
  return (q - 1.0) * (q - 1.0);
}

// Alternating backtracking ascent on G and H; returns the improved X.
Matrix refine_factors(const MeasurementOp& op, Factors f) {
  double value = objective(op, f.g * f.h.transpose(), nullptr);
  double step = 1.0;
  for (int it = 0; it < kRefineSteps; ++it) {
    const bool left = it % 2 == 0;
    Matrix grad_x;
    objective(op, f.g * f.h.transpose(), &grad_x);
    const Matrix dir = left ? Matrix(grad_x * f.h) : Matrix(grad_x.transpose() * f.g);
    const double dir2 = dir.squaredNorm();
    if (!(dir2 > 0.0)) continue;
    step *= 2.0;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      Factors trial = f;
      (left ? trial.g : trial.h) += step * dir;
      const double v = objective(op, trial.g * trial.h.transpose(), nullptr);
      if (std::isfinite(v) && v >= value + 1e-4 * step * dir2) {
        f = std::move(trial);
        value = v;
        break;
      }
    }
    // Keep the factors balanced so neither side drifts to zero or infinity.
    const double ng = f.g.norm();
    const double nh = f.h.norm();
    if (ng > 0.0 && nh > 0.0) {
      const double s = std::sqrt(nh / ng);
      f.g *= s;
      f.h /= s;
    }
  }
  return unit(f.g * f.h.transpose());
}

void require_rank(const MeasurementOp& op, int r, const char* what) {
  if (r < 1 || r > std::min(op.rows(), op.cols())) {
    throw ArgumentError(std::string(what) + ": r = " + std::to_string(r) + " outside [1, min(m, n)]");
  }
}

}  // namespace

double distortion(const MeasurementOp& op, const Matrix& x) {
  const double fro = x.norm();
  if (fro == 0.0) throw ArgumentError("distortion: zero matrix");
  return std::abs(op.apply(x).norm() / fro - 1.0);
}

RipEstimate estimate_delta_lower(const MeasurementOp& op, int r, int trials, std::uint64_t seed, bool refine) {
  require_rank(op, r, "estimate_delta_lower");
  if (trials < 1) throw ArgumentError("estimate_delta_lower: trials must be >= 1");

  std::vector<double> gains(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    const Factors f = draw_factors(op, r, seed, t);
    gains[static_cast<std::size_t>(t)] = op.apply(unit(f.g * f.h.transpose())).norm();
  }

  // Merge in trial order: ties go to the lowest index.
  int best = 0;
  for (int t = 1; t < trials; ++t) {
    if (std::abs(gains[t] - 1.0) > std::abs(gains[best] - 1.0)) best = t;
  }

  RipEstimate est;
  est.r = r;
  est.trials = trials;
  est.sample_gains = gains;
  const Factors worst = draw_factors(op, r, seed, best);
  est.worst_case = unit(worst.g * worst.h.transpose());
  est.delta_lower = distortion(op, est.worst_case);

  if (refine) {
    est.refined = true;
    Matrix improved = refine_factors(op, worst);
    const double d = distortion(op, improved);
    if (d > est.delta_lower) {
      est.delta_lower = d;
      est.worst_case = std::move(improved);
    }
  }
  return est;
}

std::vector<double> monotonicity_check(const MeasurementOp& op, int r_max, int trials, std::uint64_t seed) {
  require_rank(op, r_max, "monotonicity_check");
  if (trials < 1) throw ArgumentError("monotonicity_check: trials must be >= 1");

  // per_rank[t][r-1] is the rank-r distortion of trial t.
  std::vector<std::vector<double>> per_trial(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    const Factors f = draw_factors(op, r_max, seed, t);
    auto& row = per_trial[static_cast<std::size_t>(t)];
    row.resize(static_cast<std::size_t>(r_max));
    for (int r = 1; r <= r_max; ++r) {
      const Matrix x = f.g.leftCols(r) * f.h.leftCols(r).transpose();
      row[static_cast<std::size_t>(r - 1)] = distortion(op, x);
    }
  }

  std::vector<double> out(static_cast<std::size_t>(r_max), 0.0);
  double running = 0.0;
  for (int r = 0; r < r_max; ++r) {
    for (const auto& row : per_trial) running = std::max(running, row[static_cast<std::size_t>(r)]);
    out[static_cast<std::size_t>(r)] = running;
  }
  return out;
}

namespace {

void require_projection(const Matrix& p, const char* name) {
  if (p.rows() != p.cols()) throw ArgumentError(std::string("subspace_distance: ") + name + " is not square");
  require_finite(p, "subspace_distance");
  const double scale = std::max(1.0, p.norm());
  if ((p - p.transpose()).norm() > 1e-8 * scale) {
    throw ArgumentError(std::string("subspace_distance: ") + name + " is not symmetric");
  }
  if ((p * p - p).norm() > 1e-8 * scale) {
    throw ArgumentError(std::string("subspace_distance: ") + name + " is not idempotent");
  }
}

Matrix orthonormal_basis(const Matrix& basis, const char* name) {
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  if (qr.rank() < basis.cols()) {
    throw ArgumentError(std::string("perturbation_bound_check: ") + name + " columns are linearly dependent");
  }
  Eigen::HouseholderQR<Matrix> thin(basis);
  return thin.householderQ() * Matrix::Identity(basis.rows(), basis.cols());
}

}  // namespace

double subspace_distance(const Matrix& p1, const Matrix& p2) {
  require_projection(p1, "P1");
  require_projection(p2, "P2");
  if (p1.rows() != p2.rows()) throw ArgumentError("subspace_distance: dimension mismatch");
  return operator_norm(p1 - p2);
}

PerturbationReport perturbation_bound_check(const MeasurementOp& op, const Matrix& u1_basis,
                                            const Matrix& u2_basis, double delta, int samples,
                                            std::uint64_t seed) {
  const Index dim = op.rows() * op.cols();
  if (u1_basis.rows() != dim || u2_basis.rows() != dim) {
    throw ArgumentError("perturbation_bound_check: bases must have mn = " + std::to_string(dim) + " rows");
  }
  if (u1_basis.cols() != u2_basis.cols() || u1_basis.cols() < 1) {
    throw ArgumentError("perturbation_bound_check: subspaces must have the same positive dimension");
  }
  if (samples < 1) throw ArgumentError("perturbation_bound_check: samples must be >= 1");

  const Matrix q1 = orthonormal_basis(u1_basis, "u1_basis");
  const Matrix q2 = orthonormal_basis(u2_basis, "u2_basis");

  // Exact distortion over U1 from the extreme singular values of A Q1.
  Matrix aq1(op.measurements(), q1.cols());
  for (Index c = 0; c < q1.cols(); ++c) aq1.col(c) = op.apply(unvec(q1.col(c), op.rows(), op.cols()));
  const Vector s = Eigen::JacobiSVD<Matrix>(aq1).singularValues();
  const double s_min = s.size() == q1.cols() ? s(s.size() - 1) : 0.0;
  const double exact_u1 = std::max(s(0) - 1.0, 1.0 - s_min);
  if (delta < exact_u1 - 1e-9) {
    throw ArgumentError("perturbation_bound_check: delta = " + std::to_string(delta) +
                        " does not bound the distortion on U1 (" + std::to_string(exact_u1) + ")");
  }

  PerturbationReport report;
  report.rho = subspace_distance(q1 * q1.transpose(), q2 * q2.transpose());
  report.op_norm = operator_norm_estimate(op, 200, derive_seed(seed, {0}));
  report.bound = delta + (1.0 + report.op_norm) * report.rho;

  Rng rng(derive_seed(seed, {1}));
  for (int k = 0; k < samples; ++k) {
    const Vector w = rng.gaussian(q2.cols(), 1).col(0);
    const Matrix y = unvec(q2 * w, op.rows(), op.cols());
    const double d = distortion(op, y);
    report.max_distortion = std::max(report.max_distortion, d);
    if (d > report.bound + 1e-6) {
      report.holds = false;
      report.violating_sample = y / y.norm();
      break;
    }
  }
  return report;
}

}  // namespace lowrank
