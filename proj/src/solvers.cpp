#include "lowrank/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "lowrank/errors.hpp"
#include "lowrank/projection.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

namespace {

constexpr std::pair<SolveStatus, std::string_view> kStatusNames[] = {
    {SolveStatus::converged, "converged"},
    {SolveStatus::max_iters, "max_iters"},
    {SolveStatus::stalled, "stalled"},
};

void require_rhs(const MeasurementOp& op, const Vector& b, const char* what) {
  if (b.size() != op.measurements()) {
    throw ArgumentError(std::string(what) + ": b has length " + std::to_string(b.size()) +
                        ", expected " + std::to_string(op.measurements()));
  }
  if (!b.allFinite()) throw ArgumentError(std::string(what) + ": b has non-finite entries");
}

Matrix subgradient_direction(const Matrix& x, bool use_polar) {
  if (use_polar && x.rows() >= x.cols()) {
    try {
      return polar_factor_halley(x).q;
    } catch (const SingularSystemError&) {
      // Rank-deficient iterate: the polar factor is not unique; use U V'.
    } catch (const NonConvergenceError&) {
    }
  }
  return nuclear_subgradient(x);
}

// Columns are the images of the unit vectors e_i.
Index multiplier_map_rank(const MeasurementOp& op, const Matrix& left, const Matrix& right) {
  const Index p = op.measurements();
  const Index top = left.size();
  Matrix map(top + right.size(), p);
  for (Index i = 0; i < p; ++i) {
    const Matrix g = op.adjoint(Vector::Unit(p, i));
    map.col(i).head(top) = vec(g * right);
    map.col(i).tail(right.size()) = vec(g.transpose() * left);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(map);
  qr.setThreshold(1e-9);
  return qr.rank();
}

void finish(SolveResult& result, const MeasurementOp& op, const Vector& b) {
  result.objective = nuclear_norm(result.x);
  result.feas_residual = (op.apply(result.x) - b).norm();
  if (result.certificate && result.left && result.right) {
    result.certificate->multiplier_map_rank = multiplier_map_rank(op, *result.left, *result.right);
  }
}

}  // namespace

std::string_view to_string(SolveStatus status) {
  for (const auto& [s, name] : kStatusNames) {
    if (s == status) return name;
  }
  return "unknown";
}

SolveStatus parse_status(std::string_view name) {
  for (const auto& [s, known] : kStatusNames) {
    if (known == name) return s;
  }
  throw ArgumentError("unknown solver status '" + std::string(name) + "'");
}

double step_size(const SubgradientConfig& cfg, int k) {
  const double kk = static_cast<double>(std::max(k, 1));
  switch (cfg.step_schedule) {
    case StepSchedule::harmonic: return cfg.step0 / kk;
    case StepSchedule::inverse_sqrt: return cfg.step0 / std::sqrt(kk);
  }
  return cfg.step0 / kk;
}

SolveResult solve_subgradient(const MeasurementOp& op, const Vector& b, const SubgradientConfig& cfg) {
  require_rhs(op, b, "solve_subgradient");
  if (cfg.max_iters < 1 || !(cfg.step0 > 0.0) || cfg.window < 1) {
    throw ArgumentError("solve_subgradient: max_iters, step0 and window must be positive");
  }
  ProjectionOptions popts;
  popts.method = cfg.projection;
  popts.feas_tol = cfg.feas_tol;
  const AffineProjector projector(op, popts);

  // Start from the minimum-Frobenius-norm feasible point.
  Matrix x = projector.project(Matrix::Zero(op.rows(), op.cols()), b);
  SolveResult result;
  result.x = x;
  double best = nuclear_norm(x);
  std::vector<double> best_history{best};

  for (int k = 1; k <= cfg.max_iters; ++k) {
    result.iterations = k;
    const Matrix y = subgradient_direction(x, cfg.use_polar_iteration);
    const double step = step_size(cfg, k);
    const Matrix next = projector.project(x - step * y, b);
    // (x - next) / step is the kernel component of the subgradient; when it
    // vanishes the subgradient lies in the range of A* and x is optimal.
    const double kernel_part = (x - next).norm() / step;
    if (kernel_part <= 1e-12 * std::max(1.0, y.norm())) {
      result.status = SolveStatus::converged;
      break;
    }
    x = next;
    const double obj = nuclear_norm(x);
    if (!std::isfinite(obj)) {
      result.status = SolveStatus::stalled;
      break;
    }
    if (obj < best) {
      best = obj;
      result.x = x;
    }
    best_history.push_back(best);
    if (k >= cfg.window) {
      const double earlier = best_history[static_cast<std::size_t>(k - cfg.window)];
      if (earlier - best <= cfg.obj_tol * std::max(1.0, best)) {
        result.status = SolveStatus::converged;
        break;
      }
    }
  }
  finish(result, op, b);
  return result;
}

int default_factor_rank(Index m, Index n, Index p) {
  // Smallest r whose rank-r manifold dimension r(m + n - r) reaches p, plus
  // two columns of slack. This is never below p / (m + n).
  const Index cap = std::min(m, n);
  Index r = 1;
  while (r < cap && r * (m + n - r) < p) ++r;
  return static_cast<int>(std::min(cap, r + 2));
}

LagrangianEval augmented_lagrangian(const MeasurementOp& op, const Vector& b, const Matrix& left,
                                    const Matrix& right, const Vector& y, double sigma,
                                    bool with_gradient) {
  LagrangianEval out;
  out.residual = op.apply(left * right.transpose()) - b;
  out.value = 0.5 * (left.squaredNorm() + right.squaredNorm()) - y.dot(out.residual) +
              0.5 * sigma * out.residual.squaredNorm();
  if (with_gradient) {
    const Vector y_hat = y - sigma * out.residual;
    const Matrix g = op.adjoint(y_hat);
    out.grad_left = left - g * right;
    out.grad_right = right - g.transpose() * left;
  }
  return out;
}

namespace {

enum class InnerOutcome { converged, max_iters, stalled };

struct InnerState {
  Matrix left;
  Matrix right;
  int iterations = 0;
};

// Gradient descent with Armijo backtracking (halving). The trial step starts
// from the Barzilai-Borwein estimate of the previous step pair.
InnerOutcome minimize_lagrangian(const MeasurementOp& op, const Vector& b, const Vector& y, double sigma,
                                 const AlmConfig& cfg, InnerState& state, double& step) {
  LagrangianEval cur = augmented_lagrangian(op, b, state.left, state.right, y, sigma);
  Matrix prev_left, prev_right, prev_gl, prev_gr;
  bool have_prev = false;

  for (int it = 0; it < cfg.inner_max_iters; ++it) {
    const double gnorm2 = cur.grad_left.squaredNorm() + cur.grad_right.squaredNorm();
    if (!std::isfinite(gnorm2) || !std::isfinite(cur.value)) return InnerOutcome::stalled;
    const double scale = std::max(1.0, std::sqrt(state.left.squaredNorm() + state.right.squaredNorm()));
    if (std::sqrt(gnorm2) <= cfg.inner_grad_tol * scale) return InnerOutcome::converged;

    if (have_prev) {
      const double ss = (state.left - prev_left).squaredNorm() + (state.right - prev_right).squaredNorm();
      const double sy = inner(state.left - prev_left, cur.grad_left - prev_gl) +
                        inner(state.right - prev_right, cur.grad_right - prev_gr);
      if (sy > 0.0 && std::isfinite(ss / sy)) step = ss / sy;
      else step *= 2.0;
    }

    for (;;) {
      Matrix trial_left = state.left - step * cur.grad_left;
      Matrix trial_right = state.right - step * cur.grad_right;
      LagrangianEval trial = augmented_lagrangian(op, b, trial_left, trial_right, y, sigma, false);
      // The slack absorbs rounding in La; near a minimizer the Armijo
      // decrease drops below it and would otherwise never be met.
      const double slack = 1e-13 * (1.0 + std::abs(cur.value));
      if (std::isfinite(trial.value) && trial.value <= cur.value - cfg.armijo * step * gnorm2 + slack) {
        prev_left = std::move(state.left);
        prev_right = std::move(state.right);
        prev_gl = std::move(cur.grad_left);
        prev_gr = std::move(cur.grad_right);
        have_prev = true;
        state.left = std::move(trial_left);
        state.right = std::move(trial_right);
        cur = augmented_lagrangian(op, b, state.left, state.right, y, sigma);
        break;
      }
      step *= 0.5;
      if (step < 1e-20) return InnerOutcome::stalled;
    }
    ++state.iterations;
  }
  return InnerOutcome::max_iters;
}

// At a stationary point with ||A*(y)|| > 1 the factors sit on a saddle: a
// rank-one term along the top singular pair of A*(y), placed in the weakest
// column, lowers La to second order. Returns true if a step was taken.
bool escape_saddle(const MeasurementOp& op, const Vector& b, const Vector& y, double sigma, InnerState& state) {
  const Matrix g = op.adjoint(y);
  Eigen::BDCSVD<Matrix> dec(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double top = dec.singularValues()(0);
  if (!(top > 1.0 + 1e-6)) return false;

  Index col = 0;
  (state.left.colwise().squaredNorm() + state.right.colwise().squaredNorm()).minCoeff(&col);
  const double base = augmented_lagrangian(op, b, state.left, state.right, y, sigma, false).value;
  double t = std::sqrt(std::max(state.left.norm() + state.right.norm(), 1.0));
  for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
    for (double sign : {1.0, -1.0}) {
      Matrix left = state.left, right = state.right;
      left.col(col) += sign * t * dec.matrixU().col(0);
      right.col(col) += t * dec.matrixV().col(0);
      if (augmented_lagrangian(op, b, left, right, y, sigma, false).value < base - 1e-12 * (1.0 + std::abs(base))) {
        state.left = std::move(left);
        state.right = std::move(right);
        return true;
      }
    }
  }
  return false;
}

// A = U S V' restricted to its numeric rank k gives the equivalent system
// V_k' vec(X) = S_k^{-1} U_k' b with orthonormal rows. Multipliers z' of the
// whitened system map back through z = U_k S_k^{-1} z', which leaves
// A*(z) unchanged.
struct WhitenedSystem {
  MeasurementOp op;
  Vector b;
  Matrix back;  // p x k, the map z' -> z
};

WhitenedSystem whiten(const MeasurementOp& op, const Vector& b, double feas_tol) {
  const kernels::RowMatrix a = op.to_dense();
  const Matrix gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw DecompositionError("solve_alm: eigendecomposition of A A* failed");
  const Vector& lambda = eig.eigenvalues();  // ascending
  const Index p = lambda.size();
  const double cutoff = 1e-13 * std::max(lambda(p - 1), 0.0);
  Index k = 0;
  while (k < p && lambda(p - 1 - k) > cutoff) ++k;
  if (k == 0) throw SingularSystemError("solve_alm: measurement operator is zero");

  const Matrix u = eig.eigenvectors().rightCols(k);
  const Vector inv_s = lambda.tail(k).cwiseSqrt().cwiseInverse();
  const Matrix back = u * inv_s.asDiagonal();
  const Vector projected = u.transpose() * b;
  const double inconsistency = (b - u * projected).norm();
  if (inconsistency > std::max(1e-8, feas_tol) * std::max(1.0, b.norm())) {
    throw InfeasibleError("solve_alm: A(X) = b is inconsistent (residual " + std::to_string(inconsistency) +
                          " outside the range of A)");
  }
  kernels::RowMatrix rows = back.transpose() * a;
  return {MeasurementOp::dense(std::move(rows), op.rows(), op.cols()), inv_s.cwiseProduct(projected), back};
}

bool samples_every_entry(const MeasurementOp& op) {
  const auto* sampling = std::get_if<MeasurementOp::Sampling>(&op.form());
  if (!sampling) return false;
  std::set<std::pair<Index, Index>> seen;
  for (const auto& e : sampling->entries) seen.emplace(e.row, e.col);
  return static_cast<Index>(seen.size()) == op.rows() * op.cols();
}

// The feasible set is one point. It is the minimizer, certified by any y
// with A*(y) = UV'; the factored iteration is badly conditioned here.
SolveResult unique_solution(const MeasurementOp& op, const Vector& b) {
  SolveResult result;
  result.x = project_affine(op, Matrix::Zero(op.rows(), op.cols()), b);
  const SvdFactors f = svd(result.x);
  const Matrix half = f.sigma.cwiseSqrt().asDiagonal();
  result.left = f.u * half;
  result.right = f.v * half;
  const Matrix at = op.to_dense().transpose();
  const Vector y = at.colPivHouseholderQr().solve(vec(Matrix(f.u * f.v.transpose())));
  result.certificate = Certificate{y, operator_norm(op.adjoint(y))};
  result.status = SolveStatus::converged;
  finish(result, op, b);
  return result;
}

}  // namespace

SolveResult solve_alm(const MeasurementOp& op, const Vector& b, const AlmConfig& cfg, std::uint64_t seed) {
  require_rhs(op, b, "solve_alm");
  const Index m = op.rows();
  const Index n = op.cols();
  const int rank = cfg.factor_rank > 0 ? cfg.factor_rank : default_factor_rank(m, n, op.measurements());
  if (rank < 1 || rank > std::min(m, n)) {
    throw ArgumentError("solve_alm: factor rank " + std::to_string(rank) + " outside [1, min(m, n)]");
  }
  if (!(cfg.sigma0 > 0.0) || !(cfg.sigma_growth > 1.0) || cfg.max_outer < 1) {
    throw ArgumentError("solve_alm: need sigma0 > 0, sigma_growth > 1, max_outer >= 1");
  }

  SolveResult result;
  if (b.norm() == 0.0) {
    // L = R = 0 is feasible with zero cost.
    result.x = Matrix::Zero(m, n);
    result.left = Matrix::Zero(m, rank);
    result.right = Matrix::Zero(n, rank);
    result.certificate = Certificate{Vector::Zero(b.size()), 0.0};
    result.status = SolveStatus::converged;
    finish(result, op, b);
    return result;
  }

  std::optional<WhitenedSystem> whitened;
  if (cfg.whiten && !std::holds_alternative<MeasurementOp::Sampling>(op.form())) {
    whitened = whiten(op, b, cfg.feas_tol);
  }
  if ((whitened && whitened->op.measurements() == m * n) || samples_every_entry(op)) return unique_solution(op, b);
  const MeasurementOp& work_op = whitened ? whitened->op : op;
  const Vector& work_b = whitened ? whitened->b : b;

  Rng rng(seed);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(rank));
  InnerState state{rng.gaussian(m, rank, init_scale), rng.gaussian(n, rank, init_scale), 0};

  Vector y = Vector::Zero(work_b.size());
  double sigma = cfg.sigma0;
  double step = 1.0 / (1.0 + sigma);
  const double feas_limit = cfg.feas_tol * std::max(1.0, work_b.norm());
  double prev_res = (work_op.apply(state.left * state.right.transpose()) - work_b).norm();
  result.status = SolveStatus::max_iters;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    const InnerOutcome inner_outcome = minimize_lagrangian(work_op, work_b, y, sigma, cfg, state, step);
    if (inner_outcome == InnerOutcome::stalled) {
      result.status = SolveStatus::stalled;
      break;
    }
    const Vector residual = work_op.apply(state.left * state.right.transpose()) - work_b;
    const double res = residual.norm();
    y -= sigma * residual;
    if (cfg.on_outer) {
      cfg.on_outer({outer, state.iterations, inner_outcome == InnerOutcome::converged, res, sigma});
    }
    if (res <= feas_limit && inner_outcome == InnerOutcome::converged) {
      result.status = SolveStatus::converged;
      break;
    }
    if (res > cfg.residual_decrease * prev_res) {
      if (inner_outcome == InnerOutcome::converged && escape_saddle(work_op, work_b, y, sigma, state)) {
        prev_res = res;
        continue;
      }
      if (sigma * cfg.sigma_growth > cfg.sigma_max) {
        // The multipliers are diverging; no KKT point is within reach.
        result.status = SolveStatus::stalled;
        break;
      }
      sigma *= cfg.sigma_growth;
    }
    prev_res = res;
  }

  if (whitened) y = whitened->back * y;
  result.iterations = state.iterations;
  result.x = state.left * state.right.transpose();
  result.left = std::move(state.left);
  result.right = std::move(state.right);
  result.certificate = Certificate{y, operator_norm(op.adjoint(y))};
  finish(result, op, b);
  return result;
}

std::string_view to_string(OptimalityFailure failure) {
  switch (failure) {
    case OptimalityFailure::none: return "none";
    case OptimalityFailure::infeasible: return "infeasible";
    case OptimalityFailure::tangent_mismatch: return "tangent_mismatch";
    case OptimalityFailure::row_leak: return "row_leak";
    case OptimalityFailure::column_leak: return "column_leak";
    case OptimalityFailure::complement_norm: return "complement_norm";
  }
  return "unknown";
}

OptimalityReport check_optimality(const MeasurementOp& op, const Matrix& x, const Vector& b, const Vector& z,
                                  double tol, double rank_tol) {
  OptimalityReport report;
  const auto fail = [&](OptimalityFailure f, double value) {
    report.optimal = false;
    report.failure = f;
    report.value = value;
    return report;
  };

  const double infeas = (op.apply(x) - b).norm();
  if (!(infeas <= tol)) return fail(OptimalityFailure::infeasible, infeas);

  const Matrix g = op.adjoint(z);
  const SvdFactors f = svd(x, rank_tol);
  const Matrix& u = f.u;
  const Matrix& v = f.v;
  const Matrix gv = g * v;
  const Matrix ug = u.transpose() * g;
  const Matrix ugv = u.transpose() * gv;

  const double tangent = (ugv - Matrix::Identity(f.rank(), f.rank())).norm();
  if (!(tangent <= tol)) return fail(OptimalityFailure::tangent_mismatch, tangent);
  const double row_leak = (ug - ugv * v.transpose()).norm();
  if (!(row_leak <= tol)) return fail(OptimalityFailure::row_leak, row_leak);
  const double column_leak = (gv - u * ugv).norm();
  if (!(column_leak <= tol)) return fail(OptimalityFailure::column_leak, column_leak);
  const Matrix complement = g - u * ug - gv * v.transpose() + u * ugv * v.transpose();
  const double comp_norm = operator_norm(complement);
  if (!(comp_norm <= 1.0 + tol)) return fail(OptimalityFailure::complement_norm, comp_norm);

  report.optimal = true;
  report.value = std::max({infeas, tangent, row_leak, column_leak});
  return report;
}

double dual_value(const Vector& b, const Vector& z) {
  if (b.size() != z.size()) throw ArgumentError("dual_value: length mismatch");
  return b.dot(z);
}

Vector admissible_certificate(const MeasurementOp& op, const Vector& z) {
  return z / std::max(1.0, operator_norm(op.adjoint(z)));
}

double duality_gap(const MeasurementOp& op, const Matrix& x, const Vector& b, const Vector& z) {
  return nuclear_norm(x) - dual_value(b, admissible_certificate(op, z));
}

}  // namespace lowrank
