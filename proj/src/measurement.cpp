#include "lowrank/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "lowrank/errors.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

namespace {

constexpr std::pair<EnsembleKind, std::string_view> kEnsembleNames[] = {
    {EnsembleKind::gaussian, "gaussian"},
    {EnsembleKind::bernoulli, "bernoulli"},
    {EnsembleKind::sparse_ternary, "sparse_ternary"},
    {EnsembleKind::projection, "projection"},
    {EnsembleKind::factored_gaussian, "factored_gaussian"},
    {EnsembleKind::completion, "completion"},
};

void require_shape(const Matrix& x, Index m, Index n, const char* what) {
  if (x.rows() != m || x.cols() != n) {
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(m) + "x" +
                        std::to_string(n) + " matrix, got " + std::to_string(x.rows()) + "x" +
                        std::to_string(x.cols()));
  }
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

kernels::RowMatrix entrywise(Index p, Index d, Rng& rng, auto&& draw) {
  kernels::RowMatrix a(p, d);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < d; ++j) a(i, j) = draw(rng);
  }
  return a;
}

}  // namespace

std::string_view to_string(EnsembleKind kind) {
  for (const auto& [k, name] : kEnsembleNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EnsembleKind parse_ensemble(std::string_view name) {
  for (const auto& [k, known] : kEnsembleNames) {
    if (known == name) return k;
  }
  throw ArgumentError("unknown ensemble '" + std::string(name) +
                      "' (expected gaussian, bernoulli, sparse_ternary, projection, "
                      "factored_gaussian or completion)");
}

MeasurementOp MeasurementOp::dense(kernels::RowMatrix a, Index m, Index n) {
  if (m < 1 || n < 1 || a.rows() < 1) throw ArgumentError("dense op: dimensions must be positive");
  if (a.cols() != m * n) {
    throw ArgumentError("dense op: matrix has " + std::to_string(a.cols()) + " columns, expected " +
                        std::to_string(m * n));
  }
  if (!a.allFinite()) throw ArgumentError("dense op: non-finite entries");
  const Index p = a.rows();
  return MeasurementOp(Dense{std::move(a)}, m, n, p);
}

MeasurementOp MeasurementOp::factored(Matrix u, Matrix v) {
  if (u.cols() != v.cols() || u.cols() < 1 || u.rows() < 1 || v.rows() < 1) {
    throw ArgumentError("factored op: u and v need the same positive number of columns");
  }
  if (!u.allFinite() || !v.allFinite()) throw ArgumentError("factored op: non-finite entries");
  const Index m = u.rows();
  const Index n = v.rows();
  const Index p = u.cols();
  return MeasurementOp(Factored{std::move(u), std::move(v)}, m, n, p);
}

MeasurementOp MeasurementOp::sampling(std::vector<SampleIndex> entries, Index m, Index n) {
  if (m < 1 || n < 1 || entries.empty()) throw ArgumentError("sampling op: dimensions must be positive");
  std::set<std::pair<Index, Index>> seen;
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= m || e.col < 0 || e.col >= n) {
      throw ArgumentError("sampling op: index (" + std::to_string(e.row) + "," +
                          std::to_string(e.col) + ") out of range");
    }
    if (!seen.emplace(e.row, e.col).second) {
      throw ArgumentError("sampling op: duplicate index (" + std::to_string(e.row) + "," +
                          std::to_string(e.col) + ")");
    }
  }
  const auto p = static_cast<Index>(entries.size());
  return MeasurementOp(Sampling{std::move(entries)}, m, n, p);
}

MeasurementOp MeasurementOp::identity(Index m, Index n) {
  return dense(kernels::RowMatrix::Identity(m * n, m * n), m, n);
}

Vector MeasurementOp::apply(const Matrix& x) const {
  require_shape(x, m_, n_, "apply");
  return std::visit(
      Overloaded{
          [&](const Dense& d) { return kernels::dense_apply(d.a, vec(x)); },
          [&](const Factored& f) { return kernels::factored_apply(f.u, f.v, x); },
          [&](const Sampling& s) {
            Vector out(p_);
            for (Index i = 0; i < p_; ++i) out(i) = x(s.entries[i].row, s.entries[i].col);
            return out;
          },
      },
      form_);
}

Matrix MeasurementOp::adjoint(const Vector& y) const {
  if (y.size() != p_) {
    throw ArgumentError("adjoint: vector has length " + std::to_string(y.size()) + ", expected " +
                        std::to_string(p_));
  }
  return std::visit(
      Overloaded{
          [&](const Dense& d) { return unvec(kernels::dense_adjoint(d.a, y), m_, n_); },
          [&](const Factored& f) { return kernels::factored_adjoint(f.u, f.v, y); },
          [&](const Sampling& s) {
            Matrix out = Matrix::Zero(m_, n_);
            for (Index i = 0; i < p_; ++i) out(s.entries[i].row, s.entries[i].col) = y(i);
            return out;
          },
      },
      form_);
}

kernels::RowMatrix MeasurementOp::to_dense() const {
  return std::visit(
      Overloaded{
          [&](const Dense& d) { return d.a; },
          [&](const Factored& f) {
            kernels::RowMatrix a(p_, m_ * n_);
            for (Index i = 0; i < p_; ++i) {
              const Matrix outer = f.u.col(i) * f.v.col(i).transpose();
              a.row(i) = vec(outer).transpose();
            }
            return a;
          },
          [&](const Sampling& s) {
            kernels::RowMatrix a = kernels::RowMatrix::Zero(p_, m_ * n_);
            for (Index i = 0; i < p_; ++i) a(i, s.entries[i].col * m_ + s.entries[i].row) = 1.0;
            return a;
          },
      },
      form_);
}

MeasurementOp MeasurementOp::scaled(double c) const {
  return std::visit(Overloaded{
                        [&](const Dense& d) { return dense(c * d.a, m_, n_); },
                        [&](const Factored& f) { return factored(c * f.u, f.v); },
                        [&](const Sampling&) { return dense(c * to_dense(), m_, n_); },
                    },
                    form_);
}

MeasurementOp sample(const EnsembleSpec& spec) {
  const Index m = spec.m;
  const Index n = spec.n;
  const Index p = spec.p;
  if (m < 1 || n < 1 || p < 1) throw ArgumentError("sample: m, n, p must be positive");
  const Index d = m * n;
  const double dp = static_cast<double>(p);
  Rng rng(spec.seed);

  switch (spec.kind) {
    case EnsembleKind::gaussian: {
      const double scale = 1.0 / std::sqrt(dp);
      return MeasurementOp::dense(entrywise(p, d, rng, [&](Rng& g) { return scale * g.normal(); }), m, n);
    }
    case EnsembleKind::bernoulli: {
      const double scale = 1.0 / std::sqrt(dp);
      return MeasurementOp::dense(
          entrywise(p, d, rng, [&](Rng& g) { return (g.bits() >> 63) ? scale : -scale; }), m, n);
    }
    case EnsembleKind::sparse_ternary: {
      const double scale = std::sqrt(3.0 / dp);
      return MeasurementOp::dense(entrywise(p, d, rng,
                                            [&](Rng& g) {
                                              switch (g.below(6)) {
                                                case 0: return scale;
                                                case 1: return -scale;
                                                default: return 0.0;
                                              }
                                            }),
                                  m, n);
    }
    case EnsembleKind::projection: {
      if (p > d) {
        throw ArgumentError("sample: projection ensemble needs p <= mn (p = " + std::to_string(p) +
                            ", mn = " + std::to_string(d) + ")");
      }
      const Matrix g = rng.gaussian(d, p);
      Eigen::HouseholderQR<Matrix> qr(g);
      const Matrix q = qr.householderQ() * Matrix::Identity(d, p);
      kernels::RowMatrix a = std::sqrt(static_cast<double>(d) / dp) * q.transpose();
      return MeasurementOp::dense(std::move(a), m, n);
    }
    case EnsembleKind::factored_gaussian: {
      Matrix u = rng.gaussian(m, p, 1.0 / std::sqrt(dp));
      Matrix v = rng.gaussian(n, p);
      return MeasurementOp::factored(std::move(u), std::move(v));
    }
    case EnsembleKind::completion: {
      if (p > d) {
        throw ArgumentError("sample: completion needs p <= mn (p = " + std::to_string(p) +
                            ", mn = " + std::to_string(d) + ")");
      }
      // Partial Fisher-Yates over the linear (column-stacked) indices.
      std::vector<Index> pool(static_cast<std::size_t>(d));
      std::iota(pool.begin(), pool.end(), Index{0});
      std::vector<SampleIndex> entries;
      entries.reserve(static_cast<std::size_t>(p));
      for (Index i = 0; i < p; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d - i)));
        std::swap(pool[i], pool[j]);
        entries.push_back({pool[i] % m, pool[i] / m});
      }
      return MeasurementOp::sampling(std::move(entries), m, n);
    }
  }
  throw ArgumentError("sample: unknown ensemble kind");
}

double operator_norm_estimate(const MeasurementOp& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw ArgumentError("operator_norm_estimate: iters must be >= 1");
  Rng rng(seed);
  Matrix x = rng.gaussian(op.rows(), op.cols());
  x /= x.norm();
  double best = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Matrix y = op.adjoint(op.apply(x));
    best = std::max(best, inner(x, y));
    const double norm = y.norm();
    if (norm == 0.0) break;
    x = y / norm;
  }
  return std::sqrt(best);
}

Matrix hankel_matrix(const Vector& h) {
  if (h.size() < 1 || h.size() % 2 == 0) {
    throw ArgumentError("hankel_matrix: impulse response must have odd length 2N+1");
  }
  const Index size = (h.size() + 1) / 2;
  Matrix x(size, size);
  for (Index i = 0; i < size; ++i) {
    for (Index j = 0; j < size; ++j) x(i, j) = h(i + j);
  }
  return x;
}

Vector hankel_impulse(const Matrix& x) {
  if (x.rows() != x.cols() || x.rows() < 1) throw ArgumentError("hankel_impulse: need a square matrix");
  const Index size = x.rows();
  Vector h(2 * size - 1);
  h.head(size) = x.row(0).transpose();
  h.tail(size - 1) = x.col(size - 1).tail(size - 1);
  return h;
}

HankelProblem hankel_problem(const Vector& observations, const Matrix& input_matrix) {
  const Index p = input_matrix.rows();
  const Index size = input_matrix.cols();  // N + 1
  if (p < 1 || size < 1) throw ArgumentError("hankel_problem: empty input matrix");
  if (observations.size() != p) {
    throw ArgumentError("hankel_problem: " + std::to_string(observations.size()) +
                        " observations for " + std::to_string(p) + " input rows");
  }
  require_finite(input_matrix, "hankel_problem");
  if (!observations.allFinite()) throw ArgumentError("hankel_problem: non-finite observations");

  const Index n_ties = size * size - (2 * size - 1);
  kernels::RowMatrix a = kernels::RowMatrix::Zero(p + n_ties, size * size);
  Vector b = Vector::Zero(p + n_ties);
  const auto at = [size](Index i, Index j) { return j * size + i; };

  for (Index k = 0; k < p; ++k) {
    for (Index j = 0; j < size; ++j) a(k, at(0, j)) = input_matrix(k, j);
    b(k) = observations(k);
  }
  Index row = p;
  for (Index j = 0; j < size; ++j) {
    for (Index i = 0; i < size; ++i) {
      const Index s = i + j;
      const Index ci = s < size ? 0 : s - (size - 1);
      const Index cj = s - ci;
      if (ci == i && cj == j) continue;
      a(row, at(i, j)) = 1.0;
      a(row, at(ci, cj)) = -1.0;
      ++row;
    }
  }
  return {MeasurementOp::dense(std::move(a), size, size), std::move(b)};
}

}  // namespace lowrank
