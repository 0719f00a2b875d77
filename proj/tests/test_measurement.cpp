#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lowrank/errors.hpp"
#include "lowrank/measurement.hpp"
#include "lowrank/projection.hpp"
#include "lowrank/random.hpp"
#include "test_util.hpp"

using namespace lowrank;

namespace {

const EnsembleKind kAllKinds[] = {EnsembleKind::gaussian,   EnsembleKind::bernoulli,         EnsembleKind::sparse_ternary,
                                  EnsembleKind::projection, EnsembleKind::factored_gaussian, EnsembleKind::completion};

Matrix two_by_two() {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  return x;
}

// Sample mean and standard error of ||A(X)||^2 over random unit X.
std::pair<double, double> isometry_stats(const MeasurementOp& op, int samples, std::uint64_t seed) {
  Rng rng(seed);
  double s = 0, s2 = 0;
  for (int i = 0; i < samples; ++i) {
    Matrix x = rng.gaussian(op.rows(), op.cols());
    x /= x.norm();
    const double g = op.apply(x).squaredNorm();
    s += g;
    s2 += g * g;
  }
  const double mean = s / samples;
  const double var = (s2 / samples - mean * mean) * samples / (samples - 1);
  return {mean, std::sqrt(var / samples)};
}

}  // namespace

TEST(Ensemble, NamesRoundTrip) {
  for (EnsembleKind k : kAllKinds) EXPECT_EQ(parse_ensemble(to_string(k)), k);
  EXPECT_THROW(parse_ensemble("fourier"), ArgumentError);
}

TEST(Ensemble, DeterministicForEqualSpecs) {
  for (EnsembleKind k : kAllKinds) {
    const EnsembleSpec spec{k, 4, 5, 12, 77};
    EXPECT_EQ(sample(spec).to_dense(), sample(spec).to_dense()) << to_string(k);
    const EnsembleSpec other{k, 4, 5, 12, 78};
    EXPECT_NE(sample(spec).to_dense(), sample(other).to_dense()) << to_string(k);
  }
}

TEST(Ensemble, SparseTernaryZeroFraction) {
  const kernels::RowMatrix a = sample({EnsembleKind::sparse_ternary, 20, 20, 200, 1}).to_dense();
  const double zeros = static_cast<double>((a.array() == 0.0).count()) / static_cast<double>(a.size());
  EXPECT_NEAR(zeros, 2.0 / 3.0, 0.02);
  const double v = std::sqrt(3.0 / 200.0);
  EXPECT_TRUE(((a.array() == 0.0) || (a.array().abs() == v)).all());
}

TEST(Ensemble, BernoulliValues) {
  const kernels::RowMatrix a = sample({EnsembleKind::bernoulli, 5, 5, 50, 2}).to_dense();
  EXPECT_TRUE((a.array().abs() == 1.0 / std::sqrt(50.0)).all());
  const double plus = static_cast<double>((a.array() > 0).count()) / static_cast<double>(a.size());
  EXPECT_NEAR(plus, 0.5, 0.05);
}

TEST(Ensemble, GaussianEntryScale) {
  const kernels::RowMatrix a = sample({EnsembleKind::gaussian, 20, 20, 100, 3}).to_dense();
  const double var = a.squaredNorm() / static_cast<double>(a.size());
  EXPECT_NEAR(var * 100.0, 1.0, 0.02);
}

TEST(Ensemble, ProjectionHasScaledOrthonormalRows) {
  const Index m = 4, n = 5, p = 7;
  const kernels::RowMatrix a = sample({EnsembleKind::projection, m, n, p, 4}).to_dense();
  const Matrix gram = a * a.transpose();
  const double scale = static_cast<double>(m * n) / static_cast<double>(p);
  EXPECT_LT((gram - scale * Matrix::Identity(p, p)).norm(), 1e-10);
  EXPECT_THROW(sample({EnsembleKind::projection, 2, 2, 5, 1}), ArgumentError);
}

TEST(Ensemble, CompletionDrawsDistinctEntries) {
  const MeasurementOp op = sample({EnsembleKind::completion, 6, 7, 42, 5});
  const auto& entries = std::get<MeasurementOp::Sampling>(op.form()).entries;
  std::set<std::pair<Index, Index>> seen;
  for (const auto& e : entries) {
    EXPECT_TRUE(e.row >= 0 && e.row < 6 && e.col >= 0 && e.col < 7);
    seen.insert({e.row, e.col});
  }
  EXPECT_EQ(seen.size(), 42u);
  EXPECT_THROW(sample({EnsembleKind::completion, 6, 7, 43, 5}), ArgumentError);
}

TEST(Ensemble, CompletionIsUniform) {
  // Each of the 9 cells should be hit about 3/9 of the time.
  std::vector<int> hits(9, 0);
  const int draws = 3000;
  for (int s = 0; s < draws; ++s) {
    const auto op = sample({EnsembleKind::completion, 3, 3, 3, static_cast<std::uint64_t>(s)});
    for (const auto& e : std::get<MeasurementOp::Sampling>(op.form()).entries) ++hits[e.col * 3 + e.row];
  }
  const double expect = draws / 3.0;
  for (int h : hits) EXPECT_NEAR(h, expect, 5.0 * std::sqrt(expect));
}

TEST(Ensemble, InvalidSizes) {
  EXPECT_THROW(sample({EnsembleKind::gaussian, 0, 3, 2, 1}), ArgumentError);
  EXPECT_THROW(sample({EnsembleKind::gaussian, 3, 3, 0, 1}), ArgumentError);
}

TEST(Ensemble, IsometricInExpectation) {
  for (EnsembleKind k : {EnsembleKind::gaussian, EnsembleKind::bernoulli, EnsembleKind::sparse_ternary}) {
    // Average over operators as well as over X: draw one op per block.
    double mean_sum = 0;
    for (int blk = 0; blk < 20; ++blk) {
      const auto op = sample({k, 10, 10, 200, static_cast<std::uint64_t>(100 + blk)});
      mean_sum += isometry_stats(op, 100, blk).first;
    }
    EXPECT_NEAR(mean_sum / 20.0, 1.0, 0.05) << to_string(k);
  }
}

TEST(Ensemble, FactoredIsIsometricInExpectation) {
  double sum = 0;
  const int ops = 200;
  Rng rng(6);
  Matrix x = rng.gaussian(4, 5);
  x /= x.norm();
  for (int s = 0; s < ops; ++s) {
    sum += sample({EnsembleKind::factored_gaussian, 4, 5, 30, static_cast<std::uint64_t>(s)}).apply(x).squaredNorm();
  }
  EXPECT_NEAR(sum / ops, 1.0, 0.05);
}

TEST(Ensemble, ConcentrationTail) {
  // Frequency of |‖A(X)‖² − 1| ≥ 1/2 over operator draws, against
  // 2 exp(-(p/2)(eps²/2 - eps³/3)).
  const double eps = 0.5;
  const Index p = 100;
  const double bound = 2.0 * std::exp(-(p / 2.0) * (eps * eps / 2.0 - eps * eps * eps / 3.0));
  Rng rng(7);
  Matrix x = rng.gaussian(5, 5);
  x /= x.norm();
  const int draws = 2000;
  for (EnsembleKind k : {EnsembleKind::gaussian, EnsembleKind::bernoulli, EnsembleKind::sparse_ternary}) {
    int tail = 0;
    for (int s = 0; s < draws; ++s) {
      const double g = sample({k, 5, 5, p, static_cast<std::uint64_t>(1000 + s)}).apply(x).squaredNorm();
      tail += std::abs(g - 1.0) >= eps ? 1 : 0;
    }
    const double freq = static_cast<double>(tail) / draws;
    EXPECT_LE(freq, bound + 3.0 * std::sqrt(bound * (1 - bound) / draws)) << to_string(k);
  }
}

TEST(Apply, SamplingExtractsEntries) {
  const auto op = MeasurementOp::sampling({{0, 0}, {1, 1}}, 2, 2);
  const Vector y = op.apply(two_by_two());
  EXPECT_EQ(y, Eigen::Vector2d(1, 4));
}

TEST(Apply, FactoredPicksEntry) {
  Matrix u = Matrix::Zero(2, 1), v = Matrix::Zero(2, 1);
  u(0, 0) = 1;
  v(1, 0) = 1;
  const auto op = MeasurementOp::factored(u, v);
  EXPECT_EQ(op.apply(two_by_two())(0), 2.0);
}

TEST(Apply, IdentityIsVec) {
  const auto op = MeasurementOp::identity(2, 2);
  EXPECT_EQ(op.apply(two_by_two()), vec(two_by_two()));
  EXPECT_EQ(op.measurements(), 4);
}

TEST(Apply, DenseUsesColumnStacking) {
  // Row picks vec index j*m + i = entry (1, 2) of a 2 x 3 matrix.
  kernels::RowMatrix a = kernels::RowMatrix::Zero(1, 6);
  a(0, 2 * 2 + 1) = 1.0;
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(MeasurementOp::dense(a, 2, 3).apply(x)(0), 6.0);
}

TEST(Apply, ShapeMismatch) {
  const auto op = MeasurementOp::identity(2, 3);
  EXPECT_THROW(op.apply(Matrix::Ones(3, 2)), ArgumentError);
  EXPECT_THROW(op.adjoint(Vector::Ones(5)), ArgumentError);
}

TEST(Adjoint, SamplingScatters) {
  const auto op = MeasurementOp::sampling({{0, 0}}, 2, 2);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 7;
  EXPECT_EQ(op.adjoint(Vector::Constant(1, 7.0)), expect);
}

TEST(Adjoint, FactoredUnitVector) {
  Rng rng(8);
  const Matrix u = rng.gaussian(3, 4), v = rng.gaussian(5, 4);
  const auto op = MeasurementOp::factored(u, v);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_LT((op.adjoint(Vector::Unit(4, i)) - u.col(i) * v.col(i).transpose()).norm(), 1e-14);
  }
}

TEST(Adjoint, InnerProductIdentityFuzz) {
  Rng rng(9);
  for (EnsembleKind k : kAllKinds) {
    for (int t = 0; t < 60; ++t) {
      const Index m = 1 + static_cast<Index>(rng.below(6));
      const Index n = 1 + static_cast<Index>(rng.below(6));
      const Index p = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m * n)));
      const auto op = sample({k, m, n, p, rng.bits()});
      const Matrix x = rng.gaussian(m, n);
      const Vector y = rng.gaussian(p, 1);
      const double lhs = op.apply(x).dot(y);
      const double rhs = inner(x, op.adjoint(y));
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs))) << to_string(k);
    }
  }
}

TEST(Adjoint, ToDenseAgreesWithApply) {
  Rng rng(10);
  for (EnsembleKind k : kAllKinds) {
    const auto op = sample({k, 3, 4, 6, 11});
    const Matrix x = rng.gaussian(3, 4);
    const Vector via_dense = op.to_dense() * vec(x);
    EXPECT_LT((via_dense - op.apply(x)).norm(), 1e-12) << to_string(k);
  }
}

TEST(Construct, Validation) {
  EXPECT_THROW(MeasurementOp::sampling({{0, 0}, {0, 0}}, 2, 2), ArgumentError);
  EXPECT_THROW(MeasurementOp::sampling({{2, 0}}, 2, 2), ArgumentError);
  EXPECT_THROW(MeasurementOp::sampling({{0, -1}}, 2, 2), ArgumentError);
  EXPECT_THROW(MeasurementOp::dense(kernels::RowMatrix::Ones(2, 5), 2, 2), ArgumentError);
  EXPECT_THROW(MeasurementOp::factored(Matrix::Ones(2, 3), Matrix::Ones(2, 2)), ArgumentError);
  kernels::RowMatrix bad = kernels::RowMatrix::Ones(1, 4);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(MeasurementOp::dense(bad, 2, 2), ArgumentError);
}

TEST(Construct, ScaledKeepsForm) {
  Rng rng(11);
  const Matrix x = rng.gaussian(3, 3);
  for (EnsembleKind k : {EnsembleKind::gaussian, EnsembleKind::factored_gaussian, EnsembleKind::completion}) {
    const auto op = sample({k, 3, 3, 5, 1});
    EXPECT_LT((op.scaled(3.0).apply(x) - 3.0 * op.apply(x)).norm(), 1e-12);
  }
}

TEST(OperatorNorm, Identity) {
  EXPECT_NEAR(operator_norm_estimate(MeasurementOp::identity(4, 3), 10, 1), 1.0, 1e-6);
}

TEST(OperatorNorm, Homogeneous) {
  const auto op = sample({EnsembleKind::gaussian, 5, 5, 20, 2});
  EXPECT_NEAR(operator_norm_estimate(op.scaled(3.0), 50, 7), 3.0 * operator_norm_estimate(op, 50, 7), 1e-10);
}

TEST(OperatorNorm, GaussianAgainstExactSvd) {
  const auto op = sample({EnsembleKind::gaussian, 20, 20, 100, 3});
  const double exact = operator_norm(op.to_dense());
  const double est = operator_norm_estimate(op, 200, 4);
  const double ref = 1.0 + std::sqrt(400.0 / 100.0);
  EXPECT_GE(est, 0.6 * ref);
  EXPECT_LE(est, 1.4 * ref);
  EXPECT_LE(est, exact * (1 + 1e-12));
  EXPECT_GE(est, 0.99 * exact);
}

TEST(OperatorNorm, NondecreasingInIterations) {
  const auto op = sample({EnsembleKind::bernoulli, 6, 6, 30, 5});
  double prev = 0;
  for (int it = 1; it <= 40; ++it) {
    const double est = operator_norm_estimate(op, it, 9);
    EXPECT_GE(est, prev);
    prev = est;
  }
  EXPECT_THROW(operator_norm_estimate(op, 0, 1), ArgumentError);
}

TEST(Hankel, GeometricResponseIsRankOne) {
  const Matrix h = hankel_matrix(Eigen::Vector3d(1, 0.5, 0.25));
  Matrix expect(2, 2);
  expect << 1, 0.5, 0.5, 0.25;
  EXPECT_EQ(h, expect);
  EXPECT_EQ(numeric_rank(h), 1);
  EXPECT_EQ(hankel_impulse(h), Eigen::Vector3d(1, 0.5, 0.25));
  EXPECT_THROW(hankel_matrix(Eigen::Vector2d(1, 2)), ArgumentError);
}

TEST(Hankel, OrderTwoHasRankTwo) {
  Vector h(9);
  for (Index t = 0; t < 9; ++t) h(t) = std::pow(0.5, t) - 2.0 * std::pow(-0.7, t);
  EXPECT_EQ(numeric_rank(hankel_matrix(h), 1e-9), 2);
}

TEST(Hankel, FeasiblePointsAreHankelAndMatchData) {
  Rng rng(12);
  const Index N = 3, p = 2;
  const Matrix inputs = rng.gaussian(p, N + 1);
  const Vector y = rng.gaussian(p, 1);
  const HankelProblem prob = hankel_problem(y, inputs);
  EXPECT_EQ(prob.op.rows(), N + 1);
  EXPECT_EQ(prob.op.measurements(), p + (N + 1) * (N + 1) - (2 * N + 1));
  const Matrix x = project_affine(prob.op, rng.gaussian(N + 1, N + 1), prob.b);
  EXPECT_NEAR(x(0, 1), x(1, 0), 1e-10);
  for (Index i = 0; i <= N; ++i) {
    for (Index j = 0; j <= N; ++j) {
      if (i + j <= N) EXPECT_NEAR(x(i, j), x(0, i + j), 1e-10);
      else EXPECT_NEAR(x(i, j), x(i + j - N, N), 1e-10);
    }
  }
  const Vector h = hankel_impulse(x);
  EXPECT_LT((inputs * h.head(N + 1) - y).norm(), 1e-9);
}

TEST(Hankel, ShapeErrors) {
  EXPECT_THROW(hankel_problem(Vector::Ones(3), Matrix::Ones(2, 4)), ArgumentError);
  EXPECT_THROW(hankel_impulse(Matrix::Ones(2, 3)), ArgumentError);
}
