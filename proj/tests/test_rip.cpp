#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lowrank/errors.hpp"
#include "lowrank/random.hpp"
#include "lowrank/rip.hpp"
#include "test_util.hpp"

using namespace lowrank;
using lowrank::test::random_orthonormal;

namespace {

// Exact distortion of op over span(q), q with orthonormal columns.
double subspace_distortion(const MeasurementOp& op, const Matrix& q) {
  Matrix aq(op.measurements(), q.cols());
  for (Index j = 0; j < q.cols(); ++j) aq.col(j) = op.apply(unvec(q.col(j), op.rows(), op.cols()));
  const Vector s = Eigen::JacobiSVD<Matrix>(aq).singularValues();
  return std::max(std::abs(s(0) - 1.0), std::abs(1.0 - s(s.size() - 1)));
}

// (r+1)th singular value; zero when rank x <= r.
double tail_singular_value(const Matrix& x, Index r) {
  return Eigen::JacobiSVD<Matrix>(x).singularValues()(r);
}

}  // namespace

TEST(Rip, IdentityHasNoDistortion) {
  const auto op = MeasurementOp::identity(5, 4);
  for (int r = 1; r <= 4; ++r) EXPECT_LT(estimate_delta_lower(op, r, 50, 1).delta_lower, 1e-12);
}

TEST(Rip, DoubledIdentityHasDistortionOne) {
  const auto op = MeasurementOp::identity(4, 4).scaled(2.0);
  const RipEstimate est = estimate_delta_lower(op, 2, 20, 2, true);
  EXPECT_NEAR(est.delta_lower, 1.0, 1e-12);
  for (double g : est.sample_gains) EXPECT_NEAR(g, 2.0, 1e-12);
}

TEST(Rip, GaussianNearIsometryOnRankOne) {
  const auto op = sample({EnsembleKind::gaussian, 10, 10, 400, kDefaultSeed});
  const RipEstimate est = estimate_delta_lower(op, 1, 500, 3);
  EXPECT_LT(est.delta_lower, 0.6);
  EXPECT_GT(est.delta_lower, 0.0);
  EXPECT_EQ(est.sample_gains.size(), 500u);
}

TEST(Rip, WorstCaseReproducesEstimate) {
  const auto op = sample({EnsembleKind::bernoulli, 6, 7, 30, 4});
  const RipEstimate est = estimate_delta_lower(op, 2, 100, 5);
  EXPECT_NEAR(est.worst_case.norm(), 1.0, 1e-12);
  EXPECT_LE(tail_singular_value(est.worst_case, 2), 1e-10);
  EXPECT_DOUBLE_EQ(distortion(op, est.worst_case), est.delta_lower);
  double max_dev = 0;
  for (double g : est.sample_gains) max_dev = std::max(max_dev, std::abs(g - 1.0));
  EXPECT_NEAR(max_dev, est.delta_lower, 1e-12);
}

TEST(Rip, RefinementNeverLowersTheBound) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto op = sample({EnsembleKind::gaussian, 6, 6, 20, s});
    const double plain = estimate_delta_lower(op, 1, 30, s).delta_lower;
    const RipEstimate refined = estimate_delta_lower(op, 1, 30, s, true);
    EXPECT_TRUE(refined.refined);
    EXPECT_GE(refined.delta_lower, plain);
    EXPECT_LE(tail_singular_value(refined.worst_case, 1), 1e-10);
  }
}

TEST(Rip, LongerRunsExtendShorterOnes) {
  const auto op = sample({EnsembleKind::gaussian, 5, 5, 20, 6});
  const RipEstimate a = estimate_delta_lower(op, 2, 40, 7);
  const RipEstimate b = estimate_delta_lower(op, 2, 80, 7);
  for (int t = 0; t < 40; ++t) EXPECT_EQ(a.sample_gains[t], b.sample_gains[t]);
  EXPECT_GE(b.delta_lower, a.delta_lower);
}

TEST(Rip, GainsScaleWithOperator) {
  const auto op = sample({EnsembleKind::gaussian, 5, 5, 20, 8});
  const RipEstimate a = estimate_delta_lower(op, 1, 25, 9);
  const RipEstimate b = estimate_delta_lower(op.scaled(3.0), 1, 25, 9);
  for (int t = 0; t < 25; ++t) EXPECT_NEAR(b.sample_gains[t], 3.0 * a.sample_gains[t], 1e-12);
}

TEST(Rip, InvalidArguments) {
  const auto op = MeasurementOp::identity(3, 4);
  EXPECT_THROW(estimate_delta_lower(op, 0, 10, 1), ArgumentError);
  EXPECT_THROW(estimate_delta_lower(op, 4, 10, 1), ArgumentError);
  EXPECT_THROW(estimate_delta_lower(op, 1, 0, 1), ArgumentError);
  EXPECT_THROW(monotonicity_check(op, 4, 10, 1), ArgumentError);
  EXPECT_THROW(distortion(op, Matrix::Zero(3, 4)), ArgumentError);
}

TEST(Monotonicity, NondecreasingInRank) {
  const auto op = sample({EnsembleKind::gaussian, 10, 10, 300, 10});
  const std::vector<double> d = monotonicity_check(op, 5, 200, 11);
  ASSERT_EQ(d.size(), 5u);
  for (std::size_t r = 1; r < d.size(); ++r) EXPECT_GE(d[r], d[r - 1] - 1e-12);
}

TEST(Monotonicity, IdentityGivesZeros) {
  const std::vector<double> d = monotonicity_check(MeasurementOp::identity(4, 4), 4, 20, 1);
  for (double v : d) EXPECT_LT(v, 1e-12);
}

TEST(SubspaceDistance, Examples) {
  const Matrix p = Eigen::Vector2d(1, 0).asDiagonal();
  EXPECT_EQ(subspace_distance(p, p), 0.0);
  const Matrix q = Eigen::Vector2d(0, 1).asDiagonal();
  EXPECT_NEAR(subspace_distance(p, q), 1.0, 1e-12);
  for (double theta : {0.1, 0.5, 1.2}) {
    const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
    EXPECT_NEAR(subspace_distance(p, u * u.transpose()), std::sin(theta), 1e-12);
  }
}

TEST(SubspaceDistance, RejectsNonProjections) {
  const Matrix p = Eigen::Vector2d(1, 0).asDiagonal();
  EXPECT_THROW(subspace_distance(p, Matrix::Constant(2, 2, 1.0)), ArgumentError);
  EXPECT_THROW(subspace_distance(p, Matrix::Identity(3, 3)), ArgumentError);
}

TEST(Perturbation, BoundHoldsForNearbySubspaces) {
  Rng rng(12);
  for (int t = 0; t < 5; ++t) {
    const auto op = sample({EnsembleKind::gaussian, 4, 5, 40, rng.bits()});
    const Matrix u1 = random_orthonormal(rng, 20, 3);
    Matrix u2 = u1 + 0.05 * rng.gaussian(20, 3);
    u2 = Eigen::HouseholderQR<Matrix>(u2).householderQ() * Matrix::Identity(20, 3);
    const double delta = subspace_distortion(op, u1);
    const PerturbationReport rep = perturbation_bound_check(op, u1, u2, delta, 200, rng.bits());
    EXPECT_TRUE(rep.holds);
    EXPECT_GT(rep.rho, 0.0);
    EXPECT_LT(rep.rho, 1.0);
    EXPECT_LE(rep.max_distortion, rep.bound + 1e-6);
    EXPECT_FALSE(rep.violating_sample.has_value());
  }
}

TEST(Perturbation, IdenticalSubspaces) {
  Rng rng(13);
  const auto op = sample({EnsembleKind::gaussian, 3, 3, 20, 1});
  const Matrix u = random_orthonormal(rng, 9, 2);
  const double delta = subspace_distortion(op, u);
  const PerturbationReport rep = perturbation_bound_check(op, u, u, delta, 50, 2);
  EXPECT_TRUE(rep.holds);
  EXPECT_LT(rep.rho, 1e-12);
  EXPECT_LE(rep.max_distortion, delta + 1e-9);
}

TEST(Perturbation, RejectsTooSmallDelta) {
  Rng rng(14);
  const auto op = sample({EnsembleKind::gaussian, 3, 3, 20, 1});
  const Matrix u = random_orthonormal(rng, 9, 2);
  EXPECT_THROW(perturbation_bound_check(op, u, u, 0.5 * subspace_distortion(op, u), 10, 1), ArgumentError);
}
