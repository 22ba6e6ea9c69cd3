#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include <sosred/oracle.hpp>

#include "test_support.hpp"

namespace sosred {
namespace {

Polynomial X(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }
Polynomial C(std::size_t n, double c) { return Polynomial::constant(n, c); }

LinearSystem mass_spring() {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.9701, 0.0459, -1.1610, 0.8312;
  B << 0.0299, 1.1610;
  return LinearSystem(A, B);
}

GTEST_TEST(GridMinTest, HalfLine) {
  SemialgebraicSet set(1);
  set.add(C(1, 1) - X(1, 0));
  const GridMinResult r = grid_min(C(1, 2) - X(1, 0), set, Box::symmetric(1, 2.0), 401);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_NEAR(r.argmin(0), 1.0, 1e-12);
  EXPECT_EQ(r.feasible_points, 301u);
}

GTEST_TEST(GridMinTest, SquareCorners) {
  SemialgebraicSet set(2);
  set.add(C(2, 1) - X(2, 0) * X(2, 0));
  set.add(C(2, 1) - X(2, 1) * X(2, 1));
  const Polynomial c = C(2, 4) - X(2, 0) * X(2, 0) - X(2, 1) * X(2, 1);
  const GridMinResult r = grid_min(c, set, Box::symmetric(2, 2.0), 81);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  EXPECT_NEAR(std::abs(r.argmin(0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.argmin(1)), 1.0, 1e-12);
}

GTEST_TEST(GridMinTest, EmptyIsInfinite) {
  SemialgebraicSet set(1);
  set.add(C(1, -1) - X(1, 0) * X(1, 0));
  const GridMinResult r = grid_min(X(1, 0), set, Box::symmetric(1, 1.0), 11);
  EXPECT_TRUE(std::isinf(r.value));
  EXPECT_GT(r.value, 0);
  EXPECT_EQ(r.feasible_points, 0u);
}

GTEST_TEST(GridMinTest, Guards) {
  const SemialgebraicSet set(3);
  EXPECT_THROW(grid_min(C(3, 1), set, Box::symmetric(3, 1.0), 1000), std::invalid_argument);
  EXPECT_THROW(grid_min(C(3, 1), set, Box::symmetric(3, 1.0), 1), std::invalid_argument);
  EXPECT_THROW(grid_min(C(2, 1), set, Box::symmetric(3, 1.0), 5), std::invalid_argument);
  EXPECT_NO_THROW(grid_min(C(3, 1), set, Box::symmetric(3, 1.0), 215));
}

GTEST_TEST(GridMinTest, UpperBoundsRandomSamples) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const SemialgebraicSet set = test::random_polytope(rng, 2, 4);
    const Polynomial c = test::random_polynomial(rng, 2, 2, 5);
    const Box box = Box::symmetric(2, 3.0);
    const GridMinResult r = grid_min(c, set, box, 201);
    ASSERT_TRUE(std::isfinite(r.value));
    EXPECT_TRUE(set.contains(r.argmin, kFeasibilityTol));
    EXPECT_NEAR(c.eval(r.argmin), r.value, 1e-12);
    // The grid includes the origin, which lies inside every random polytope.
    EXPECT_LE(r.value, c.eval(Eigen::VectorXd::Zero(2)) + 1e-12);
  }
}

GTEST_TEST(RefineLocalTest, FromGridArgmin) {
  SemialgebraicSet set(1);
  set.add(C(1, 1) - X(1, 0));
  const Polynomial c = C(1, 2) - X(1, 0);
  const Box box = Box::symmetric(1, 2.0);
  const GridMinResult g = grid_min(c, set, box, 401);
  const RefineResult r = refine_local(c, set, box, g.argmin);
  EXPECT_FALSE(r.start_infeasible);
  EXPECT_LE(r.value, 1.0 + 1e-9);
}

GTEST_TEST(RefineLocalTest, ImprovesCoarseStart) {
  SemialgebraicSet set(2);
  set.add(C(2, 1) - X(2, 0) * X(2, 0) - X(2, 1) * X(2, 1));
  const Polynomial c = X(2, 0) + X(2, 1);
  const Box box = Box::symmetric(2, 2.0);
  Eigen::VectorXd start(2);
  start << 0.3, -0.2;
  const RefineResult r = refine_local(c, set, box, start, 2000);
  EXPECT_LE(r.value, c.eval(start));
  // Coordinate moves stall on the curved boundary short of -sqrt(2).
  EXPECT_LE(r.value, -1.3);
  EXPECT_TRUE(set.contains(r.point, kFeasibilityTol));
}

GTEST_TEST(RefineLocalTest, StationaryStart) {
  const Polynomial c = (X(2, 0) - C(2, 0.25)) * (X(2, 0) - C(2, 0.25)) + X(2, 1) * X(2, 1);
  const SemialgebraicSet set(2);
  Eigen::VectorXd start(2);
  start << 0.25, 0.0;
  const RefineResult r = refine_local(c, set, Box::symmetric(2, 1.0), start);
  EXPECT_LE((r.point - start).norm(), 1e-9);
  EXPECT_NEAR(r.value, 0.0, 1e-9);
}

GTEST_TEST(RefineLocalTest, InfeasibleStartIsFlagged) {
  SemialgebraicSet set(1);
  set.add(C(1, 1) - X(1, 0));
  Eigen::VectorXd start(1);
  start << 1.5;
  const RefineResult r = refine_local(X(1, 0), set, Box::symmetric(1, 2.0), start);
  EXPECT_TRUE(r.start_infeasible);
  EXPECT_EQ(r.point(0), 1.5);
}

GTEST_TEST(SimulateTest, IdentityIsConstant) {
  const LinearSystem sys(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1));
  Eigen::VectorXd x0(2);
  x0 << 0.7, -1.3;
  const Trajectory t = simulate(sys, x0, constant_input(Eigen::VectorXd::Constant(1, 3.0)), 25);
  ASSERT_EQ(t.states.size(), 26u);
  ASSERT_EQ(t.inputs.size(), 25u);
  for (const auto& x : t.states) EXPECT_EQ(x, x0);
}

GTEST_TEST(SimulateTest, MassSpringSteadyState) {
  const Trajectory t =
      simulate(mass_spring(), Eigen::VectorXd::Zero(2), constant_input(Eigen::VectorXd::Constant(1, 0.005)), 200);
  EXPECT_NEAR(t.states.back()(0), 0.005, 1e-6);
  EXPECT_NEAR(t.states.back()(1), 0.0, 1e-6);
}

GTEST_TEST(SimulateTest, AgreesWithPredictRg) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const LinearSystem sys(test::random_stable_2x2(rng), test::random_point(rng, 2).reshaped(2, 1));
    const Eigen::VectorXd x0 = test::random_point(rng, 2);
    const Eigen::VectorXd v = test::random_point(rng, 1);
    const Trajectory t = simulate(sys, x0, constant_input(v), 40);
    Eigen::VectorXd xv(3);
    xv << x0, v;
    for (int k = 0; k <= 40; ++k) {
      const PredictionMap p = predict_rg(sys, k);
      const Eigen::VectorXd pred = p.map.matrix * xv + p.map.offset;
      EXPECT_LE((pred - t.states[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

GTEST_TEST(SimulateTest, SequenceThenFeedback) {
  Eigen::MatrixXd A(2, 2), B(2, 1), K(1, 2);
  A << 1, 0.5, 0, 1;
  B << 0.125, 0.5;
  K << -0.5, -1.0;
  const LinearSystem sys(A, B);
  std::vector<Eigen::VectorXd> seq = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)};
  const Trajectory t = simulate(sys, Eigen::VectorXd::Ones(2), sequence_then_feedback(seq, K), 5);
  EXPECT_EQ(t.inputs[0](0), 1.0);
  EXPECT_EQ(t.inputs[1](0), -1.0);
  for (std::size_t j = 2; j < 5; ++j) EXPECT_NEAR(t.inputs[j](0), (K * t.states[j])(0), 1e-15);
}

GTEST_TEST(SimulateTest, DimensionErrors) {
  const LinearSystem sys = mass_spring();
  EXPECT_THROW(simulate(sys, Eigen::VectorXd::Zero(3), constant_input(Eigen::VectorXd::Zero(1)), 3),
               std::invalid_argument);
  EXPECT_THROW(simulate(sys, Eigen::VectorXd::Zero(2), constant_input(Eigen::VectorXd::Zero(2)), 3),
               std::invalid_argument);
}

GTEST_TEST(LpTest, TriangleMinimum) {
  SemialgebraicSet set(2);
  set.add(X(2, 0));
  set.add(X(2, 1));
  set.add(C(2, 1) - X(2, 0) - X(2, 1));
  const Polynomial c = C(2, 3) - 2.0 * X(2, 0) - X(2, 1);
  const LpResult a = lp_min(c, set);
  const LpResult b = vertex_min(c, set);
  ASSERT_EQ(a.status, LpStatus::Optimal);
  ASSERT_EQ(b.status, LpStatus::Optimal);
  EXPECT_NEAR(a.value, 1.0, 1e-7);
  EXPECT_NEAR(b.value, 1.0, 1e-12);
  EXPECT_NEAR(a.argmin(0), 1.0, 1e-6);
}

GTEST_TEST(LpTest, InfeasibleAndUnbounded) {
  SemialgebraicSet empty(1);
  empty.add(C(1, -1) - X(1, 0));
  empty.add(X(1, 0));
  EXPECT_EQ(lp_min(X(1, 0), empty).status, LpStatus::Infeasible);
  EXPECT_EQ(vertex_min(X(1, 0), empty).status, LpStatus::Infeasible);
  SemialgebraicSet half(1);
  half.add(C(1, 1) - X(1, 0));
  EXPECT_EQ(lp_min(X(1, 0), half).status, LpStatus::Unbounded);
  EXPECT_THROW(lp_min(X(1, 0) * X(1, 0), half), std::invalid_argument);
}

GTEST_TEST(LpTest, AgreesWithVertexEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 2);
    SemialgebraicSet set = test::random_polytope(rng, n, 6);
    for (std::size_t k = 0; k < n; ++k) {
      set.add(C(n, 3) - X(n, k));
      set.add(C(n, 3) + X(n, k));
    }
    const Polynomial c = Polynomial::affine(test::random_point(rng, static_cast<Eigen::Index>(n)), 0.5);
    const LpResult a = lp_min(c, set), b = vertex_min(c, set);
    ASSERT_EQ(a.status, LpStatus::Optimal);
    ASSERT_EQ(b.status, LpStatus::Optimal);
    EXPECT_NEAR(a.value, b.value, 1e-6 * std::max(1.0, std::abs(b.value)));
  }
}

}  // namespace
}  // namespace sosred
