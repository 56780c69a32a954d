// Copyright 2026 The wbc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wbc/qp.hpp"

#include <gtest/gtest.h>

#include "reference_qp.hpp"

namespace {

using namespace wbc;

TEST(SolveQp, UnconstrainedProjection) {
  // min ||z - a||^2  ->  z = a
  const int n = 4;
  QpProblem p;
  VecX a(n);
  a << 1.0, -2.0, 0.5, 3.0;
  p.Q = 2.0 * MatX::Identity(n, n);
  p.c = -2.0 * a;
  p.A = MatX(0, n);
  p.b = VecX(0);
  p.G = MatX(0, n);
  p.h = VecX(0);
  QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR((s.z - a).norm(), 0, 1e-12);
}

TEST(SolveQp, EqualityKktByHand) {
  // min ||z||^2 s.t. z1 = 1  ->  z = e1, equality dual = -2.
  const int n = 3;
  QpProblem p;
  p.Q = 2.0 * MatX::Identity(n, n);
  p.c = VecX::Zero(n);
  p.A = MatX::Zero(1, n);
  p.A(0, 0) = 1.0;
  p.b = VecX::Ones(1);
  p.G = MatX(0, n);
  p.h = VecX(0);
  QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.z.tail(2).norm(), 0, 1e-12);
  EXPECT_NEAR(s.eq_duals[0], -2.0, 1e-12);
}

TEST(SolveQp, ActiveInequality) {
  // min (z-2)^2 s.t. z <= 1  ->  z = 1, mu = 2.
  QpProblem p;
  p.Q = 2.0 * MatX::Identity(1, 1);
  p.c = VecX::Constant(1, -4.0);
  p.A = MatX(0, 1);
  p.b = VecX(0);
  p.G = MatX::Identity(1, 1);
  p.h = VecX::Ones(1);
  QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.ineq_duals[0], 2.0, 1e-12);
}

TEST(SolveQp, DetectsInfeasibleEqualities) {
  QpProblem p;
  p.Q = MatX::Identity(2, 2);
  p.c = VecX::Zero(2);
  p.A = MatX(2, 2);
  p.A << 1, 0, 1, 0;
  p.b = VecX(2);
  p.b << 0, 1;
  p.G = MatX(0, 2);
  p.h = VecX(0);
  EXPECT_EQ(solve_qp(p).status, QpStatus::infeasible);
}

TEST(SolveQp, DetectsInfeasibleInequalities) {
  // z <= -1 and -z <= -1 cannot hold together.
  QpProblem p;
  p.Q = MatX::Identity(1, 1);
  p.c = VecX::Zero(1);
  p.A = MatX(0, 1);
  p.b = VecX(0);
  p.G = MatX(2, 1);
  p.G << 1, -1;
  p.h = VecX(2);
  p.h << -1, -1;
  EXPECT_EQ(solve_qp(p).status, QpStatus::infeasible);
}

TEST(SolveQp, MatchesInteriorPointOnRandomProblems) {
  Rng rng(2024);
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    QpProblem p = oracle::random_qp(rng, 24);
    QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::optimal) << "trial " << trial;
    EXPECT_LE(s.kkt_stationarity, 1e-8) << "trial " << trial;
    EXPECT_LE(s.kkt_feasibility, 1e-8) << "trial " << trial;
    EXPECT_LE(s.kkt_complementarity, 1e-8) << "trial " << trial;
    oracle::IpmResult ref = oracle::solve_qp_interior_point(p);
    if (!ref.converged) continue;  // reference failed to polish, skip pairing
    ++solved;
    EXPECT_LE(std::abs(s.objective - ref.objective),
              1e-6 * (1.0 + std::abs(ref.objective)))
        << "trial " << trial;
  }
  EXPECT_GE(solved, 90);
}

TEST(SolveQp, DeterministicSolutionReport) {
  Rng rng(77);
  QpProblem p = oracle::random_qp(rng, 30);
  QpSolution a = solve_qp(p, 1e-10, 300);
  QpSolution b = solve_qp(p, 1e-10, 300);
  ASSERT_EQ(a.status, b.status);
  ASSERT_EQ(a.iterations, b.iterations);
  ASSERT_EQ(a.z.size(), b.z.size());
  for (int i = 0; i < a.z.size(); ++i) EXPECT_EQ(a.z[i], b.z[i]);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(SolveQp, BlockLayoutAccess) {
  QpProblem p;
  p.layout = {{"u2", 3}, {"tau", 10}, {"qdd", 16}};
  EXPECT_EQ(p.block_offset("u2"), 0);
  EXPECT_EQ(p.block_offset("tau"), 3);
  EXPECT_EQ(p.block_offset("qdd"), 13);
  EXPECT_EQ(p.block_size("qdd"), 16);
  EXPECT_THROW(p.block_offset("nope"), std::invalid_argument);
  VecX z = VecX::LinSpaced(29, 0, 28);
  EXPECT_EQ(p.block_of(z, "tau")[0], 3.0);
}

TEST(SolveQp, RedundantEqualitiesAccepted) {
  // Duplicated consistent equality rows must not be reported infeasible.
  QpProblem p;
  p.Q = 2.0 * MatX::Identity(3, 3);
  p.c = VecX::Zero(3);
  p.A = MatX(2, 3);
  p.A << 1, 1, 0, 1, 1, 0;
  p.b = VecX(2);
  p.b << 2, 2;
  p.G = MatX(0, 3);
  p.h = VecX(0);
  QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.z[0] + s.z[1], 2.0, 1e-10);
}

}  // namespace
