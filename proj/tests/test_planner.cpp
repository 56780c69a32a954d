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

#include "wbc/planner.hpp"

#include <gtest/gtest.h>

namespace {

using namespace wbc;

TEST(LipMatrices, EquilibriumOverCop) {
  LipParams prm;
  prm.z0 = 0.85;
  Eigen::Matrix<double, 6, 6> a;
  Eigen::Matrix<double, 6, 2> b;
  Eigen::Matrix<double, 3, 6> c;
  lip_matrices(prm, &a, &b, &c);
  Vec6 x3;
  x3 << 0.3, -0.1, 0.85, 0, 0, 0;
  Vec2 u3(0.3, -0.1);
  EXPECT_NEAR((a * x3 + b * u3).norm(), 0, 1e-12);
}

TEST(LipMatrices, HorizontalEigenvalues) {
  LipParams prm;
  prm.z0 = 0.85;
  prm.g = 9.81;
  Eigen::Matrix<double, 6, 6> a;
  Eigen::Matrix<double, 6, 2> b;
  Eigen::Matrix<double, 3, 6> c;
  lip_matrices(prm, &a, &b, &c);
  Eigen::Matrix2d horiz;
  horiz << a(0, 3), 0, a(3, 0), 0;
  // analytic eigenvalues of the [p; v] block: +/- sqrt(g/z0) = +/- 3.397
  Eigen::Matrix2d block;
  block << 0, 1, a(3, 0), 0;
  Eigen::EigenSolver<Eigen::Matrix2d> es(block);
  std::vector<double> ev{es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
  std::sort(ev.begin(), ev.end());
  EXPECT_NEAR(ev[0], -3.397, 1e-3);
  EXPECT_NEAR(ev[1], 3.397, 1e-3);
}

TEST(LipMatrices, OutputSelectsPosition) {
  LipParams prm;
  Eigen::Matrix<double, 6, 6> a;
  Eigen::Matrix<double, 6, 2> b;
  Eigen::Matrix<double, 3, 6> c;
  lip_matrices(prm, &a, &b, &c);
  Vec6 x3;
  x3 << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(Vec3(c * x3), Vec3(1, 2, 3));
}

TEST(LipReference, StandingPlanIsConstant) {
  LipParams prm;
  FootstepPlan plan;  // no steps
  LipState init;
  init.x3 << 0.1, -0.2, prm.z0, 0, 0, 0;
  LipTrajectory traj = lip_reference(plan, prm, init);
  for (double t : {0.0, 0.5, 2.0, 10.0}) {
    LipState s = traj.at(t);
    EXPECT_NEAR((s.position() - Vec3(0.1, -0.2, prm.z0)).norm(), 0, 1e-12);
    EXPECT_NEAR(s.velocity().norm(), 0, 1e-12);
    EXPECT_NEAR((s.u3 - Vec2(0.1, -0.2)).norm(), 0, 1e-12);
  }
}

TEST(LipReference, SingleSupportCoshSolution) {
  LipParams prm;
  prm.z0 = 0.9;
  prm.ds_fraction = 0.0;  // phase is pure single support
  FootstepPlan plan;
  plan.initial_left = Vec3(0, 0.1, 0);
  plan.initial_right = Vec3(0, -0.1, 0);
  FootstepStep step;
  step.foot = Foot::left;  // stance on the right sole center c
  step.position = Vec3(0.2, 0.1, 0);
  step.touchdown = 0.8;
  plan.steps.push_back(step);

  const Vec2 c(0, -0.1);
  const Vec2 d(0.03, 0.02);
  LipState init;
  init.x3 << c.x() + d.x(), c.y() + d.y(), prm.z0, 0, 0, 0;
  LipTrajectory traj = lip_reference(plan, prm, init);
  const double w = prm.omega();
  for (double t : {0.1, 0.3, 0.5, 0.7}) {
    const LipState s = traj.at(t);
    const Vec2 expected = c + d * std::cosh(w * t);
    EXPECT_NEAR((Vec2(s.x3[0], s.x3[1]) - expected).norm(), 0, 1e-10) << "t=" << t;
  }
}

TEST(LipReference, FiniteDifferenceSelfConsistency) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 6, 0.12);
  LipState init = nominal_lip_start(plan, prm, Vec2(0, 0));
  LipTrajectory traj = lip_reference(plan, prm, init);
  Eigen::Matrix<double, 6, 6> a;
  Eigen::Matrix<double, 6, 2> b;
  Eigen::Matrix<double, 3, 6> c;
  lip_matrices(prm, &a, &b, &c);
  const double h = 1e-6;
  for (double t = 0.05; t < plan.horizon(); t += 0.101) {
    const LipState s = traj.at(t);
    const Vec6 fd = (traj.at(t + h).x3 - traj.at(t - h).x3) / (2 * h);
    const Vec6 model = a * s.x3 + b * s.u3;
    EXPECT_NEAR((fd - model).cwiseAbs().maxCoeff(), 0, 1e-6) << "t=" << t;
  }
}

TEST(LipReference, DcmStartStaysBounded) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 8, 0.12);
  LipState init = nominal_lip_start(plan, prm, Vec2(0, 0));
  LipTrajectory traj = lip_reference(plan, prm, init);
  for (double t = 0; t < plan.horizon() + 2.0; t += 0.05) {
    const LipState s = traj.at(t);
    EXPECT_LE(std::abs(s.x3[0]), 1.0) << "t=" << t;
    EXPECT_LE(std::abs(s.x3[1]), 0.5) << "t=" << t;
  }
}

TEST(LipReference, RejectsInfeasiblePlan) {
  LipParams prm;
  FootstepPlan plan;
  FootstepStep s;
  s.touchdown = -0.5;
  plan.steps.push_back(s);
  LipState init;
  init.x3[2] = prm.z0;
  EXPECT_THROW(lip_reference(plan, prm, init), std::invalid_argument);
}

TEST(ComInterface, DirectSubstitution) {
  LipState lip;
  lip.x3 << 1, 2, 0.95, 0.3, -0.2, 0;
  ComState com;
  com.x2 = lip.position();
  const Mat3 k = -3.0 * Mat3::Identity();
  EXPECT_NEAR((com_interface(com, lip, k) - lip.velocity()).norm(), 0, 1e-14);

  LipState still;
  still.x3 << 0, 0, 0.95, 0, 0, 0;
  ComState off;
  off.x2 = Vec3(0.1, 0, 0.95);
  const Vec3 u2 = com_interface(off, still, -1.0 * Mat3::Identity());
  EXPECT_NEAR((u2 - Vec3(-0.1, 0, 0)).norm(), 0, 1e-14);
}

TEST(ComInterface, ClosedLoopContraction) {
  // xdot2 = u2 with a constant LIP state: error contracts at rate |max eig K|.
  LipState lip;
  lip.x3 << 0.2, -0.1, 0.95, 0, 0, 0;
  const Mat3 k = -3.0 * Mat3::Identity();
  ComState com;
  com.x2 = lip.position() + Vec3(0.1, 0.05, -0.02);
  const double dt = 1e-4;
  double t = 0;
  for (int i = 0; i < 20000; ++i, t += dt) com.x2 += dt * com_interface(com, lip, k);
  const double expected = 0.1 * std::exp(-3.0 * t);  // x-component decay
  EXPECT_NEAR(com.x2.x() - lip.position().x(), expected, 2e-4);
}

TEST(ComInterface, HurwitzCheck) {
  EXPECT_TRUE(is_hurwitz(-3.0 * Mat3::Identity()));
  EXPECT_FALSE(is_hurwitz(Mat3::Identity()));
  Mat3 marginal = Mat3::Zero();
  EXPECT_FALSE(is_hurwitz(marginal));
}

TEST(SwingReference, BoundaryConditions) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 2, 0.12);
  const auto& step = plan.steps[0];
  const double t_prev = 0.0;
  const double dur = step.touchdown - t_prev;
  const double lift = t_prev + prm.ds_fraction * dur;

  SwingTargets at_lift = swing_reference(plan, prm, lift + 1e-12);
  EXPECT_FALSE(at_lift.left.stance);
  EXPECT_NEAR((at_lift.left.position - plan.initial_left).norm(), 0, 1e-9);
  EXPECT_NEAR(at_lift.left.velocity.norm(), 0, 1e-6);
  EXPECT_NEAR(at_lift.left.acceleration.norm(), 0, 1e-3);

  const double mid = 0.5 * (lift + step.touchdown);
  SwingTargets at_mid = swing_reference(plan, prm, mid);
  const double apex = std::max(plan.initial_left.z(), step.position.z()) + plan.apex_height;
  EXPECT_NEAR(at_mid.left.position.z(), apex, 1e-9);

  SwingTargets at_td = swing_reference(plan, prm, step.touchdown - 1e-9);
  EXPECT_NEAR((at_td.left.position - step.position).norm(), 0, 1e-6);

  SwingTargets after = swing_reference(plan, prm, step.touchdown + 1e-9);
  EXPECT_TRUE(after.left.stance);
  EXPECT_NEAR((after.left.position - step.position).norm(), 0, 1e-12);
}

TEST(SwingReference, EndpointsExact) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 3, 0.15);
  for (size_t k = 0; k < plan.steps.size(); ++k) {
    const double t_prev = k == 0 ? 0.0 : plan.steps[k - 1].touchdown;
    const double dur = plan.steps[k].touchdown - t_prev;
    const double lift = t_prev + prm.ds_fraction * dur;
    SwingTargets a = swing_reference(plan, prm, lift);
    SwingTargets b = swing_reference(plan, prm, plan.steps[k].touchdown - 1e-13);
    const Foot f = plan.steps[k].foot;
    EXPECT_NEAR((a.of(f).position - plan.planned_pose(f, t_prev)).norm(), 0, 1e-12);
    EXPECT_NEAR((b.of(f).position - plan.steps[k].position).norm(), 0, 1e-7);
  }
}

TEST(SwingReference, StanceFlagsFollowSchedule) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 2, 0.12);
  // During double support both feet are stance.
  auto groups = stance_groups(plan, prm, 0.05);
  EXPECT_EQ(groups.size(), 2u);
  // During the first swing (left foot), only the right foot carries.
  const double t_swing = 0.5 * (prm.ds_fraction * plan.steps[0].touchdown +
                                plan.steps[0].touchdown);
  groups = stance_groups(plan, prm, t_swing);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0], "R");
}

TEST(CopTimeline, DoubleSupportStaysInHull) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 4, 0.12);
  LipState init = nominal_lip_start(plan, prm, Vec2(0, 0));
  LipTrajectory traj = lip_reference(plan, prm, init);
  // Every CoP sample lies on the segment between two sole centers, hence
  // inside the convex hull of the two sole rectangles.
  std::vector<Vec2> centers{plan.initial_left.head<2>(), plan.initial_right.head<2>()};
  Vec2 mid0 = 0.5 * (centers[0] + centers[1]);
  (void)mid0;
  for (double t = 0.001; t < plan.horizon(); t += 0.013) {
    const Vec2 u = traj.at(t).u3;
    // check u is a convex combination of some pair of planned sole centers
    std::vector<Vec2> anchors{plan.planned_pose(Foot::left, t).head<2>(),
                              plan.planned_pose(Foot::right, t).head<2>()};
    anchors.push_back(0.5 * (anchors[0] + anchors[1]));
    bool ok = false;
    for (size_t a = 0; a < anchors.size() && !ok; ++a)
      for (size_t b = 0; b < anchors.size() && !ok; ++b) {
        const Vec2 ab = anchors[b] - anchors[a];
        const double len2 = ab.squaredNorm();
        const double s = len2 < 1e-18 ? 0.0 : (u - anchors[a]).dot(ab) / len2;
        if (s > -1e-9 && s < 1 + 1e-9 &&
            (u - (anchors[a] + s * ab)).norm() < 1e-9)
          ok = true;
      }
    EXPECT_TRUE(ok) << "t=" << t << " u=" << u.transpose();
  }
}

TEST(FootstepPlan, JsonRoundTrip) {
  LipParams prm;
  FootstepPlan plan = make_walk_plan(prm, 3, 0.1);
  plan.apex_height = 0.07;
  nlohmann::json j = serialize_plan(plan);
  FootstepPlan r = parse_plan(j);
  ASSERT_EQ(r.steps.size(), plan.steps.size());
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    EXPECT_EQ(r.steps[i].foot, plan.steps[i].foot);
    EXPECT_EQ(r.steps[i].position, plan.steps[i].position);
    EXPECT_EQ(r.steps[i].touchdown, plan.steps[i].touchdown);
  }
  EXPECT_EQ(r.apex_height, plan.apex_height);
}

TEST(FootstepPlan, RejectsNonAlternatingFeet) {
  FootstepPlan plan;
  FootstepStep a;
  a.foot = Foot::left;
  a.touchdown = 1.0;
  FootstepStep b = a;
  b.touchdown = 2.0;
  plan.steps = {a, b};
  EXPECT_THROW(plan.validate(), std::invalid_argument);
}

}  // namespace
