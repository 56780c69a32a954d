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

#include "wbc/dynamics.hpp"

#include <gtest/gtest.h>

#include "wbc/model.hpp"

namespace {

using namespace wbc;

RobotModel free_body(double mass = 1.0, const Vec3& com = Vec3::Zero()) {
  RobotModel m;
  LinkSpec l;
  l.name = "body";
  l.mass = mass;
  l.inertia = Vec3(0.1, 0.12, 0.08).asDiagonal();
  l.com_offset = com;
  m.links.push_back(l);
  JointSpec j;
  j.name = "float";
  j.kind = JointKind::floating_base;
  j.parent = "world";
  j.child = "body";
  m.joints.push_back(j);
  finalize_model(m);
  return m;
}

GeneralizedState random_state(const RobotModel& m, Rng& rng, double vel_scale = 2.0) {
  GeneralizedState s = GeneralizedState::rest(m);
  s.base_pos = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 1.5));
  s.base_quat = quat_exp(rng.sphere() * rng.uniform(0, M_PI));
  for (int i = 0; i < s.joint_pos.size(); ++i) s.joint_pos[i] = rng.uniform(-1.2, 1.2);
  for (int i = 0; i < s.velocity.size(); ++i)
    s.velocity[i] = rng.uniform(-vel_scale, vel_scale);
  return s;
}

TEST(Dynamics, FreeBodyMassMatrix) {
  RobotModel m = free_body();
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    GeneralizedState s = random_state(m, rng);
    DynamicsTerms t = compute_terms(m, s);
    // Translational block m*I, no coupling, rotational block = body inertia.
    EXPECT_NEAR((t.mass_matrix.topLeftCorner<3, 3>() - Mat3::Identity()).norm(), 0, 1e-12);
    EXPECT_NEAR((t.mass_matrix.topRightCorner<3, 3>()).norm(), 0, 1e-9);
    EXPECT_NEAR(
        (t.mass_matrix.bottomRightCorner<3, 3>() - Mat3(Vec3(0.1, 0.12, 0.08).asDiagonal()))
            .norm(),
        0, 1e-9);
    // Gravity only in the vertical translational coordinate.
    VecX tg = t.gravity_torques;
    EXPECT_NEAR(tg[2], 1.0 * kGravity, 1e-12);
    tg[2] = 0;
    EXPECT_NEAR(tg.norm(), 0, 1e-9);
  }
}

TEST(Dynamics, FreeBodyNewton) {
  RobotModel m = free_body(2.5);
  Rng rng(3);
  GeneralizedState s = random_state(m, rng);
  s.velocity.setZero();
  ExternalForce f{0, Vec3::Zero(), Vec3(1.0, -2.0, 3.0)};
  // Cancel gravity, apply f at the CoM: linear acceleration f/m.
  VecX applied = VecX::Zero(6);
  applied[2] = 2.5 * kGravity;
  VecX qdd = forward_dynamics(m, s, applied, {f});
  EXPECT_NEAR((qdd.head<3>() - f.force / 2.5).norm(), 0, 1e-10);
  EXPECT_NEAR(qdd.tail<3>().norm(), 0, 1e-10);
}

TEST(Dynamics, ForceBalanceGivesZeroAcceleration) {
  RobotModel m = default_biped();
  Rng rng(17);
  GeneralizedState s = random_state(m, rng);
  DynamicsTerms t = compute_terms(m, s);
  VecX applied = t.velocity_bias + t.gravity_torques;
  VecX qdd = forward_dynamics(m, s, applied, {});
  EXPECT_NEAR(qdd.norm(), 0, 1e-8);
}

// ---------------------------------------------------------------------------
// Double pendulum oracle: closed-form Lagrangian M, C, tau_g for two links
// swinging about y-axes, derived by hand. The joint block of the floating
// model with the base at rest must match exactly.
// ---------------------------------------------------------------------------
struct Pendulum {
  double m1 = 1.3, d1 = 0.35, l1 = 0.6, i1 = 0.02;  // i*: about the CoM
  double m2 = 0.9, d2 = 0.25, i2 = 0.015;
};

RobotModel pendulum_model(const Pendulum& p) {
  RobotModel m;
  auto link = [](const std::string& name, double mass, double inertia_yy_origin,
                 const Vec3& com) {
    LinkSpec l;
    l.name = name;
    l.mass = mass;
    l.inertia = Vec3(inertia_yy_origin, inertia_yy_origin, 0.01).asDiagonal();
    l.com_offset = com;
    return l;
  };
  m.links.push_back(link("block", 5.0, 0.2, Vec3::Zero()));
  // Inertia about the link origin = about CoM + m d^2.
  m.links.push_back(link("rod1", p.m1, p.i1 + p.m1 * p.d1 * p.d1, Vec3(0, 0, -p.d1)));
  m.links.push_back(link("rod2", p.m2, p.i2 + p.m2 * p.d2 * p.d2, Vec3(0, 0, -p.d2)));
  JointSpec base{"float", JointKind::floating_base, "world", "block"};
  JointSpec j1{"q1", JointKind::revolute, "block", "rod1", Vec3::UnitY(),
               Vec3::Zero(), Vec3::Zero(), -100, 100};
  JointSpec j2{"q2", JointKind::revolute, "rod1", "rod2", Vec3::UnitY(),
               Vec3(0, 0, -p.l1), Vec3::Zero(), -100, 100};
  m.joints = {base, j1, j2};
  m.actuated = {"q1", "q2"};
  finalize_model(m);
  return m;
}

TEST(Dynamics, DoublePendulumLagrangianOracle) {
  Pendulum p;
  RobotModel model = pendulum_model(p);
  const double q1 = 0.4, q2 = -0.7, qd1 = 0.9, qd2 = -1.4;

  GeneralizedState s = GeneralizedState::rest(model);
  s.joint_pos << q1, q2;
  s.velocity << 0, 0, 0, 0, 0, 0, qd1, qd2;
  DynamicsTerms t = compute_terms(model, s);

  const double c2 = std::cos(q2), s2 = std::sin(q2);
  Eigen::Matrix2d M;
  M(0, 0) = p.i1 + p.m1 * p.d1 * p.d1 + p.i2 +
            p.m2 * (p.l1 * p.l1 + p.d2 * p.d2 + 2 * p.l1 * p.d2 * c2);
  M(0, 1) = p.i2 + p.m2 * (p.d2 * p.d2 + p.l1 * p.d2 * c2);
  M(1, 0) = M(0, 1);
  M(1, 1) = p.i2 + p.m2 * p.d2 * p.d2;

  Eigen::Matrix2d C;
  const double h = p.m2 * p.l1 * p.d2 * s2;
  C(0, 0) = -h * qd2;
  C(0, 1) = -h * (qd1 + qd2);
  C(1, 0) = h * qd1;
  C(1, 1) = 0.0;

  Eigen::Vector2d tg;
  tg[0] = (p.m1 * p.d1 + p.m2 * p.l1) * kGravity * std::sin(q1) +
          p.m2 * kGravity * p.d2 * std::sin(q1 + q2);
  tg[1] = p.m2 * kGravity * p.d2 * std::sin(q1 + q2);

  EXPECT_NEAR((t.mass_matrix.bottomRightCorner<2, 2>() - M).cwiseAbs().maxCoeff(), 0, 1e-8);
  EXPECT_NEAR((t.coriolis_matrix.bottomRightCorner<2, 2>() - C).cwiseAbs().maxCoeff(), 0,
              1e-8);
  EXPECT_NEAR((t.gravity_torques.tail<2>() - tg).cwiseAbs().maxCoeff(), 0, 1e-8);
  // Velocity bias must equal C qd.
  Eigen::Vector2d bias = C * Eigen::Vector2d(qd1, qd2);
  EXPECT_NEAR((t.velocity_bias.tail<2>() - bias).cwiseAbs().maxCoeff(), 0, 1e-8);
}

TEST(Dynamics, SkewSymmetryProperty) {
  RobotModel m = default_biped();
  Rng rng(29);
  const double step = 1e-6;
  for (int trial = 0; trial < 200; ++trial) {
    GeneralizedState s = random_state(m, rng);
    DynamicsTerms t = compute_terms(m, s);
    const VecX qd = s.velocity;
    const VecX dir = qd.normalized();
    MatX mp = mass_matrix(m, forward_kinematics(m, displace(s, dir, step)));
    MatX mn = mass_matrix(m, forward_kinematics(m, displace(s, dir, -step)));
    MatX mdot = (mp - mn) * (qd.norm() / (2 * step));
    MatX skw = mdot - 2.0 * t.coriolis_matrix;
    // Contraction with arbitrary vectors, not just qd.
    for (int k = 0; k < 5; ++k) {
      VecX v(m.n_vel());
      for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1, 1);
      EXPECT_LE(std::abs(v.dot(skw * v)), 1e-6 * (1 + v.squaredNorm()));
    }
    EXPECT_LE(std::abs(qd.dot(skw * qd)), 1e-6 * (1 + qd.squaredNorm()));
  }
}

TEST(Dynamics, MassMatrixSymmetricPositiveDefinite) {
  RobotModel m = default_biped();
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    GeneralizedState s = random_state(m, rng);
    MatX mm = mass_matrix(m, forward_kinematics(m, s));
    EXPECT_LE((mm - mm.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(mm);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Dynamics, TaskInertiaIsTotalMass) {
  RobotModel m = default_biped();
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    GeneralizedState s = random_state(m, rng);
    DynamicsTerms t = compute_terms(m, s);
    const double err =
        (t.task_inertia - m.total_mass * Mat3::Identity()).cwiseAbs().maxCoeff() /
        m.total_mass;
    EXPECT_LE(err, 1e-8);
  }
}

TEST(Dynamics, ComJacobianFiniteDifference) {
  RobotModel m = default_biped();
  Rng rng(41);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    GeneralizedState s = random_state(m, rng);
    DynamicsTerms t = compute_terms(m, s);
    auto com_at = [&](double eps) {
      return compute_terms(m, displace(s, s.velocity, eps)).com_position;
    };
    Vec3 fd = (com_at(h) - com_at(-h)) / (2 * h);
    EXPECT_NEAR((fd - t.com_jacobian * s.velocity).norm(), 0, 1e-5);
  }
}

TEST(Dynamics, PointJacobianFiniteDifference) {
  RobotModel m = default_biped();
  Rng rng(43);
  const double h = 1e-6;
  const Vec3 offset(0.1, -0.02, -0.05);
  for (int trial = 0; trial < 20; ++trial) {
    GeneralizedState s = random_state(m, rng);
    FrameKinematics fk = frame_kinematics(m, s, "foot_L", offset);
    auto pos_at = [&](double eps) {
      return frame_kinematics(m, displace(s, s.velocity, eps), "foot_L", offset).position;
    };
    Vec3 fd = (pos_at(h) - pos_at(-h)) / (2 * h);
    EXPECT_NEAR((fd - fk.jacobian * s.velocity).norm(), 0, 1e-5);
  }
}

TEST(Dynamics, JacobianDotVanishesAtRest) {
  RobotModel m = default_biped();
  Rng rng(47);
  GeneralizedState s = random_state(m, rng);
  s.velocity.setZero();
  FrameKinematics fk = frame_kinematics(m, s, "shin_R", Vec3(0, 0, -0.2));
  EXPECT_EQ(fk.jacobian_dot_v.norm(), 0.0);
}

TEST(Dynamics, UnknownLinkThrows) {
  RobotModel m = default_biped();
  GeneralizedState s = GeneralizedState::rest(m);
  EXPECT_THROW(frame_kinematics(m, s, "nope", Vec3::Zero()), std::invalid_argument);
}

// Jdot*qd central-difference cross-check: (J(q+h qd) - J(q-h qd))/(2h) qd.
TEST(Dynamics, JacobianDotFiniteDifference) {
  RobotModel m = default_biped();
  Rng rng(53);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    GeneralizedState s = random_state(m, rng);
    FrameKinematics fk = frame_kinematics(m, s, "foot_R", Vec3(0.05, 0, -0.05));
    auto jac_at = [&](double eps) {
      return frame_kinematics(m, displace(s, s.velocity, eps), "foot_R", Vec3(0.05, 0, -0.05))
          .jacobian;
    };
    MatX jd = (jac_at(h) - jac_at(-h)) / (2 * h);
    EXPECT_NEAR((jd * s.velocity - fk.jacobian_dot_v).norm(), 0, 1e-4);
  }
}

// ---------------------------------------------------------------------------
// Conservation oracle: free flight under gravity, no applied force. Total
// mechanical energy along an RK4 rollout at dt = 1e-5 must drift less than
// 1e-6 * E0 per second.
// ---------------------------------------------------------------------------
struct Rk4State {
  GeneralizedState s;
};

Rk4State rk4_step(const RobotModel& m, const Rk4State& x, double dt) {
  auto acc = [&](const GeneralizedState& s) {
    return forward_dynamics(m, s, VecX::Zero(m.n_vel()), {});
  };
  const VecX v1 = x.s.velocity;
  const VecX a1 = acc(x.s);
  GeneralizedState s2 = displace(x.s, v1, dt / 2);
  s2.velocity = x.s.velocity + dt / 2 * a1;
  const VecX v2 = s2.velocity;
  const VecX a2 = acc(s2);
  GeneralizedState s3 = displace(x.s, v2, dt / 2);
  s3.velocity = x.s.velocity + dt / 2 * a2;
  const VecX v3 = s3.velocity;
  const VecX a3 = acc(s3);
  GeneralizedState s4 = displace(x.s, v3, dt);
  s4.velocity = x.s.velocity + dt * a3;
  const VecX v4 = s4.velocity;
  const VecX a4 = acc(s4);
  Rk4State out;
  out.s = displace(x.s, (v1 + 2 * v2 + 2 * v3 + v4) / 6.0, dt);
  out.s.velocity = x.s.velocity + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
  return out;
}

double total_energy(const RobotModel& m, const GeneralizedState& s) {
  DynamicsTerms t = compute_terms(m, s);
  const double ke = 0.5 * s.velocity.dot(t.mass_matrix * s.velocity);
  const double pe = m.total_mass * kGravity * t.com_position.z();
  return ke + pe;
}

TEST(Dynamics, EnergyConservationFreeFlight) {
  RobotModel m = default_biped();
  Rng rng(59);
  Rk4State x;
  x.s = random_state(m, rng, 1.0);
  x.s.base_pos.z() = 3.0;
  const double dt = 1e-5, horizon = 0.25;
  const double e0 = total_energy(m, x.s);
  for (int i = 0; i < int(horizon / dt); ++i) x = rk4_step(m, x, dt);
  const double e1 = total_energy(m, x.s);
  EXPECT_LE(std::abs(e1 - e0), 1e-6 * std::abs(e0) * horizon + 1e-9);
}

}  // namespace
