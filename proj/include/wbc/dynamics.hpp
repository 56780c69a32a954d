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

#pragma once

#include <stdexcept>
#include <vector>

#include "wbc/math.hpp"
#include "wbc/model.hpp"

namespace wbc {

constexpr double kGravity = 9.81;  // m/s^2, world z up

// Floating-base configuration plus generalized velocity. Velocity layout:
// [base linear (world frame), base angular (body frame), joint rates].
struct GeneralizedState {
  Vec3 base_pos = Vec3::Zero();
  Quat base_quat = Quat::Identity();
  VecX joint_pos;
  VecX velocity;

  static GeneralizedState rest(const RobotModel& m) {
    GeneralizedState s;
    s.joint_pos = VecX::Zero(m.n_revolute());
    s.velocity = VecX::Zero(m.n_vel());
    return s;
  }

  bool finite() const {
    return base_pos.allFinite() && base_quat.coeffs().allFinite() &&
           joint_pos.allFinite() && velocity.allFinite();
  }
};

// Configuration update on the quaternion manifold: q <- q (+) h*dq with the
// base orientation advanced by the exponential map of the body-frame angular
// displacement. The simulator, all finite-difference oracles, and the state
// estimator share this single retraction.
inline GeneralizedState displace(const GeneralizedState& s, const VecX& dq, double h) {
  GeneralizedState out = s;
  out.base_pos += h * dq.head<3>();
  out.base_quat = (s.base_quat * quat_exp(h * dq.segment<3>(3))).normalized();
  out.joint_pos += h * dq.tail(dq.size() - 6);
  return out;
}

// All spatial quantities live in Plucker coordinates at the world origin:
// motion vectors are [omega; v_O], force vectors [n_O; f]. A single shared
// frame keeps composite inertias and subtree accumulations plain sums.
struct KinematicsCache {
  std::vector<Mat3> R;       // link world rotation
  std::vector<Vec3> p;       // link frame origin, world
  std::vector<Vec3> com_w;   // link CoM, world
  std::vector<Mat3> inertia_com_w;  // link rotational inertia about its CoM, world axes
  std::vector<Vec6> V;       // link spatial velocity
  std::vector<Vec6> A_bias;  // link spatial acceleration with qdd = 0
  std::vector<Mat6> I_O;     // link spatial inertia at the world origin

  MatX phi;                  // 6 x n_vel, joint motion columns
  std::vector<int> owner;    // per velocity coordinate, link carrying it
  std::vector<std::vector<int>> supporting;  // per link, coordinates on its root path
};

namespace detail {

inline Vec6 crm(const Vec6& v, const Vec6& m) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(m.head<3>());
  out.tail<3>() = v.tail<3>().cross(m.head<3>()) + v.head<3>().cross(m.tail<3>());
  return out;
}

inline Vec6 crf(const Vec6& v, const Vec6& f) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
  out.tail<3>() = v.head<3>().cross(f.tail<3>());
  return out;
}

// Spatial inertia at the world origin from mass, world CoM and world-axes
// rotational inertia about the CoM.
inline Mat6 spatial_inertia_at_origin(double mass, const Vec3& com_w, const Mat3& inertia_c) {
  const Mat3 ch = skew(com_w);
  Mat6 io;
  io.topLeftCorner<3, 3>() = inertia_c - mass * ch * ch;
  io.topRightCorner<3, 3>() = mass * ch;
  io.bottomLeftCorner<3, 3>() = -mass * ch;
  io.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
  return io;
}

}  // namespace detail

inline KinematicsCache forward_kinematics(const RobotModel& m, const GeneralizedState& s) {
  const int nl = static_cast<int>(m.links.size());
  const int nv = m.n_vel();
  KinematicsCache c;
  c.R.resize(nl);
  c.p.resize(nl);
  c.com_w.resize(nl);
  c.inertia_com_w.resize(nl);
  c.V.assign(nl, Vec6::Zero());
  c.A_bias.assign(nl, Vec6::Zero());
  c.I_O.resize(nl);
  c.phi = MatX::Zero(6, nv);
  c.owner.assign(nv, m.base_link);
  c.supporting.assign(nl, {});

  // Base pose and the six base columns.
  const Mat3 rb = s.base_quat.toRotationMatrix();
  c.R[m.base_link] = rb;
  c.p[m.base_link] = s.base_pos;
  for (int k = 0; k < 3; ++k) c.phi.col(k).tail<3>() = Vec3::Unit(k);
  for (int k = 0; k < 3; ++k) {
    const Vec3 a = rb.col(k);
    c.phi.col(3 + k).head<3>() = a;
    c.phi.col(3 + k).tail<3>() = s.base_pos.cross(a);
  }
  Vec6 vb = Vec6::Zero();
  for (int k = 0; k < 6; ++k) vb += c.phi.col(k) * s.velocity[k];
  c.V[m.base_link] = vb;
  // Bias acceleration of the base: only the angular columns move with the
  // body, so sum_k v_k phidot_k = -crm(V_b)[0; v_lin].
  Vec6 lin = Vec6::Zero();
  lin.tail<3>() = s.velocity.head<3>();
  c.A_bias[m.base_link] = -detail::crm(vb, lin);
  c.supporting[m.base_link] = {0, 1, 2, 3, 4, 5};

  for (int li : m.link_order) {
    if (li != m.base_link) {
      const int j = m.parent_joint[li];
      const JointSpec& js = m.joints[j];
      const int pl = m.parent_link[li];
      const Mat3 r_origin = rpy_to_matrix(js.origin_rpy);
      const Vec3 p_joint = c.p[pl] + c.R[pl] * js.origin_xyz;
      const Mat3 r_joint = c.R[pl] * r_origin;
      const int coord = m.vel_coord_of_joint[j];
      const double angle = s.joint_pos[coord - 6];
      c.R[li] = r_joint * Eigen::AngleAxisd(angle, js.axis).toRotationMatrix();
      c.p[li] = p_joint;

      const Vec3 axis_w = r_joint * js.axis;
      Vec6 phi;
      phi.head<3>() = axis_w;
      phi.tail<3>() = p_joint.cross(axis_w);
      c.phi.col(coord) = phi;
      c.owner[coord] = li;
      c.supporting[li] = c.supporting[pl];
      c.supporting[li].push_back(coord);

      const double qd = s.velocity[coord];
      c.V[li] = c.V[pl] + phi * qd;
      c.A_bias[li] = c.A_bias[pl] + detail::crm(c.V[li], phi) * qd;
    }
    const LinkSpec& link = m.links[li];
    c.com_w[li] = c.p[li] + c.R[li] * link.com_offset;
    const Mat3 ch = skew(link.com_offset);
    const Mat3 inertia_c_local = link.inertia + link.mass * ch * ch;
    c.inertia_com_w[li] = c.R[li] * inertia_c_local * c.R[li].transpose();
    c.I_O[li] = detail::spatial_inertia_at_origin(link.mass, c.com_w[li], c.inertia_com_w[li]);
  }
  return c;
}

// Composite-rigid-body mass matrix. With every spatial quantity expressed at
// the world origin the composite inertia of a subtree is the plain sum of its
// members, and M(a,b) = phi_a^T I^c_{deeper} phi_b along each root path.
inline MatX mass_matrix(const RobotModel& m, const KinematicsCache& c) {
  const int nv = m.n_vel();
  std::vector<Mat6> ic(c.I_O);
  for (auto it = m.link_order.rbegin(); it != m.link_order.rend(); ++it) {
    const int li = *it;
    if (li != m.base_link) ic[m.parent_link[li]] += ic[li];
  }
  MatX mm = MatX::Zero(nv, nv);
  for (int a = 0; a < nv; ++a) {
    const int la = c.owner[a];
    const Vec6 f = ic[la] * c.phi.col(a);
    for (int b : c.supporting[la]) {
      const double v = c.phi.col(b).dot(f);
      mm(a, b) = v;
      mm(b, a) = v;
    }
  }
  return mm;
}

// Generalized velocity-product forces (the vector C(q, qd) qd, gravity
// excluded) via recursive Newton-Euler with zero joint acceleration.
inline VecX velocity_bias(const RobotModel& m, const KinematicsCache& c) {
  std::vector<Vec6> f(m.links.size());
  for (size_t i = 0; i < m.links.size(); ++i)
    f[i] = c.I_O[i] * c.A_bias[i] + detail::crf(c.V[i], c.I_O[i] * c.V[i]);
  for (auto it = m.link_order.rbegin(); it != m.link_order.rend(); ++it)
    if (*it != m.base_link) f[m.parent_link[*it]] += f[*it];
  VecX b = VecX::Zero(m.n_vel());
  for (int a = 0; a < m.n_vel(); ++a) b[a] = c.phi.col(a).dot(f[c.owner[a]]);
  return b;
}

// tau_g: generalized gravity torques on the left-hand side of
// M qdd + C qd + tau_g = S^T tau + ...
inline VecX gravity_torques(const RobotModel& m, const KinematicsCache& c) {
  const Vec3 g(0, 0, -kGravity);
  std::vector<Vec6> f(m.links.size());
  for (size_t i = 0; i < m.links.size(); ++i) {
    f[i].head<3>() = c.com_w[i].cross(m.links[i].mass * g);
    f[i].tail<3>() = m.links[i].mass * g;
  }
  for (auto it = m.link_order.rbegin(); it != m.link_order.rend(); ++it)
    if (*it != m.base_link) f[m.parent_link[*it]] += f[*it];
  VecX tg = VecX::Zero(m.n_vel());
  for (int a = 0; a < m.n_vel(); ++a) tg[a] = -c.phi.col(a).dot(f[c.owner[a]]);
  return tg;
}

struct FrameKinematics {
  Vec3 position = Vec3::Zero();
  MatX jacobian;          // 3 x (n+6)
  Vec3 jacobian_dot_v = Vec3::Zero();
};

// World position, point Jacobian and Jdot*qd of a body-fixed point.
inline FrameKinematics point_kinematics(const RobotModel& m, const KinematicsCache& c,
                                        int link, const Vec3& offset) {
  FrameKinematics out;
  out.position = c.p[link] + c.R[link] * offset;
  out.jacobian = MatX::Zero(3, m.n_vel());
  const Vec3 x = out.position;
  for (int a : c.supporting[link])
    out.jacobian.col(a) =
        c.phi.col(a).tail<3>() + c.phi.col(a).head<3>().cross(x);
  const Vec3 omega = c.V[link].head<3>();
  const Vec3 v_pt = c.V[link].tail<3>() + omega.cross(x);
  out.jacobian_dot_v = c.A_bias[link].tail<3>() + c.A_bias[link].head<3>().cross(x) +
                       omega.cross(v_pt);
  return out;
}

inline FrameKinematics frame_kinematics(const RobotModel& m, const GeneralizedState& s,
                                        const std::string& link, const Vec3& offset) {
  auto it = m.link_index.find(link);
  if (it == m.link_index.end()) throw std::invalid_argument("unknown link '" + link + "'");
  const KinematicsCache c = forward_kinematics(m, s);
  return point_kinematics(m, c, it->second, offset);
}

struct DynamicsTerms {
  MatX mass_matrix;       // (n+6) x (n+6), symmetric positive definite
  MatX coriolis_matrix;   // satisfies C qd = velocity bias and Mdot - 2C skew
  VecX gravity_torques;
  VecX velocity_bias;     // C qd, kept explicitly for assembly
  Vec3 com_position = Vec3::Zero();
  MatX com_jacobian;      // 3 x (n+6)
  Vec3 com_jacobian_dot_v = Vec3::Zero();
  Mat3 task_inertia = Mat3::Zero();  // Lambda = (J M^-1 J^T)^-1 = m I
  Eigen::LDLT<MatX> mass_ldlt;
  KinematicsCache kin;    // reused by controller assembly and the simulator
};

namespace detail {

inline void com_quantities(const RobotModel& m, const KinematicsCache& c, Vec3* com,
                           MatX* jac, Vec3* jdot_qd) {
  const double total = m.total_mass;
  *com = Vec3::Zero();
  *jac = MatX::Zero(3, m.n_vel());
  *jdot_qd = Vec3::Zero();
  for (size_t i = 0; i < m.links.size(); ++i) {
    const double w = m.links[i].mass / total;
    const Vec3 x = c.com_w[i];
    *com += w * x;
    for (int a : c.supporting[i])
      jac->col(a) += w * (c.phi.col(a).tail<3>() + c.phi.col(a).head<3>().cross(x));
    const Vec3 omega = c.V[i].head<3>();
    const Vec3 v_pt = c.V[i].tail<3>() + omega.cross(x);
    *jdot_qd += w * (c.A_bias[i].tail<3>() + c.A_bias[i].head<3>().cross(x) +
                     omega.cross(v_pt));
  }
}

// Directional derivative of M along qd by central differences on the
// configuration manifold.
inline MatX mass_matrix_directional_dot(const RobotModel& m, const GeneralizedState& s,
                                        const VecX& qd, double step = 1e-6) {
  const double nrm = qd.norm();
  if (nrm < 1e-14) return MatX::Zero(m.n_vel(), m.n_vel());
  const VecX dir = qd / nrm;
  const MatX mp = mass_matrix(m, forward_kinematics(m, displace(s, dir, step)));
  const MatX mn = mass_matrix(m, forward_kinematics(m, displace(s, dir, -step)));
  return (mp - mn) * (nrm / (2.0 * step));
}

}  // namespace detail

// Mass matrix, Coriolis matrix, gravity, CoM kinematics and task inertia.
//
// The Coriolis matrix is the skew-symmetric completion
//   C = Mdot/2 + (w qd^T - qd w^T) / (2 qd^T qd),   w = 2 b - Mdot qd,
// with b the Newton-Euler velocity bias. By construction C qd = b exactly and
// Mdot - 2C is exactly antisymmetric, which is the factorization the storage
// function analysis relies on. (A plain Christoffel construction from dM/dq
// reproduces neither property under the quaternion-tangent velocity: already
// for one free rigid body it drops the gyroscopic term.)
inline DynamicsTerms compute_terms(const RobotModel& m, const GeneralizedState& s) {
  DynamicsTerms t;
  t.kin = forward_kinematics(m, s);
  const KinematicsCache& c = t.kin;
  t.mass_matrix = mass_matrix(m, c);
  t.velocity_bias = velocity_bias(m, c);
  t.gravity_torques = gravity_torques(m, c);
  detail::com_quantities(m, c, &t.com_position, &t.com_jacobian, &t.com_jacobian_dot_v);

  const VecX& qd = s.velocity;
  const double q2 = qd.squaredNorm();
  if (q2 < 1e-24) {
    t.coriolis_matrix = MatX::Zero(m.n_vel(), m.n_vel());
  } else {
    const MatX mdot = detail::mass_matrix_directional_dot(m, s, qd);
    const VecX w = 2.0 * t.velocity_bias - mdot * qd;
    t.coriolis_matrix =
        0.5 * mdot + (w * qd.transpose() - qd * w.transpose()) / (2.0 * q2);
  }

  t.mass_ldlt.compute(t.mass_matrix);
  const Mat3 jmj =
      t.com_jacobian * t.mass_ldlt.solve(t.com_jacobian.transpose());
  t.task_inertia = jmj.inverse();
  return t;
}

struct ExternalForce {
  int link = -1;
  Vec3 offset = Vec3::Zero();
  Vec3 force = Vec3::Zero();  // world frame
};

// qdd solving M qdd = applied + sum J^T f - C qd - tau_g.
inline VecX forward_dynamics(const RobotModel& m, const GeneralizedState& s,
                             const VecX& applied, const std::vector<ExternalForce>& ext) {
  const KinematicsCache c = forward_kinematics(m, s);
  VecX rhs = applied - velocity_bias(m, c) - gravity_torques(m, c);
  for (const ExternalForce& e : ext) {
    const Vec3 x = c.p[e.link] + c.R[e.link] * e.offset;
    for (int a : c.supporting[e.link])
      rhs[a] += (c.phi.col(a).tail<3>() + c.phi.col(a).head<3>().cross(x)).dot(e.force);
  }
  return mass_matrix(m, c).ldlt().solve(rhs);
}

// Centroidal angular momentum k, its matrix (k = A qd) and the qdd-free part
// of kdot, used by the momentum-damping task.
struct CentroidalMomentum {
  Vec3 k = Vec3::Zero();
  MatX A;  // 3 x (n+6)
  Vec3 bias = Vec3::Zero();
};

inline CentroidalMomentum centroidal_momentum(const RobotModel& m,
                                              const KinematicsCache& c,
                                              const Vec3& com, const Vec3& com_vel) {
  CentroidalMomentum out;
  out.A = MatX::Zero(3, m.n_vel());
  for (size_t i = 0; i < m.links.size(); ++i) {
    const double mass = m.links[i].mass;
    const Vec3 x = c.com_w[i];
    const Vec3 omega = c.V[i].head<3>();
    const Vec3 v_pt = c.V[i].tail<3>() + omega.cross(x);
    const Mat3& ic = c.inertia_com_w[i];
    out.k += ic * omega + mass * (x - com).cross(v_pt);
    for (int a : c.supporting[i]) {
      const Vec3 pw = c.phi.col(a).head<3>();
      const Vec3 pv = c.phi.col(a).tail<3>() + pw.cross(x);
      out.A.col(a) += ic * pw + mass * skew(x - com) * pv;
    }
    const Vec3 a_pt = c.A_bias[i].tail<3>() + c.A_bias[i].head<3>().cross(x) +
                      omega.cross(v_pt);
    out.bias += omega.cross(ic * omega) + ic * c.A_bias[i].head<3>() +
                mass * (v_pt - com_vel).cross(v_pt) + mass * (x - com).cross(a_pt);
  }
  return out;
}

}  // namespace wbc
