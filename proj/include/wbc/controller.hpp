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
#include <string>
#include <vector>

#include "wbc/dynamics.hpp"
#include "wbc/energy.hpp"
#include "wbc/model.hpp"
#include "wbc/planner.hpp"
#include "wbc/qp.hpp"

namespace wbc {

enum class ControllerKind { ours, standard };

inline const char* to_string(ControllerKind k) {
  return k == ControllerKind::ours ? "ours" : "standard";
}

// Placement of the LIP tracking gains in the standard CoM law. "paper" keeps
// K_P on the velocity error and K_D on the position error exactly as written;
// "conventional" swaps them.
enum class StandardGainConvention { paper, conventional };

struct ControllerParams {
  double w1 = 1.0;
  double w2 = 0.1;
  double w_torso = 0.05;
  double w_momentum = 0.01;
  // Acceleration damping restricted to the CoM-task null space (N qdd), so it
  // never competes with the interface's CoM motion or the tracking costs.
  double w_qdd = 1e-3;
  double mu = 0.7;  // controller's friction coefficient
  InterfaceGains gains;  // ours
  Mat3 K = -3.0 * Mat3::Identity();  // LIP->CoM interface gain, Hurwitz
  double kp_lip = 25.0;   // standard law gains (calibrated to match ours)
  double kd_lip = 156.0;
  StandardGainConvention convention = StandardGainConvention::paper;
  double swing_kp = 300.0, swing_kd = 35.0;
  double torso_kp = 100.0, torso_kd = 20.0;
  double momentum_gamma = 5.0;
  bool pin_u2 = false;  // regulation mode: adds the equality u2 = u2_des
};

// Dynamically consistent null-space projector of the CoM task:
// N = I - M^{-1} J^T Lambda J, so J M^{-1} N^T = 0.
inline MatX null_space_projector(const DynamicsTerms& t) {
  const int n = static_cast<int>(t.mass_matrix.rows());
  return MatX::Identity(n, n) -
         t.mass_ldlt.solve(t.com_jacobian.transpose() * t.task_inertia * t.com_jacobian);
}

inline std::vector<int> active_contact_indices(const RobotModel& m,
                                               const std::vector<std::string>& groups) {
  std::vector<int> out;
  for (size_t i = 0; i < m.contacts.size(); ++i)
    for (const std::string& g : groups)
      if (m.contacts[i].foot_group == g) out.push_back(static_cast<int>(i));
  return out;
}

// Assembled QP plus the context needed for torque extraction and the
// null-space mechanism checks.
struct ControlProblem {
  QpProblem qp;
  ControllerKind kind = ControllerKind::ours;
  std::vector<int> contacts;      // active contact indices into model.contacts
  std::vector<MatX> contact_jac;  // 3 x nv per active contact
  MatX s_t;                       // S^T
  VecX u_v_const;                 // ours: u_V(x1, x2, 0)
  MatX u_v_u2;                    // ours: d u_V / d u2 = K_D J^T
  MatX n_projector;               // ours
  VecX dynamics_rhs;              // -(C qd + tau_g)
};

namespace ctrl_detail {

struct TaskStack {
  MatX q;
  VecX c;
  explicit TaskStack(int n) : q(MatX::Zero(n, n)), c(VecX::Zero(n)) {}
  // Adds weight * || A z(block) - target ||^2.
  void add(double weight, const MatX& a, const VecX& target, int offset) {
    const int k = static_cast<int>(a.cols());
    q.block(offset, offset, k, k) += 2.0 * weight * a.transpose() * a;
    c.segment(offset, k) -= 2.0 * weight * a.transpose() * target;
  }
};

// Shared constraint rows: dynamics, contact accelerations, friction pyramids
// and torque limits. Offsets name where each decision block lives.
struct SharedLayout {
  int u2 = -1, tau = 0, tau0 = -1, qdd = 0, f = 0, n_dec = 0;
};

inline void append_shared_constraints(const RobotModel& model, const DynamicsTerms& t,
                                      const ControllerParams& prm,
                                      const SharedLayout& lay, ControlProblem* cp) {
  const int nv = model.n_vel();
  const int na = model.n_act();
  const int nc = static_cast<int>(cp->contacts.size());
  QpProblem& qp = cp->qp;

  // Dynamics: M qdd - S^T tau - sum J^T f = -(C qd + tau_g).
  const int row0 = static_cast<int>(qp.A.rows());
  qp.A.conservativeResize(row0 + nv, lay.n_dec);
  qp.A.middleRows(row0, nv).setZero();
  qp.b.conservativeResize(row0 + nv);
  qp.A.block(row0, lay.qdd, nv, nv) = t.mass_matrix;
  qp.A.block(row0, lay.tau, nv, na) = -cp->s_t;
  for (int k = 0; k < nc; ++k)
    qp.A.block(row0, lay.f + 3 * k, nv, 3) = -cp->contact_jac[k].transpose();
  qp.b.segment(row0, nv) = cp->dynamics_rhs;

  // Contact points fixed: J qdd = -Jdot qd.
  for (int k = 0; k < nc; ++k) {
    const int r = static_cast<int>(qp.A.rows());
    qp.A.conservativeResize(r + 3, lay.n_dec);
    qp.A.middleRows(r, 3).setZero();
    qp.b.conservativeResize(r + 3);
    qp.A.block(r, lay.qdd, 3, nv) = cp->contact_jac[k];
    const ContactSpec& spec = model.contacts[cp->contacts[k]];
    const FrameKinematics fk =
        point_kinematics(model, t.kin, model.contact_link_ids[cp->contacts[k]], spec.offset);
    qp.b.segment(r, 3) = -fk.jacobian_dot_v;
  }

  // Friction pyramids (flat-ground normals assumed by the controller):
  // -f_z <= 0, |f_x| <= mu/sqrt(2) f_z, |f_y| <= mu/sqrt(2) f_z.
  const double mu_pyr = prm.mu / std::sqrt(2.0);
  const int rows_f = 5 * nc;
  const int gi0 = static_cast<int>(qp.G.rows());
  qp.G.conservativeResize(gi0 + rows_f + 2 * na, lay.n_dec);
  qp.G.middleRows(gi0, rows_f + 2 * na).setZero();
  qp.h.conservativeResize(gi0 + rows_f + 2 * na);
  for (int k = 0; k < nc; ++k) {
    const int r = gi0 + 5 * k;
    const int fx = lay.f + 3 * k, fy = fx + 1, fz = fx + 2;
    qp.G(r, fz) = -1.0;
    qp.G(r + 1, fx) = 1.0;
    qp.G(r + 1, fz) = -mu_pyr;
    qp.G(r + 2, fx) = -1.0;
    qp.G(r + 2, fz) = -mu_pyr;
    qp.G(r + 3, fy) = 1.0;
    qp.G(r + 3, fz) = -mu_pyr;
    qp.G(r + 4, fy) = -1.0;
    qp.G(r + 4, fz) = -mu_pyr;
    qp.h.segment(r, 5).setZero();
  }
  // Torque box.
  const int r = gi0 + rows_f;
  for (int a = 0; a < na; ++a) {
    qp.G(r + a, lay.tau + a) = 1.0;
    qp.G(r + na + a, lay.tau + a) = -1.0;
  }
  qp.h.segment(r, na) = model.torque_upper();
  qp.h.segment(r + na, na) = -model.torque_lower();
}

// Link and local centroid of a contact foot group (the tracked sole center).
inline bool foot_group_frame(const RobotModel& m, const std::string& group, int* link,
                             Vec3* centroid) {
  Vec3 sum = Vec3::Zero();
  int n = 0, l = -1;
  for (size_t i = 0; i < m.contacts.size(); ++i)
    if (m.contacts[i].foot_group == group) {
      sum += m.contacts[i].offset;
      l = m.contact_link_ids[i];
      ++n;
    }
  if (n == 0) return false;
  *link = l;
  *centroid = sum / n;
  return true;
}

inline void add_posture_tasks(const RobotModel& model, const DynamicsTerms& t,
                              const GeneralizedState& s, const SwingTargets& swing,
                              const ControllerParams& prm, const SharedLayout& lay,
                              const MatX& n_proj, TaskStack* stack) {
  const int nv = model.n_vel();

  // Swing foot tracking with PD feedback around the reference.
  for (Foot foot : {Foot::left, Foot::right}) {
    const FootTarget& target = swing.of(foot);
    if (target.stance) continue;
    int link = -1;
    Vec3 sole_center = Vec3::Zero();
    if (!foot_group_frame(model, to_string(foot), &link, &sole_center)) continue;
    const FrameKinematics fk = point_kinematics(model, t.kin, link, sole_center);
    const Vec3 vel = fk.jacobian * s.velocity;
    const Vec3 acc_des = target.acceleration + prm.swing_kp * (target.position - fk.position) +
                         prm.swing_kd * (target.velocity - vel);
    stack->add(prm.w2, fk.jacobian, acc_des - fk.jacobian_dot_v, lay.qdd);
  }

  // Torso (base) orientation regulation on the angular acceleration rows.
  MatX sel = MatX::Zero(3, nv);
  sel.block(0, 3, 3, 3) = Mat3::Identity();
  const Vec3 rot_err = quat_log(s.base_quat);
  const Vec3 omega = s.velocity.segment<3>(3);
  const Vec3 torso_des = -prm.torso_kp * rot_err - prm.torso_kd * omega;
  stack->add(prm.w_torso, sel, torso_des, lay.qdd);

  // Centroidal angular momentum damping: A qdd + bias = -gamma k.
  const Vec3 com_vel = t.com_jacobian * s.velocity;
  const CentroidalMomentum cm = centroidal_momentum(model, t.kin, t.com_position, com_vel);
  stack->add(prm.w_momentum, cm.A, -prm.momentum_gamma * cm.k - cm.bias, lay.qdd);

  // Null-space acceleration damping. N M^{-1} J^T = 0, so this term is blind
  // to the CoM motion commanded through u2 or the CoM-tracking cost.
  stack->add(prm.w_qdd, n_proj, VecX::Zero(nv), lay.qdd);
}

}  // namespace ctrl_detail

// ---------------------------------------------------------------------------
// Passive whole-body QP. Decision vector [u2, tau, tau0, qdd, f]; the
// interface constraint u_V(x1, x2, u2) + N^T tau0 = S^T tau + sum J^T f keeps
// the CoM motion on the energy-shaping interface for any optimal point, while
// tau0 frees the null space for swing/torso/momentum tasks.
// ---------------------------------------------------------------------------
inline ControlProblem assemble_ours(const RobotModel& model, const DynamicsTerms& t,
                                    const GeneralizedState& s, const ComState& com,
                                    const Vec3& u2_des, const SwingTargets& swing,
                                    const std::vector<std::string>& stance,
                                    const ControllerParams& prm) {
  ControlProblem cp;
  cp.kind = ControllerKind::ours;
  cp.contacts = active_contact_indices(model, stance);
  if (cp.contacts.empty())
    throw std::invalid_argument("assemble_ours: controller requires support");
  const int nv = model.n_vel();
  const int na = model.n_act();
  const int nc = static_cast<int>(cp.contacts.size());

  ctrl_detail::SharedLayout lay;
  lay.u2 = 0;
  lay.tau = 3;
  lay.tau0 = 3 + na;
  lay.qdd = 3 + na + nv;
  lay.f = 3 + na + 2 * nv;
  lay.n_dec = 3 + na + 2 * nv + 3 * nc;

  cp.s_t = model.actuation_map();
  for (int idx : cp.contacts)
    cp.contact_jac.push_back(
        point_kinematics(model, t.kin, model.contact_link_ids[idx],
                         model.contacts[idx].offset)
            .jacobian);
  cp.dynamics_rhs = -(t.velocity_bias + t.gravity_torques);
  cp.n_projector = null_space_projector(t);
  cp.u_v_const = interface_u1(t, s, com, Vec3::Zero(), prm.gains);
  cp.u_v_u2 = prm.gains.K_D * t.com_jacobian.transpose();

  QpProblem& qp = cp.qp;
  qp.layout = {{"u2", 3}, {"tau", na}, {"tau0", nv}, {"qdd", nv}, {"f", 3 * nc}};
  ctrl_detail::TaskStack stack(lay.n_dec);
  stack.add(prm.w1, Mat3::Identity(), u2_des, lay.u2);
  ctrl_detail::add_posture_tasks(model, t, s, swing, prm, lay, cp.n_projector, &stack);
  qp.Q = std::move(stack.q);
  qp.c = std::move(stack.c);

  qp.A = MatX(0, lay.n_dec);
  qp.b = VecX(0);
  qp.G = MatX(0, lay.n_dec);
  qp.h = VecX(0);

  // Interface: K_D J^T u2 + N^T tau0 - S^T tau - sum J^T f = -u_V(x1,x2,0).
  qp.A.conservativeResize(nv, lay.n_dec);
  qp.A.setZero();
  qp.b.conservativeResize(nv);
  qp.A.block(0, lay.u2, nv, 3) = cp.u_v_u2;
  qp.A.block(0, lay.tau0, nv, nv) = cp.n_projector.transpose();
  qp.A.block(0, lay.tau, nv, na) = -cp.s_t;
  for (int k = 0; k < nc; ++k)
    qp.A.block(0, lay.f + 3 * k, nv, 3) = -cp.contact_jac[k].transpose();
  qp.b = -cp.u_v_const;

  ctrl_detail::append_shared_constraints(model, t, prm, lay, &cp);

  if (prm.pin_u2) {
    const int r = static_cast<int>(qp.A.rows());
    qp.A.conservativeResize(r + 3, lay.n_dec);
    qp.A.middleRows(r, 3).setZero();
    qp.A.block(r, lay.u2, 3, 3) = Mat3::Identity();
    qp.b.conservativeResize(r + 3);
    qp.b.segment(r, 3) = u2_des;
  }
  return cp;
}

// Standard whole-body QP: CoM acceleration tracking as a cost, same dynamics,
// contact, friction and torque constraints; no interface row, no tau0 block.
inline ControlProblem assemble_standard(const RobotModel& model, const DynamicsTerms& t,
                                        const GeneralizedState& s, const LipState& lip,
                                        const LipParams& lip_prm,
                                        const SwingTargets& swing,
                                        const std::vector<std::string>& stance,
                                        const ControllerParams& prm) {
  ControlProblem cp;
  cp.kind = ControllerKind::standard;
  cp.contacts = active_contact_indices(model, stance);
  if (cp.contacts.empty())
    throw std::invalid_argument("assemble_standard: controller requires support");
  const int nv = model.n_vel();
  const int na = model.n_act();
  const int nc = static_cast<int>(cp.contacts.size());

  ctrl_detail::SharedLayout lay;
  lay.tau = 0;
  lay.qdd = na;
  lay.f = na + nv;
  lay.n_dec = na + nv + 3 * nc;

  cp.s_t = model.actuation_map();
  for (int idx : cp.contacts)
    cp.contact_jac.push_back(
        point_kinematics(model, t.kin, model.contact_link_ids[idx],
                         model.contacts[idx].offset)
            .jacobian);
  cp.dynamics_rhs = -(t.velocity_bias + t.gravity_torques);
  cp.n_projector = null_space_projector(t);

  // Feedforward LIP acceleration plus feedback, gain placement per config.
  const double w2lip = lip_prm.g / lip_prm.z0;
  Vec3 lip_acc(w2lip * (lip.x3[0] - lip.u3[0]), w2lip * (lip.x3[1] - lip.u3[1]), 0.0);
  const Vec3 vel_err = lip.velocity() - t.com_jacobian * s.velocity;
  const Vec3 pos_err = lip.position() - t.com_position;
  Vec3 acc_des;
  if (prm.convention == StandardGainConvention::paper)
    acc_des = lip_acc + prm.kp_lip * vel_err + prm.kd_lip * pos_err;
  else
    acc_des = lip_acc + prm.kd_lip * vel_err + prm.kp_lip * pos_err;

  QpProblem& qp = cp.qp;
  qp.layout = {{"tau", na}, {"qdd", nv}, {"f", 3 * nc}};
  ctrl_detail::TaskStack stack(lay.n_dec);
  stack.add(prm.w1, t.com_jacobian, acc_des - t.com_jacobian_dot_v, lay.qdd);
  ctrl_detail::add_posture_tasks(model, t, s, swing, prm, lay, cp.n_projector, &stack);
  qp.Q = std::move(stack.q);
  qp.c = std::move(stack.c);
  qp.A = MatX(0, lay.n_dec);
  qp.b = VecX(0);
  qp.G = MatX(0, lay.n_dec);
  qp.h = VecX(0);
  ctrl_detail::append_shared_constraints(model, t, prm, lay, &cp);
  return cp;
}

// Realized generalized control force S^T tau + sum J^T f of a solution.
inline VecX realized_wrench(const ControlProblem& cp, const QpSolution& sol) {
  VecX u1 = cp.s_t * cp.qp.block_of(sol.z, "tau");
  const VecX f = cp.qp.block_of(sol.z, "f");
  for (size_t k = 0; k < cp.contact_jac.size(); ++k)
    u1 += cp.contact_jac[k].transpose() * f.segment<3>(3 * k);
  return u1;
}

inline double interface_residual(const ControlProblem& cp, const QpSolution& sol) {
  const VecX u2 = cp.qp.block_of(sol.z, "u2");
  const VecX tau0 = cp.qp.block_of(sol.z, "tau0");
  const VecX lhs = cp.u_v_const + cp.u_v_u2 * u2 + cp.n_projector.transpose() * tau0;
  return (realized_wrench(cp, sol) - lhs).cwiseAbs().maxCoeff();
}

inline double dynamics_residual(const ControlProblem& cp, const QpSolution& sol,
                                const DynamicsTerms& t) {
  const VecX qdd = cp.qp.block_of(sol.z, "qdd");
  return (t.mass_matrix * qdd - cp.dynamics_rhs - realized_wrench(cp, sol))
      .cwiseAbs()
      .maxCoeff();
}

// Reads out the actuated torques; for ours additionally verifies that the
// realized wrench matches the interface plus null-space relaxation.
inline VecX extract_torques(const ControlProblem& cp, const QpSolution& sol) {
  if (sol.status != QpStatus::optimal)
    throw std::runtime_error(std::string("extract_torques: solver status ") +
                             to_string(sol.status));
  if (cp.kind == ControllerKind::ours && interface_residual(cp, sol) > 1e-6)
    throw std::runtime_error("extract_torques: interface residual exceeds 1e-6");
  return cp.qp.block_of(sol.z, "tau");
}

}  // namespace wbc
