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

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wbc/controller.hpp"
#include "wbc/dynamics.hpp"
#include "wbc/energy.hpp"
#include "wbc/model.hpp"
#include "wbc/planner.hpp"
#include "wbc/trace.hpp"

namespace wbc {

struct TerrainBrick {
  Vec3 center = Vec3::Zero();
  Vec3 half = Vec3::Zero();
};

struct Terrain {
  double ground_z = 0.0;
  std::vector<TerrainBrick> bricks;
  double mu_world = 0.7;
};

struct DisturbanceEvent {
  double start = 0.0;
  double duration = 0.0;
  Vec3 force = Vec3::Zero();  // world frame
  std::string link;
  Vec3 offset = Vec3::Zero();

  bool active(double t) const { return t >= start && t < start + duration; }
};

// Gaussian base-state estimation noise (Table-style sigma units).
struct NoiseSpec {
  double sigma_p_mm = 0.0;
  double sigma_r_deg = 0.0;
  double sigma_v_mmps = 0.0;
  uint64_t seed = 0;
};

enum class QpFallback { hold_previous, zero_torque };

struct SimConfig {
  double dt_sim = 5e-4;          // s
  double control_period = 5e-3;  // s (200 Hz)
  double k_p = 1e5;              // contact stiffness, N/m
  double k_d = 3e3;              // contact damping, N s/m
  double v_s = 1e-3;             // friction smoothing velocity, m/s
  double duration = 5.0;         // s
  QpFallback fallback = QpFallback::hold_previous;
  double fall_fraction = 0.4;    // failure when CoM height < fraction * nominal

  int steps_per_tick() const {
    const double r = control_period / dt_sim;
    const int k = static_cast<int>(std::lround(r));
    if (k < 1 || std::abs(r - k) > 1e-9)
      throw std::invalid_argument("SimConfig: dt_sim must divide control_period");
    return k;
  }
};

struct ContactForce {
  int contact_index = -1;
  Vec3 force = Vec3::Zero();  // world frame
  double penetration = 0.0;
  Vec3 point = Vec3::Zero();
};

namespace sim_detail {

struct Support {
  double penetration;
  Vec3 normal;
};

// Deepest-crossed-last support: among all surfaces the point currently
// penetrates, the shallowest penetration identifies the surface it is resting
// on (brick top beats the ground plane under a brick).
inline std::optional<Support> best_support(const Terrain& terrain, const Vec3& x) {
  std::optional<Support> best;
  const double pen_ground = terrain.ground_z - x.z();
  if (pen_ground > 0) best = Support{pen_ground, Vec3::UnitZ()};
  for (const TerrainBrick& b : terrain.bricks) {
    const Vec3 d = x - b.center;
    if ((d.cwiseAbs().array() < b.half.array()).all()) {
      int axis = 0;
      double pen = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        const double p = b.half[k] - std::abs(d[k]);
        if (p < pen) {
          pen = p;
          axis = k;
        }
      }
      Vec3 n = Vec3::Zero();
      n[axis] = d[axis] >= 0 ? 1.0 : -1.0;
      if (!best || pen < best->penetration) best = Support{pen, n};
    }
  }
  return best;
}

}  // namespace sim_detail

// Penalty contact with regularized Coulomb friction:
//   f_n = max(0, k_p phi - k_d phidot) n,  phidot = separation rate,
//   f_t = -mu f_n tanh(||v_t|| / v_s) v_t / ||v_t||.
inline std::vector<ContactForce> contact_forces(const RobotModel& m,
                                                const KinematicsCache& kin,
                                                const Terrain& terrain,
                                                const SimConfig& cfg) {
  std::vector<ContactForce> out;
  for (size_t i = 0; i < m.contacts.size(); ++i) {
    const int link = m.contact_link_ids[i];
    const Vec3 x = kin.p[link] + kin.R[link] * m.contacts[i].offset;
    const auto support = sim_detail::best_support(terrain, x);
    if (!support) continue;
    const Vec3 omega = kin.V[link].head<3>();
    const Vec3 v = kin.V[link].tail<3>() + omega.cross(x);
    const Vec3& n = support->normal;
    const double separation_rate = v.dot(n);
    const double fn = std::max(0.0, cfg.k_p * support->penetration - cfg.k_d * separation_rate);
    if (fn <= 0.0) continue;
    const Vec3 vt = v - separation_rate * n;
    const double vt_norm = vt.norm();
    Vec3 ft = Vec3::Zero();
    if (vt_norm > 1e-12)
      ft = -terrain.mu_world * fn * std::tanh(vt_norm / cfg.v_s) * vt / vt_norm;
    ContactForce c;
    c.contact_index = static_cast<int>(i);
    c.force = fn * n + ft;
    c.penetration = support->penetration;
    c.point = x;
    out.push_back(c);
  }
  return out;
}

inline std::vector<ContactForce> contact_forces(const RobotModel& m,
                                                const GeneralizedState& s,
                                                const Terrain& terrain,
                                                const SimConfig& cfg) {
  return contact_forces(m, forward_kinematics(m, s), terrain, cfg);
}

struct SimDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace sim_detail {

inline void add_point_force(const KinematicsCache& kin, int link, const Vec3& point,
                            const Vec3& f, VecX* rhs) {
  for (int a : kin.supporting[link])
    (*rhs)[a] += (kin.phi.col(a).tail<3>() + kin.phi.col(a).head<3>().cross(point)).dot(f);
}

}  // namespace sim_detail

struct StepResult {
  GeneralizedState state;
  std::vector<ContactForce> forces;
};

// Semi-implicit Euler: velocity first, then configuration through the
// exponential map. Torques are zero-order held by the caller.
inline StepResult sim_step(const RobotModel& m, const GeneralizedState& s,
                           const VecX& tau_act,
                           const std::vector<const DisturbanceEvent*>& active,
                           const Terrain& terrain, const SimConfig& cfg) {
  if (tau_act.size() != m.n_act())
    throw std::invalid_argument("sim_step: torque dimension mismatch");
  const KinematicsCache kin = forward_kinematics(m, s);
  VecX rhs = -velocity_bias(m, kin) - gravity_torques(m, kin);
  const MatX st = m.actuation_map();
  rhs += st * tau_act;
  StepResult out;
  out.forces = contact_forces(m, kin, terrain, cfg);
  for (const ContactForce& c : out.forces)
    sim_detail::add_point_force(kin, m.contact_link_ids[c.contact_index], c.point, c.force,
                                &rhs);
  for (const DisturbanceEvent* e : active) {
    auto it = m.link_index.find(e->link);
    if (it == m.link_index.end())
      throw std::invalid_argument("sim_step: unknown disturbance link '" + e->link + "'");
    const Vec3 pt = kin.p[it->second] + kin.R[it->second] * e->offset;
    sim_detail::add_point_force(kin, it->second, pt, e->force, &rhs);
  }
  const VecX qdd = mass_matrix(m, kin).ldlt().solve(rhs);
  const VecX v_new = s.velocity + cfg.dt_sim * qdd;
  out.state = displace(s, v_new, cfg.dt_sim);
  out.state.velocity = v_new;
  if (!out.state.finite()) throw SimDivergence("simulation state diverged");
  return out;
}

// Adds Gaussian noise to the estimated floating-base position, orientation
// (random-axis rotation) and velocities; joint readings stay exact.
// Deterministic in (seed, tick).
inline GeneralizedState estimate_state(const GeneralizedState& s, const NoiseSpec& noise,
                                       uint64_t tick) {
  if (noise.sigma_p_mm == 0 && noise.sigma_r_deg == 0 && noise.sigma_v_mmps == 0) return s;
  Rng rng(Rng::mix(Rng::derive(noise.seed, "estimation_noise"), tick));
  GeneralizedState out = s;
  out.base_pos += rng.normal3(noise.sigma_p_mm * 1e-3);
  const Vec3 axis = rng.sphere();
  const double angle = noise.sigma_r_deg * M_PI / 180.0 * rng.normal();
  out.base_quat = (quat_exp(axis * angle) * s.base_quat).normalized();
  const double sv = noise.sigma_v_mmps * 1e-3;
  out.velocity.head<3>() += rng.normal3(sv);
  out.velocity.segment<3>(3) += rng.normal3(sv);
  return out;
}

// ---------------------------------------------------------------------------
// Closed loop: estimate -> LIP lookup -> interface -> QP -> ZOH torque, with
// physics substeps between ticks and certificate columns sampled at the
// control rate (evaluated one physics step after each tick so the central
// differences sit inside a constant-torque window).
// ---------------------------------------------------------------------------
struct ClosedLoopInputs {
  RobotModel model_ctrl;  // what the controller believes
  RobotModel model_sim;   // ground truth (perturbed in the model_error scenario)
  ControllerKind kind = ControllerKind::ours;
  FootstepPlan plan;
  LipParams lip;
  LipTrajectory ref;
  Terrain terrain;
  std::vector<DisturbanceEvent> events;
  NoiseSpec noise;
  SimConfig sim;
  ControllerParams ctrl;
  GeneralizedState init;
  double nominal_com_height = 0.95;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> header_extra;
};

namespace sim_detail {

inline Vec3 com_of(const RobotModel& m, const KinematicsCache& kin) {
  Vec3 c = Vec3::Zero();
  for (size_t i = 0; i < m.links.size(); ++i) c += m.links[i].mass * kin.com_w[i];
  return c / m.total_mass;
}

}  // namespace sim_detail

inline Trace run_closed_loop(const ClosedLoopInputs& in) {
  const RobotModel& sim_model = in.model_sim;
  const int k_sub = in.sim.steps_per_tick();
  const int n_steps = static_cast<int>(std::lround(in.sim.duration / in.sim.dt_sim));
  const int n_rev = sim_model.n_revolute();

  Trace tr;
  tr.n_q = 7 + n_rev;
  tr.n_v = sim_model.n_vel();
  tr.n_tau = sim_model.n_act();
  tr.n_contacts = static_cast<int>(sim_model.contacts.size());
  tr.set_header("controller", to_string(in.kind));
  tr.set_header("seed", std::to_string(in.seed));
  tr.set_header("kappa", trace_detail::fmt(in.ctrl.gains.kappa));
  tr.set_header("alpha", trace_detail::fmt(in.ctrl.gains.alpha));
  tr.set_header("beta", trace_detail::fmt(in.ctrl.gains.beta));
  tr.set_header("epsilon_kind", "empirical");
  for (const auto& kv : in.header_extra) tr.set_header(kv.first, kv.second);

  GeneralizedState state = in.init;
  ComState com_model;
  {
    const KinematicsCache kin0 = forward_kinematics(sim_model, state);
    com_model.x2 = sim_detail::com_of(sim_model, kin0);
  }
  VecX tau = VecX::Zero(sim_model.n_act());
  bool fell = false;
  double fail_time = -1.0;
  int qp_failures = 0;

  // Certificate bookkeeping around each tick: H/V at the tick step, the full
  // sample one step later, and the closing H/V one step after that.
  struct Pending {
    int row = -1;
    int stage = 0;  // 0: need t_c sample, 1: need closing H/V
    double h0 = 0, v0 = 0, h1 = 0, v1 = 0;
    Vec3 u2 = Vec3::Zero();
    Vec3 x2_tick = Vec3::Zero();
  };
  std::optional<Pending> pending;

  auto lip_at = [&](double t) { return in.ref.at(t); };

  for (int s = 0; s <= n_steps; ++s) {
    const double t = s * in.sim.dt_sim;
    const bool tick_step = (s % k_sub) == 0 && s < n_steps;

    // --- certificate bookkeeping on the true state ---
    const bool need_cert = pending.has_value() || tick_step;
    DynamicsTerms true_terms;
    KinematicsCache const* kin_true = nullptr;
    if (need_cert) {
      true_terms = compute_terms(sim_model, state);
      kin_true = &true_terms.kin;
    }

    if (pending && !tr.samples.empty()) {
      Pending& p = *pending;
      TraceSample& row = tr.samples[p.row];
      // CoM model evolves continuously inside the tick: x2(t) = x2 + u2 tau.
      const double dt_in = t - row.t;
      ComState x2_now;
      x2_now.x2 = p.x2_tick + p.u2 * dt_in;
      if (in.kind == ControllerKind::standard) x2_now.x2 = lip_at(t).position();
      if (p.stage == 0) {
        // Full certificate sample at t_c = tick + dt_sim.
        const std::vector<ContactForce> fc =
            contact_forces(sim_model, *kin_true, in.terrain, in.sim);
        VecX applied = sim_model.actuation_map() * tau;
        for (const ContactForce& c : fc)
          sim_detail::add_point_force(*kin_true, sim_model.contact_link_ids[c.contact_index],
                                      c.point, c.force, &applied);
        for (const DisturbanceEvent& e : in.events) {
          if (!e.active(t)) continue;
          auto it = sim_model.link_index.find(e.link);
          if (it == sim_model.link_index.end()) continue;
          const Vec3 pt = kin_true->p[it->second] + kin_true->R[it->second] * e.offset;
          sim_detail::add_point_force(*kin_true, it->second, pt, e.force, &applied);
        }
        // Everything beyond the pure interface acts as the external
        // disturbance of the robust-simulation analysis (null-space torques,
        // penalty-contact mismatch, pushes, estimation and model error).
        const VecX tau_ext =
            applied - interface_u1(true_terms, state, x2_now, p.u2, in.ctrl.gains);
        CertificateSample cert =
            other_terms(true_terms, state, x2_now, p.u2, tau_ext, in.ctrl.gains);
        row.V = cert.V;
        row.H = cert.H;
        row.OT = cert.OT;
        row.beta_local = cert.beta_local;
        row.hdot_rhs = hdot_identity_rhs(true_terms, state, x2_now, p.u2, tau_ext,
                                         in.ctrl.gains);
        row.passivity_rhs_value =
            passivity_rhs(true_terms, state, x2_now, p.u2, tau_ext, in.ctrl.gains);
        p.h1 = cert.H;
        p.v1 = cert.V;
        p.stage = 1;
      } else {
        // Closing H/V one step after t_c: central differences about t_c.
        const CertificateSample cs = storage_V(true_terms, state, x2_now, in.ctrl.gains);
        row.hdot_fd = (cs.H - p.h0) / (2.0 * in.sim.dt_sim);
        row.vdot_fd = (cs.V - p.v0) / (2.0 * in.sim.dt_sim);
        row.passivity_residual = passivity_residual(row.passivity_rhs_value, row.hdot_fd);
        pending.reset();
      }
    }

    if (s == n_steps) break;

    // --- control tick ---
    if (tick_step) {
      const uint64_t tick = static_cast<uint64_t>(s / k_sub);
      const GeneralizedState est = estimate_state(state, in.noise, tick);
      uint32_t flags = 0;
      for (const DisturbanceEvent& e : in.events)
        if (e.active(t)) flags |= kEventPushActive;

      const LipState lip = lip_at(t);
      const SwingTargets swing = swing_reference(in.plan, in.lip, t);
      const std::vector<std::string> stance = stance_groups(in.plan, in.lip, t);

      int qp_status = 0;
      Vec3 u2_new = Vec3::Zero();
      try {
        const DynamicsTerms est_terms = compute_terms(in.model_ctrl, est);
        if (in.kind == ControllerKind::ours) {
          ComState x2_est = com_model;
          const Vec3 u2_des =
              in.ctrl.pin_u2 ? Vec3::Zero() : com_interface(x2_est, lip, in.ctrl.K);
          ControlProblem cp =
              assemble_ours(in.model_ctrl, est_terms, est, x2_est, u2_des, swing, stance,
                            in.ctrl);
          QpSolution sol = solve_qp(cp.qp, 1e-10, 800);
          qp_status = static_cast<int>(sol.status);
          if (sol.status == QpStatus::optimal) {
            tau = extract_torques(cp, sol);
            u2_new = cp.qp.block_of(sol.z, "u2");
          } else {
            flags |= sol.status == QpStatus::infeasible ? kEventQpInfeasible
                                                        : kEventQpMaxIter;
            ++qp_failures;
            if (in.sim.fallback == QpFallback::zero_torque) tau.setZero();
            u2_new.setZero();
          }
        } else {
          ControlProblem cp = assemble_standard(in.model_ctrl, est_terms, est, lip, in.lip,
                                                swing, stance, in.ctrl);
          QpSolution sol = solve_qp(cp.qp, 1e-10, 800);
          qp_status = static_cast<int>(sol.status);
          if (sol.status == QpStatus::optimal) {
            tau = extract_torques(cp, sol);
          } else {
            flags |= sol.status == QpStatus::infeasible ? kEventQpInfeasible
                                                        : kEventQpMaxIter;
            ++qp_failures;
            if (in.sim.fallback == QpFallback::zero_torque) tau.setZero();
          }
          u2_new = lip.velocity();
        }
      } catch (const std::exception&) {
        flags |= kEventQpInfeasible;
        ++qp_failures;
        if (in.sim.fallback == QpFallback::zero_torque) tau.setZero();
        u2_new.setZero();
      }

      // Trace row: state at the tick, certificates filled at t + dt_sim.
      TraceSample row;
      row.t = t;
      row.q = VecX(tr.n_q);
      row.q.head<3>() = state.base_pos;
      row.q[3] = state.base_quat.w();
      row.q[4] = state.base_quat.x();
      row.q[5] = state.base_quat.y();
      row.q[6] = state.base_quat.z();
      row.q.tail(n_rev) = state.joint_pos;
      row.v = state.velocity;
      row.tau = tau;
      row.u2 = u2_new;
      row.x2 = in.kind == ControllerKind::ours ? com_model.x2 : lip.position();
      row.y1 = sim_detail::com_of(sim_model, *kin_true);
      row.y2 = row.x2;
      row.y3 = lip.y3();
      row.qp_status = qp_status;
      row.f_contact = VecX::Zero(3 * tr.n_contacts);
      for (const ContactForce& c :
           contact_forces(sim_model, *kin_true, in.terrain, in.sim))
        row.f_contact.segment<3>(3 * c.contact_index) = c.force;

      // Failure: CoM below the nominal fraction or non-finite state.
      if (row.y1.z() < in.sim.fall_fraction * in.nominal_com_height) {
        fell = true;
        fail_time = t;
        row.event_flags = flags | kEventFell;
        tr.samples.push_back(std::move(row));
        break;
      }
      row.event_flags = flags;
      tr.samples.push_back(std::move(row));

      Pending p;
      p.row = static_cast<int>(tr.samples.size()) - 1;
      ComState x2_tick;
      x2_tick.x2 = in.kind == ControllerKind::ours ? com_model.x2 : lip.position();
      const CertificateSample cs0 = storage_V(true_terms, state, x2_tick, in.ctrl.gains);
      p.h0 = cs0.H;
      p.v0 = cs0.V;
      p.u2 = u2_new;
      p.x2_tick = x2_tick.x2;
      pending = p;

      // Advance the CoM model with the chosen input (exact for the integrator).
      if (in.kind == ControllerKind::ours)
        com_model.x2 += u2_new * in.sim.control_period;
      else
        com_model.x2 = lip_at(t + in.sim.control_period).position();
    }

    // --- physics substep ---
    try {
      auto active = std::vector<const DisturbanceEvent*>();
      for (const DisturbanceEvent& e : in.events)
        if (e.active(t)) active.push_back(&e);
      StepResult res = sim_step(sim_model, state, tau, active, in.terrain, in.sim);
      state = std::move(res.state);
    } catch (const SimDivergence&) {
      fell = true;
      fail_time = t;
      if (!tr.samples.empty()) tr.samples.back().event_flags |= kEventFell;
      break;
    }
  }

  // Metrics.
  TraceMetrics& mm = tr.metrics;
  mm.qp_failures = qp_failures;
  mm.fail_time = fail_time;
  mm.duration = in.sim.duration;
  mm.success = !fell;
  for (size_t i = 0; i < tr.samples.size(); ++i) {
    const TraceSample& a = tr.samples[i];
    mm.max_e12 = std::max(mm.max_e12, (a.y1 - a.y2).norm());
    mm.max_e13 = std::max(mm.max_e13, (a.y1 - a.y3).norm());
    if (i + 1 < tr.samples.size()) {
      const TraceSample& b = tr.samples[i + 1];
      mm.energy += 0.5 * (a.tau.squaredNorm() + b.tau.squaredNorm()) * (b.t - a.t);
    }
  }
  return tr;
}

}  // namespace wbc
