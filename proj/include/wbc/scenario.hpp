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

#include <sstream>
#include <string>
#include <vector>

#include "wbc/config.hpp"
#include "wbc/controller.hpp"
#include "wbc/dynamics.hpp"
#include "wbc/model.hpp"
#include "wbc/planner.hpp"
#include "wbc/sim.hpp"

namespace wbc {

namespace scenario_detail {

// Analytic leg IK for the default biped: roll about x at hip and ankle, a 2R
// pitch chain in the rolled plane, flat foot. Angles returned in joint order
// hip_roll, hip_pitch, knee, ankle_pitch, ankle_roll.
inline bool leg_ik(const Vec3& hip_to_ankle, double l1, double l2, double out[5]) {
  const Vec3& t = hip_to_ankle;
  const double rho = std::atan2(-t.y(), -t.z());
  // Rotate into the leg plane.
  const double c = std::cos(rho), s = std::sin(rho);
  const double ty = c * t.y() + s * t.z();
  const double tz = -s * t.y() + c * t.z();
  (void)ty;
  const double a = -t.x();
  const double b = -tz;
  const double r2 = a * a + b * b;
  const double ck = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (ck > 1.0 + 1e-12 || ck < -1.0) return false;
  const double k = std::acos(std::clamp(ck, -1.0, 1.0));
  const double theta1 = std::atan2(a, b) - std::atan2(l2 * std::sin(k), l1 + l2 * std::cos(k));
  out[0] = rho;                  // hip_roll
  out[1] = theta1;               // hip_pitch
  out[2] = k;                    // knee
  out[3] = -(theta1 + k);        // ankle_pitch (foot flat)
  out[4] = -rho;                 // ankle_roll
  return true;
}

inline Vec3 sole_center_offset(const RobotModel& m, const std::string& group) {
  Vec3 c = Vec3::Zero();
  int n = 0;
  for (const auto& contact : m.contacts)
    if (contact.foot_group == group) {
      c += contact.offset;
      ++n;
    }
  return n ? Vec3(c / n) : Vec3::Zero();
}

}  // namespace scenario_detail

// Upright double-support pose of the default biped with the CoM at the given
// height above the ground and centred over the support. Feet flat at the
// given sole-center positions. Unreachable heights clamp to the straightest
// admissible legs.
inline GeneralizedState standing_pose(const RobotModel& m, double com_height,
                                      const Vec3& sole_left, const Vec3& sole_right) {
  GeneralizedState s = GeneralizedState::rest(m);
  const Vec3 off_l = scenario_detail::sole_center_offset(m, "L");
  const Vec3 off_r = scenario_detail::sole_center_offset(m, "R");
  const Vec3 ankle_l = sole_left - off_l;
  const Vec3 ankle_r = sole_right - off_r;
  const double l1 = biped::kThigh, l2 = biped::kShin;

  auto hip_offset = [&](const char* side) {
    const JointSpec& j = m.joints[m.joint_index.at(std::string("hip_roll_") + side)];
    return j.origin_xyz;
  };
  const Vec3 hip_l = hip_offset("L"), hip_r = hip_offset("R");

  s.base_pos = Vec3(0.5 * (ankle_l.x() + ankle_r.x()),
                    0.5 * (ankle_l.y() + ankle_r.y()) , ankle_l.z() + l1 + l2 - 1e-4);
  auto set_leg = [&](const char* side, const Vec3& hip_off, const Vec3& ankle) {
    double q[5];
    Vec3 t = ankle - (s.base_pos + hip_off);
    const double reach = l1 + l2 - 1e-6;
    if (t.norm() > reach) t *= reach / t.norm();
    if (!scenario_detail::leg_ik(t, l1, l2, q))
      throw std::runtime_error("standing_pose: leg IK failed");
    const char* names[5] = {"hip_roll_", "hip_pitch_", "knee_", "ankle_pitch_",
                            "ankle_roll_"};
    for (int i = 0; i < 5; ++i) {
      const int j = m.joint_index.at(std::string(names[i]) + side);
      s.joint_pos[m.vel_coord_of_joint[j] - 6] = q[i];
    }
  };

  for (int iter = 0; iter < 60; ++iter) {
    set_leg("L", hip_l, ankle_l);
    set_leg("R", hip_r, ankle_r);
    const KinematicsCache kin = forward_kinematics(m, s);
    Vec3 com = Vec3::Zero();
    for (size_t i = 0; i < m.links.size(); ++i) com += m.links[i].mass * kin.com_w[i];
    com /= m.total_mass;
    const Vec3 support(0.5 * (sole_left.x() + sole_right.x()),
                       0.5 * (sole_left.y() + sole_right.y()), com_height);
    const Vec3 err = support - com;
    if (err.norm() < 1e-10) break;
    // CoM moves nearly one-for-one with the base; clamp z to reachable.
    s.base_pos += 0.8 * err;
    const double max_z = ankle_l.z() + l1 + l2 - 1e-5;
    s.base_pos.z() = std::min(s.base_pos.z(), max_z);
  }
  return s;
}

inline Vec3 com_of_state(const RobotModel& m, const GeneralizedState& s) {
  const KinematicsCache kin = forward_kinematics(m, s);
  Vec3 com = Vec3::Zero();
  for (size_t i = 0; i < m.links.size(); ++i) com += m.links[i].mass * kin.com_w[i];
  return com / m.total_mass;
}

// Workspace samples for gain validation (configured ranges around standing).
inline std::vector<GeneralizedState> sample_workspace(const RobotModel& m,
                                                      const Config& cfg) {
  Rng rng(cfg.sample_seed);
  std::vector<GeneralizedState> out;
  for (int i = 0; i < cfg.sample_count; ++i) {
    GeneralizedState s = GeneralizedState::rest(m);
    s.base_pos =
        Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.6, 1.15));
    s.base_quat = quat_exp(rng.sphere() * rng.uniform(0.0, cfg.sample_tilt_range));
    for (int k = 0; k < s.joint_pos.size(); ++k)
      s.joint_pos[k] = rng.uniform(-cfg.sample_joint_range, cfg.sample_joint_range);
    out.push_back(s);
  }
  return out;
}

// Resolved gains for a model under a config: K_D = kd I, alpha selected with
// the configured margin unless pinned, beta from the workspace sweep.
inline InterfaceGains resolve_gains(const RobotModel& m, const Config& cfg) {
  InterfaceGains g = InterfaceGains::isotropic(m.n_vel(), cfg.kappa, cfg.kd);
  const auto states = sample_workspace(m, cfg);
  g.alpha = cfg.alpha > 0 ? cfg.alpha
                          : select_alpha(m, states, g.kappa, g.K_D, cfg.alpha_margin);
  const GainReport rep = validate_gains(m, states, g);
  if (!rep.valid)
    throw ConfigError("gain validation failed: " + rep.reason);
  g.beta = rep.beta;
  return g;
}

// ---------------------------------------------------------------------------
// Scenario realizations. Everything stochastic is drawn from named
// sub-streams of the trial seed so ours/standard consume identical
// realizations; the serialized form goes into the trace header byte-for-byte.
// ---------------------------------------------------------------------------
inline DisturbanceEvent scenario_push(const Config& cfg, const RobotModel& m,
                                      uint64_t seed) {
  Rng rng(Rng::derive(seed, "push"));
  DisturbanceEvent e;
  e.start = rng.uniform(cfg.push_t_lo, cfg.push_t_hi);
  e.duration = cfg.push_duration;
  const double mag =
      rng.uniform(cfg.push_frac_lo, cfg.push_frac_hi) * m.total_mass * kGravity;
  const double dir = rng.uniform() < 0.5 ? 1.0 : -1.0;
  e.force = Vec3(0, dir * mag, 0);
  e.link = m.links[m.base_link].name;
  e.offset = Vec3::Zero();
  return e;
}

inline Terrain scenario_terrain(const Config& cfg, const FootstepPlan& plan,
                                uint64_t seed) {
  Terrain t;
  t.mu_world = cfg.mu_world;
  if (cfg.brick_count <= 0) return t;
  Rng rng(Rng::derive(seed, "terrain"));
  double x_max = 0.3;
  for (const auto& s : plan.steps) x_max = std::max(x_max, s.position.x() + 0.2);
  const double x_min = 0.12;
  // Keep bricks clear of the start footprint.
  const double start_clear_x = 0.12;
  for (int i = 0; i < cfg.brick_count; ++i) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      TerrainBrick b;
      b.half = cfg.brick_half;
      b.center = Vec3(rng.uniform(x_min, x_max),
                      rng.uniform(-cfg.corridor_half_width, cfg.corridor_half_width),
                      t.ground_z + cfg.brick_half.z());
      if (b.center.x() - b.half.x() < start_clear_x) continue;
      t.bricks.push_back(b);
      break;
    }
  }
  return t;
}

struct TrialSetup {
  ClosedLoopInputs inputs;
  std::string realization;  // serialized disturbance/terrain/model draw
  Vec3 standing_setpoint = Vec3::Zero();
};

// Builds a ready-to-run closed-loop trial for (config, controller, seed).
// `height_override` replaces the LIP height for high_com sweeps.
inline TrialSetup make_trial(const Config& cfg, const RobotModel& model,
                             const InterfaceGains& gains, ControllerKind kind,
                             uint64_t seed, double height_override = -1.0) {
  TrialSetup ts;
  ClosedLoopInputs& in = ts.inputs;
  in.model_ctrl = model;
  in.model_sim = model;
  in.kind = kind;
  in.lip = cfg.lip;
  if (height_override > 0) in.lip.z0 = height_override;
  in.sim = cfg.sim;
  in.terrain.mu_world = cfg.mu_world;
  in.ctrl = cfg.ctrl;
  in.ctrl.gains = gains;
  in.ctrl.K = -cfg.k_track * Mat3::Identity();
  in.seed = seed;
  in.noise.seed = Rng::derive(seed, "noise");

  std::ostringstream real;
  real.setf(std::ios::scientific);
  real.precision(9);
  real << "scenario=" << cfg.scenario << ";seed=" << seed;

  const std::string& name = cfg.scenario;
  const bool walking = name == "walk" || name == "push_recovery" ||
                       name == "uneven_terrain" || name == "model_error" ||
                       name == "high_com" || name == "noise_sweep";

  if (name == "standing" || name == "standing_push") {
    in.lip.z0 = cfg.standing_setpoint.z();
    in.init = standing_pose(model, in.lip.z0, Vec3(0, cfg.stance_width, 0),
                            Vec3(0, -cfg.stance_width, 0));
    in.plan = FootstepPlan{};
    in.plan.initial_left = Vec3(0, cfg.stance_width, 0);
    in.plan.initial_right = Vec3(0, -cfg.stance_width, 0);
    LipState lip0;
    if (name == "standing") {
      lip0.x3 << cfg.standing_setpoint.x(), cfg.standing_setpoint.y(), in.lip.z0, 0, 0, 0;
      lip0.u3 = cfg.standing_setpoint.head<2>();
      ts.standing_setpoint = cfg.standing_setpoint;
    } else {
      // Regulation about the initial CoM with u2 pinned to zero.
      const Vec3 com0 = com_of_state(model, in.init);
      lip0.x3 << com0.x(), com0.y(), in.lip.z0, 0, 0, 0;
      lip0.u3 = com0.head<2>();
      in.ctrl.pin_u2 = true;
      ts.standing_setpoint = Vec3(com0.x(), com0.y(), in.lip.z0);
      DisturbanceEvent push;
      push.start = 2.0;
      push.duration = cfg.push_duration;
      push.force = Vec3(0, cfg.standing_push_frac * model.total_mass * kGravity, 0);
      push.link = model.links[model.base_link].name;
      in.events.push_back(push);
      real << ";push_t=" << push.start << ";push_f=" << push.force.y();
    }
    in.ref = lip_reference(in.plan, in.lip, lip0);
  } else if (walking) {
    if (name == "high_com" && height_override <= 0)
      throw ConfigError("high_com trials need a height override");
    in.init = standing_pose(model, in.lip.z0, Vec3(0, cfg.stance_width, 0),
                            Vec3(0, -cfg.stance_width, 0));
    in.plan = make_walk_plan(in.lip, cfg.walk_steps, cfg.stride, cfg.stance_width);
    const Vec3 com0 = com_of_state(model, in.init);
    LipState lip0 = nominal_lip_start(in.plan, in.lip, com0.head<2>());
    in.ref = lip_reference(in.plan, in.lip, lip0);
    // Crossing scenarios run until the plan finishes; timed scenarios keep
    // the configured window ("walk for 5 s without falling").
    if (name == "uneven_terrain" || name == "walk")
      in.sim.duration = std::max(cfg.sim.duration, in.plan.horizon() + 1.0);

    if (name == "push_recovery") {
      const DisturbanceEvent e = scenario_push(cfg, model, seed);
      in.events.push_back(e);
      real << ";push_t=" << e.start << ";push_fy=" << e.force.y()
           << ";push_dur=" << e.duration;
    } else if (name == "uneven_terrain") {
      in.terrain = scenario_terrain(cfg, in.plan, seed);
      real << ";bricks=";
      for (const auto& b : in.terrain.bricks)
        real << "(" << b.center.x() << "," << b.center.y() << "," << b.center.z() << ")";
    } else if (name == "model_error") {
      in.model_sim = perturb_model(model, Rng::derive(seed, "model"),
                                   cfg.model_error_sigma, cfg.model_error_delta);
      real << ";masses=";
      for (const auto& l : in.model_sim.links) real << l.mass << ",";
    } else if (name == "noise_sweep") {
      NoiseSpec n = noise_column(cfg.noise_col);
      n.seed = in.noise.seed;
      in.noise = n;
      real << ";noise_col=" << cfg.noise_col;
    } else if (name == "high_com") {
      real << ";z0=" << in.lip.z0;
    }
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }

  in.nominal_com_height = in.lip.z0;
  ts.realization = real.str();
  in.header_extra.emplace_back("scenario", name);
  in.header_extra.emplace_back("realization", ts.realization);
  return ts;
}

// Terrain trials succeed when the final footstep is reached (CoM close to the
// last sole center at the end) without falling; every other scenario succeeds
// by surviving the full duration.
inline bool trial_success(const Config& cfg, const Trace& tr) {
  if (!tr.metrics.success) return false;
  if (cfg.scenario == "uneven_terrain" || cfg.scenario == "walk") {
    if (tr.samples.empty()) return false;
    FootstepPlan plan = make_walk_plan(cfg.lip, cfg.walk_steps, cfg.stride,
                                       cfg.stance_width);
    const double target_x = plan.steps.empty() ? 0.0 : plan.steps.back().position.x();
    return tr.samples.back().y1.x() >= target_x - 0.25;
  }
  return true;
}

}  // namespace wbc
