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

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "wbc/math.hpp"

namespace wbc {

// Linear inverted pendulum: constant-height point mass with CoP input.
struct LipParams {
  double z0 = 0.95;           // m
  double g = 9.81;            // m/s^2
  double step_duration = 1.0;  // s
  double ds_fraction = 0.2;    // double-support share of each step

  double omega() const { return std::sqrt(g / z0); }
};

// x3 = [p_com; v_com] in R^6, u3 = CoP in R^2, y3 = p_com.
struct LipState {
  Vec6 x3 = Vec6::Zero();
  Vec2 u3 = Vec2::Zero();

  Vec3 position() const { return x3.head<3>(); }
  Vec3 velocity() const { return x3.tail<3>(); }
  Vec3 y3() const { return position(); }
};

// Single-integrator CoM model: xdot2 = u2, y2 = x2.
struct ComState {
  Vec3 x2 = Vec3::Zero();
};

inline void lip_matrices(const LipParams& p, Eigen::Matrix<double, 6, 6>* a,
                         Eigen::Matrix<double, 6, 2>* b,
                         Eigen::Matrix<double, 3, 6>* c) {
  const double w2 = p.g / p.z0;
  a->setZero();
  a->topRightCorner<3, 3>() = Mat3::Identity();
  (*a)(3, 0) = w2;
  (*a)(4, 1) = w2;
  // Vertical rows stay zero: z = z0, zdot = 0 are the (trivial) zero dynamics.
  (*a)(2, 5) = 1.0;
  (*a)(5, 5) = 0.0;
  b->setZero();
  (*b)(3, 0) = -w2;
  (*b)(4, 1) = -w2;
  c->setZero();
  c->leftCols<3>() = Mat3::Identity();
}

enum class Foot { left, right };
inline Foot other(Foot f) { return f == Foot::left ? Foot::right : Foot::left; }
inline const char* to_string(Foot f) { return f == Foot::left ? "L" : "R"; }

struct FootstepStep {
  Foot foot = Foot::left;
  Vec3 position = Vec3::Zero();  // world sole-center pose
  double yaw = 0.0;
  double touchdown = 0.0;  // s
};

struct FootstepPlan {
  std::vector<FootstepStep> steps;  // alternating feet, increasing touchdowns
  double apex_height = 0.05;        // swing clearance above the higher endpoint
  Vec3 initial_left = Vec3(0, 0.10, 0);
  Vec3 initial_right = Vec3(0, -0.10, 0);

  void validate() const {
    for (size_t k = 0; k < steps.size(); ++k) {
      if (k > 0) {
        if (steps[k].touchdown <= steps[k - 1].touchdown)
          throw std::invalid_argument("footstep plan: touchdown times must increase");
        if (steps[k].foot == steps[k - 1].foot)
          throw std::invalid_argument("footstep plan: feet must alternate");
      }
    }
    if (!steps.empty() && steps.front().touchdown <= 0.0)
      throw std::invalid_argument("footstep plan: touchdown earlier than current time");
  }

  double horizon() const { return steps.empty() ? 0.0 : steps.back().touchdown; }

  // Pose of a foot under the plan at time t (touchdowns switch the pose).
  Vec3 planned_pose(Foot f, double t) const {
    Vec3 pose = f == Foot::left ? initial_left : initial_right;
    for (const auto& s : steps)
      if (s.foot == f && s.touchdown <= t) pose = s.position;
    return pose;
  }
};

inline FootstepPlan parse_plan(const nlohmann::json& j) {
  FootstepPlan plan;
  if (j.contains("apex_height")) plan.apex_height = j.at("apex_height").get<double>();
  auto read_pose = [](const nlohmann::json& arr) {
    return Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
  };
  if (j.contains("initial_left")) plan.initial_left = read_pose(j.at("initial_left"));
  if (j.contains("initial_right")) plan.initial_right = read_pose(j.at("initial_right"));
  for (const auto& sj : j.at("steps")) {
    FootstepStep s;
    const std::string foot = sj.at("foot").get<std::string>();
    if (foot == "L")
      s.foot = Foot::left;
    else if (foot == "R")
      s.foot = Foot::right;
    else
      throw std::invalid_argument("footstep plan: foot must be 'L' or 'R'");
    const auto& pose = sj.at("pose");
    s.position = read_pose(pose);
    s.yaw = pose[3].get<double>();
    s.touchdown = sj.at("touchdown_time").get<double>();
    plan.steps.push_back(s);
  }
  plan.validate();
  return plan;
}

inline nlohmann::json serialize_plan(const FootstepPlan& plan) {
  nlohmann::json j;
  j["apex_height"] = plan.apex_height;
  j["initial_left"] = {plan.initial_left.x(), plan.initial_left.y(), plan.initial_left.z()};
  j["initial_right"] = {plan.initial_right.x(), plan.initial_right.y(),
                        plan.initial_right.z()};
  j["steps"] = nlohmann::json::array();
  for (const auto& s : plan.steps)
    j["steps"].push_back(
        {{"foot", to_string(s.foot)},
         {"pose", {s.position.x(), s.position.y(), s.position.z(), s.yaw}},
         {"touchdown_time", s.touchdown}});
  return j;
}

// ---------------------------------------------------------------------------
// LIP reference trajectory. The CoP rides the stance sole center during
// single support and blends linearly between sole centers during double
// support; the state follows the exact cosh/sinh solution piece by piece.
// ---------------------------------------------------------------------------
struct LipSegment {
  double t0 = 0, t1 = 0;
  Vec2 u0 = Vec2::Zero();     // CoP at t0
  Vec2 slope = Vec2::Zero();  // CoP rate within the segment
  Vec2 p0 = Vec2::Zero(), v0 = Vec2::Zero();
};

class LipTrajectory {
 public:
  LipTrajectory() = default;
  LipTrajectory(std::vector<LipSegment> segs, const LipParams& params)
      : segments_(std::move(segs)), params_(params) {}

  const LipParams& params() const { return params_; }
  const std::vector<LipSegment>& segments() const { return segments_; }

  LipState at(double t) const {
    LipState out;
    if (segments_.empty()) return out;
    size_t k = 0;
    while (k + 1 < segments_.size() && t >= segments_[k].t1) ++k;
    const LipSegment& s = segments_[k];
    const double tau = std::clamp(t - s.t0, 0.0, s.t1 - s.t0);
    const double w = params_.omega();
    const double ch = std::cosh(w * tau), sh = std::sinh(w * tau);
    const Vec2 u = s.u0 + s.slope * tau;
    const Vec2 a = s.p0 - s.u0;
    const Vec2 b = (s.v0 - s.slope) / w;
    const Vec2 p = u + a * ch + b * sh;
    const Vec2 v = s.slope + w * (a * sh + b * ch);
    out.x3 << p.x(), p.y(), params_.z0, v.x(), v.y(), 0.0;
    out.u3 = u;
    return out;
  }

 private:
  std::vector<LipSegment> segments_;
  LipParams params_;
};

namespace planner_detail {

// CoP timeline of a plan: per segment [t0, t1], CoP endpoint values.
struct CopPiece {
  double t0, t1;
  Vec2 u_start, u_end;
};

inline std::vector<CopPiece> cop_timeline(const FootstepPlan& plan, const LipParams& prm) {
  std::vector<CopPiece> pieces;
  Vec3 pose_l = plan.initial_left, pose_r = plan.initial_right;
  Vec2 anchor = 0.5 * (pose_l + pose_r).head<2>();
  double t_prev = 0.0;
  for (const auto& step : plan.steps) {
    const double dur = step.touchdown - t_prev;
    const double ds = prm.ds_fraction * dur;
    const Vec3 stance = step.foot == Foot::left ? pose_r : pose_l;
    const Vec2 target = stance.head<2>();
    if (ds > 0) pieces.push_back({t_prev, t_prev + ds, anchor, target});
    pieces.push_back({t_prev + ds, step.touchdown, target, target});
    anchor = target;
    (step.foot == Foot::left ? pose_l : pose_r) = step.position;
    t_prev = step.touchdown;
  }
  // Final: blend to the midpoint of the final stance and hold (standing).
  const Vec2 mid = 0.5 * (pose_l + pose_r).head<2>();
  const double ds = prm.ds_fraction * prm.step_duration;
  if (!plan.steps.empty()) {
    pieces.push_back({t_prev, t_prev + ds, anchor, mid});
    pieces.push_back({t_prev + ds, t_prev + ds + 1.0, mid, mid});
  }
  return pieces;
}

}  // namespace planner_detail

// Divergent-component boundary condition: chooses the initial LIP velocity so
// the trajectory comes to rest over the final support midpoint instead of
// riding the unstable cosh mode.
inline LipState nominal_lip_start(const FootstepPlan& plan, const LipParams& prm,
                                  const Vec2& p0) {
  LipState s;
  s.x3 << p0.x(), p0.y(), prm.z0, 0, 0, 0;
  if (plan.steps.empty()) {
    s.u3 = p0;
    return s;
  }
  const auto pieces = planner_detail::cop_timeline(plan, prm);
  const double w = prm.omega();
  Vec2 xi = pieces.back().u_end;  // rest at the end
  for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
    const double dur = it->t1 - it->t0;
    if (dur <= 0) continue;
    const Vec2 slope = (it->u_end - it->u_start) / dur;
    // xi(t1) = u(t1) + slope/w + exp(w dur) (xi(t0) - u(t0) - slope/w)
    xi = it->u_start + slope / w + std::exp(-w * dur) * (xi - it->u_end - slope / w);
  }
  s.x3.tail<3>() << w * (xi.x() - p0.x()), w * (xi.y() - p0.y()), 0.0;
  s.u3 = pieces.front().u_start;
  return s;
}

// Piecewise closed-form LIP evolution from x3_init along the plan's CoP
// timeline. Standing plans yield a constant trajectory at the setpoint.
inline LipTrajectory lip_reference(const FootstepPlan& plan, const LipParams& prm,
                                   const LipState& x3_init) {
  plan.validate();
  if (std::abs(x3_init.x3[2] - prm.z0) > 1e-9)
    throw std::invalid_argument("lip_reference: initial state height != z0");
  std::vector<LipSegment> segs;
  Vec2 p = x3_init.position().head<2>();
  Vec2 v = x3_init.velocity().head<2>();
  if (plan.steps.empty()) {
    LipSegment s;
    s.t0 = 0;
    s.t1 = 1e30;
    s.u0 = p;
    s.p0 = p;
    s.v0 = v;
    segs.push_back(s);
    return LipTrajectory(std::move(segs), prm);
  }
  const double w = prm.omega();
  for (const auto& piece : planner_detail::cop_timeline(plan, prm)) {
    const double dur = piece.t1 - piece.t0;
    if (dur <= 0) continue;
    LipSegment s;
    s.t0 = piece.t0;
    s.t1 = piece.t1;
    s.u0 = piece.u_start;
    s.slope = (piece.u_end - piece.u_start) / dur;
    s.p0 = p;
    s.v0 = v;
    segs.push_back(s);
    const double ch = std::cosh(w * dur), sh = std::sinh(w * dur);
    const Vec2 a = p - s.u0;
    const Vec2 b = (v - s.slope) / w;
    p = piece.u_end + a * ch + b * sh;
    v = s.slope + w * (a * sh + b * ch);
  }
  segs.back().t1 = 1e30;  // hold the final standing piece
  return LipTrajectory(std::move(segs), prm);
}

// Interface between the LIP and the CoM model: u2 = v_lip + K (x2 - p_lip).
inline bool is_hurwitz(const Mat3& k) {
  return Eigen::EigenSolver<Mat3>(k).eigenvalues().real().maxCoeff() < 0.0;
}

inline Vec3 com_interface(const ComState& com, const LipState& lip, const Mat3& k) {
  return lip.velocity() + k * (com.x2 - lip.position());
}

// ---------------------------------------------------------------------------
// Swing foot references: quintic in x/y, two-segment quintic in z with the
// apex at mid-swing; zero velocity and acceleration at liftoff and touchdown.
// ---------------------------------------------------------------------------
struct FootTarget {
  bool stance = true;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

struct SwingTargets {
  FootTarget left, right;
  const FootTarget& of(Foot f) const { return f == Foot::left ? left : right; }
};

namespace planner_detail {

// Quintic with zero boundary velocity/acceleration: p(s) = p0 + (p1-p0) B(s),
// B the C^2 smoothstep 10s^3 - 15s^4 + 6s^5.
inline void quintic(double p0, double p1, double t, double duration, double* p, double* v,
                    double* a) {
  const double s = std::clamp(t / duration, 0.0, 1.0);
  const double b = ((6 * s - 15) * s + 10) * s * s * s;
  const double db = ((30 * s - 60) * s + 30) * s * s;
  const double ddb = ((120 * s - 180) * s + 60) * s;
  *p = p0 + (p1 - p0) * b;
  *v = (p1 - p0) * db / duration;
  *a = (p1 - p0) * ddb / (duration * duration);
}

}  // namespace planner_detail

// Stance flags per foot under the plan's schedule (no touch sensing: a foot
// group is active iff the plan says it is in stance).
inline SwingTargets swing_reference(const FootstepPlan& plan, const LipParams& prm,
                                    double t) {
  SwingTargets out;
  out.left.position = plan.planned_pose(Foot::left, t);
  out.right.position = plan.planned_pose(Foot::right, t);

  double t_prev = 0.0;
  for (const auto& step : plan.steps) {
    if (t >= step.touchdown) {
      t_prev = step.touchdown;
      continue;
    }
    const double dur = step.touchdown - t_prev;
    const double lift = t_prev + prm.ds_fraction * dur;
    if (t < lift) break;  // double support
    FootTarget& sw = step.foot == Foot::left ? out.left : out.right;
    sw.stance = false;
    const Vec3 from = plan.planned_pose(step.foot, t_prev);
    const Vec3 to = step.position;
    const double swing_dur = step.touchdown - lift;
    const double tau = t - lift;
    planner_detail::quintic(from.x(), to.x(), tau, swing_dur, &sw.position.x(),
                            &sw.velocity.x(), &sw.acceleration.x());
    planner_detail::quintic(from.y(), to.y(), tau, swing_dur, &sw.position.y(),
                            &sw.velocity.y(), &sw.acceleration.y());
    const double z_apex = std::max(from.z(), to.z()) + plan.apex_height;
    const double half = 0.5 * swing_dur;
    if (tau < half)
      planner_detail::quintic(from.z(), z_apex, tau, half, &sw.position.z(),
                              &sw.velocity.z(), &sw.acceleration.z());
    else
      planner_detail::quintic(z_apex, to.z(), tau - half, half, &sw.position.z(),
                              &sw.velocity.z(), &sw.acceleration.z());
    break;
  }
  return out;
}

// Foot groups in stance at time t ("L", "R").
inline std::vector<std::string> stance_groups(const FootstepPlan& plan,
                                              const LipParams& prm, double t) {
  const SwingTargets sw = swing_reference(plan, prm, t);
  std::vector<std::string> out;
  if (sw.left.stance) out.push_back("L");
  if (sw.right.stance) out.push_back("R");
  return out;
}

// Straight-line walk: step k advances to x = (k+1) * stride / 2, alternating
// feet starting with the left, touchdowns every step_duration after a one-step
// standing lead-in.
inline FootstepPlan make_walk_plan(const LipParams& prm, int n_steps, double stride,
                                   double stance_width = 0.10, double ground_z = 0.0) {
  FootstepPlan plan;
  plan.initial_left = Vec3(0, stance_width, ground_z);
  plan.initial_right = Vec3(0, -stance_width, ground_z);
  for (int k = 0; k < n_steps; ++k) {
    FootstepStep s;
    s.foot = k % 2 == 0 ? Foot::left : Foot::right;
    const double y = s.foot == Foot::left ? stance_width : -stance_width;
    s.position = Vec3((k + 1) * stride / 2.0, y, ground_z);
    s.touchdown = (k + 2) * prm.step_duration;
    plan.steps.push_back(s);
  }
  plan.validate();
  return plan;
}

}  // namespace wbc
