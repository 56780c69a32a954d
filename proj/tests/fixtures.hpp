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

#include "wbc/dynamics.hpp"
#include "wbc/energy.hpp"
#include "wbc/model.hpp"

namespace wbc::fixtures {

inline GeneralizedState random_state(const RobotModel& m, Rng& rng,
                                     double vel_scale = 2.0) {
  GeneralizedState s = GeneralizedState::rest(m);
  s.base_pos = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 1.5));
  s.base_quat = quat_exp(rng.sphere() * rng.uniform(0, M_PI));
  for (int i = 0; i < s.joint_pos.size(); ++i) s.joint_pos[i] = rng.uniform(-1.2, 1.2);
  for (int i = 0; i < s.velocity.size(); ++i)
    s.velocity[i] = rng.uniform(-vel_scale, vel_scale);
  return s;
}

// Mild states around standing, the regime validate_gains samples.
inline std::vector<GeneralizedState> workspace_states(const RobotModel& m, int count,
                                                      uint64_t seed) {
  Rng rng(seed);
  std::vector<GeneralizedState> out;
  for (int i = 0; i < count; ++i) {
    GeneralizedState s = GeneralizedState::rest(m);
    s.base_pos = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.7, 1.1));
    s.base_quat = quat_exp(rng.sphere() * rng.uniform(0, 0.25));
    for (int k = 0; k < s.joint_pos.size(); ++k) s.joint_pos[k] = rng.uniform(-1.0, 1.0);
    out.push_back(s);
  }
  return out;
}

inline InterfaceGains validated_biped_gains(const RobotModel& m) {
  InterfaceGains g = InterfaceGains::isotropic(m.n_vel(), 5000.0, 1000.0);
  const auto states = workspace_states(m, 60, 12345);
  g.alpha = select_alpha(m, states, g.kappa, g.K_D);
  const GainReport rep = validate_gains(m, states, g);
  g.beta = rep.beta;
  return g;
}

// Heavy floating block with a two-link pendulum: the fully actuated toy model
// for interface rollouts (no contacts, u1 applied to every coordinate).
inline RobotModel pendulum_model() {
  RobotModel m;
  auto link = [](const std::string& name, double mass, double inertia_yy,
                 const Vec3& com) {
    LinkSpec l;
    l.name = name;
    l.mass = mass;
    l.inertia = Vec3(inertia_yy, inertia_yy, 0.01).asDiagonal();
    l.com_offset = com;
    return l;
  };
  const double m1 = 1.3, d1 = 0.35, i1 = 0.02;
  const double m2 = 0.9, d2 = 0.25, i2 = 0.015, l1 = 0.6;
  m.links.push_back(link("block", 5.0, 0.2, Vec3::Zero()));
  m.links.push_back(link("rod1", m1, i1 + m1 * d1 * d1, Vec3(0, 0, -d1)));
  m.links.push_back(link("rod2", m2, i2 + m2 * d2 * d2, Vec3(0, 0, -d2)));
  JointSpec base{"float", JointKind::floating_base, "world", "block"};
  JointSpec j1{"q1", JointKind::revolute, "block", "rod1", Vec3::UnitY(),
               Vec3::Zero(), Vec3::Zero(), -100, 100};
  JointSpec j2{"q2", JointKind::revolute, "rod1", "rod2", Vec3::UnitY(),
               Vec3(0, 0, -l1), Vec3::Zero(), -100, 100};
  m.joints = {base, j1, j2};
  m.actuated = {"q1", "q2"};
  finalize_model(m);
  return m;
}

}  // namespace wbc::fixtures
