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

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wbc/math.hpp"

namespace wbc {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LinkSpec {
  std::string name;
  double mass = 0.0;          // kg
  Mat3 inertia = Mat3::Zero();  // about the link-frame origin, link axes
  Vec3 com_offset = Vec3::Zero();
};

enum class JointKind { floating_base, revolute };

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::revolute;
  std::string parent;  // link name, or "world" for the floating base
  std::string child;
  Vec3 axis = Vec3::UnitZ();      // revolute only, in the joint frame
  Vec3 origin_xyz = Vec3::Zero();  // transform from parent link frame
  Vec3 origin_rpy = Vec3::Zero();
  double torque_min = 0.0;  // actuated joints only
  double torque_max = 0.0;
};

struct ContactSpec {
  std::string link;
  Vec3 offset = Vec3::Zero();
  std::string foot_group;
};

// Floating-base kinematic tree. Immutable after load; generalized velocity is
// [base linear (world), base angular (body), joint rates], dimension n+6.
struct RobotModel {
  std::vector<LinkSpec> links;
  std::vector<JointSpec> joints;
  std::vector<ContactSpec> contacts;
  std::vector<std::string> actuated;  // joint names
  double total_mass = 0.0;            // derived

  // Derived topology, filled by finalize().
  std::unordered_map<std::string, int> link_index;
  std::unordered_map<std::string, int> joint_index;
  int base_link = -1;
  std::vector<int> parent_link;   // per link, -1 for base
  std::vector<int> parent_joint;  // per link, joint connecting it upward
  std::vector<int> link_order;    // topological, parents first
  std::vector<int> revolute_joints;        // joint indices in velocity order
  std::vector<int> vel_coord_of_joint;     // per joint, 6+k or -1
  std::vector<int> actuated_joint_ids;     // joint indices, velocity order
  std::vector<int> contact_link_ids;       // per contact

  int n_revolute() const { return static_cast<int>(revolute_joints.size()); }
  int n_vel() const { return 6 + n_revolute(); }
  int n_act() const { return static_cast<int>(actuated_joint_ids.size()); }

  // S^T: maps actuated torques into generalized forces.
  MatX actuation_map() const {
    MatX st = MatX::Zero(n_vel(), n_act());
    for (int a = 0; a < n_act(); ++a)
      st(vel_coord_of_joint[actuated_joint_ids[a]], a) = 1.0;
    return st;
  }

  VecX torque_lower() const {
    VecX lo(n_act());
    for (int a = 0; a < n_act(); ++a) lo[a] = joints[actuated_joint_ids[a]].torque_min;
    return lo;
  }
  VecX torque_upper() const {
    VecX hi(n_act());
    for (int a = 0; a < n_act(); ++a) hi[a] = joints[actuated_joint_ids[a]].torque_max;
    return hi;
  }
};

namespace detail {

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace detail

// Builds derived topology and checks every model invariant. Throws
// ValidationError naming the first violation.
inline void finalize_model(RobotModel& m) {
  using detail::check;
  m.link_index.clear();
  m.joint_index.clear();
  for (size_t i = 0; i < m.links.size(); ++i) {
    const LinkSpec& l = m.links[i];
    check(!l.name.empty() && l.name != "world", "link name invalid");
    check(m.link_index.emplace(l.name, int(i)).second,
          "duplicate link '" + l.name + "'");
    check(l.mass > 0.0, "link '" + l.name + "': mass <= 0");
    check((l.inertia - l.inertia.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "link '" + l.name + "': inertia not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(l.inertia);
    check(es.eigenvalues().minCoeff() > 0.0,
          "link '" + l.name + "': inertia not positive definite");
  }

  m.parent_link.assign(m.links.size(), -1);
  m.parent_joint.assign(m.links.size(), -1);
  m.vel_coord_of_joint.assign(m.joints.size(), -1);
  m.base_link = -1;
  int n_float = 0;
  for (size_t j = 0; j < m.joints.size(); ++j) {
    const JointSpec& js = m.joints[j];
    check(m.joint_index.emplace(js.name, int(j)).second,
          "duplicate joint '" + js.name + "'");
    check(m.link_index.count(js.child), "joint '" + js.name + "': unknown child link");
    const int child = m.link_index.at(js.child);
    check(m.parent_joint[child] == -1, "joint graph is not a tree");
    m.parent_joint[child] = int(j);
    if (js.kind == JointKind::floating_base) {
      ++n_float;
      check(js.parent == "world", "floating_base joint must be rooted at the world");
      m.base_link = child;
    } else {
      check(std::abs(js.axis.norm() - 1.0) <= 1e-12,
            "joint '" + js.name + "': axis not unit norm");
      check(m.link_index.count(js.parent),
            "joint '" + js.name + "': unknown parent link");
      m.parent_link[child] = m.link_index.at(js.parent);
    }
  }
  check(n_float == 1, "exactly one floating_base joint required");

  // Topological order; also detects cycles / disconnected links.
  m.link_order.clear();
  std::vector<int> state(m.links.size(), 0);  // 0 unvisited, 1 on path, 2 done
  for (size_t i = 0; i < m.links.size(); ++i) {
    if (state[i] == 2) continue;
    std::vector<int> chain;
    int cur = int(i);
    while (cur != -1 && state[cur] != 2) {
      check(state[cur] != 1, "joint graph is not a tree");
      state[cur] = 1;
      chain.push_back(cur);
      check(cur == m.base_link || m.parent_joint[cur] != -1,
            "joint graph is not a tree");
      cur = m.parent_link[cur];
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      m.link_order.push_back(*it);
      state[*it] = 2;
    }
  }

  m.revolute_joints.clear();
  for (size_t j = 0; j < m.joints.size(); ++j)
    if (m.joints[j].kind == JointKind::revolute) {
      m.vel_coord_of_joint[j] = 6 + int(m.revolute_joints.size());
      m.revolute_joints.push_back(int(j));
    }

  m.actuated_joint_ids.clear();
  std::vector<char> seen(m.joints.size(), 0);
  for (const std::string& name : m.actuated) {
    check(m.joint_index.count(name), "actuated joint '" + name + "' unknown");
    const int j = m.joint_index.at(name);
    check(m.joints[j].kind == JointKind::revolute,
          "actuated joint '" + name + "' is not revolute");
    check(!seen[j], "actuated joint '" + name + "' listed twice");
    seen[j] = 1;
  }
  for (int j : m.revolute_joints)
    if (seen[j]) m.actuated_joint_ids.push_back(j);
  for (int j : m.actuated_joint_ids) {
    const JointSpec& js = m.joints[j];
    check(js.torque_min <= 0.0 && 0.0 <= js.torque_max,
          "joint '" + js.name + "': torque limits must bracket zero");
  }

  m.contact_link_ids.clear();
  std::map<std::string, std::vector<Vec3>> groups;
  for (const ContactSpec& c : m.contacts) {
    check(m.link_index.count(c.link), "contact on unknown link '" + c.link + "'");
    m.contact_link_ids.push_back(m.link_index.at(c.link));
    groups[c.foot_group].push_back(c.offset);
  }
  for (const auto& [group, pts] : groups) {
    check(pts.size() >= 3, "foot_group '" + group + "' has fewer than 3 points");
    bool noncollinear = false;
    for (size_t a = 0; a + 2 < pts.size() && !noncollinear; ++a)
      for (size_t b = a + 1; b + 1 < pts.size() && !noncollinear; ++b)
        for (size_t c = b + 1; c < pts.size() && !noncollinear; ++c)
          if ((pts[b] - pts[a]).cross(pts[c] - pts[a]).norm() > 1e-9)
            noncollinear = true;
    check(noncollinear, "foot_group '" + group + "' points are collinear");
  }

  double mass = 0.0;
  for (const LinkSpec& l : m.links) mass += l.mass;
  m.total_mass = mass;
}

inline RobotModel parse_model(const nlohmann::json& j) {
  RobotModel m;
  try {
    for (const auto& lj : j.at("links")) {
      LinkSpec l;
      l.name = lj.at("name").get<std::string>();
      l.mass = lj.at("mass").get<double>();
      const auto& in = lj.at("inertia");
      if (in.size() != 9) throw ParseError("inertia must have 9 entries");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) l.inertia(r, c) = in[3 * r + c].get<double>();
      const auto& co = lj.at("com_offset");
      l.com_offset = Vec3(co[0].get<double>(), co[1].get<double>(), co[2].get<double>());
      m.links.push_back(l);
    }
    for (const auto& jj : j.at("joints")) {
      JointSpec js;
      js.name = jj.at("name").get<std::string>();
      const std::string kind = jj.at("kind").get<std::string>();
      if (kind == "floating_base")
        js.kind = JointKind::floating_base;
      else if (kind == "revolute")
        js.kind = JointKind::revolute;
      else
        throw ParseError("joint '" + js.name + "': unknown kind '" + kind + "'");
      js.parent = jj.at("parent").get<std::string>();
      js.child = jj.at("child").get<std::string>();
      if (jj.contains("axis")) {
        const auto& ax = jj.at("axis");
        js.axis = Vec3(ax[0].get<double>(), ax[1].get<double>(), ax[2].get<double>());
      }
      if (jj.contains("origin")) {
        const auto& o = jj.at("origin");
        if (o.contains("xyz")) {
          const auto& x = o.at("xyz");
          js.origin_xyz = Vec3(x[0].get<double>(), x[1].get<double>(), x[2].get<double>());
        }
        if (o.contains("rpy")) {
          const auto& r = o.at("rpy");
          js.origin_rpy = Vec3(r[0].get<double>(), r[1].get<double>(), r[2].get<double>());
        }
      }
      if (jj.contains("torque_limits")) {
        const auto& tl = jj.at("torque_limits");
        js.torque_min = tl[0].get<double>();
        js.torque_max = tl[1].get<double>();
      }
      m.joints.push_back(js);
    }
    for (const auto& cj : j.at("contacts")) {
      ContactSpec c;
      c.link = cj.at("link").get<std::string>();
      const auto& o = cj.at("offset");
      c.offset = Vec3(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
      c.foot_group = cj.at("foot_group").get<std::string>();
      m.contacts.push_back(c);
    }
    for (const auto& aj : j.at("actuated")) m.actuated.push_back(aj.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed robot description: ") + e.what());
  }
  finalize_model(m);
  return m;
}

inline RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return parse_model(j);
}

inline nlohmann::json serialize(const RobotModel& m) {
  nlohmann::json j;
  j["links"] = nlohmann::json::array();
  for (const LinkSpec& l : m.links) {
    nlohmann::json lj;
    lj["name"] = l.name;
    lj["mass"] = l.mass;
    std::vector<double> in(9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) in[3 * r + c] = l.inertia(r, c);
    lj["inertia"] = in;
    lj["com_offset"] = {l.com_offset.x(), l.com_offset.y(), l.com_offset.z()};
    j["links"].push_back(lj);
  }
  j["joints"] = nlohmann::json::array();
  for (const JointSpec& js : m.joints) {
    nlohmann::json jj;
    jj["name"] = js.name;
    jj["kind"] = js.kind == JointKind::floating_base ? "floating_base" : "revolute";
    jj["parent"] = js.parent;
    jj["child"] = js.child;
    jj["axis"] = {js.axis.x(), js.axis.y(), js.axis.z()};
    jj["origin"] = {{"xyz", {js.origin_xyz.x(), js.origin_xyz.y(), js.origin_xyz.z()}},
                    {"rpy", {js.origin_rpy.x(), js.origin_rpy.y(), js.origin_rpy.z()}}};
    jj["torque_limits"] = {js.torque_min, js.torque_max};
    j["joints"].push_back(jj);
  }
  j["contacts"] = nlohmann::json::array();
  for (const ContactSpec& c : m.contacts) {
    j["contacts"].push_back({{"link", c.link},
                             {"offset", {c.offset.x(), c.offset.y(), c.offset.z()}},
                             {"foot_group", c.foot_group}});
  }
  j["actuated"] = m.actuated;
  return j;
}

inline void save_model(const RobotModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << serialize(m).dump(2) << "\n";
}

// Randomly rescales link masses, m_i <- max(delta, m_i + m_i r) with
// r ~ N(0, sigma); inertias scale with the mass ratio. Deterministic in seed.
inline RobotModel perturb_model(const RobotModel& model, uint64_t seed, double sigma,
                                double delta) {
  if (sigma < 0.0) throw std::invalid_argument("perturb_model: sigma < 0");
  if (delta <= 0.0) throw std::invalid_argument("perturb_model: delta <= 0");
  RobotModel out = model;
  Rng rng(Rng::derive(seed, "model_perturbation"));
  for (LinkSpec& l : out.links) {
    const double r = sigma * rng.normal();
    const double m_new = sigma == 0.0 ? l.mass : std::max(delta, l.mass + l.mass * r);
    l.inertia *= m_new / l.mass;
    l.mass = m_new;
  }
  finalize_model(out);
  return out;
}

// ---------------------------------------------------------------------------
// Default desk-scale biped: 40 kg, 16 velocity DoF (6 floating + 5 per leg:
// hip roll, hip pitch, knee, ankle pitch, ankle roll), rectangular soles with
// 4 contact points each. Legs reach 1.05 m hip-to-ankle when straight, so
// commanded CoM heights near 1.09 m put the knees in the singular regime.
// Foot CoM sits on the ankle axis so a torque-free swing foot keeps its
// orientation instead of dangling.
// ---------------------------------------------------------------------------
namespace biped {
constexpr double kThigh = 0.55;
constexpr double kShin = 0.50;
constexpr double kAnkleHeight = 0.05;
constexpr double kHipSpacing = 0.10;  // each hip at y = +/- 0.10
constexpr double kSoleToe = 0.10;     // contact x extents about the ankle
constexpr double kSoleHeel = -0.06;
constexpr double kSoleHalfWidth = 0.045;
constexpr double kLegLength = kThigh + kShin;
}  // namespace biped

inline RobotModel default_biped() {
  using namespace biped;
  RobotModel m;
  auto box_inertia = [](double mass, double x, double y, double z) {
    return Vec3(mass / 12.0 * (y * y + z * z), mass / 12.0 * (x * x + z * z),
                mass / 12.0 * (x * x + y * y));
  };

  auto add_link = [&](const std::string& name, double mass, const Vec3& diag,
                      const Vec3& com) {
    LinkSpec l;
    l.name = name;
    l.mass = mass;
    l.inertia = diag.asDiagonal();
    l.com_offset = com;
    m.links.push_back(l);
  };

  // Pelvis + lumped torso. CoM held high so the straight-leg robot CoM is
  // ~1.10 m and the configurable range 0.75-1.05 m stays inside reach.
  // Inertia = 0.22 x 0.30 x 0.55 box about its CoM, shifted 0.42 m up.
  {
    Vec3 diag = box_inertia(22.4, 0.22, 0.30, 0.55);
    diag.x() += 22.4 * 0.42 * 0.42;
    diag.y() += 22.4 * 0.42 * 0.42;
    add_link("pelvis", 22.4, diag, Vec3(0, 0, 0.42));
  }
  for (const std::string side : {"L", "R"}) {
    const double sgn = side == "L" ? 1.0 : -1.0;
    add_link("hip_" + side, 1.0, Vec3(0.004, 0.004, 0.004), Vec3::Zero());
    add_link("thigh_" + side, 3.5, Vec3(3.5 * kThigh * kThigh / 3.0, 3.5 * kThigh * kThigh / 3.0, 0.008),
             Vec3(0, 0, -0.25));
    add_link("shin_" + side, 2.2, Vec3(2.2 * kShin * kShin / 3.0, 2.2 * kShin * kShin / 3.0, 0.005),
             Vec3(0, 0, -0.22));
    add_link("ankle_" + side, 0.3, Vec3(0.0015, 0.0015, 0.0015), Vec3::Zero());
    add_link("foot_" + side, 1.8, Vec3(0.012, 0.016, 0.014), Vec3::Zero());

    JointSpec hip_roll{"hip_roll_" + side, JointKind::revolute, "pelvis", "hip_" + side,
                       Vec3::UnitX(), Vec3(0, sgn * kHipSpacing, 0), Vec3::Zero(), -140, 140};
    JointSpec hip_pitch{"hip_pitch_" + side, JointKind::revolute, "hip_" + side,
                        "thigh_" + side, Vec3::UnitY(), Vec3::Zero(), Vec3::Zero(), -200, 200};
    JointSpec knee{"knee_" + side, JointKind::revolute, "thigh_" + side, "shin_" + side,
                   Vec3::UnitY(), Vec3(0, 0, -kThigh), Vec3::Zero(), -200, 200};
    JointSpec ankle_pitch{"ankle_pitch_" + side, JointKind::revolute, "shin_" + side,
                          "ankle_" + side, Vec3::UnitY(), Vec3(0, 0, -kShin), Vec3::Zero(),
                          -120, 120};
    JointSpec ankle_roll{"ankle_roll_" + side, JointKind::revolute, "ankle_" + side,
                         "foot_" + side, Vec3::UnitX(), Vec3::Zero(), Vec3::Zero(), -120, 120};
    m.joints.insert(m.joints.end(), {hip_roll, hip_pitch, knee, ankle_pitch, ankle_roll});
    for (double cx : {kSoleToe, kSoleHeel})
      for (double cy : {kSoleHalfWidth, -kSoleHalfWidth})
        m.contacts.push_back({"foot_" + side, Vec3(cx, cy, -kAnkleHeight), side});
  }
  JointSpec base{"floating_base", JointKind::floating_base, "world", "pelvis",
                 Vec3::UnitZ(), Vec3::Zero(), Vec3::Zero(), 0, 0};
  m.joints.insert(m.joints.begin(), base);
  for (const JointSpec& js : m.joints)
    if (js.kind == JointKind::revolute) m.actuated.push_back(js.name);
  finalize_model(m);
  return m;
}

}  // namespace wbc
