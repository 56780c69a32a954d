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
#include <string>

#include <json.hpp>

#include "wbc/controller.hpp"
#include "wbc/model.hpp"
#include "wbc/planner.hpp"
#include "wbc/sim.hpp"

namespace wbc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Table-style state-estimation noise presets (sigma_p mm, sigma_r deg,
// sigma_v mm/s), columns 1..6.
inline NoiseSpec noise_column(int column) {
  static constexpr double kCols[6][3] = {{3.0, 0.5, 14.2},  {3.7, 0.5, 18.5},
                                         {26.0, 0.9, 82.2}, {34.9, 0.9, 107.8},
                                         {40.0, 1.5, 200.0}, {50.0, 1.5, 250.0}};
  if (column < 1 || column > 6) throw ConfigError("noise column must be in 1..6");
  NoiseSpec n;
  n.sigma_p_mm = kCols[column - 1][0];
  n.sigma_r_deg = kCols[column - 1][1];
  n.sigma_v_mmps = kCols[column - 1][2];
  return n;
}

// One configuration document with sections model / gains / sim / controller /
// scenario / sampling. Every value has a default; JSON overrides fields.
struct Config {
  // model
  std::string model_path = "default";

  // gains (ours); alpha < 0 means "select automatically with the margin"
  double kappa = 5000.0;
  double kd = 1000.0;  // K_D = kd * I
  double alpha = -1.0;
  double alpha_margin = 0.1;
  double k_track = 3.0;  // K = -k_track * I

  // sim
  SimConfig sim;
  double mu_world = 0.7;

  // controller
  ControllerParams ctrl;  // gains filled in at setup time

  // scenario
  std::string scenario = "standing";
  Vec3 standing_setpoint = Vec3(-0.01, 0.05, 0.95);
  LipParams lip;           // z0 doubles as the nominal CoM height
  int walk_steps = 7;
  double stride = 0.12;
  double stance_width = 0.10;
  double push_frac_lo = 0.30, push_frac_hi = 0.45;  // fractions of body weight
  double push_t_lo = 1.0, push_t_hi = 3.5;
  double push_duration = 0.05;
  double standing_push_frac = 0.45;  // single deterministic push at t = 2 s
  int brick_count = 15;
  Vec3 brick_half = Vec3(0.062, 0.035, 0.02);
  double corridor_half_width = 0.25;
  double model_error_sigma = 0.5;
  double model_error_delta = 1e-3;
  std::vector<double> heights = {0.98, 1.02, 1.06, 1.09};
  int noise_col = 1;

  // sampling (workspace for validate_gains / select_alpha)
  int sample_count = 200;
  uint64_t sample_seed = 2718281828;
  double sample_joint_range = 1.0;
  double sample_tilt_range = 0.25;
};

namespace config_detail {

inline void read(const nlohmann::json& j, const char* key, double* out) {
  if (j.contains(key)) *out = j.at(key).get<double>();
}
inline void read(const nlohmann::json& j, const char* key, int* out) {
  if (j.contains(key)) *out = j.at(key).get<int>();
}
inline void read(const nlohmann::json& j, const char* key, uint64_t* out) {
  if (j.contains(key)) *out = j.at(key).get<uint64_t>();
}
inline void read(const nlohmann::json& j, const char* key, std::string* out) {
  if (j.contains(key)) *out = j.at(key).get<std::string>();
}
inline void read(const nlohmann::json& j, const char* key, Vec3* out) {
  if (j.contains(key)) {
    const auto& a = j.at(key);
    *out = Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  }
}

}  // namespace config_detail

inline Config parse_config(const nlohmann::json& j) {
  using config_detail::read;
  Config c;
  try {
    if (j.contains("model")) read(j.at("model"), "path", &c.model_path);
    if (j.contains("gains")) {
      const auto& g = j.at("gains");
      read(g, "kappa", &c.kappa);
      read(g, "kd", &c.kd);
      read(g, "alpha", &c.alpha);
      read(g, "alpha_margin", &c.alpha_margin);
      read(g, "k_track", &c.k_track);
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      read(s, "dt_sim", &c.sim.dt_sim);
      read(s, "control_period", &c.sim.control_period);
      read(s, "k_p", &c.sim.k_p);
      read(s, "k_d", &c.sim.k_d);
      read(s, "v_s", &c.sim.v_s);
      read(s, "duration", &c.sim.duration);
      read(s, "fall_fraction", &c.sim.fall_fraction);
      read(s, "mu_world", &c.mu_world);
      std::string fb;
      read(s, "qp_fallback", &fb);
      if (fb == "zero")
        c.sim.fallback = QpFallback::zero_torque;
      else if (fb == "hold" || fb.empty())
        c.sim.fallback = QpFallback::hold_previous;
      else
        throw ConfigError("qp_fallback must be 'hold' or 'zero'");
    }
    if (j.contains("controller")) {
      const auto& ct = j.at("controller");
      read(ct, "w1", &c.ctrl.w1);
      read(ct, "w2", &c.ctrl.w2);
      read(ct, "w_torso", &c.ctrl.w_torso);
      read(ct, "w_momentum", &c.ctrl.w_momentum);
      read(ct, "w_qdd", &c.ctrl.w_qdd);
      read(ct, "mu", &c.ctrl.mu);
      read(ct, "kp_lip", &c.ctrl.kp_lip);
      read(ct, "kd_lip", &c.ctrl.kd_lip);
      read(ct, "swing_kp", &c.ctrl.swing_kp);
      read(ct, "swing_kd", &c.ctrl.swing_kd);
      read(ct, "torso_kp", &c.ctrl.torso_kp);
      read(ct, "torso_kd", &c.ctrl.torso_kd);
      read(ct, "momentum_gamma", &c.ctrl.momentum_gamma);
      std::string conv;
      read(ct, "standard_gain_convention", &conv);
      if (conv == "conventional")
        c.ctrl.convention = StandardGainConvention::conventional;
      else if (conv == "paper" || conv.empty())
        c.ctrl.convention = StandardGainConvention::paper;
      else
        throw ConfigError("standard_gain_convention must be 'paper' or 'conventional'");
    }
    if (j.contains("scenario")) {
      const auto& sc = j.at("scenario");
      read(sc, "name", &c.scenario);
      read(sc, "setpoint", &c.standing_setpoint);
      read(sc, "z0", &c.lip.z0);
      read(sc, "step_duration", &c.lip.step_duration);
      read(sc, "double_support_fraction", &c.lip.ds_fraction);
      read(sc, "walk_steps", &c.walk_steps);
      read(sc, "stride", &c.stride);
      read(sc, "stance_width", &c.stance_width);
      read(sc, "push_frac_lo", &c.push_frac_lo);
      read(sc, "push_frac_hi", &c.push_frac_hi);
      read(sc, "push_t_lo", &c.push_t_lo);
      read(sc, "push_t_hi", &c.push_t_hi);
      read(sc, "push_duration", &c.push_duration);
      read(sc, "standing_push_frac", &c.standing_push_frac);
      read(sc, "brick_count", &c.brick_count);
      read(sc, "brick_half", &c.brick_half);
      read(sc, "corridor_half_width", &c.corridor_half_width);
      read(sc, "model_error_sigma", &c.model_error_sigma);
      read(sc, "model_error_delta", &c.model_error_delta);
      read(sc, "noise_col", &c.noise_col);
      if (sc.contains("heights")) {
        c.heights.clear();
        for (const auto& h : sc.at("heights")) c.heights.push_back(h.get<double>());
      }
    }
    if (j.contains("sampling")) {
      const auto& sa = j.at("sampling");
      read(sa, "count", &c.sample_count);
      read(sa, "seed", &c.sample_seed);
      read(sa, "joint_range", &c.sample_joint_range);
      read(sa, "tilt_range", &c.sample_tilt_range);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return c;
}

inline Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace wbc
