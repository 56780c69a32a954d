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

#include <string>
#include <vector>

#include "wbc/dynamics.hpp"
#include "wbc/model.hpp"
#include "wbc/planner.hpp"

namespace wbc {

// Gains of the energy-shaping interface
//   u1 = tau_g - 2 kappa J^T (y1 - y2) - K_D (qd - J^T u2).
// alpha and beta are fixed per scenario by validate_gains over a sampled
// workspace; both are recorded in trace headers.
struct InterfaceGains {
  double kappa = 5000.0;  // N/m
  MatX K_D;               // (n+6) x (n+6), symmetric positive definite
  double alpha = 1e-3;    // s/kg
  double beta = 0.0;      // min eigenvalue of P(q) over the sampled workspace

  static InterfaceGains isotropic(int n_vel, double kappa, double kd) {
    InterfaceGains g;
    g.kappa = kappa;
    g.K_D = kd * MatX::Identity(n_vel, n_vel);
    return g;
  }
};

// One certificate evaluation along a trace.
struct CertificateSample {
  double V = 0.0;   // storage value, J
  double H = 0.0;   // closed-loop Hamiltonian, J
  double OT = 0.0;  // "other terms" of the Vdot bound
  Vec3 z1 = Vec3::Zero();
  Vec3 z2 = Vec3::Zero();
  double beta_local = 0.0;  // min eigenvalue of P(q)
};

// u1 = tau_g - 2 kappa J^T (y1 - y2) - K_D (qd - J^T u2). No inverse of J
// appears anywhere in this module, so every expression stays evaluable at
// singular (straight-leg) configurations.
inline VecX interface_u1(const DynamicsTerms& t, const GeneralizedState& s,
                         const ComState& com, const Vec3& u2, const InterfaceGains& g) {
  const Vec3 e = t.com_position - com.x2;
  return t.gravity_torques - 2.0 * g.kappa * t.com_jacobian.transpose() * e -
         g.K_D * (s.velocity - t.com_jacobian.transpose() * u2);
}

// P(q) = [ M/(2 kappa)      alpha/2 J^T Lambda ]
//        [ alpha/2 Lambda J        I           ]
inline MatX storage_quadratic_form(const DynamicsTerms& t, const InterfaceGains& g) {
  const int n = static_cast<int>(t.mass_matrix.rows());
  MatX p(n + 3, n + 3);
  p.topLeftCorner(n, n) = t.mass_matrix / (2.0 * g.kappa);
  p.topRightCorner(n, 3) = 0.5 * g.alpha * t.com_jacobian.transpose() * t.task_inertia;
  p.bottomLeftCorner(3, n) = p.topRightCorner(n, 3).transpose();
  p.bottomRightCorner(3, 3) = Mat3::Identity();
  return p;
}

inline CertificateSample storage_V(const DynamicsTerms& t, const GeneralizedState& s,
                                   const ComState& com, const InterfaceGains& g) {
  CertificateSample out;
  const int n = static_cast<int>(t.mass_matrix.rows());
  const MatX p = storage_quadratic_form(t, g);
  VecX zeta(n + 3);
  zeta.head(n) = s.velocity;
  zeta.tail<3>() = t.com_position - com.x2;
  out.V = zeta.dot(p * zeta);
  Eigen::SelfAdjointEigenSolver<MatX> es(p, Eigen::EigenvaluesOnly);
  out.beta_local = es.eigenvalues().minCoeff();
  out.H = 0.5 * s.velocity.dot(t.mass_matrix * s.velocity) +
          g.kappa * (t.com_position - com.x2).squaredNorm();
  return out;
}

inline double hamiltonian_H(const DynamicsTerms& t, const GeneralizedState& s,
                            const ComState& com, const InterfaceGains& g) {
  return 0.5 * s.velocity.dot(t.mass_matrix * s.velocity) +
         g.kappa * (t.com_position - com.x2).squaredNorm();
}

// z1, z2 and OT from the storage-decay analysis:
//   OT = z1^T (y1 - y2) + z2^T u2 + qd^T tau_ext / kappa.
inline CertificateSample other_terms(const DynamicsTerms& t, const GeneralizedState& s,
                                     const ComState& com, const Vec3& u2,
                                     const VecX& tau_ext, const InterfaceGains& g) {
  CertificateSample out = storage_V(t, s, com, g);
  const MatX& j = t.com_jacobian;
  const Mat3& lam = t.task_inertia;
  const VecX& qd = s.velocity;
  const Vec3 e = t.com_position - com.x2;
  const Vec3 jdqd = t.com_jacobian_dot_v;  // Jdot qd, consistent with dynamics

  const VecX kd_term = g.K_D * (j.transpose() * u2 - qd);
  const VecX ext_term = tau_ext - t.velocity_bias;  // tau_ext - C qd
  out.z1 = -2.0 * u2 + g.alpha * lam * jdqd +
           g.alpha * lam * (j * t.mass_ldlt.solve(kd_term)) +
           g.alpha * lam * (j * t.mass_ldlt.solve(ext_term)) +
           2.0 * g.alpha * g.alpha * g.kappa * lam * (j * qd);
  out.z2 = (1.0 / g.kappa) * (j * (g.K_D * qd)) - g.alpha * lam * (j * qd);
  out.OT = out.z1.dot(e) + out.z2.dot(u2) + qd.dot(tau_ext) / g.kappa;
  return out;
}

// Right side of the Hdot identity under the interface:
//   Hdot = [J K_D qd]^T u2 + qd^T tau_ext - 2 kappa (y1-y2)^T u2 - qd^T K_D qd.
inline double hdot_identity_rhs(const DynamicsTerms& t, const GeneralizedState& s,
                                const ComState& com, const Vec3& u2, const VecX& tau_ext,
                                const InterfaceGains& g) {
  const VecX kdqd = g.K_D * s.velocity;
  const Vec3 e = t.com_position - com.x2;
  return (t.com_jacobian * kdqd).dot(u2) + s.velocity.dot(tau_ext) -
         2.0 * g.kappa * e.dot(u2) - s.velocity.dot(kdqd);
}

// Right side of the passivity inequality as stated (note the sign of the
// 2 kappa term differs from the Hdot identity; both are evaluated verbatim
// and reported side by side).
inline double passivity_rhs(const DynamicsTerms& t, const GeneralizedState& s,
                            const ComState& com, const Vec3& u2, const VecX& tau_ext,
                            const InterfaceGains& g) {
  const Vec3 e = t.com_position - com.x2;
  return (2.0 * g.kappa * e + t.com_jacobian * (g.K_D * s.velocity)).dot(u2) +
         s.velocity.dot(tau_ext);
}

inline double passivity_residual(double rhs, double hdot_fd) { return rhs - hdot_fd; }

// ---------------------------------------------------------------------------
// Gain validation over a sampled workspace: alpha < 1/sqrt(kappa m / 2) and
// K_D / kappa - alpha J^T Lambda J - alpha M >= 0 at every sample; beta is the
// smallest eigenvalue of P(q) over the samples.
// ---------------------------------------------------------------------------
struct GainReport {
  bool valid = false;
  double alpha_bound = 0.0;  // 1/sqrt(kappa m / 2)
  double beta = 0.0;
  double min_margin = 0.0;  // worst eigenvalue of the damping condition
  int violating_state = -1;
  std::string reason;
};

inline GainReport validate_gains(const RobotModel& m,
                                 const std::vector<GeneralizedState>& states,
                                 const InterfaceGains& g) {
  GainReport rep;
  rep.alpha_bound = 1.0 / std::sqrt(g.kappa * m.total_mass / 2.0);
  if (states.empty()) throw std::invalid_argument("validate_gains: no sample states");
  if (g.kappa <= 0.0) {
    rep.reason = "kappa must be positive";
    return rep;
  }
  if ((g.K_D - g.K_D.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    rep.reason = "K_D not symmetric";
    return rep;
  }
  {
    Eigen::SelfAdjointEigenSolver<MatX> es(g.K_D, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      rep.reason = "K_D not positive definite";
      return rep;
    }
  }
  if (g.alpha <= 0.0 || g.alpha >= rep.alpha_bound) {
    rep.reason = "alpha bound";
    return rep;
  }

  rep.beta = std::numeric_limits<double>::infinity();
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < states.size(); ++i) {
    const DynamicsTerms t = compute_terms(m, states[i]);
    const MatX damping = g.K_D / g.kappa -
                         g.alpha * t.com_jacobian.transpose() * t.task_inertia *
                             t.com_jacobian -
                         g.alpha * t.mass_matrix;
    Eigen::SelfAdjointEigenSolver<MatX> es(damping, Eigen::EigenvaluesOnly);
    const double margin = es.eigenvalues().minCoeff();
    if (margin < rep.min_margin) rep.min_margin = margin;
    if (margin < 0.0 && rep.violating_state < 0) {
      rep.violating_state = static_cast<int>(i);
      rep.reason = "damping condition violated";
    }
    Eigen::SelfAdjointEigenSolver<MatX> ep(storage_quadratic_form(t, g),
                                           Eigen::EigenvaluesOnly);
    rep.beta = std::min(rep.beta, ep.eigenvalues().minCoeff());
  }
  rep.valid = rep.violating_state < 0 && rep.beta > 0.0;
  if (rep.valid) rep.reason = "ok";
  return rep;
}

// Largest alpha meeting both Theorem conditions over the samples, backed off
// by the given margin (default 10%).
inline double select_alpha(const RobotModel& m, const std::vector<GeneralizedState>& states,
                           double kappa, const MatX& k_d, double margin = 0.1) {
  double bound = 1.0 / std::sqrt(kappa * m.total_mass / 2.0);
  for (const GeneralizedState& s : states) {
    const DynamicsTerms t = compute_terms(m, s);
    const MatX lhs = k_d / kappa;
    const MatX rhs = t.com_jacobian.transpose() * t.task_inertia * t.com_jacobian +
                     t.mass_matrix;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(lhs, rhs, Eigen::EigenvaluesOnly);
    bound = std::min(bound, es.eigenvalues().minCoeff());
  }
  return (1.0 - margin) * bound;
}

// Empirical precision estimate: eps = sqrt(max(0, sup OT) / (2 alpha kappa beta)).
inline double epsilon_estimate(const std::vector<double>& ot_samples,
                               const InterfaceGains& g, double beta) {
  if (ot_samples.empty()) throw std::invalid_argument("epsilon_estimate: empty traces");
  if (beta <= 0.0) throw std::invalid_argument("epsilon_estimate: beta must be positive");
  double sup = 0.0;
  for (double v : ot_samples) sup = std::max(sup, v);
  return std::sqrt(sup / (2.0 * g.alpha * g.kappa * beta));
}

}  // namespace wbc
