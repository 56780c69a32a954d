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

// Test-only reference QP solver: primal-dual interior point with full dense
// Newton systems. Deliberately a different algorithm family from the
// production active-set solver so the two act as independent oracles of each
// other. Only used on feasible problems.

#pragma once

#include <Eigen/Dense>

#include "wbc/qp.hpp"

namespace wbc::oracle {

struct IpmResult {
  bool converged = false;
  VecX z;
  double objective = 0.0;
};

inline IpmResult solve_qp_interior_point(const QpProblem& p, int max_iter = 120) {
  const int n = p.n();
  const int me = static_cast<int>(p.A.rows());
  const int mi = static_cast<int>(p.G.rows());

  VecX z = VecX::Zero(n);
  VecX lam = VecX::Zero(me);
  VecX mu = VecX::Ones(mi);
  VecX s = VecX::Ones(mi);

  const int dim = n + me + 2 * mi;
  for (int iter = 0; iter < max_iter; ++iter) {
    VecX r_dual = p.Q * z + p.c;
    if (me) r_dual += p.A.transpose() * lam;
    if (mi) r_dual += p.G.transpose() * mu;
    VecX r_eq = me ? VecX(p.A * z - p.b) : VecX();
    VecX r_in = mi ? VecX(p.G * z + s - p.h) : VecX();

    const double nu = mi ? s.dot(mu) / mi : 0.0;
    double res = r_dual.cwiseAbs().maxCoeff();
    if (me) res = std::max(res, r_eq.cwiseAbs().maxCoeff());
    if (mi) res = std::max(res, r_in.cwiseAbs().maxCoeff());
    if (res < 1e-11 && nu < 1e-12) {
      IpmResult out;
      out.converged = true;
      out.z = z;
      out.objective = 0.5 * z.dot(p.Q * z) + p.c.dot(z);
      return out;
    }

    const double sigma = 0.1;
    MatX kkt = MatX::Zero(dim, dim);
    VecX rhs = VecX::Zero(dim);
    kkt.topLeftCorner(n, n) = p.Q;
    if (me) {
      kkt.block(0, n, n, me) = p.A.transpose();
      kkt.block(n, 0, me, n) = p.A;
    }
    if (mi) {
      kkt.block(0, n + me, n, mi) = p.G.transpose();
      kkt.block(n + me, 0, mi, n) = p.G;
      kkt.block(n + me, n + me + mi, mi, mi) = MatX::Identity(mi, mi);
      kkt.block(n + me + mi, n + me, mi, mi) = MatX(s.asDiagonal());
      kkt.block(n + me + mi, n + me + mi, mi, mi) = MatX(mu.asDiagonal());
    }
    rhs.head(n) = -r_dual;
    if (me) rhs.segment(n, me) = -r_eq;
    if (mi) {
      rhs.segment(n + me, mi) = -r_in;
      rhs.segment(n + me + mi, mi) =
          -(s.array() * mu.array() - sigma * nu).matrix();
    }
    VecX d = kkt.fullPivLu().solve(rhs);
    const VecX dz = d.head(n);
    const VecX dlam = me ? VecX(d.segment(n, me)) : VecX();
    const VecX dmu = mi ? VecX(d.segment(n + me, mi)) : VecX();
    const VecX ds = mi ? VecX(d.tail(mi)) : VecX();

    double alpha = 1.0;
    for (int i = 0; i < mi; ++i) {
      if (dmu[i] < 0) alpha = std::min(alpha, -0.995 * mu[i] / dmu[i]);
      if (ds[i] < 0) alpha = std::min(alpha, -0.995 * s[i] / ds[i]);
    }
    z += alpha * dz;
    if (me) lam += alpha * dlam;
    if (mi) {
      mu += alpha * dmu;
      s += alpha * ds;
    }
  }
  IpmResult out;
  out.z = z;
  out.objective = 0.5 * z.dot(p.Q * z) + p.c.dot(z);
  return out;
}

// Random feasible QP with a mix of active and inactive inequalities.
inline QpProblem random_qp(Rng& rng, int n_max = 60) {
  const int n = 2 + int(rng.uniform(0, n_max - 1));
  const int me = int(rng.uniform(0, n / 4 + 1));
  const int mi = int(rng.uniform(0, 2 * n));
  QpProblem p;
  MatX b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.uniform(-1, 1);
  p.Q = b.transpose() * b + rng.uniform(0.1, 1.0) * MatX::Identity(n, n);
  p.c = VecX::Zero(n);
  for (int i = 0; i < n; ++i) p.c[i] = rng.uniform(-2, 2);
  VecX z_feas(n);
  for (int i = 0; i < n; ++i) z_feas[i] = rng.uniform(-1, 1);
  p.A = MatX(me, n);
  for (int i = 0; i < me; ++i)
    for (int j = 0; j < n; ++j) p.A(i, j) = rng.uniform(-1, 1);
  p.b = p.A * z_feas;
  p.G = MatX(mi, n);
  p.h = VecX(mi);
  for (int i = 0; i < mi; ++i) {
    for (int j = 0; j < n; ++j) p.G(i, j) = rng.uniform(-1, 1);
    const double slack = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.05, 1.0);
    p.h[i] = p.G.row(i).dot(z_feas) + slack;
  }
  return p;
}

}  // namespace wbc::oracle
