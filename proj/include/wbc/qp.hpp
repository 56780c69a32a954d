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

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wbc/math.hpp"

namespace wbc {

// Named segment of the decision vector (u2, tau, tau0, qdd, f, ...).
struct QpBlock {
  std::string name;
  int size = 0;
};

// Standard-form convex QP:  min 1/2 z^T Q z + c^T z
//                           s.t. A z = b,  G z <= h.
struct QpProblem {
  MatX Q;
  VecX c;
  MatX A;
  VecX b;
  MatX G;
  VecX h;
  std::vector<QpBlock> layout;

  int n() const { return static_cast<int>(Q.rows()); }

  int block_offset(const std::string& name) const {
    int off = 0;
    for (const QpBlock& blk : layout) {
      if (blk.name == name) return off;
      off += blk.size;
    }
    throw std::invalid_argument("unknown QP block '" + name + "'");
  }
  int block_size(const std::string& name) const {
    for (const QpBlock& blk : layout)
      if (blk.name == name) return blk.size;
    throw std::invalid_argument("unknown QP block '" + name + "'");
  }
  VecX block_of(const VecX& z, const std::string& name) const {
    return z.segment(block_offset(name), block_size(name));
  }
};

enum class QpStatus { optimal, infeasible, max_iter };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    default: return "max_iter";
  }
}

struct QpSolution {
  QpStatus status = QpStatus::max_iter;
  VecX z;
  VecX eq_duals;    // lambda, stationarity Qz + c + A^T lambda + G^T mu = 0
  VecX ineq_duals;  // mu >= 0
  double kkt_stationarity = std::numeric_limits<double>::infinity();
  double kkt_feasibility = std::numeric_limits<double>::infinity();
  double kkt_complementarity = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Dual active-set solver (Goldfarb-Idnani scheme). Starts from the
// unconstrained minimizer, loads equalities once, then adds violated
// inequalities with dual-feasible partial steps. Terminates in finitely many
// steps and reports exact KKT residuals; fully deterministic (ties broken by
// lowest row index).
// ---------------------------------------------------------------------------
namespace qp_detail {

struct WorkingSet {
  // Rows of active constraints, their type and duals.
  std::vector<VecX> rows;
  std::vector<double> rhs;
  std::vector<bool> is_eq;
  std::vector<int> source;  // row index in A (eq) or G (ineq)
  VecX duals;               // same length as rows

  MatX y;  // Q^{-1} C^T, n x m
  MatX s;  // C Q^{-1} C^T, m x m
  Eigen::LDLT<MatX> s_fact;
  bool fact_dirty = true;

  int size() const { return static_cast<int>(rows.size()); }

  void append(const Eigen::LLT<MatX>& qf, const VecX& row, double r, bool eq, int src,
              double dual) {
    const int m = size();
    rows.push_back(row);
    rhs.push_back(r);
    is_eq.push_back(eq);
    source.push_back(src);
    VecX d(m + 1);
    d.head(m) = duals;
    d[m] = dual;
    duals = d;
    const VecX qn = qf.solve(row);
    MatX ny(row.size(), m + 1);
    if (m > 0) ny.leftCols(m) = y;
    ny.col(m) = qn;
    MatX ns(m + 1, m + 1);
    if (m > 0) {
      ns.topLeftCorner(m, m) = s;
      for (int i = 0; i < m; ++i) ns(i, m) = ns(m, i) = rows[i].dot(qn);
    }
    ns(m, m) = row.dot(qn);
    y = std::move(ny);
    s = std::move(ns);
    fact_dirty = true;
  }

  void remove(int k) {
    const int m = size();
    rows.erase(rows.begin() + k);
    rhs.erase(rhs.begin() + k);
    is_eq.erase(is_eq.begin() + k);
    source.erase(source.begin() + k);
    VecX d(m - 1);
    MatX ny(y.rows(), m - 1);
    MatX ns(m - 1, m - 1);
    int ci = 0;
    for (int i = 0; i < m; ++i) {
      if (i == k) continue;
      d[ci] = duals[i];
      ny.col(ci) = y.col(i);
      int cj = 0;
      for (int j = 0; j < m; ++j) {
        if (j == k) continue;
        ns(ci, cj) = s(i, j);
        ++cj;
      }
      ++ci;
    }
    duals = std::move(d);
    y = std::move(ny);
    s = std::move(ns);
    fact_dirty = true;
  }

  void refactor() {
    if (fact_dirty && size() > 0) s_fact.compute(s);
    fact_dirty = false;
  }
};

}  // namespace qp_detail

inline QpSolution solve_qp(const QpProblem& p, double tolerance = 1e-10,
                           int max_iter = 500) {
  const int n = p.n();
  const int me = static_cast<int>(p.A.rows());
  const int mi = static_cast<int>(p.G.rows());
  QpSolution sol;
  sol.eq_duals = VecX::Zero(me);
  sol.ineq_duals = VecX::Zero(mi);

  // Factor Q for the active-set phase, bumping the diagonal as far as needed
  // for a PD factorization. PSD-singular costs are legal: the bump only
  // steers the active-set identification, and the final polish step solves
  // against the original Q.
  Eigen::LLT<MatX> qf;
  const double scale = 1.0 + p.Q.diagonal().cwiseAbs().maxCoeff();
  double bump = 0.0;
  {
    MatX q = p.Q;
    const double floor = q.diagonal().minCoeff();
    if (floor < 1e-9 * scale) {
      bump = 1e-9 * scale;
      q += bump * MatX::Identity(n, n);
    }
    for (int attempt = 0;; ++attempt) {
      qf.compute(q);
      if (qf.info() == Eigen::Success) break;
      if (attempt >= 6) throw std::invalid_argument("solve_qp: cost matrix is not PSD");
      bump = bump == 0.0 ? 1e-9 * scale : bump * 100.0;
      q = p.Q + bump * MatX::Identity(n, n);
    }
  }

  VecX z = qf.solve(-p.c);
  qp_detail::WorkingSet w;
  const double curv_tol = 1e-11 * scale;

  auto step_quantities = [&](const VecX& row, VecX* dz, VecX* r) {
    const VecX qn = qf.solve(row);
    if (w.size() == 0) {
      *r = VecX();
      *dz = qn;
      return;
    }
    w.refactor();
    VecX cqn(w.size());
    for (int i = 0; i < w.size(); ++i) cqn[i] = w.rows[i].dot(qn);
    *r = w.s_fact.solve(cqn);
    *dz = qn - w.y * (*r);
  };

  // Load the equalities (kept for the whole solve, duals unrestricted).
  for (int i = 0; i < me; ++i) {
    const VecX row = p.A.row(i).transpose();
    const double viol = row.dot(z) - p.b[i];
    VecX dz, r;
    step_quantities(row, &dz, &r);
    const double denom = row.dot(dz);
    if (denom <= curv_tol) {
      // Linearly dependent on the working set: consistent -> redundant row,
      // inconsistent -> no feasible point.
      if (std::abs(viol) > tolerance * (1.0 + std::abs(p.b[i]))) {
        sol.status = QpStatus::infeasible;
        return sol;
      }
      continue;
    }
    const double t = viol / denom;
    z -= t * dz;
    if (w.size() > 0) w.duals -= t * r;
    w.append(qf, row, p.b[i], true, i, t);
  }

  // Dual active-set iterations over the inequalities.
  int iter = 0;
  while (true) {
    if (++iter > max_iter) {
      sol.status = QpStatus::max_iter;
      sol.iterations = iter;
      return sol;
    }
    int worst = -1;
    double worst_viol = tolerance;
    for (int i = 0; i < mi; ++i) {
      bool active = false;
      for (int k = 0; k < w.size(); ++k)
        if (!w.is_eq[k] && w.source[k] == i) active = true;
      if (active) continue;
      const double v = p.G.row(i).dot(z) - p.h[i];
      if (v > worst_viol + 1e-300 && v > worst_viol) {
        worst_viol = v;
        worst = i;
      }
    }
    if (worst < 0) break;  // all inequalities satisfied

    const VecX row = p.G.row(worst).transpose();
    double u_new = 0.0;
    while (true) {
      VecX dz, r;
      step_quantities(row, &dz, &r);
      const double denom = row.dot(dz);
      const double viol = row.dot(z) - p.h[worst];
      double t2 = denom > curv_tol ? viol / denom : std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      int blocker = -1;
      for (int k = 0; k < w.size(); ++k) {
        if (w.is_eq[k] || r.size() == 0) continue;
        if (r[k] > 1e-13) {
          const double cand = w.duals[k] / r[k];
          if (cand < t1 - 1e-15) {
            t1 = cand;
            blocker = k;
          }
        }
      }
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        sol.status = QpStatus::infeasible;
        sol.iterations = iter;
        return sol;
      }
      z -= t * dz;
      if (w.size() > 0 && r.size() > 0) w.duals -= t * r;
      u_new += t;
      if (t2 <= t1) {
        w.append(qf, row, p.h[worst], false, worst, u_new);
        break;
      }
      w.remove(blocker);
    }
  }

  sol.status = QpStatus::optimal;
  sol.iterations = iter;
  sol.z = z;
  for (int k = 0; k < w.size(); ++k) {
    if (w.is_eq[k])
      sol.eq_duals[w.source[k]] = w.duals[k];
    else
      sol.ineq_duals[w.source[k]] = w.duals[k];
  }

  auto fill_residuals = [&](QpSolution* out) {
    VecX stat = p.Q * out->z + p.c;
    if (me > 0) stat += p.A.transpose() * out->eq_duals;
    if (mi > 0) stat += p.G.transpose() * out->ineq_duals;
    out->kkt_stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
    double feas = 0.0;
    if (me > 0) feas = (p.A * out->z - p.b).cwiseAbs().maxCoeff();
    double comp = 0.0;
    if (mi > 0) {
      const VecX gap = p.G * out->z - p.h;
      feas = std::max(feas, gap.maxCoeff());
      comp = (out->ineq_duals.array() * gap.array()).abs().maxCoeff();
    }
    out->kkt_feasibility = std::max(0.0, feas);
    out->kkt_complementarity = comp;
    out->objective = 0.5 * out->z.dot(p.Q * out->z) + p.c.dot(out->z);
  };
  fill_residuals(&sol);

  // Polish: re-solve the equality-constrained problem on the identified
  // active set against the original (possibly PSD-singular) Q via a min-norm
  // KKT solve. Removes the bump's bias; rejected if it does not verify.
  {
    std::vector<int> act;
    for (int k = 0; k < w.size(); ++k)
      if (!w.is_eq[k]) act.push_back(w.source[k]);
    const int ma = me + static_cast<int>(act.size());
    MatX kkt = MatX::Zero(n + ma, n + ma);
    VecX rhs(n + ma);
    kkt.topLeftCorner(n, n) = p.Q;
    rhs.head(n) = -p.c;
    if (me > 0) {
      kkt.block(n, 0, me, n) = p.A;
      kkt.block(0, n, n, me) = p.A.transpose();
      rhs.segment(n, me) = p.b;
    }
    for (size_t k = 0; k < act.size(); ++k) {
      kkt.row(n + me + k).head(n) = p.G.row(act[k]);
      kkt.col(n + me + k).head(n) = p.G.row(act[k]).transpose();
      rhs[n + me + k] = p.h[act[k]];
    }
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(kkt);
    const VecX sol_kkt = cod.solve(rhs);
    QpSolution polished = sol;
    polished.z = sol_kkt.head(n);
    polished.eq_duals = me > 0 ? VecX(sol_kkt.segment(n, me)) : VecX::Zero(0);
    polished.ineq_duals = VecX::Zero(mi);
    bool dual_ok = true;
    for (size_t k = 0; k < act.size(); ++k) {
      const double mu = sol_kkt[n + me + k];
      polished.ineq_duals[act[k]] = mu;
      if (mu < -1e-9 * scale) dual_ok = false;
    }
    if (dual_ok) {
      fill_residuals(&polished);
      const double old_worst =
          std::max({sol.kkt_stationarity, sol.kkt_feasibility, sol.kkt_complementarity});
      const double new_worst = std::max(
          {polished.kkt_stationarity, polished.kkt_feasibility, polished.kkt_complementarity});
      if (new_worst <= std::max(old_worst, tolerance)) sol = polished;
    }
  }
  return sol;
}

}  // namespace wbc
