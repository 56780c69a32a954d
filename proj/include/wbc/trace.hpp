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
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wbc/math.hpp"

namespace wbc {

// Trace event flags (bitmask).
enum TraceEvent : uint32_t {
  kEventPushActive = 1u << 0,
  kEventQpInfeasible = 1u << 1,
  kEventFell = 1u << 2,
  kEventQpMaxIter = 1u << 3,
};

// One control-tick record. Certificate values are evaluated one physics step
// after the tick so the central differences for Hdot/Vdot sit inside a
// constant-torque window.
struct TraceSample {
  double t = 0;
  VecX q;    // base position(3), base quaternion(wxyz), joint angles
  VecX v;
  VecX tau;
  Vec3 u2 = Vec3::Zero(), x2 = Vec3::Zero();
  Vec3 y1 = Vec3::Zero(), y2 = Vec3::Zero(), y3 = Vec3::Zero();
  double V = 0, H = 0, OT = 0, beta_local = 0;
  double passivity_residual = std::numeric_limits<double>::quiet_NaN();
  VecX f_contact;  // 3 per model contact point, zeros when inactive
  int qp_status = 0;
  uint32_t event_flags = 0;

  // In-memory diagnostics consumed by the certificate tests; not CSV columns.
  double hdot_fd = std::numeric_limits<double>::quiet_NaN();
  double vdot_fd = std::numeric_limits<double>::quiet_NaN();
  double hdot_rhs = std::numeric_limits<double>::quiet_NaN();
  double passivity_rhs_value = std::numeric_limits<double>::quiet_NaN();
};

struct TraceMetrics {
  bool success = false;
  double energy = 0.0;    // integral of tau^T tau dt, trapezoid
  double max_e12 = 0.0;   // max ||y1 - y2||
  double max_e13 = 0.0;   // max ||y1 - y3||
  double fail_time = -1.0;
  int qp_failures = 0;
  double duration = 0.0;
};

struct Trace {
  std::vector<std::pair<std::string, std::string>> header;  // ordered key=value
  std::vector<TraceSample> samples;
  TraceMetrics metrics;
  int n_q = 0, n_v = 0, n_tau = 0, n_contacts = 0;

  void set_header(const std::string& key, const std::string& value) {
    for (auto& kv : header)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    header.emplace_back(key, value);
  }
  std::string header_value(const std::string& key) const {
    for (const auto& kv : header)
      if (kv.first == key) return kv.second;
    return {};
  }

  void write_csv(const std::string& path) const;
  static Trace read_csv(const std::string& path);
};

namespace trace_detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9e", x);
  return buf;
}

}  // namespace trace_detail

inline void Trace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace '" + path + "'");
  out << "# wbc-trace v1\n";
  for (const auto& [k, v] : header) out << "# " << k << "=" << v << "\n";
  out << "# success=" << (metrics.success ? 1 : 0)
      << "\n# energy=" << trace_detail::fmt(metrics.energy)
      << "\n# max_e12=" << trace_detail::fmt(metrics.max_e12)
      << "\n# max_e13=" << trace_detail::fmt(metrics.max_e13)
      << "\n# fail_time=" << trace_detail::fmt(metrics.fail_time)
      << "\n# qp_failures=" << metrics.qp_failures << "\n";

  out << "t";
  for (int i = 0; i < n_q; ++i) out << ",q" << i;
  for (int i = 0; i < n_v; ++i) out << ",v" << i;
  for (int i = 0; i < n_tau; ++i) out << ",tau" << i;
  for (const char* base : {"u2", "x2", "y1", "y2", "y3"})
    for (int i = 0; i < 3; ++i) out << "," << base << "_" << i;
  out << ",V,H,OT,beta_local,passivity_residual";
  for (int i = 0; i < 3 * n_contacts; ++i) out << ",f" << i;
  out << ",qp_status,event_flags\n";

  using trace_detail::fmt;
  for (const TraceSample& s : samples) {
    out << fmt(s.t);
    for (int i = 0; i < n_q; ++i) out << "," << fmt(s.q[i]);
    for (int i = 0; i < n_v; ++i) out << "," << fmt(s.v[i]);
    for (int i = 0; i < n_tau; ++i) out << "," << fmt(s.tau[i]);
    for (const Vec3* v3 : {&s.u2, &s.x2, &s.y1, &s.y2, &s.y3})
      for (int i = 0; i < 3; ++i) out << "," << fmt((*v3)[i]);
    out << "," << fmt(s.V) << "," << fmt(s.H) << "," << fmt(s.OT) << ","
        << fmt(s.beta_local) << "," << fmt(s.passivity_residual);
    for (int i = 0; i < 3 * n_contacts; ++i) out << "," << fmt(s.f_contact[i]);
    out << "," << s.qp_status << "," << s.event_flags << "\n";
  }
}

inline Trace Trace::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trace '" + path + "'");
  Trace tr;
  std::string line;
  std::vector<std::string> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(2, eq - 2);
        tr.set_header(key, line.substr(eq + 1));
      }
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    if (cols.empty()) {
      while (std::getline(ss, cell, ',')) cols.push_back(cell);
      for (const std::string& c : cols) {
        if (c.size() > 1 && c[0] == 'q' && std::isdigit(c[1])) ++tr.n_q;
        if (c.size() > 1 && c[0] == 'v' && std::isdigit(c[1])) ++tr.n_v;
        if (c.rfind("tau", 0) == 0) ++tr.n_tau;
        if (c.size() > 1 && c[0] == 'f' && std::isdigit(c[1])) ++tr.n_contacts;
      }
      tr.n_contacts /= 3;
      continue;
    }
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() != cols.size()) throw std::runtime_error("trace row width mismatch");
    TraceSample s;
    int i = 0;
    s.t = vals[i++];
    s.q = VecX(tr.n_q);
    for (int k = 0; k < tr.n_q; ++k) s.q[k] = vals[i++];
    s.v = VecX(tr.n_v);
    for (int k = 0; k < tr.n_v; ++k) s.v[k] = vals[i++];
    s.tau = VecX(tr.n_tau);
    for (int k = 0; k < tr.n_tau; ++k) s.tau[k] = vals[i++];
    for (Vec3* v3 : {&s.u2, &s.x2, &s.y1, &s.y2, &s.y3})
      for (int k = 0; k < 3; ++k) (*v3)[k] = vals[i++];
    s.V = vals[i++];
    s.H = vals[i++];
    s.OT = vals[i++];
    s.beta_local = vals[i++];
    s.passivity_residual = vals[i++];
    s.f_contact = VecX(3 * tr.n_contacts);
    for (int k = 0; k < 3 * tr.n_contacts; ++k) s.f_contact[k] = vals[i++];
    s.qp_status = static_cast<int>(vals[i++]);
    s.event_flags = static_cast<uint32_t>(vals[i++]);
    tr.samples.push_back(std::move(s));
  }
  tr.metrics.success = tr.header_value("success") == "1";
  if (!tr.header_value("energy").empty())
    tr.metrics.energy = std::strtod(tr.header_value("energy").c_str(), nullptr);
  if (!tr.header_value("max_e12").empty())
    tr.metrics.max_e12 = std::strtod(tr.header_value("max_e12").c_str(), nullptr);
  if (!tr.header_value("max_e13").empty())
    tr.metrics.max_e13 = std::strtod(tr.header_value("max_e13").c_str(), nullptr);
  return tr;
}

}  // namespace wbc
