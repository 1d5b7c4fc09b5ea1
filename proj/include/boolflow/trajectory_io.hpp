/// @file trajectory_io.hpp
/// @brief Trajectory export: CSV `k,t,tau,residual,u_0,...,u_{n-1}` and JSON.

#pragma once
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>

#include "boolflow/integrators.hpp"

namespace boolflow {

/// Shortest text that reads back to the same double ("nan"/"inf" spelled out).
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string trajectory_csv(const Trajectory& tr) {
  if (tr.points.empty()) return "k,t,tau,residual\n";
  const auto n = tr.points.front().u.size();
  std::string out = "k,t,tau,residual";
  for (std::size_t i = 0; i < n; ++i) out += ",u_" + std::to_string(i);
  out += '\n';
  for (const auto& p : tr.points) {
    out += std::to_string(p.k);
    out += ',' + format_double(p.t);
    out += ',' + format_double(p.tau);
    out += ',' + format_double(p.residual);
    for (double x : p.u) out += ',' + format_double(x);
    out += '\n';
  }
  return out;
}

inline nlohmann::json trajectory_json(const Trajectory& tr) {
  auto pts = nlohmann::json::array();
  for (const auto& p : tr.points) {
    nlohmann::json j{{"k", p.k}, {"t", p.t}, {"tau", p.tau}, {"residual", p.residual}, {"u", p.u}};
    if (!p.v.empty()) j["v"] = p.v;
    pts.push_back(std::move(j));
  }
  return nlohmann::json{{"points", std::move(pts)}};
}

}  // namespace boolflow
