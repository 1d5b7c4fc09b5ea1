/// @file dopri5.hpp
/// @brief Adaptive Dormand-Prince RK(4,5) integrator.
/// @details Explicit 7-stage pair with the FSAL property; the 5th-order
/// solution is propagated and the embedded 4th-order one drives the step
/// size. Error norm: max_i |err_i| / (atol + rtol * max(|y_i|, |ynew_i|)),
/// step accepted when <= 1.

#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace boolflow {

namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
// 5th-order weights (also row 7 of the tableau).
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// 4th-order embedded weights.
inline constexpr double bs1 = 5179.0 / 57600, bs3 = 7571.0 / 16695, bs4 = 393.0 / 640,
                        bs5 = -92097.0 / 339200, bs6 = 187.0 / 2100, bs7 = 1.0 / 40;
}  // namespace dp

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct Dopri5Step {
  std::vector<double> y5;   // propagated 5th-order solution
  std::vector<double> y4;   // embedded 4th-order solution
  std::vector<double> k7;   // f(t + h, y5), reused as next k1
};

/// One step from (t, y) with size h; k1 = f(t, y).
inline Dopri5Step dopri5_step(const OdeRhs& f, double t, std::span<const double> y,
                              std::span<const double> k1, double h) {
  using namespace dp;
  const std::size_t n = y.size();
  std::vector<double> k2(n), k3(n), k4(n), k5(n), k6(n), tmp(n);
  Dopri5Step s{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
  f(t + c2 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
  f(t + c3 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  f(t + c4 * h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  f(t + c5 * h, tmp, k5);
  for (std::size_t i = 0; i < n; ++i)
    tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  f(t + h, tmp, k6);
  for (std::size_t i = 0; i < n; ++i)
    s.y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
  f(t + h, s.y5, s.k7);
  for (std::size_t i = 0; i < n; ++i)
    s.y4[i] = y[i] + h * (bs1 * k1[i] + bs3 * k3[i] + bs4 * k4[i] + bs5 * k5[i] + bs6 * k6[i] +
                          bs7 * s.k7[i]);
  return s;
}

struct OdeOptions {
  double atol = 1e-6;
  double rtol = 1e-3;
  double h_init = 0.0;      // 0: automatic
  double h_max_ratio = 0.1; // h_max = ratio * |t1 - t0|
  long max_steps = 10000000;
};

enum class OdeStatus { Done, StepUnderflow, MaxSteps, Aborted, NonFinite };

struct OdeResult {
  std::vector<double> y;
  double t = 0.0;
  long accepted = 0;
  long rejected = 0;
  OdeStatus status = OdeStatus::Done;
  std::string message;
};

/// Called after every accepted step; returning false stops the integration.
using OdeObserver = std::function<bool(long step, double t, double h, std::span<const double> y)>;

inline OdeResult dopri5(const OdeRhs& f, double t0, double t1, std::vector<double> y0,
                        const OdeOptions& opt = {}, const OdeObserver& observe = {}) {
  const std::size_t n = y0.size();
  OdeResult r;
  r.y = std::move(y0);
  r.t = t0;
  const double span_t = t1 - t0;
  if (span_t <= 0.0) return r;
  const double h_max = opt.h_max_ratio * span_t;
  const double h_min = 1e-14 * std::max(std::abs(t1), span_t);

  std::vector<double> k1(n);
  f(r.t, r.y, k1);

  auto scale = [&](double a, double b) {
    return opt.atol + opt.rtol * std::max(std::abs(a), std::abs(b));
  };

  double h = opt.h_init;
  if (h <= 0.0) {
    // Hairer-Norsett-Wanner starting step.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = scale(r.y[i], r.y[i]);
      d0 = std::max(d0, std::abs(r.y[i]) / sc);
      d1 = std::max(d1, std::abs(k1[i]) / sc);
    }
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, h_max);
    std::vector<double> y1(n), f1(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = r.y[i] + h0 * k1[i];
    f(r.t + h0, y1, f1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      d2 = std::max(d2, std::abs(f1[i] - k1[i]) / scale(r.y[i], r.y[i]));
    d2 /= h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100.0 * h0, h1, h_max});
  }

  bool last_rejected = false;
  while (r.t < t1) {
    if (r.accepted + r.rejected >= opt.max_steps) {
      r.status = OdeStatus::MaxSteps;
      r.message = "step budget exhausted at t = " + std::to_string(r.t);
      return r;
    }
    if (h < h_min) {
      r.status = OdeStatus::StepUnderflow;
      r.message = "step size underflow (h = " + std::to_string(h) + ") at t = " + std::to_string(r.t);
      return r;
    }
    const bool final_step = r.t + h >= t1;
    const double hh = final_step ? t1 - r.t : h;
    auto s = dopri5_step(f, r.t, r.y, k1, hh);

    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      finite = finite && std::isfinite(s.y5[i]);
      err = std::max(err, std::abs(s.y5[i] - s.y4[i]) / scale(r.y[i], s.y5[i]));
    }
    if (!finite || !std::isfinite(err)) {
      // Retry smaller before giving up on non-finite values.
      h = 0.25 * hh;
      ++r.rejected;
      if (h < h_min) {
        r.status = OdeStatus::NonFinite;
        r.message = "non-finite state at t = " + std::to_string(r.t);
        return r;
      }
      last_rejected = true;
      continue;
    }

    double fac = err == 0.0 ? 5.0 : 0.8 * std::pow(err, -0.2);
    if (err <= 1.0) {
      r.t = final_step ? t1 : r.t + hh;
      r.y = std::move(s.y5);
      k1 = std::move(s.k7);
      ++r.accepted;
      if (last_rejected) fac = std::min(fac, 1.0);
      last_rejected = false;
      h = std::min(h_max, hh * std::clamp(fac, 0.2, 5.0));
      if (observe && !observe(r.accepted, r.t, hh, r.y)) {
        r.status = OdeStatus::Aborted;
        return r;
      }
    } else {
      ++r.rejected;
      last_rejected = true;
      h = hh * std::clamp(fac, 0.1, 1.0);
    }
  }
  return r;
}

}  // namespace boolflow
