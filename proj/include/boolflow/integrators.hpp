/// @file integrators.hpp
/// @brief Time-stepping schemes that drive the penalty flow to a steady state.
/// @details
///  - Houbolt: semi-implicit second-order scheme for the heavy-ball system
///      m U'' + gamma U' + grad J(U) = 0,
///    with the penalty cubic treated implicitly and grad Pi extrapolated at
///    2U^k - U^(k-1). Each step is n independent monotone cubics.
///  - Lie (Marchuk-Yanenko): splitting of the gradient flow U' = -grad J(U)
///    into an implicit grad Pi half-step (a small nonlinear system solved by
///    Newton) and an implicit penalty step (n independent cubics).
///  - RK45: adaptive Dormand-Prince on the first-order form of the heavy-ball
///    system over [0, t_final].
/// Houbolt and Lie stop once |U^(k+1) - U^k|_inf <= tol_step max(1, |U^k|_inf)
/// holds on `stall_steps` consecutive steps.

#pragma once
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "boolflow/dopri5.hpp"
#include "boolflow/model.hpp"
#include "boolflow/oracle_metrics.hpp"
#include "boolflow/parallel.hpp"
#include "boolflow/rng.hpp"
#include "boolflow/scalar_solvers.hpp"

namespace boolflow {

enum class Scheme { Houbolt, Lie, Rk45 };
enum class Status { Converged, MaxIters, Diverged, StepConditionViolated };
enum class TauMode { Fixed, Variable };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Houbolt: return "houbolt";
    case Scheme::Lie: return "lie";
    case Scheme::Rk45: return "rk45";
  }
  return "?";
}

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIters: return "max_iters";
    case Status::Diverged: return "diverged";
    case Status::StepConditionViolated: return "step_condition_violated";
  }
  return "?";
}

inline const char* to_string(TauMode t) { return t == TauMode::Fixed ? "fixed" : "variable"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "houbolt") return Scheme::Houbolt;
  if (s == "lie") return Scheme::Lie;
  if (s == "rk45") return Scheme::Rk45;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected houbolt|lie|rk45)");
}

inline TauMode parse_tau_mode(const std::string& s) {
  if (s == "fixed") return TauMode::Fixed;
  if (s == "variable") return TauMode::Variable;
  throw std::invalid_argument("unknown tau mode '" + s + "' (expected fixed|variable)");
}

struct SchemeParams {
  double m = 1.0;
  double gamma = 50.0;
  /// Initial step. Unset: sqrt(2 m eps) for Houbolt, min(eps/(1 - eps c), 0.1)
  /// for Lie. A set value is checked against the scheme's step condition.
  std::optional<double> tau0;
  TauMode tau_mode = TauMode::Fixed;
  double theta = 0.8;
  /// Step floor of the variable schedule. Unset: tau0 / 100.
  std::optional<double> tau_star;
  double t_final = 1.0;
  double tol_step = 1e-6;
  int stall_steps = 3;
  long max_iters = 100000;
  /// Unset: 10 r.
  std::optional<double> diverge_radius;
  double rk_atol = 1e-6;
  double rk_rtol = 1e-3;
  bool retain_trajectory = false;
  NewtonConfig newton;

  void validate() const {
    if (!(m > 0.0)) throw std::invalid_argument("scheme params: m must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("scheme params: gamma must be > 0");
    if (tau0 && !(*tau0 > 0.0)) throw std::invalid_argument("scheme params: tau0 must be > 0");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("scheme params: theta must lie in (0,1)");
    if (tau_star && !(*tau_star > 0.0)) throw std::invalid_argument("scheme params: tau_star must be > 0");
    if (tau0 && tau_star && *tau_star > *tau0)
      throw std::invalid_argument("scheme params: tau_star must not exceed tau0");
    if (!(t_final > 0.0)) throw std::invalid_argument("scheme params: t_final must be > 0");
    if (!(tol_step > 0.0)) throw std::invalid_argument("scheme params: tol_step must be > 0");
    if (stall_steps < 1 || max_iters < 1) throw std::invalid_argument("scheme params: bad iteration limits");
    if (diverge_radius && !(*diverge_radius > 0.0))
      throw std::invalid_argument("scheme params: diverge_radius must be > 0");
  }
};

struct TrajectoryPoint {
  long k = 0;
  double t = 0.0;
  double tau = 0.0;
  double residual = 0.0;
  Vec u;
  Vec v;  // velocity; empty for Lie
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
};

struct SolveReport {
  Scheme scheme = Scheme::Houbolt;
  Status status = Status::Converged;
  Vec u_final;
  SignVec rounded;
  double delta = 0.0;
  double objective = 0.0;        // Pi(rounded)
  double pi_at_solution = 0.0;   // Pi(U_eps)
  double penalty_value = 0.0;    // J(U_eps)
  double residual = 0.0;         // |grad J(U_eps)|_inf
  long iterations = 0;           // Houbolt/Lie steps, RK accepted steps
  long rejected_steps = 0;       // RK only
  double tau0 = 0.0;
  bool tau_clamped = false;      // Lie: eps c >= 1 forced tau0 = 0.1
  double wall_seconds = 0.0;
  std::string message;
  Trajectory trajectory;
};

namespace detail {

inline double inf_norm(std::span<const double> v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double diverge_radius(const SchemeParams& p, const PenaltyModel& m) {
  return p.diverge_radius.value_or(10.0 * m.r());
}

/// Fills the metric fields of a report from its final state.
inline void finish_report(SolveReport& rep, const PenaltyModel& model) {
  if (!all_finite(rep.u_final)) {
    rep.rounded.clear();
    rep.delta = rep.objective = rep.pi_at_solution = rep.penalty_value = rep.residual =
        std::numeric_limits<double>::quiet_NaN();
    return;
  }
  rep.rounded = round_to_signs(rep.u_final);
  rep.delta = delta(rep.u_final);
  const auto& ev = model.problem().evaluator();
  rep.objective = ev.value(to_real(rep.rounded));
  rep.pi_at_solution = ev.value(rep.u_final);
  rep.penalty_value = penalty_value(model, rep.u_final);
  rep.residual = residual_norm(model, rep.u_final);
}

class StepMonitor {
 public:
  StepMonitor(const SchemeParams& p, double radius) : p_(p), radius_(radius) {}

  /// Returns the terminal status after accepting `next`, if any.
  std::optional<Status> observe(std::span<const double> prev, std::span<const double> next) {
    if (!all_finite(next) || inf_norm(next) > radius_) return Status::Diverged;
    double step = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) step = std::max(step, std::abs(next[i] - prev[i]));
    if (step <= p_.tol_step * std::max(1.0, inf_norm(prev))) {
      if (++small_ >= p_.stall_steps) return Status::Converged;
    } else {
      small_ = 0;
    }
    return std::nullopt;
  }

 private:
  const SchemeParams& p_;
  double radius_;
  int small_ = 0;
};

inline void record(SolveReport& rep, const SchemeParams& p, const PenaltyModel& model, long k,
                   double t, double tau, std::span<const double> u, std::span<const double> v = {}) {
  if (!p.retain_trajectory) return;
  TrajectoryPoint pt;
  pt.k = k;
  pt.t = t;
  pt.tau = tau;
  pt.u.assign(u.begin(), u.end());
  pt.v.assign(v.begin(), v.end());
  pt.residual = all_finite(u) ? residual_norm(model, u) : std::numeric_limits<double>::quiet_NaN();
  rep.trajectory.points.push_back(std::move(pt));
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// Default Houbolt step sqrt(2 m eps): the largest step for which the
/// per-coordinate cubics are guaranteed monotone.
inline double houbolt_default_tau(double m, double eps) { return std::sqrt(2.0 * m * eps); }

/// Linear coefficient of the Houbolt cubic, 2m/tau^2 + 3 gamma/(2 tau) - 1/eps.
inline double houbolt_linear_coef(double m, double gamma, double tau, double eps) {
  return (2.0 * m / (tau * tau) - 1.0 / eps) + 1.5 * gamma / tau;
}

/// Starting value U^1 = U0 + tau (1 - tau gamma / 2m) V0 - tau^2/(2m) grad J(U0).
inline Vec houbolt_first_step(const PenaltyModel& model, const SchemeParams& p, double tau,
                              std::span<const double> u0, std::span<const double> v0) {
  const auto g = penalty_gradient(model, u0);
  const double a = tau * (1.0 - tau * p.gamma / (2.0 * p.m));
  const double b = tau * tau / (2.0 * p.m);
  Vec u1(u0.size());
  for (std::size_t i = 0; i < u0.size(); ++i) u1[i] = u0[i] + a * v0[i] - b * g[i];
  return u1;
}

/// One Houbolt step: U^(k+1) from U^k, U^(k-1), U^(k-2).
inline Vec houbolt_step(const PenaltyModel& model, const SchemeParams& p, double tau,
                        std::span<const double> uk, std::span<const double> ukm1,
                        std::span<const double> ukm2) {
  const auto n = uk.size();
  const double eps = model.epsilon(), c = model.c();
  const double a1 = houbolt_linear_coef(p.m, p.gamma, tau, eps);
  const double mt = p.m / (tau * tau), gt = p.gamma / (2.0 * tau);
  Vec w(n), g(n), next(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 2.0 * uk[i] - ukm1[i];
  model.problem().evaluator().gradient(w, g);
  for (std::size_t i = 0; i < n; ++i) {
    const double rhs = mt * (5.0 * uk[i] - 4.0 * ukm1[i] + ukm2[i]) +
                       gt * (4.0 * uk[i] - ukm1[i]) - c * (2.0 * uk[i] - ukm1[i]) - g[i];
    next[i] = solve_cubic({1.0 / eps, a1, rhs}, w[i],
                          "Houbolt: 2m/tau^2 + 3 gamma/(2 tau) >= 1/eps");
  }
  return next;
}

inline SolveReport houbolt_solve(const PenaltyModel& model, const SchemeParams& p,
                                 std::span<const double> u0, std::span<const double> v0) {
  p.validate();
  const auto n = model.nvars();
  if (u0.size() != n || v0.size() != n) throw DimensionError("houbolt_solve: bad initial state size");
  const auto start = detail::Clock::now();
  SolveReport rep;
  rep.scheme = Scheme::Houbolt;
  const double eps = model.epsilon();
  const double tau = p.tau0.value_or(houbolt_default_tau(p.m, eps));
  rep.tau0 = tau;
  rep.u_final.assign(u0.begin(), u0.end());

  if (houbolt_linear_coef(p.m, p.gamma, tau, eps) < 0.0) {
    rep.status = Status::StepConditionViolated;
    rep.message = "tau = " + std::to_string(tau) + " violates 2m/tau^2 + 3 gamma/(2 tau) >= 1/eps";
    detail::finish_report(rep, model);
    rep.wall_seconds = detail::seconds_since(start);
    return rep;
  }

  detail::StepMonitor monitor(p, detail::diverge_radius(p, model));
  Vec cur(u0.begin(), u0.end());
  detail::record(rep, p, model, 0, 0.0, tau, cur, v0);

  Vec next = houbolt_first_step(model, p, tau, u0, v0);
  Vec prev2(n);  // U^(-1) = U^1 - 2 tau V0
  for (std::size_t i = 0; i < n; ++i) prev2[i] = next[i] - 2.0 * tau * v0[i];
  Vec prev = cur;
  long k = 1;
  auto status = monitor.observe(cur, next);
  cur = next;
  detail::record(rep, p, model, k, k * tau, tau, cur);

  while (!status && k < p.max_iters) {
    try {
      next = houbolt_step(model, p, tau, cur, prev, prev2);
    } catch (const std::exception& e) {
      throw std::runtime_error("houbolt iteration " + std::to_string(k + 1) + ": " + e.what());
    }
    ++k;
    status = monitor.observe(cur, next);
    prev2 = std::move(prev);
    prev = std::move(cur);
    cur = std::move(next);
    next.assign(n, 0.0);
    detail::record(rep, p, model, k, k * tau, tau, cur);
  }
  rep.status = status.value_or(Status::MaxIters);
  rep.iterations = k;
  rep.u_final = cur;
  detail::finish_report(rep, model);
  rep.wall_seconds = detail::seconds_since(start);
  return rep;
}

struct LieStepSize {
  double tau0 = 0.0;
  bool clamped = false;
};

/// tau0 = min(eps / (1 - eps c), 0.1); when eps c >= 1 the fraction is
/// undefined and tau0 = 0.1 with `clamped` set.
inline LieStepSize lie_default_tau(double eps, double c) {
  if (eps * c >= 1.0) return {0.1, true};
  return {std::min(eps / (1.0 - eps * c), 0.1), false};
}

/// c + 1/tau >= 1/eps, up to rounding in the default step itself.
inline bool lie_step_condition(double tau, double eps, double c) {
  return c + 1.0 / tau >= (1.0 / eps) * (1.0 - 1e-12);
}

/// Implicit grad Pi half-step: solves V + tau grad Pi(V) = U^k by Newton.
inline NewtonResult lie_half_step(const PenaltyModel& model, double tau, std::span<const double> uk,
                                  const NewtonConfig& cfg = {}) {
  const auto n = uk.size();
  const auto& ev = model.problem().evaluator();
  Vec base(uk.begin(), uk.end());
  auto F = [&, n](std::span<const double> v, std::span<double> out) {
    ev.gradient(v, out);
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i] + tau * out[i] - base[i];
  };
  auto J = [&, n](std::span<const double> v, std::span<double> out) {
    ev.hessian(v, out);
    for (std::size_t i = 0; i < n * n; ++i) out[i] *= tau;
    for (std::size_t i = 0; i < n; ++i) out[i * n + i] += 1.0;
  };
  return solve_coupled(F, J, uk, cfg);
}

/// Implicit penalty step: (tau/eps) x^3 + (1 + c tau - tau/eps) x = u_half.
inline Vec lie_penalty_step(const PenaltyModel& model, double tau, std::span<const double> half) {
  const double eps = model.epsilon(), c = model.c();
  double a1 = 1.0 + c * tau - tau / eps;
  if (a1 < 0.0 && a1 > -1e-12 * (1.0 + tau / eps)) a1 = 0.0;
  Vec out(half.size());
  for (std::size_t i = 0; i < half.size(); ++i)
    out[i] = solve_cubic({tau / eps, a1, half[i]}, half[i], "Lie: c + 1/tau >= 1/eps");
  return out;
}

inline SolveReport lie_solve(const PenaltyModel& model, const SchemeParams& p,
                             std::span<const double> u0) {
  p.validate();
  const auto n = model.nvars();
  if (u0.size() != n) throw DimensionError("lie_solve: bad initial state size");
  const auto start = detail::Clock::now();
  SolveReport rep;
  rep.scheme = Scheme::Lie;
  const double eps = model.epsilon(), c = model.c();
  double tau = 0.0;
  if (p.tau0) {
    tau = *p.tau0;
  } else {
    const auto d = lie_default_tau(eps, c);
    tau = d.tau0;
    rep.tau_clamped = d.clamped;
  }
  rep.tau0 = tau;
  const double tau_star = p.tau_star.value_or(tau / 100.0);
  rep.u_final.assign(u0.begin(), u0.end());
  if (!lie_step_condition(tau, eps, c)) {
    rep.status = Status::StepConditionViolated;
    rep.message = "tau = " + std::to_string(tau) + " violates c + 1/tau >= 1/eps";
    detail::finish_report(rep, model);
    rep.wall_seconds = detail::seconds_since(start);
    return rep;
  }
  if (rep.tau_clamped) rep.message = "eps*c >= 1: tau0 clamped to 0.1";

  detail::StepMonitor monitor(p, detail::diverge_radius(p, model));
  Vec cur(u0.begin(), u0.end());
  detail::record(rep, p, model, 0, 0.0, tau, cur);
  std::optional<Status> status;
  long k = 0;
  double t = 0.0;
  while (!status && k < p.max_iters) {
    Vec next;
    try {
      const auto half = lie_half_step(model, tau, cur, p.newton);
      next = lie_penalty_step(model, tau, half.x);
    } catch (const std::exception& e) {
      throw std::runtime_error("lie iteration " + std::to_string(k + 1) + ": " + e.what());
    }
    ++k;
    t += tau;
    status = monitor.observe(cur, next);
    cur = std::move(next);
    detail::record(rep, p, model, k, t, tau, cur);
    if (p.tau_mode == TauMode::Variable && tau >= tau_star) tau *= p.theta;
  }
  rep.status = status.value_or(Status::MaxIters);
  rep.iterations = k;
  rep.u_final = cur;
  detail::finish_report(rep, model);
  rep.wall_seconds = detail::seconds_since(start);
  return rep;
}

/// Right-hand side of the first-order heavy-ball system in y = (U, V):
/// U' = V, V' = -(gamma V + grad J(U)) / m.
inline void heavy_ball_rhs(const PenaltyModel& model, const SchemeParams& p,
                           std::span<const double> y, std::span<double> dydt) {
  const std::size_t n = y.size() / 2;
  auto u = y.subspan(0, n);
  auto v = y.subspan(n, n);
  auto du = dydt.subspan(0, n);
  auto dv = dydt.subspan(n, n);
  penalty_gradient(model, u, dv);
  for (std::size_t i = 0; i < n; ++i) {
    du[i] = v[i];
    dv[i] = -(p.gamma * v[i] + dv[i]) / p.m;
  }
}

inline SolveReport rk45_solve(const PenaltyModel& model, const SchemeParams& p,
                              std::span<const double> u0, std::span<const double> v0) {
  p.validate();
  const auto n = model.nvars();
  if (u0.size() != n || v0.size() != n) throw DimensionError("rk45_solve: bad initial state size");
  const auto start = detail::Clock::now();
  SolveReport rep;
  rep.scheme = Scheme::Rk45;
  Vec y(2 * n);
  std::copy(u0.begin(), u0.end(), y.begin());
  std::copy(v0.begin(), v0.end(), y.begin() + n);
  detail::record(rep, p, model, 0, 0.0, 0.0, u0, v0);

  const double radius = detail::diverge_radius(p, model);
  bool blew_up = false;
  OdeOptions opt;
  opt.atol = p.rk_atol;
  opt.rtol = p.rk_rtol;
  opt.max_steps = p.max_iters;
  auto f = [&](double, std::span<const double> yy, std::span<double> d) {
    heavy_ball_rhs(model, p, yy, d);
  };
  auto obs = [&](long k, double t, double h, std::span<const double> yy) {
    auto u = yy.subspan(0, n);
    detail::record(rep, p, model, k, t, h, u, yy.subspan(n, n));
    if (!detail::all_finite(yy) || detail::inf_norm(u) > radius) {
      blew_up = true;
      return false;
    }
    return true;
  };
  auto res = dopri5(f, 0.0, p.t_final, std::move(y), opt, obs);
  rep.iterations = res.accepted;
  rep.rejected_steps = res.rejected;
  rep.u_final.assign(res.y.begin(), res.y.begin() + n);
  switch (res.status) {
    case OdeStatus::Done: rep.status = Status::Converged; break;
    case OdeStatus::MaxSteps: rep.status = Status::MaxIters; break;
    case OdeStatus::Aborted:
    case OdeStatus::StepUnderflow:
    case OdeStatus::NonFinite: rep.status = Status::Diverged; break;
  }
  if (blew_up) rep.message = "state left the divergence radius or became non-finite";
  if (!res.message.empty()) rep.message = res.message;
  detail::finish_report(rep, model);
  rep.wall_seconds = detail::seconds_since(start);
  return rep;
}

/// Dispatches to the scheme; Lie ignores v0.
inline SolveReport solve(Scheme s, const PenaltyModel& model, const SchemeParams& p,
                         std::span<const double> u0, std::span<const double> v0) {
  switch (s) {
    case Scheme::Houbolt: return houbolt_solve(model, p, u0, v0);
    case Scheme::Lie: return lie_solve(model, p, u0);
    case Scheme::Rk45: return rk45_solve(model, p, u0, v0);
  }
  throw std::invalid_argument("unknown scheme");
}

/// Initial point of multistart run `index`: uniform in [-1, 1]^n.
inline Vec random_start(std::uint32_t n, std::uint64_t seed, std::uint64_t index) {
  Rng rng(derive_seed(seed, {0x7374617274ULL, index}));
  Vec u(n);
  for (auto& x : u) x = rng.uniform(-1.0, 1.0);
  return u;
}

class AllStartsDiverged : public std::runtime_error {
 public:
  explicit AllStartsDiverged(std::vector<SolveReport> reports)
      : std::runtime_error("all " + std::to_string(reports.size()) + " starts diverged"),
        reports_(std::move(reports)) {}
  const std::vector<SolveReport>& reports() const { return reports_; }

 private:
  std::vector<SolveReport> reports_;
};

/// Index of the report with the smallest finite J among runs that neither
/// diverged nor failed their step condition; ties go to the lowest index.
inline std::optional<std::size_t> select_best(std::span<const SolveReport> reports) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (r.status == Status::Diverged || r.status == Status::StepConditionViolated) continue;
    if (!std::isfinite(r.penalty_value)) continue;
    if (!best || r.penalty_value < reports[*best].penalty_value) best = i;
  }
  return best;
}

struct MultistartResult {
  std::size_t best_index = 0;
  std::vector<SolveReport> reports;
  double wall_seconds = 0.0;  // whole multistart, all starts
  const SolveReport& best() const { return reports.at(best_index); }
};

inline MultistartResult multistart(Scheme s, const PenaltyModel& model, const SchemeParams& p,
                                   std::size_t n_starts, std::uint64_t seed,
                                   std::size_t workers = 1) {
  if (n_starts < 1) throw std::invalid_argument("multistart: n_starts must be >= 1");
  const auto start = detail::Clock::now();
  const auto n = model.nvars();
  std::vector<SolveReport> reports(n_starts);
  const Vec zero(n, 0.0);
  parallel_for(n_starts, workers, [&](std::size_t i) {
    const auto u0 = random_start(n, seed, i);
    reports[i] = solve(s, model, p, u0, zero);
  });
  const auto best = select_best(reports);
  if (!best) throw AllStartsDiverged(std::move(reports));
  MultistartResult out{*best, std::move(reports), detail::seconds_since(start)};
  return out;
}

}  // namespace boolflow
