/// @file scalar_solvers.hpp
/// @brief Root-finding kernels for the implicit steps.
/// @details solve_cubic handles a3 x^3 + a1 x = rhs with a3 > 0, a1 >= 0: the
/// left side is strictly increasing so the root is unique, and a safeguarded
/// Newton iteration inside a sign bracket always converges. solve_coupled is
/// a damped Newton method with exact dense Jacobian for small nonlinear
/// systems F(V) = 0.

#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boolflow {

class UniquenessViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MonotoneCubic {
  double a3 = 1.0;
  double a1 = 0.0;
  double rhs = 0.0;

  double residual(double x) const { return (a3 * x * x + a1) * x - rhs; }
};

/// Symmetric interval [-b, b] guaranteed to contain the root.
inline double cubic_bracket(const MonotoneCubic& c) {
  const double ar = std::abs(c.rhs);
  return std::max(ar / std::max(c.a1, c.a3), std::cbrt(ar / c.a3)) + 1.0;
}

/// Unique real root of a3 x^3 + a1 x = rhs, to |residual| <= 1e-12 max(1,|rhs|).
/// `condition` names the step-size condition that guarantees a1 >= 0; it is
/// quoted in the error raised when a1 < 0.
inline double solve_cubic(const MonotoneCubic& c, double init,
                          const std::string& condition = "a1 >= 0") {
  if (!(c.a3 > 0.0)) throw std::invalid_argument("solve_cubic: cubic coefficient must be > 0");
  if (c.a1 < 0.0) {
    throw UniquenessViolation("uniqueness condition violated (" + condition +
                              "): linear coefficient " + std::to_string(c.a1) + " < 0");
  }
  if (!std::isfinite(c.rhs) || !std::isfinite(c.a1) || !std::isfinite(c.a3))
    throw std::invalid_argument("solve_cubic: non-finite coefficient");

  const double tol = 1e-12 * std::max(1.0, std::abs(c.rhs));
  const double b = cubic_bracket(c);
  double lo = -b, hi = b;
  double x = std::isfinite(init) ? std::clamp(init, lo, hi) : 0.0;

  for (int it = 0; it < 400; ++it) {
    const double f = c.residual(x);
    if (std::abs(f) <= tol) return x;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double df = 3.0 * c.a3 * x * x + c.a1;
    double next = df > 0.0 ? x - f / df : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  // Bracket collapsed to adjacent doubles; pick the better endpoint.
  double best = x;
  for (double cand : {lo, hi})
    if (std::abs(c.residual(cand)) < std::abs(c.residual(best))) best = cand;
  return best;
}

struct NewtonConfig {
  double tol_residual = 1e-10;
  int max_iters = 50;
  int max_halvings = 30;
};

/// Best iterate of a failed Newton solve.
class NewtonFailure : public std::runtime_error {
 public:
  NewtonFailure(const std::string& what, std::vector<double> best, double residual)
      : std::runtime_error(what), best_(std::move(best)), residual_(residual) {}
  const std::vector<double>& best_iterate() const { return best_; }
  double residual() const { return residual_; }

 private:
  std::vector<double> best_;
  double residual_;
};

struct NewtonResult {
  std::vector<double> x;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> history;  // residual inf-norm per iterate, starting with init
};

/// F(x) into out.
using ResidualFn = std::function<void(std::span<const double>, std::span<double>)>;
/// Row-major dense Jacobian into out.
using JacobianFn = std::function<void(std::span<const double>, std::span<double>)>;

inline NewtonResult solve_coupled(const ResidualFn& F, const JacobianFn& J,
                                  std::span<const double> init, const NewtonConfig& cfg = {}) {
  if (!(cfg.tol_residual > 0.0) || cfg.max_iters < 1)
    throw std::invalid_argument("solve_coupled: invalid Newton configuration");
  const auto n = static_cast<Eigen::Index>(init.size());
  using VecX = Eigen::VectorXd;
  using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  VecX x = Eigen::Map<const VecX>(init.data(), n);
  VecX fx(n), trial(n), ftrial(n);
  MatX jac(n, n);
  auto eval_f = [&](const VecX& at, VecX& out) {
    F(std::span<const double>(at.data(), at.size()), std::span<double>(out.data(), out.size()));
  };
  auto inf_norm = [](const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };

  NewtonResult res;
  eval_f(x, fx);
  double rnorm = inf_norm(fx);
  res.history.push_back(rnorm);
  for (int it = 0; it < cfg.max_iters && !(rnorm <= cfg.tol_residual); ++it) {
    J(std::span<const double>(x.data(), x.size()), std::span<double>(jac.data(), jac.size()));
    Eigen::FullPivLU<MatX> lu(jac);
    VecX dir;
    if (lu.isInvertible()) {
      dir = -lu.solve(fx);
    } else {
      dir = -(jac.transpose() * fx);  // steepest descent on |F|^2 / 2
    }
    const double merit = fx.squaredNorm();
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, step *= 0.5) {
      trial = x + step * dir;
      eval_f(trial, ftrial);
      if (ftrial.allFinite() && ftrial.squaredNorm() < merit) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    x = trial;
    fx = ftrial;
    rnorm = inf_norm(fx);
    res.history.push_back(rnorm);
    res.iterations = it + 1;
  }
  if (!(rnorm <= cfg.tol_residual)) {
    throw NewtonFailure("half-step did not converge: residual " + std::to_string(rnorm) +
                            " after " + std::to_string(res.iterations) + " iterations",
                        std::vector<double>(x.data(), x.data() + n), rnorm);
  }
  res.x.assign(x.data(), x.data() + n);
  res.residual = rnorm;
  return res;
}

}  // namespace boolflow
