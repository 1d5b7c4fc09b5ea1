/// @file model.hpp
/// @brief Boolean problem and quartic penalty functional.
/// @details A BooleanProblem carries the objective P over {0,1}^n together
/// with Pi(V) = P((1+V)/2) over {-1,1}^n. PenaltyModel adds the penalty
/// parameters and evaluates
///   J(V) = 1/(4 eps) sum (v_i^2 - 1)^2 + c/2 |V|^2 + Pi(V)
/// and its gradient (1/eps)(V.V - 1).V + c V + grad Pi(V).

#pragma once
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "boolflow/polynomial.hpp"

namespace boolflow {

using Vec = std::vector<double>;

class BooleanProblem {
 public:
  /// From an objective over {0,1}^n.
  static BooleanProblem from_binary(SparsePoly p) {
    auto pm1 = compose_affine(p, 0.5, 0.5);
    return BooleanProblem(std::move(p), std::move(pm1));
  }
  /// From an objective already expressed over {-1,1}^n.
  static BooleanProblem from_pm1(SparsePoly pm1) {
    auto p = compose_affine(pm1, 2.0, -1.0);
    return BooleanProblem(std::move(p), std::move(pm1));
  }

  std::uint32_t nvars() const { return d_->pm1.nvars(); }
  std::uint32_t degree() const { return d_->pm1.degree(); }
  const SparsePoly& binary() const { return d_->binary; }
  const SparsePoly& pm1() const { return d_->pm1; }
  const PolyEvaluator& evaluator() const { return d_->eval; }

 private:
  struct Data {
    SparsePoly binary;
    SparsePoly pm1;
    PolyEvaluator eval;
  };
  BooleanProblem(SparsePoly p, SparsePoly pm1)
      : d_(std::make_shared<const Data>(Data{std::move(p), pm1, PolyEvaluator(pm1)})) {
    if (d_->binary.nvars() != d_->pm1.nvars())
      throw DimensionError("binary and sign forms disagree on nvars");
  }
  std::shared_ptr<const Data> d_;
};

inline BooleanProblem to_pm1(const SparsePoly& p) { return BooleanProblem::from_binary(p); }

/// X = (1 + U) / 2 for a sign vector U.
inline std::vector<int> recover_x(std::span<const int> u) {
  std::vector<int> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] != 1 && u[i] != -1)
      throw std::invalid_argument("recover_x: coordinate " + std::to_string(i) +
                                  " is not a sign (+1/-1)");
    x[i] = (1 + u[i]) / 2;
  }
  return x;
}

/// Ball radius used when none is configured: 1.5 sqrt(n).
inline double default_radius(std::uint32_t n) { return 1.5 * std::sqrt(double(n)); }

class PenaltyModel {
 public:
  PenaltyModel(BooleanProblem problem, double epsilon, double c, double r = 0.0)
      : problem_(std::move(problem)), epsilon_(epsilon), c_(c),
        r_(r == 0.0 ? default_radius(problem_.nvars()) : r) {
    if (!(epsilon_ > 0.0)) throw std::invalid_argument("penalty model: epsilon must be > 0");
    if (!(c_ >= 0.0)) throw std::invalid_argument("penalty model: c must be >= 0");
    if (!(r_ > std::sqrt(double(problem_.nvars()))))
      throw std::invalid_argument("penalty model: r must exceed sqrt(n)");
  }

  const BooleanProblem& problem() const { return problem_; }
  std::uint32_t nvars() const { return problem_.nvars(); }
  double epsilon() const { return epsilon_; }
  double c() const { return c_; }
  double r() const { return r_; }

  PenaltyModel with_epsilon(double eps) const { return PenaltyModel(problem_, eps, c_, r_); }
  PenaltyModel with_c(double c) const { return PenaltyModel(problem_, epsilon_, c, r_); }

 private:
  BooleanProblem problem_;
  double epsilon_;
  double c_;
  double r_;
};

inline double penalty_value(const PenaltyModel& m, std::span<const double> v) {
  const double pi = m.problem().evaluator().value(v);
  double quartic = 0.0, sq = 0.0;
  for (double x : v) {
    const double s = x * x - 1.0;
    quartic += s * s;
    sq += x * x;
  }
  return quartic / (4.0 * m.epsilon()) + 0.5 * m.c() * sq + pi;
}

inline void penalty_gradient(const PenaltyModel& m, std::span<const double> v, std::span<double> g) {
  m.problem().evaluator().gradient(v, g);
  const double inv_eps = 1.0 / m.epsilon();
  for (std::size_t i = 0; i < v.size(); ++i)
    g[i] += inv_eps * (v[i] * v[i] - 1.0) * v[i] + m.c() * v[i];
}

inline Vec penalty_gradient(const PenaltyModel& m, std::span<const double> v) {
  Vec g(v.size());
  penalty_gradient(m, v, g);
  return g;
}

/// Infinity norm of the penalty gradient; zero exactly at stationary points.
inline double residual_norm(const PenaltyModel& m, std::span<const double> v) {
  double r = 0.0;
  for (double x : penalty_gradient(m, v)) r = std::max(r, std::abs(x));
  return r;
}

/// Lower bound for c making c/2 |V|^2 + Pi(V) convex on the ball of radius r,
/// via the infinity-norm bound of the Hessian. Advisory only.
inline double suggest_c(const BooleanProblem& p, double r) {
  if (!(r > std::sqrt(double(p.nvars()))))
    throw std::invalid_argument("suggest_c: r must exceed sqrt(n)");
  return hessian_infnorm_bound(p.pm1(), r);
}

}  // namespace boolflow
