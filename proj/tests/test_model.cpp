#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <limits>
#include <random>

#include "boolflow/model.hpp"
#include "boolflow/oracle_metrics.hpp"
#include "boolflow/scalar_solvers.hpp"
#include "support.hpp"

using namespace boolflow;
using testsupport::Vec;

namespace {

BooleanProblem seeded_problem(std::uint32_t n, std::uint32_t d, std::uint64_t seed) {
  return BooleanProblem::from_pm1(testsupport::seeded(n, d, seed));
}

// Penalty value summed in the opposite order from the library.
double reference_penalty(const PenaltyModel& m, const Vec& v) {
  double quartic = 0.0, sq = 0.0;
  for (std::size_t i = v.size(); i-- > 0;) {
    quartic += (v[i] * v[i] - 1.0) * (v[i] * v[i] - 1.0);
    sq += v[i] * v[i];
  }
  return testsupport::reference_eval(m.problem().pm1(), v) + m.c() * sq / 2.0 +
         quartic / (4.0 * m.epsilon());
}

}  // namespace

TEST(ToPm1, SingleVariable) {
  const auto p = to_pm1(SparsePoly::variable(1, 0));
  EXPECT_EQ(p.pm1(), SparsePoly(1, {Monomial{{}, 0.5}, Monomial{{{0, 1}}, 0.5}}));
}

TEST(ToPm1, Product) {
  const auto p = to_pm1(SparsePoly(2, {Monomial{{{0, 1}, {1, 1}}, 1.0}}));
  EXPECT_DOUBLE_EQ(eval(p.pm1(), Vec{1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(eval(p.pm1(), Vec{-1, -1}), 0.0);
}

TEST(ToPm1, CubeMinimaCoincide) {
  for (std::uint64_t s = 0; s < 12; ++s) {
    const auto n = std::uint32_t(2 + s % 9);
    const auto binary = testsupport::seeded(n, 4, 300 + s);
    const auto prob = to_pm1(binary);
    double min_bin = std::numeric_limits<double>::infinity();
    double min_pm1 = std::numeric_limits<double>::infinity();
    for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
      Vec y(n), v(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        y[i] = double((idx >> i) & 1u);
        v[i] = 2.0 * y[i] - 1.0;
      }
      min_bin = std::min(min_bin, testsupport::reference_eval(binary, y));
      min_pm1 = std::min(min_pm1, testsupport::reference_eval(prob.pm1(), v));
    }
    EXPECT_NEAR(min_bin, min_pm1, 1e-9 * std::max(1.0, std::abs(min_bin)));
  }
}

TEST(RecoverX, Examples) {
  EXPECT_EQ(recover_x(std::vector<int>{1, -1}), (std::vector<int>{1, 0}));
  EXPECT_EQ(recover_x(std::vector<int>{-1, -1, -1}), (std::vector<int>{0, 0, 0}));
  EXPECT_THROW(recover_x(std::vector<int>{1, 0}), std::invalid_argument);
}

TEST(RecoverX, EvaluationCrossCheck) {
  const auto binary = testsupport::seeded(7, 5, 8);
  const auto prob = to_pm1(binary);
  std::mt19937_64 g(8);
  for (int k = 0; k < 50; ++k) {
    std::vector<int> u(7);
    for (auto& x : u) x = (g() & 1u) ? 1 : -1;
    const auto x = recover_x(u);
    const double lhs = testsupport::reference_eval(binary, Vec(x.begin(), x.end()));
    const double rhs = testsupport::reference_eval(prob.pm1(), Vec(u.begin(), u.end()));
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(PenaltyModel, RejectsInvalidParameters) {
  const auto p = seeded_problem(4, 3, 1);
  EXPECT_THROW(PenaltyModel(p, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(PenaltyModel(p, 1e-4, -1.0), std::invalid_argument);
  EXPECT_THROW(PenaltyModel(p, 1e-4, 1.0, 2.0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(PenaltyModel(p, 1e-4, 1.0).r(), 3.0);
}

TEST(PenaltyValue, SignVectorsCarryNoPenalty) {
  const PenaltyModel m(seeded_problem(5, 4, 2), 1e-4, 100.0);
  std::mt19937_64 g(2);
  for (int k = 0; k < 20; ++k) {
    Vec v(5);
    for (auto& x : v) x = (g() & 1u) ? 1.0 : -1.0;
    EXPECT_NEAR(penalty_value(m, v), 100.0 * 5 / 2 + eval(m.problem().pm1(), v), 1e-9);
  }
}

TEST(PenaltyValue, Origin) {
  const PenaltyModel m(seeded_problem(5, 4, 3), 1e-4, 100.0);
  const Vec z(5, 0.0);
  EXPECT_NEAR(penalty_value(m, z), 5 / (4 * 1e-4) + eval(m.problem().pm1(), z), 1e-9);
}

TEST(PenaltyValue, MatchesReferenceAndFloor) {
  std::mt19937_64 g(4);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PenaltyModel m(seeded_problem(std::uint32_t(1 + s % 8), std::uint32_t(1 + s % 6), s), 1e-3, 10.0);
    const auto v = testsupport::uniform_box(g, m.nvars(), -1.5, 1.5);
    const double ref = reference_penalty(m, v);
    const double val = penalty_value(m, v);
    EXPECT_NEAR(val, ref, 1e-10 * std::max(1.0, std::abs(ref)));
    double sq = 0.0;
    for (double x : v) sq += x * x;
    EXPECT_GT(val, m.c() * sq / 2 + eval(m.problem().pm1(), v));
  }
}

TEST(PenaltyGradient, MatchesCentralDifferences) {
  std::mt19937_64 g(5);
  for (int k = 0; k < 100; ++k) {
    const auto n = std::uint32_t(1 + k % 8), d = std::uint32_t(1 + (k / 8) % 6);
    const PenaltyModel m(seeded_problem(n, d, 7000 + k), 1e-2, 10.0);
    const auto v = testsupport::uniform_box(g, n, -1.2, 1.2);
    const auto an = penalty_gradient(m, v);
    const auto fd = testsupport::central_difference([&](const Vec& x) { return reference_penalty(m, x); }, v, 1e-6);
    EXPECT_LE(testsupport::max_abs_diff(an, fd) / std::max(1.0, testsupport::max_abs(an)), 1e-6) << "pair " << k;
  }
}

TEST(Equilibrium, SignVectorsAreStrictMinimaWithoutObjective) {
  for (std::uint32_t n = 1; n <= 8; ++n) {
    const PenaltyModel m(BooleanProblem::from_pm1(SparsePoly::zero(n)), 1e-4, 0.0);
    for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
      const auto v = to_real(cube_point(idx, n));
      EXPECT_EQ(residual_norm(m, v), 0.0);
      // Second difference along each axis approximates the diagonal Hessian 2/eps.
      for (std::uint32_t i = 0; i < n; ++i) {
        Vec p = v, q = v;
        p[i] += 1e-4;
        q[i] -= 1e-4;
        const double h = (penalty_value(m, p) - 2 * penalty_value(m, v) + penalty_value(m, q)) / 1e-8;
        EXPECT_NEAR(h, 2.0 / 1e-4, 1e-2 * 2.0 / 1e-4);
      }
    }
  }
}

TEST(ResidualNorm, ZeroAtOriginWithoutObjective) {
  const PenaltyModel m(BooleanProblem::from_pm1(SparsePoly::zero(3)), 1e-4, 5.0);
  EXPECT_EQ(residual_norm(m, Vec(3, 0.0)), 0.0);
}

TEST(SuggestC, Examples) {
  EXPECT_DOUBLE_EQ(suggest_c(BooleanProblem::from_pm1(SparsePoly(2, {Monomial{{{0, 1}, {1, 1}}, 1.0}})), 2.0), 1.0);
  EXPECT_DOUBLE_EQ(suggest_c(BooleanProblem::from_pm1(SparsePoly::variable(3, 1, 4.0)), 2.0), 0.0);
  EXPECT_THROW(suggest_c(BooleanProblem::from_pm1(SparsePoly::zero(4)), 2.0), std::invalid_argument);
}

TEST(SuggestC, DominatesSampledSpectralRadius) {
  std::mt19937_64 g(6);
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto n = std::uint32_t(3 + s);
    const auto prob = seeded_problem(n, 4, 40 + s);
    const double r = default_radius(n);
    const double c = suggest_c(prob, r);
    Vec h(n * n);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      prob.evaluator().hessian(testsupport::uniform_ball(g, n, r, k % 2 == 0), h);
      const Eigen::Map<const Eigen::MatrixXd> H(h.data(), n, n);
      worst = std::max(worst, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly)
                                  .eigenvalues().cwiseAbs().maxCoeff());
    }
    EXPECT_GE(c, worst);
  }
}

TEST(SolveCubic, Examples) {
  EXPECT_NEAR(solve_cubic({1, 1, 2}, 0), 1.0, 1e-12);
  EXPECT_NEAR(solve_cubic({1, 5, 0}, 3.0), 0.0, 1e-12);
  EXPECT_EQ(solve_cubic({1, 5, 0}, 0.0), 0.0);
  EXPECT_NEAR(solve_cubic({2, 3, -5}, 0), -1.0, 1e-12);
}

TEST(SolveCubic, RejectsNegativeLinearCoefficient) {
  try {
    solve_cubic({1, -1e-3, 1}, 0, "scheme condition X");
    FAIL();
  } catch (const UniquenessViolation& e) {
    EXPECT_NE(std::string(e.what()).find("uniqueness condition violated"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("scheme condition X"), std::string::npos);
  }
  EXPECT_THROW(solve_cubic({0, 1, 1}, 0), std::invalid_argument);
}

TEST(SolveCubic, ResidualAndBracketOnRandomCubics) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int k = 0; k < 100000; ++k) {
    MonotoneCubic c;
    c.a3 = 1e6 * (1.0 - u01(g));  // (0, 1e6]
    c.a1 = k % 10 == 0 ? 0.0 : 1e6 * u01(g);
    c.rhs = 2e6 * u01(g) - 1e6;
    const double init = 4.0 * u01(g) - 2.0;
    const double x = solve_cubic(c, init);
    ASSERT_LE(std::abs(c.residual(x)), 1e-12 * std::max(1.0, std::abs(c.rhs))) << k;
    const double b = std::max(std::abs(c.rhs) / std::max(c.a1, c.a3), std::cbrt(std::abs(c.rhs) / c.a3)) + 1.0;
    ASSERT_LE(std::abs(x), b);
  }
}

TEST(SolveCoupled, IdentityWhenObjectiveVanishes) {
  const Vec base{0.3, -0.7, 1.1};
  auto F = [&](std::span<const double> v, std::span<double> out) {
    for (int i = 0; i < 3; ++i) out[i] = v[i] - base[i];
  };
  auto J = [](std::span<const double>, std::span<double> out) {
    for (int i = 0; i < 9; ++i) out[i] = i % 4 == 0 ? 1.0 : 0.0;
  };
  const auto r = solve_coupled(F, J, Vec{0, 0, 0});
  EXPECT_EQ(r.x, base);
  EXPECT_EQ(r.iterations, 1);
}

TEST(SolveCoupled, LinearObjective) {
  const Vec base{0.3, -0.7}, a{2.0, -5.0};
  const double tau = 0.01;
  auto F = [&](std::span<const double> v, std::span<double> out) {
    for (int i = 0; i < 2; ++i) out[i] = v[i] + tau * a[i] - base[i];
  };
  auto J = [](std::span<const double>, std::span<double> out) { out[0] = out[3] = 1.0, out[1] = out[2] = 0.0; };
  const auto r = solve_coupled(F, J, base);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(r.x[i], base[i] - tau * a[i], 1e-15);
}

TEST(SolveCoupled, MatchesFixedPointOnQuadratic) {
  const auto prob = seeded_problem(5, 2, 12);
  const PenaltyModel m(prob, 1e-4, 0.0);
  const double tau = 1e-4;
  const Vec uk{0.4, -0.2, 0.9, -1.0, 0.1};
  const auto& ev = prob.evaluator();
  auto F = [&](std::span<const double> v, std::span<double> out) {
    ev.gradient(v, out);
    for (int i = 0; i < 5; ++i) out[i] = v[i] + tau * out[i] - uk[i];
  };
  auto J = [&](std::span<const double> v, std::span<double> out) {
    ev.hessian(v, out);
    for (int i = 0; i < 25; ++i) out[i] = tau * out[i] + (i % 6 == 0 ? 1.0 : 0.0);
  };
  const auto newton = solve_coupled(F, J, uk);
  Vec v = uk, g(5);
  for (int it = 0; it < 1000; ++it) {
    ev.gradient(v, g);
    Vec next(5);
    for (int i = 0; i < 5; ++i) next[i] = uk[i] - tau * g[i];
    const double step = testsupport::max_abs_diff(next, v);
    v = next;
    if (step < 1e-12) break;
  }
  EXPECT_LE(testsupport::max_abs_diff(newton.x, v), 1e-10);
}

TEST(SolveCoupled, QuadraticTail) {
  const auto prob = seeded_problem(4, 4, 13);
  const double tau = 0.05;
  const Vec uk{0.9, -0.8, 0.7, -1.0};
  const auto& ev = prob.evaluator();
  auto F = [&](std::span<const double> v, std::span<double> out) {
    ev.gradient(v, out);
    for (int i = 0; i < 4; ++i) out[i] = v[i] + tau * out[i] - uk[i];
  };
  auto J = [&](std::span<const double> v, std::span<double> out) {
    ev.hessian(v, out);
    for (int i = 0; i < 16; ++i) out[i] = tau * out[i] + (i % 5 == 0 ? 1.0 : 0.0);
  };
  const auto r = solve_coupled(F, J, uk, NewtonConfig{1e-14, 50, 30});
  const auto& h = r.history;
  ASSERT_GE(h.size(), 3u);
  for (std::size_t k = h.size() - 2; k + 1 < h.size(); ++k) {
    if (h[k] < 1e-13) continue;  // already at rounding level
    EXPECT_LE(h[k + 1], 10.0 * h[k] * h[k] + 1e-14) << "k=" << k;
  }
}

TEST(SolveCoupled, ReportsFailureWithBestIterate) {
  // x^2 + 1 = 0 has no real root.
  auto F = [](std::span<const double> v, std::span<double> out) { out[0] = v[0] * v[0] + 1.0; };
  auto J = [](std::span<const double> v, std::span<double> out) { out[0] = 2.0 * v[0]; };
  try {
    solve_coupled(F, J, Vec{1.0}, NewtonConfig{1e-10, 20, 30});
    FAIL();
  } catch (const NewtonFailure& e) {
    EXPECT_NE(std::string(e.what()).find("half-step did not converge"), std::string::npos);
    ASSERT_EQ(e.best_iterate().size(), 1u);
    EXPECT_GE(e.residual(), 1.0);
  }
}
