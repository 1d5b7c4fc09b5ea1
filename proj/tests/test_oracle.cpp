#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "boolflow/integrators.hpp"
#include "boolflow/oracle_metrics.hpp"
#include "support.hpp"

using namespace boolflow;
using testsupport::Vec;

namespace {

std::pair<SignVec, double> nearest_by_enumeration(const Vec& u) {
  const auto n = std::uint32_t(u.size());
  SignVec best;
  double bd = std::numeric_limits<double>::infinity();
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
    SignVec s(n);
    double d = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      s[i] = (idx >> i) & 1u ? 1 : -1;
      d += (u[i] - s[i]) * (u[i] - s[i]);
    }
    if (d < bd) bd = d, best = s;
  }
  return {best, std::sqrt(bd)};
}

SparsePoly sum_of_vars(std::uint32_t n) {
  std::vector<Monomial> t;
  for (std::uint32_t i = 0; i < n; ++i) t.push_back(Monomial{{{i, 1}}, 1.0});
  return SparsePoly(n, std::move(t));
}

}  // namespace

TEST(Exhaustive, SumOfVariables) {
  const auto r = exhaustive_min(sum_of_vars(5));
  EXPECT_EQ(r.value, -5.0);
  EXPECT_EQ(r.best, SignVec(5, -1));
  EXPECT_EQ(r.count, 1u);
  EXPECT_EQ(r.visited, 32u);
}

TEST(Exhaustive, AntiFerromagneticPair) {
  const auto r = exhaustive_min(SparsePoly(2, {Monomial{{{0, 1}, {1, 1}}, -1.0}}));
  EXPECT_EQ(r.value, -1.0);
  EXPECT_EQ(r.count, 2u);
  EXPECT_EQ(r.best, (SignVec{-1, -1}));
}

TEST(Exhaustive, SizeGuard) {
  try {
    exhaustive_min(SparsePoly::zero(12), 10);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("2^12"), std::string::npos);
  }
}

TEST(Exhaustive, AgreesWithReversedEnumeration) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto n = std::uint32_t(1 + s % 10);
    const auto pi = testsupport::seeded(n, 2 + s % 5, 900 + s, 0.7);
    const auto fwd = exhaustive_min(pi, 24, 1 + s % 3);
    const auto rev = testsupport::reversed_enumeration(pi);
    EXPECT_EQ(fwd.value, rev.value) << s;
    EXPECT_EQ(fwd.count, rev.argmins.size()) << s;
    EXPECT_EQ(fwd.best, *rev.argmins.begin()) << s;
  }
  const auto pi = testsupport::seeded(10, 5, 42);
  EXPECT_EQ(exhaustive_min(pi).value, testsupport::reversed_enumeration(pi).value);
}

TEST(Exhaustive, WorkerCountDoesNotMatter) {
  const auto pi = testsupport::seeded(12, 3, 5);
  const auto a = exhaustive_min(pi, 24, 1), b = exhaustive_min(pi, 24, 4);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.count, b.count);
}

TEST(Rounding, Examples) {
  EXPECT_EQ(round_to_signs(Vec{0.9, -1.1}), (SignVec{1, -1}));
  EXPECT_EQ(round_to_signs(Vec{0.0, -0.0}), (SignVec{1, 1}));
  EXPECT_THROW(round_to_signs(Vec{std::nan("")}), std::invalid_argument);
  EXPECT_NEAR(delta(Vec{0.9, -1.1}), 0.141421, 1e-6);
  EXPECT_EQ(delta(Vec{1, -1, -1}), 0.0);
}

TEST(Rounding, IsNearestSignVector) {
  std::mt19937_64 g(1);
  for (int k = 0; k < 100; ++k) {
    const auto u = testsupport::uniform_box(g, 8, -2.0, 2.0);
    const auto [best, dist] = nearest_by_enumeration(u);
    EXPECT_EQ(round_to_signs(u), best);
    EXPECT_LE(delta(u), dist + 1e-15);
  }
}

TEST(ErrObj, Examples) {
  OracleResult opt;
  opt.value = -10.0;
  const SparsePoly pi = SparsePoly::constant(1, -10.0);
  EXPECT_EQ(errobj(pi, Vec{0.3}, opt), 0.0);
  EXPECT_NEAR(errobj(SparsePoly::constant(1, -5.0), Vec{0.3}, opt), 5.0 / 11.0, 1e-15);
}

TEST(ErrObj, ZeroExactlyOnOptimalSet) {
  std::mt19937_64 g(2);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto pi = testsupport::seeded(6, 3, 40 + s);
    const auto opt = exhaustive_min(pi);
    const auto rev = testsupport::reversed_enumeration(pi);
    for (int k = 0; k < 50; ++k) {
      const auto u = testsupport::uniform_box(g, 6, -1.5, 1.5);
      const double e = errobj(pi, u, opt);
      EXPECT_GE(e, 0.0);
      EXPECT_EQ(e == 0.0, rev.argmins.count(round_to_signs(u)) == 1);
    }
  }
}

TEST(ErrObj, ComputableOnSolverOutput) {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const PenaltyModel m(BooleanProblem::from_pm1(testsupport::seeded(std::uint32_t(2 + s), 4, s)), 1e-4, 100.0);
    const auto opt = exhaustive_min(m.problem().pm1());
    for (auto sch : {Scheme::Houbolt, Scheme::Lie, Scheme::Rk45}) {
      const Vec zero(m.nvars(), 0.0);
      const auto r = solve(sch, m, SchemeParams{}, zero, zero);
      if (r.status != Status::Converged) continue;
      const double e = errobj(m.problem().pm1(), r.u_final, opt);
      EXPECT_TRUE(std::isfinite(e));
      EXPECT_GE(e, 0.0);
    }
  }
}

TEST(Certificate, Formula) {
  const auto b = make_certificate(1e-4, 100.0, 4, 3.0, 50.0);
  EXPECT_NEAR(b.bound, 0.098039, 1e-6);
  EXPECT_NEAR(b.bound, 4e-4 / 1.02 * 250.0, 1e-15);
  EXPECT_NEAR(b.lipschitz, 25.0, 1e-15);
  EXPECT_NEAR(b.simplified_bound, 4 * (100 + 25) * 2 * 1e-4, 1e-15);
  EXPECT_LE(b.bound, 4e-4 * 250.0);
  EXPECT_GT(b.bound, 0.0);
  const auto c0 = make_certificate(1e-3, 0.0, 9, 4.5, 7.0);
  EXPECT_NEAR(c0.bound, 4e-3 * 7.0, 1e-15);
}

TEST(Certificate, FromModel) {
  const PenaltyModel m(BooleanProblem::from_pm1(testsupport::seeded(4, 3, 3)), 1e-4, 100.0);
  const auto b = bound_certificate(m);
  EXPECT_EQ(b.grad_bound, grad_norm_bound(m.problem().pm1(), m.r()));
  EXPECT_EQ(b.r, m.r());
  EXPECT_LE(b.bound, b.simplified_bound);
}

TEST(Alignment, Examples) {
  const auto a = sign_alignment_check(Vec{0.9, -1.1});
  EXPECT_EQ(a.status, Alignment::Aligned);
  EXPECT_TRUE(a.enumeration_confirmed);
  const auto b = sign_alignment_check(Vec{-0.1, -0.1});
  EXPECT_EQ(b.status, Alignment::Aligned);
  EXPECT_EQ(b.nearest, (SignVec{-1, -1}));
  EXPECT_EQ(sign_alignment_check(Vec{0.0, 1.0}).status, Alignment::Inconclusive);
}

TEST(Alignment, AgreesWithEnumeration) {
  std::mt19937_64 g(3);
  for (int k = 0; k < 100; ++k) {
    const auto u = testsupport::uniform_box(g, 8, -2.0, 2.0);
    const auto a = sign_alignment_check(u);
    EXPECT_EQ(a.status, Alignment::Aligned);
    EXPECT_TRUE(a.enumeration_confirmed);
    EXPECT_EQ(a.nearest, nearest_by_enumeration(u).first);
  }
}
