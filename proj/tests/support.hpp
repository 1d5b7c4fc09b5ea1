// Independent reference computations shared by the test suites.
#pragma once
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "boolflow/oracle_metrics.hpp"
#include "boolflow/polynomial.hpp"

namespace testsupport {

using Vec = std::vector<double>;

// Term-by-term evaluation in reverse canonical order with std::pow.
inline double reference_eval(const boolflow::SparsePoly& p, const Vec& v) {
  double s = 0.0;
  const auto& terms = p.terms();
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
    double m = it->coef;
    for (const auto& [i, e] : it->exps) m *= std::pow(v[i], double(e));
    s += m;
  }
  return s;
}

inline Vec central_difference(const std::function<double(const Vec&)>& f, Vec x, double h) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Vec uniform_box(std::mt19937_64& g, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (auto& x : v) x = u(g);
  return v;
}

// Uniform in the Euclidean ball of radius r; `on_sphere` puts it on the boundary.
inline Vec uniform_ball(std::mt19937_64& g, std::size_t n, double r, bool on_sphere = false) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(n);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = nd(g);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  const double rad = on_sphere ? r : r * std::pow(u(g), 1.0 / double(n));
  for (auto& x : v) x *= rad / norm;
  return v;
}

inline boolflow::SparsePoly seeded(std::uint32_t n, std::uint32_t d, std::uint64_t seed,
                                   double sparsity = 1.0) {
  return boolflow::random_poly(boolflow::InstanceSpec{n, d, -10, 10, sparsity, seed});
}

struct Enumerated {
  double value = std::numeric_limits<double>::infinity();
  std::set<boolflow::SignVec> argmins;
};

// Visits the cube from the last index down with the reference evaluator.
inline Enumerated reversed_enumeration(const boolflow::SparsePoly& pi) {
  const auto n = pi.nvars();
  Enumerated e;
  for (std::uint64_t idx = std::uint64_t{1} << n; idx-- > 0;) {
    boolflow::SignVec s(n);
    for (std::uint32_t i = 0; i < n; ++i) s[i] = (idx >> (n - 1 - i)) & 1u ? 1 : -1;
    const double v = reference_eval(pi, Vec(s.begin(), s.end()));
    if (v < e.value) {
      e.value = v;
      e.argmins = {s};
    } else if (v == e.value) {
      e.argmins.insert(s);
    }
  }
  return e;
}

}  // namespace testsupport
