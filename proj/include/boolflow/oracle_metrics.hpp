/// @file oracle_metrics.hpp
/// @brief Exhaustive oracle, rounding metrics and the distance certificate.

#pragma once
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "boolflow/model.hpp"
#include "boolflow/parallel.hpp"
#include "boolflow/polynomial.hpp"

namespace boolflow {

using SignVec = std::vector<int>;

struct OracleResult {
  SignVec best;              // lexicographically smallest minimizer (-1 < +1)
  double value = 0.0;
  std::uint64_t count = 0;   // number of minimizers
  std::uint64_t visited = 0; // 2^n
};

/// Sign vector for cube index idx: bit i of idx set <=> coordinate i is +1.
inline SignVec cube_point(std::uint64_t idx, std::uint32_t n) {
  SignVec s(n);
  for (std::uint32_t i = 0; i < n; ++i) s[i] = ((idx >> i) & 1u) ? 1 : -1;
  return s;
}

inline Vec to_real(std::span<const int> s) { return Vec(s.begin(), s.end()); }

namespace detail {

struct OracleAccum {
  double value = std::numeric_limits<double>::infinity();
  SignVec best;
  std::uint64_t count = 0;

  void offer(double v, const SignVec& s) {
    if (v < value) {
      value = v;
      best = s;
      count = 1;
    } else if (v == value) {
      ++count;
      if (s < best) best = s;
    }
  }
  void merge(const OracleAccum& o) {
    if (o.count == 0) return;
    if (o.value < value) {
      *this = o;
    } else if (o.value == value) {
      count += o.count;
      if (o.best < best) best = o.best;
    }
  }
};

}  // namespace detail

/// Exact minimum of pi over {-1,1}^n by enumeration of all 2^n points.
inline OracleResult exhaustive_min(const SparsePoly& pi, std::uint32_t max_n = 24,
                                   std::size_t workers = 1) {
  const auto n = pi.nvars();
  if (n > max_n || n > 62) {
    throw std::invalid_argument("exhaustive_min: n = " + std::to_string(n) +
                                " exceeds the oracle limit " + std::to_string(max_n) +
                                " (would visit 2^" + std::to_string(n) + " points)");
  }
  const PolyEvaluator ev(pi);
  const std::uint64_t total = std::uint64_t{1} << n;
  const std::uint64_t chunks = std::min<std::uint64_t>(total, 64);
  std::vector<detail::OracleAccum> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    Vec x(n);
    for (std::uint64_t idx = lo; idx < hi; ++idx) {
      const auto s = cube_point(idx, n);
      for (std::uint32_t i = 0; i < n; ++i) x[i] = s[i];
      partial[c].offer(ev.value(x), s);
    }
  });
  detail::OracleAccum acc;
  for (const auto& p : partial) acc.merge(p);
  return OracleResult{acc.best, acc.value, acc.count, total};
}

/// Nearest sign vector; ties (u_i == 0, including -0.0) go to +1.
inline SignVec round_to_signs(std::span<const double> u) {
  SignVec s(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]))
      throw std::invalid_argument("round_to_signs: non-finite coordinate " + std::to_string(i));
    s[i] = u[i] >= 0.0 ? 1 : -1;
  }
  return s;
}

/// Euclidean distance from u to its nearest sign vector.
inline double delta(std::span<const double> u) {
  const auto s = round_to_signs(u);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - s[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// |pi(round(u)) - pi*| / (1 + |pi*|).
inline double errobj(const SparsePoly& pi, std::span<const double> u, const OracleResult& oracle) {
  const auto r = to_real(round_to_signs(u));
  return std::abs(eval(pi, r) - oracle.value) / (1.0 + std::abs(oracle.value));
}

/// Distance bound delta <= 4 eps / (1 + 2 c eps) * (c sqrt(n) + G), with G an
/// upper bound of |grad pi| on the ball of radius r, and its simplified form
/// 4 (c + l_r) sqrt(n) eps where l_r = G / sqrt(n).
struct BoundCertificate {
  double epsilon = 0.0;
  double c = 0.0;
  std::uint32_t n = 0;
  double r = 0.0;
  double grad_bound = 0.0;
  double bound = 0.0;
  double lipschitz = 0.0;
  double simplified_bound = 0.0;
};

inline BoundCertificate make_certificate(double epsilon, double c, std::uint32_t n, double r,
                                         double grad_bound) {
  BoundCertificate b{epsilon, c, n, r, grad_bound, 0.0, 0.0, 0.0};
  const double sn = std::sqrt(double(n));
  b.bound = 4.0 * epsilon / (1.0 + 2.0 * c * epsilon) * (c * sn + grad_bound);
  b.lipschitz = grad_bound / sn;
  b.simplified_bound = 4.0 * (c + b.lipschitz) * sn * epsilon;
  return b;
}

inline BoundCertificate bound_certificate(const PenaltyModel& m) {
  return make_certificate(m.epsilon(), m.c(), m.nvars(), m.r(),
                          grad_norm_bound(m.problem().pm1(), m.r()));
}

enum class Alignment { Aligned, Violated, Inconclusive };

struct AlignmentCheck {
  Alignment status = Alignment::Inconclusive;
  SignVec nearest;
  /// For n <= 10: whether enumeration confirmed `nearest` as the unique
  /// distance minimizer. Always false for larger n (not checked).
  bool enumeration_confirmed = false;
};

/// Checks nearest(U) . U >= 0 componentwise; a zero coordinate makes the
/// nearest sign vector non-unique and the check inconclusive.
inline AlignmentCheck sign_alignment_check(std::span<const double> u) {
  AlignmentCheck out;
  out.nearest = round_to_signs(u);
  for (double x : u) {
    if (x == 0.0) return out;
  }
  bool aligned = true;
  for (std::size_t i = 0; i < u.size(); ++i) aligned = aligned && out.nearest[i] * u[i] >= 0.0;
  out.status = aligned ? Alignment::Aligned : Alignment::Violated;
  if (u.size() <= 10) {
    const auto n = static_cast<std::uint32_t>(u.size());
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t hits = 0;
    SignVec arg;
    for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
      const auto s = cube_point(idx, n);
      double d = 0.0;
      for (std::uint32_t i = 0; i < n; ++i) d += (u[i] - s[i]) * (u[i] - s[i]);
      if (d < best) {
        best = d;
        arg = s;
        hits = 1;
      } else if (d == best) {
        ++hits;
      }
    }
    out.enumeration_confirmed = hits == 1 && arg == out.nearest;
  }
  return out;
}

}  // namespace boolflow
