/// @file polynomial.hpp
/// @brief Sparse multivariate polynomials over the reals.
/// @details A SparsePoly is an immutable, canonically ordered list of terms.
/// Each term stores its exponents as (variable index, power) pairs sorted by
/// index, so structural equality of two polynomials is plain vector equality.
/// PolyEvaluator flattens a polynomial for repeated numeric evaluation of the
/// value, gradient and Hessian, which is what the time-stepping schemes use.

#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "boolflow/rng.hpp"

namespace boolflow {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Exponent = std::pair<std::uint32_t, std::uint32_t>;  // (index, power)
using Exponents = std::vector<Exponent>;

struct Monomial {
  Exponents exps;
  double coef = 0.0;

  std::uint32_t degree() const {
    std::uint32_t d = 0;
    for (const auto& [i, e] : exps) d += e;
    return d;
  }
  /// Power of variable i (0 when absent).
  std::uint32_t power(std::uint32_t i) const {
    for (const auto& [j, e] : exps)
      if (j == i) return e;
    return 0;
  }
  bool operator==(const Monomial&) const = default;
};

namespace detail {

inline bool exps_less(const Exponents& a, const Exponents& b) {
  std::uint32_t da = 0, db = 0;
  for (const auto& p : a) da += p.second;
  for (const auto& p : b) db += p.second;
  if (da != db) return da < db;
  return a < b;
}

inline double ipow(double x, std::uint32_t e) {
  double r = 1.0;
  while (e) {
    if (e & 1u) r *= x;
    x *= x;
    e >>= 1;
  }
  return r;
}

/// Sorts exponents by index, merges repeated indices, drops zero powers.
inline Exponents normalize_exps(Exponents exps, std::uint32_t nvars) {
  std::sort(exps.begin(), exps.end());
  Exponents out;
  out.reserve(exps.size());
  for (const auto& [i, e] : exps) {
    if (i >= nvars) {
      throw DimensionError("monomial variable index " + std::to_string(i) +
                           " out of range for " + std::to_string(nvars) +
                           " variables");
    }
    if (e == 0) continue;
    if (!out.empty() && out.back().first == i)
      out.back().second += e;
    else
      out.emplace_back(i, e);
  }
  return out;
}

}  // namespace detail

class SparsePoly {
 public:
  explicit SparsePoly(std::uint32_t nvars = 1) : nvars_(nvars) {
    if (nvars == 0) throw DimensionError("polynomial needs at least one variable");
  }

  /// Builds the canonical form: terms sorted by (degree, exponents), like
  /// terms merged in input order, exact zeros removed.
  SparsePoly(std::uint32_t nvars, std::vector<Monomial> terms) : SparsePoly(nvars) {
    for (auto& t : terms) t.exps = detail::normalize_exps(std::move(t.exps), nvars_);
    std::stable_sort(terms.begin(), terms.end(),
                     [](const Monomial& a, const Monomial& b) {
                       return detail::exps_less(a.exps, b.exps);
                     });
    for (auto& t : terms) {
      if (!terms_.empty() && terms_.back().exps == t.exps)
        terms_.back().coef += t.coef;
      else
        terms_.push_back(std::move(t));
    }
    std::erase_if(terms_, [](const Monomial& t) { return t.coef == 0.0; });
  }

  static SparsePoly zero(std::uint32_t nvars) { return SparsePoly(nvars); }
  static SparsePoly constant(std::uint32_t nvars, double c) {
    return SparsePoly(nvars, {Monomial{{}, c}});
  }
  static SparsePoly variable(std::uint32_t nvars, std::uint32_t i, double coef = 1.0) {
    return SparsePoly(nvars, {Monomial{{{i, 1}}, coef}});
  }

  std::uint32_t nvars() const { return nvars_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  std::uint32_t degree() const {
    std::uint32_t d = 0;
    for (const auto& t : terms_) d = std::max(d, t.degree());
    return d;
  }

  bool operator==(const SparsePoly&) const = default;

  SparsePoly operator+(const SparsePoly& o) const {
    check_same(o);
    std::vector<Monomial> all = terms_;
    all.insert(all.end(), o.terms_.begin(), o.terms_.end());
    return SparsePoly(nvars_, std::move(all));
  }
  SparsePoly operator-(const SparsePoly& o) const { return *this + o * -1.0; }
  SparsePoly operator*(double s) const {
    std::vector<Monomial> all = terms_;
    for (auto& t : all) t.coef *= s;
    return SparsePoly(nvars_, std::move(all));
  }
  friend SparsePoly operator*(double s, const SparsePoly& p) { return p * s; }

  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& t : terms_) {
      if (!first) os << " + ";
      first = false;
      os << t.coef;
      for (const auto& [i, e] : t.exps) {
        os << "*v" << i;
        if (e != 1) os << "^" << e;
      }
    }
    return os.str();
  }

 private:
  void check_same(const SparsePoly& o) const {
    if (o.nvars_ != nvars_)
      throw DimensionError("polynomials have different numbers of variables");
  }

  std::uint32_t nvars_;
  std::vector<Monomial> terms_;
};

inline void check_point(const SparsePoly& p, std::span<const double> v) {
  if (v.size() != p.nvars()) {
    throw DimensionError("point has " + std::to_string(v.size()) +
                         " coordinates, polynomial has " +
                         std::to_string(p.nvars()) + " variables");
  }
}

inline double eval(const SparsePoly& p, std::span<const double> v) {
  check_point(p, v);
  double s = 0.0;
  for (const auto& t : p.terms()) {
    double m = t.coef;
    for (const auto& [i, e] : t.exps) m *= detail::ipow(v[i], e);
    s += m;
  }
  return s;
}

/// Partial derivative with respect to variable i.
inline SparsePoly partial(const SparsePoly& p, std::uint32_t i) {
  if (i >= p.nvars()) throw DimensionError("partial: variable index out of range");
  std::vector<Monomial> out;
  for (const auto& t : p.terms()) {
    const auto e = t.power(i);
    if (e == 0) continue;
    Monomial m{t.exps, t.coef * e};
    for (auto& pr : m.exps)
      if (pr.first == i) pr.second -= 1;
    out.push_back(std::move(m));
  }
  return SparsePoly(p.nvars(), std::move(out));
}

inline std::vector<SparsePoly> grad(const SparsePoly& p) {
  std::vector<SparsePoly> g;
  g.reserve(p.nvars());
  for (std::uint32_t i = 0; i < p.nvars(); ++i) g.push_back(partial(p, i));
  return g;
}

inline std::vector<std::vector<SparsePoly>> hessian(const SparsePoly& p) {
  const auto n = p.nvars();
  std::vector<std::vector<SparsePoly>> h(n, std::vector<SparsePoly>(n, SparsePoly(n)));
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto gi = partial(p, i);
    for (std::uint32_t j = i; j < n; ++j) {
      h[i][j] = partial(gi, j);
      h[j][i] = h[i][j];
    }
  }
  return h;
}

/// q(v) = p(scale * v + shift * 1), expanded to canonical form.
inline SparsePoly compose_affine(const SparsePoly& p, double scale, double shift) {
  std::vector<Monomial> out;
  for (const auto& t : p.terms()) {
    std::vector<Monomial> partial_terms{Monomial{{}, t.coef}};
    for (const auto& [i, e] : t.exps) {
      // (scale*v_i + shift)^e = sum_k C(e,k) scale^k shift^(e-k) v_i^k
      std::vector<Monomial> next;
      next.reserve(partial_terms.size() * (e + 1));
      double binom = 1.0;
      for (std::uint32_t k = 0; k <= e; ++k) {
        const double c = binom * detail::ipow(scale, k) * detail::ipow(shift, e - k);
        if (c != 0.0) {
          for (const auto& m : partial_terms) {
            Monomial nm{m.exps, m.coef * c};
            if (k > 0) nm.exps.emplace_back(i, k);
            next.push_back(std::move(nm));
          }
        }
        binom = binom * (e - k) / (k + 1);
      }
      partial_terms = std::move(next);
    }
    for (auto& m : partial_terms) out.push_back(std::move(m));
  }
  return SparsePoly(p.nvars(), std::move(out));
}

/// Upper bound on max ||grad p(v)||_2 over ||v||_2 <= r, from per-coordinate
/// bounds sum_terms |coef| * e_i * r^(deg-1).
inline double grad_norm_bound(const SparsePoly& p, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("grad_norm_bound: r must be positive");
  std::vector<double> b(p.nvars(), 0.0);
  for (const auto& t : p.terms()) {
    const auto deg = t.degree();
    const double w = std::abs(t.coef) * detail::ipow(r, deg - 1);
    for (const auto& [i, e] : t.exps) b[i] += w * e;
  }
  double s = 0.0;
  for (double x : b) s += x * x;
  return std::sqrt(s);
}

/// Upper bound on max ||hess p(v)||_inf over the ball of radius r. Each
/// Hessian entry is bounded by the absolute sum of its coefficients times
/// r^(monomial degree); second derivatives of distinct terms never merge, so
/// the bound is accumulated straight from the terms of p.
inline double hessian_infnorm_bound(const SparsePoly& p, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("hessian_infnorm_bound: r must be positive");
  std::vector<double> row(p.nvars(), 0.0);
  for (const auto& t : p.terms()) {
    const auto deg = t.degree();
    if (deg < 2) continue;
    const double w = std::abs(t.coef) * detail::ipow(r, deg - 2);
    for (const auto& [i, ei] : t.exps) {
      for (const auto& [j, ej] : t.exps) {
        const double mult = (i == j) ? double(ei) * (ei - 1) : double(ei) * ej;
        row[i] += w * mult;
      }
    }
  }
  return row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
}

/// Flattened polynomial for fast repeated evaluation of value, gradient and
/// Hessian. Immutable after construction; safe to share across threads.
class PolyEvaluator {
 public:
  PolyEvaluator() = default;
  explicit PolyEvaluator(const SparsePoly& p) : nvars_(p.nvars()) {
    begin_.reserve(p.size() + 1);
    for (const auto& t : p.terms()) {
      for (const auto& [i, e] : t.exps) {
        var_.push_back(i);
        pow_.push_back(e);
      }
      coef_.push_back(t.coef);
      begin_.push_back(static_cast<std::uint32_t>(var_.size()));
      max_factors_ = std::max<std::size_t>(max_factors_, t.exps.size());
    }
  }

  std::uint32_t nvars() const { return nvars_; }

  double value(std::span<const double> x) const {
    check(x);
    double s = 0.0;
    for (std::size_t t = 0; t + 1 < begin_.size(); ++t) {
      double m = coef_[t];
      for (auto q = begin_[t]; q < begin_[t + 1]; ++q) m *= detail::ipow(x[var_[q]], pow_[q]);
      s += m;
    }
    return s;
  }

  /// g = grad p(x); g must have nvars entries.
  void gradient(std::span<const double> x, std::span<double> g) const {
    check(x);
    if (g.size() != nvars_) throw DimensionError("gradient output has wrong size");
    std::fill(g.begin(), g.end(), 0.0);
    std::vector<double> f(max_factors_), d(max_factors_), pre(max_factors_ + 1),
        suf(max_factors_ + 1);
    for (std::size_t t = 0; t + 1 < begin_.size(); ++t) {
      const auto b = begin_[t];
      const std::size_t k = begin_[t + 1] - b;
      if (k == 0) continue;
      load(x, b, k, f, d, nullptr);
      prefix_suffix(f, k, pre, suf);
      for (std::size_t j = 0; j < k; ++j) g[var_[b + j]] += coef_[t] * pre[j] * d[j] * suf[j + 1];
    }
  }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(nvars_);
    gradient(x, g);
    return g;
  }

  /// Dense row-major Hessian; h must have nvars*nvars entries.
  void hessian(std::span<const double> x, std::span<double> h) const {
    check(x);
    if (h.size() != std::size_t(nvars_) * nvars_) throw DimensionError("hessian output has wrong size");
    std::fill(h.begin(), h.end(), 0.0);
    std::vector<double> f(max_factors_), d(max_factors_), dd(max_factors_),
        pre(max_factors_ + 1), suf(max_factors_ + 1);
    for (std::size_t t = 0; t + 1 < begin_.size(); ++t) {
      const auto b = begin_[t];
      const std::size_t k = begin_[t + 1] - b;
      if (k == 0) continue;
      load(x, b, k, f, d, &dd);
      prefix_suffix(f, k, pre, suf);
      const double c = coef_[t];
      for (std::size_t j = 0; j < k; ++j) {
        const auto vj = var_[b + j];
        h[vj * nvars_ + vj] += c * pre[j] * dd[j] * suf[j + 1];
        double mid = 1.0;
        for (std::size_t l = j + 1; l < k; ++l) {
          const auto vl = var_[b + l];
          const double val = c * pre[j] * d[j] * mid * d[l] * suf[l + 1];
          h[vj * nvars_ + vl] += val;
          h[vl * nvars_ + vj] += val;
          mid *= f[l];
        }
      }
    }
  }

 private:
  void check(std::span<const double> x) const {
    if (x.size() != nvars_) {
      throw DimensionError("point has " + std::to_string(x.size()) +
                           " coordinates, polynomial has " + std::to_string(nvars_) +
                           " variables");
    }
  }

  void load(std::span<const double> x, std::uint32_t b, std::size_t k,
            std::vector<double>& f, std::vector<double>& d,
            std::vector<double>* dd) const {
    for (std::size_t j = 0; j < k; ++j) {
      const double xv = x[var_[b + j]];
      const auto e = pow_[b + j];
      const double pm2 = e >= 2 ? detail::ipow(xv, e - 2) : 0.0;
      const double pm1 = e >= 2 ? pm2 * xv : 1.0;
      f[j] = pm1 * xv;
      d[j] = e * pm1;
      if (dd) (*dd)[j] = e >= 2 ? double(e) * (e - 1) * pm2 : 0.0;
    }
  }

  static void prefix_suffix(const std::vector<double>& f, std::size_t k,
                            std::vector<double>& pre, std::vector<double>& suf) {
    pre[0] = 1.0;
    for (std::size_t j = 0; j < k; ++j) pre[j + 1] = pre[j] * f[j];
    suf[k] = 1.0;
    for (std::size_t j = k; j-- > 0;) suf[j] = suf[j + 1] * f[j];
  }

  std::uint32_t nvars_ = 0;
  std::vector<std::uint32_t> begin_{0};
  std::vector<std::uint32_t> var_;
  std::vector<std::uint32_t> pow_;
  std::vector<double> coef_;
  std::size_t max_factors_ = 0;
};

/// Recipe for a seeded random instance.
struct InstanceSpec {
  std::uint32_t nvars = 2;
  std::uint32_t degree = 4;
  std::int64_t coeff_lo = -10;
  std::int64_t coeff_hi = 10;
  double sparsity = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const InstanceSpec&) const = default;
};

/// Candidate pools larger than this are sampled instead of enumerated.
inline constexpr std::uint64_t kMaxCandidatePool = 100000;

namespace detail {

/// C(n, k) with overflow detection (returns max uint64 on overflow).
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max())
      return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

/// Unranks the rank-th (lexicographic) multiset of `size` symbols drawn from
/// {0,...,nsym-1}; returns the symbols in nondecreasing order.
inline std::vector<std::uint32_t> unrank_multiset(std::uint64_t rank, std::uint32_t nsym,
                                                  std::uint32_t size) {
  // Multisets of size k over m symbols <-> k-subsets of {0..m+k-2}.
  const std::uint64_t universe = std::uint64_t(nsym) + size - 1;
  std::vector<std::uint32_t> out;
  out.reserve(size);
  std::uint64_t x = 0;
  for (std::uint32_t j = 0; j < size; ++j) {
    for (;; ++x) {
      const auto cnt = binomial(universe - x - 1, size - j - 1);
      if (rank < cnt) break;
      rank -= cnt;
    }
    out.push_back(static_cast<std::uint32_t>(x - j));
    ++x;
  }
  return out;
}

inline Exponents exps_from_symbols(const std::vector<std::uint32_t>& sym, bool slack_symbol) {
  Exponents e;
  for (auto s : sym) {
    if (slack_symbol) {
      if (s == 0) continue;
      --s;
    }
    if (!e.empty() && e.back().first == s)
      ++e.back().second;
    else
      e.emplace_back(s, 1);
  }
  return e;
}

}  // namespace detail

inline void validate(const InstanceSpec& s) {
  if (s.nvars < 1) throw std::invalid_argument("instance spec: n must be >= 1");
  if (s.degree < 1) throw std::invalid_argument("instance spec: d must be >= 1");
  if (s.coeff_lo > s.coeff_hi) throw std::invalid_argument("instance spec: coeff_lo > coeff_hi");
  if (s.coeff_lo == 0 && s.coeff_hi == 0)
    throw std::invalid_argument("instance spec: coefficient range contains only zero");
  if (!(s.sparsity > 0.0 && s.sparsity <= 1.0))
    throw std::invalid_argument("instance spec: sparsity must lie in (0, 1]");
}

/// Seeded random polynomial. The candidate pool is every monomial of degree
/// <= d (or kMaxCandidatePool distinct ones drawn uniformly when larger); each
/// candidate is kept with probability `sparsity` and given a nonzero integer
/// coefficient from [coeff_lo, coeff_hi]. A degree-d term is forced when the
/// draw produced none.
inline SparsePoly random_poly(const InstanceSpec& spec) {
  validate(spec);
  const std::uint32_t n = spec.nvars, d = spec.degree;
  Rng rng(derive_seed(spec.seed, {0x706f6c79ULL}));
  const auto pool = detail::binomial(std::uint64_t(n) + d, d);
  if (pool == std::numeric_limits<std::uint64_t>::max())
    throw std::invalid_argument("instance spec: monomial pool too large");

  std::vector<std::uint64_t> ranks;
  if (pool <= kMaxCandidatePool) {
    ranks.resize(pool);
    for (std::uint64_t i = 0; i < pool; ++i) ranks[i] = i;
  } else {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(kMaxCandidatePool * 2);
    while (ranks.size() < kMaxCandidatePool) {
      const auto r = rng.below(pool);
      if (seen.insert(r).second) ranks.push_back(r);
    }
    std::sort(ranks.begin(), ranks.end());
  }

  auto draw_coef = [&]() {
    for (;;) {
      const auto c = rng.uniform_int(spec.coeff_lo, spec.coeff_hi);
      if (c != 0) return static_cast<double>(c);
    }
  };

  std::vector<Monomial> terms;
  bool has_top = false;
  for (const auto r : ranks) {
    if (!rng.bernoulli(spec.sparsity)) continue;
    auto exps = detail::exps_from_symbols(detail::unrank_multiset(r, n + 1, d), true);
    Monomial m{std::move(exps), draw_coef()};
    has_top = has_top || m.degree() == d;
    terms.push_back(std::move(m));
  }
  if (!has_top) {
    const auto top = detail::binomial(std::uint64_t(n) + d - 1, d);
    const auto r = rng.below(top);
    terms.push_back(Monomial{detail::exps_from_symbols(detail::unrank_multiset(r, n, d), false),
                             draw_coef()});
  }
  return SparsePoly(n, std::move(terms));
}

}  // namespace boolflow
