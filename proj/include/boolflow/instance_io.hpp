/// @file instance_io.hpp
/// @brief Versioned JSON instance files.
/// @details Layout (format 1):
///   { "format": 1, "nvars": n, "degree": d,
///     "terms": [ {"coef": c, "exps": [[index, power], ...]}, ... ],
///     "spec": {...}, "penalty": {...} }
/// "spec", "penalty" and "domain" are optional; "domain" is "pm1" (default,
/// the polynomial is Pi over {-1,1}^n) or "binary" (P over {0,1}^n). Terms are written in canonical order,
/// one per line, so identical polynomials give identical bytes.

#pragma once
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "boolflow/model.hpp"
#include "boolflow/polynomial.hpp"
#include <nlohmann/json.hpp>

namespace boolflow {

inline constexpr int kInstanceFormat = 1;

struct PenaltyBlock {
  double epsilon = 1e-4;
  double c = 100.0;
  double r = 0.0;
  bool operator==(const PenaltyBlock&) const = default;
};

enum class Domain { Sign, Binary };

struct InstanceFile {
  SparsePoly poly{1};
  Domain domain = Domain::Sign;
  std::optional<InstanceSpec> spec;
  std::optional<PenaltyBlock> penalty;
};

inline nlohmann::json to_json(const InstanceSpec& s) {
  return nlohmann::json{{"n", s.nvars},           {"d", s.degree},
                        {"coeff_lo", s.coeff_lo}, {"coeff_hi", s.coeff_hi},
                        {"sparsity", s.sparsity}, {"seed", s.seed}};
}

inline InstanceSpec instance_spec_from_json(const nlohmann::json& j) {
  InstanceSpec s;
  s.nvars = j.at("n").get<std::uint32_t>();
  s.degree = j.at("d").get<std::uint32_t>();
  s.coeff_lo = j.at("coeff_lo").get<std::int64_t>();
  s.coeff_hi = j.at("coeff_hi").get<std::int64_t>();
  s.sparsity = j.at("sparsity").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline std::string serialize_instance(const InstanceFile& f) {
  const auto& p = f.poly;
  std::ostringstream os;
  os << "{\n\"format\": " << kInstanceFormat << ",\n\"nvars\": " << p.nvars()
     << ",\n\"degree\": " << p.degree() << ",\n";
  if (f.domain == Domain::Binary) os << "\"domain\": \"binary\",\n";
  if (f.spec) os << "\"spec\": " << to_json(*f.spec).dump() << ",\n";
  if (f.penalty) {
    nlohmann::json pj{{"epsilon", f.penalty->epsilon}, {"c", f.penalty->c}, {"r", f.penalty->r}};
    os << "\"penalty\": " << pj.dump() << ",\n";
  }
  os << "\"terms\": [";
  bool first = true;
  for (const auto& t : p.terms()) {
    nlohmann::json exps = nlohmann::json::array();
    for (const auto& [i, e] : t.exps) exps.push_back({i, e});
    nlohmann::json tj{{"coef", t.coef}, {"exps", std::move(exps)}};
    os << (first ? "\n" : ",\n") << tj.dump();
    first = false;
  }
  os << "\n]\n}\n";
  return os.str();
}

inline InstanceFile parse_instance(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const int format = j.at("format").get<int>();
  if (format != kInstanceFormat)
    throw std::runtime_error("unsupported instance format " + std::to_string(format));
  const auto nvars = j.at("nvars").get<std::uint32_t>();
  std::vector<Monomial> terms;
  for (const auto& tj : j.at("terms")) {
    Monomial m;
    m.coef = tj.at("coef").get<double>();
    for (const auto& e : tj.at("exps"))
      m.exps.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
    terms.push_back(std::move(m));
  }
  InstanceFile f{SparsePoly(nvars, std::move(terms)), Domain::Sign, std::nullopt, std::nullopt};
  if (j.contains("domain")) {
    const auto dom = j.at("domain").get<std::string>();
    if (dom == "binary")
      f.domain = Domain::Binary;
    else if (dom != "pm1")
      throw std::runtime_error("unknown instance domain '" + dom + "' (expected pm1|binary)");
  }
  if (j.contains("degree") && j.at("degree").get<std::uint32_t>() < f.poly.degree())
    throw std::runtime_error("instance declares a degree below its terms' degree");
  if (j.contains("spec")) f.spec = instance_spec_from_json(j.at("spec"));
  if (j.contains("penalty")) {
    const auto& pj = j.at("penalty");
    f.penalty = PenaltyBlock{pj.at("epsilon").get<double>(), pj.at("c").get<double>(),
                             pj.at("r").get<double>()};
  }
  return f;
}

inline InstanceFile read_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

/// FNV-1a 64-bit hash, used as the content hash of serialized instances.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, x >>= 4) s[i] = digits[x & 0xf];
  return s;
}

/// Problem described by an instance file.
inline BooleanProblem problem_of(const InstanceFile& f) {
  return f.domain == Domain::Binary ? BooleanProblem::from_binary(f.poly)
                                    : BooleanProblem::from_pm1(f.poly);
}

}  // namespace boolflow
