/// @file harness.hpp
/// @brief Experiment driver: seeded instance grids, multistart runs, oracle
/// comparison, run logs (JSON lines), CSV tables and parameter sweeps.
/// @details Every output is a pure function of the ExperimentConfig. Work is
/// split into (cell, epsilon, scheme, start) tasks that run on any number of
/// workers; each task writes only its own slot and the reduction walks the
/// slots in grid order. With record_timing = false, wall times and timestamps
/// are zeroed so that logs and tables are byte-identical across runs.

#pragma once
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "boolflow/instance_io.hpp"
#include "boolflow/integrators.hpp"
#include "boolflow/oracle_metrics.hpp"
#include "boolflow/parallel.hpp"
#include "boolflow/trajectory_io.hpp"

namespace boolflow {

inline constexpr int kRunLogVersion = 1;
inline constexpr int kTableVersion = 1;

enum class StartMode { Zero, Random };

struct ExperimentConfig {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> grid;  // (n, d)
  std::vector<Scheme> schemes{Scheme::Houbolt, Scheme::Lie, Scheme::Rk45};
  std::vector<double> epsilons{1e-4};
  double m = 1.0;
  double gamma = 50.0;
  double c = 100.0;
  TauMode tau_mode = TauMode::Fixed;
  double theta = 0.8;
  std::optional<double> tau0;
  std::optional<double> tau_star;
  double t_final = 1.0;
  double tol_step = 1e-6;
  int stall_steps = 3;
  long max_iters = 100000;
  std::uint32_t n_starts = 1;
  StartMode start = StartMode::Zero;
  std::uint64_t master_seed = 1;
  std::int64_t coeff_lo = -10;
  std::int64_t coeff_hi = 10;
  double sparsity = 1.0;
  /// When set, each cell draws its sparsity uniformly from this range.
  std::optional<std::pair<double, double>> sparsity_range;
  std::size_t workers = 0;  // 0: available parallelism
  std::uint32_t oracle_max_n = 16;
  bool record_timing = true;
  bool retain_trajectory = false;
  std::string run_log;
  std::string table;
  std::string layout = "table1";

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const {
    if (grid.empty()) throw std::invalid_argument("config: grid must not be empty");
    for (const auto& [n, d] : grid)
      if (n < 1 || d < 1) throw std::invalid_argument("config: grid entries need n >= 1 and d >= 1");
    if (schemes.empty()) throw std::invalid_argument("config: at least one scheme is required");
    if (epsilons.empty()) throw std::invalid_argument("config: at least one epsilon is required");
    for (double e : epsilons)
      if (!(e > 0.0)) throw std::invalid_argument("config: every epsilon must be > 0");
    if (n_starts < 1) throw std::invalid_argument("config: n_starts must be >= 1");
    if (start == StartMode::Zero && n_starts != 1)
      throw std::invalid_argument("config: zero start mode needs n_starts = 1");
    if (coeff_lo > coeff_hi) throw std::invalid_argument("config: coeff_lo > coeff_hi");
    if (sparsity_range) {
      const auto [lo, hi] = *sparsity_range;
      if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
        throw std::invalid_argument("config: sparsity range must satisfy 0 < lo <= hi <= 1");
    }
    if (!(c >= 0.0)) throw std::invalid_argument("config: c must be >= 0");
    scheme_params().validate();
  }

  SchemeParams scheme_params() const {
    SchemeParams p;
    p.m = m;
    p.gamma = gamma;
    p.tau0 = tau0;
    p.tau_mode = tau_mode;
    p.theta = theta;
    p.tau_star = tau_star;
    p.t_final = t_final;
    p.tol_step = tol_step;
    p.stall_steps = stall_steps;
    p.max_iters = max_iters;
    p.retain_trajectory = retain_trajectory;
    return p;
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json grid = json::array();
  for (const auto& [n, d] : c.grid) grid.push_back({n, d});
  json schemes = json::array();
  for (auto s : c.schemes) schemes.push_back(to_string(s));
  json j{{"grid", grid},
         {"schemes", schemes},
         {"epsilon", c.epsilons},
         {"m", c.m},
         {"gamma", c.gamma},
         {"c", c.c},
         {"tau_mode", to_string(c.tau_mode)},
         {"theta", c.theta},
         {"tau0", c.tau0 ? json(*c.tau0) : json(nullptr)},
         {"tau_star", c.tau_star ? json(*c.tau_star) : json(nullptr)},
         {"t_final", c.t_final},
         {"tol_step", c.tol_step},
         {"stall_steps", c.stall_steps},
         {"max_iters", c.max_iters},
         {"n_starts", c.n_starts},
         {"start", c.start == StartMode::Zero ? "zero" : "random"},
         {"master_seed", c.master_seed},
         {"coeff_lo", c.coeff_lo},
         {"coeff_hi", c.coeff_hi},
         {"workers", c.workers},
         {"oracle_max_n", c.oracle_max_n},
         {"record_timing", c.record_timing},
         {"retain_trajectory", c.retain_trajectory},
         {"outputs", {{"run_log", c.run_log}, {"table", c.table}, {"layout", c.layout}}}};
  if (c.sparsity_range)
    j["sparsity"] = {c.sparsity_range->first, c.sparsity_range->second};
  else
    j["sparsity"] = c.sparsity;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "grid", "schemes", "epsilon", "m", "gamma", "c", "tau_mode", "theta", "tau0", "tau_star",
      "t_final", "tol_step", "stall_steps", "max_iters", "n_starts", "start", "master_seed",
      "coeff_lo", "coeff_hi", "sparsity", "workers", "oracle_max_n", "record_timing",
      "retain_trajectory", "outputs"};
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");

  ExperimentConfig c;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.grid.clear();
    if (g.is_object()) {
      for (auto n : g.at("n")) for (auto d : g.at("d")) c.grid.emplace_back(n.get<std::uint32_t>(), d.get<std::uint32_t>());
    } else {
      for (const auto& e : g) c.grid.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
    }
  }
  if (j.contains("schemes")) {
    c.schemes.clear();
    for (const auto& s : j.at("schemes")) c.schemes.push_back(parse_scheme(s.get<std::string>()));
  }
  if (j.contains("epsilon")) {
    const auto& e = j.at("epsilon");
    c.epsilons = e.is_array() ? e.get<std::vector<double>>() : std::vector<double>{e.get<double>()};
  }
  auto opt_num = [&](const char* key, std::optional<double>& out) {
    if (j.contains(key)) out = j.at(key).is_null() ? std::nullopt : std::optional(j.at(key).get<double>());
  };
  auto num = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  num("m", c.m);
  num("gamma", c.gamma);
  num("c", c.c);
  if (j.contains("tau_mode")) c.tau_mode = parse_tau_mode(j.at("tau_mode").get<std::string>());
  num("theta", c.theta);
  opt_num("tau0", c.tau0);
  opt_num("tau_star", c.tau_star);
  num("t_final", c.t_final);
  num("tol_step", c.tol_step);
  num("stall_steps", c.stall_steps);
  num("max_iters", c.max_iters);
  num("n_starts", c.n_starts);
  if (j.contains("start")) {
    const auto s = j.at("start").get<std::string>();
    if (s == "zero")
      c.start = StartMode::Zero;
    else if (s == "random")
      c.start = StartMode::Random;
    else
      throw std::invalid_argument("config: start must be zero|random");
  }
  num("master_seed", c.master_seed);
  num("coeff_lo", c.coeff_lo);
  num("coeff_hi", c.coeff_hi);
  if (j.contains("sparsity")) {
    const auto& s = j.at("sparsity");
    if (s.is_array()) {
      c.sparsity_range = std::make_pair(s.at(0).get<double>(), s.at(1).get<double>());
    } else {
      c.sparsity = s.get<double>();
    }
  }
  num("workers", c.workers);
  num("oracle_max_n", c.oracle_max_n);
  num("record_timing", c.record_timing);
  num("retain_trajectory", c.retain_trajectory);
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (o.contains("run_log")) c.run_log = o.at("run_log").get<std::string>();
    if (o.contains("table")) c.table = o.at("table").get<std::string>();
    if (o.contains("layout")) c.layout = o.at("layout").get<std::string>();
  }
  c.validate();
  return c;
}

inline ExperimentConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return config_from_json(nlohmann::json::parse(in));
}

struct RunRecord {
  std::uint32_t n = 0, d = 0;
  InstanceSpec spec;
  std::string instance_hash;
  std::string scheme;
  double epsilon = 0.0;
  double m = 0.0, gamma = 0.0, c = 0.0;
  std::string tau_mode;
  double theta = 0.0;
  double tau0 = 0.0;
  bool tau_clamped = false;
  std::uint32_t n_starts = 1;
  std::string start;
  std::string status;
  std::string message;
  std::uint32_t best_start = 0;
  Vec u_final;
  SignVec rounded;
  double delta = NAN;
  double obj = NAN;        // Pi(U_eps)
  double obj_round = NAN;  // Pi(round(U_eps))
  double penalty = NAN;    // J(U_eps)
  double residual = NAN;
  long iterations = 0;
  long rejected_steps = 0;
  double avg_iterations = NAN;
  double time = 0.0;        // solver time of the selected start
  double total_time = 0.0;  // summed solver time over all starts
  std::uint32_t converged = 0, max_iters = 0, diverged = 0, step_violations = 0, failed = 0;
  double cert_bound = NAN;
  double cert_simplified = NAN;
  bool cert_ok = false;
  bool has_oracle = false;
  double oracle_value = NAN;
  SignVec oracle_best;
  std::uint64_t oracle_count = 0;
  double oracle_time = 0.0;
  double errobj = NAN;
  std::string timestamp;
  std::string sweep_axis;
  double sweep_value = NAN;
  Trajectory trajectory;  // not persisted
};

namespace detail {

inline nlohmann::json num_json(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline double json_num(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return NAN;
  return j.at(key).get<double>();
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const RunRecord& r) {
  using detail::num_json;
  nlohmann::json u = nlohmann::json::array();
  for (double x : r.u_final) u.push_back(num_json(x));
  nlohmann::json j{{"version", kRunLogVersion},
                   {"n", r.n},
                   {"d", r.d},
                   {"spec", to_json(r.spec)},
                   {"instance_hash", r.instance_hash},
                   {"scheme", r.scheme},
                   {"epsilon", r.epsilon},
                   {"m", r.m},
                   {"gamma", r.gamma},
                   {"c", r.c},
                   {"tau_mode", r.tau_mode},
                   {"theta", r.theta},
                   {"tau0", num_json(r.tau0)},
                   {"tau_clamped", r.tau_clamped},
                   {"n_starts", r.n_starts},
                   {"start", r.start},
                   {"status", r.status},
                   {"message", r.message},
                   {"best_start", r.best_start},
                   {"u_final", u},
                   {"rounded", r.rounded},
                   {"delta", num_json(r.delta)},
                   {"obj", num_json(r.obj)},
                   {"obj_round", num_json(r.obj_round)},
                   {"penalty", num_json(r.penalty)},
                   {"residual", num_json(r.residual)},
                   {"iterations", r.iterations},
                   {"rejected_steps", r.rejected_steps},
                   {"avg_iterations", num_json(r.avg_iterations)},
                   {"time", r.time},
                   {"total_time", r.total_time},
                   {"starts_converged", r.converged},
                   {"starts_max_iters", r.max_iters},
                   {"starts_diverged", r.diverged},
                   {"starts_step_violations", r.step_violations},
                   {"starts_failed", r.failed},
                   {"cert_bound", num_json(r.cert_bound)},
                   {"cert_simplified", num_json(r.cert_simplified)},
                   {"cert_ok", r.cert_ok},
                   {"timestamp", r.timestamp}};
  if (r.has_oracle) {
    j["oracle"] = {{"value", r.oracle_value},
                   {"best", r.oracle_best},
                   {"count", r.oracle_count},
                   {"time", r.oracle_time}};
    j["errobj"] = num_json(r.errobj);
  }
  if (!r.sweep_axis.empty()) {
    j["sweep_axis"] = r.sweep_axis;
    j["sweep_value"] = r.sweep_value;
  }
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  using detail::json_num;
  RunRecord r;
  if (j.at("version").get<int>() != kRunLogVersion)
    throw std::runtime_error("unsupported run log version");
  r.n = j.at("n").get<std::uint32_t>();
  r.d = j.at("d").get<std::uint32_t>();
  r.spec = instance_spec_from_json(j.at("spec"));
  r.instance_hash = j.at("instance_hash").get<std::string>();
  r.scheme = j.at("scheme").get<std::string>();
  r.epsilon = j.at("epsilon").get<double>();
  r.m = j.at("m").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.c = j.at("c").get<double>();
  r.tau_mode = j.at("tau_mode").get<std::string>();
  r.theta = j.at("theta").get<double>();
  r.tau0 = json_num(j, "tau0");
  r.tau_clamped = j.at("tau_clamped").get<bool>();
  r.n_starts = j.at("n_starts").get<std::uint32_t>();
  r.start = j.at("start").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.best_start = j.at("best_start").get<std::uint32_t>();
  for (const auto& x : j.at("u_final")) r.u_final.push_back(x.is_null() ? NAN : x.get<double>());
  r.rounded = j.at("rounded").get<SignVec>();
  r.delta = json_num(j, "delta");
  r.obj = json_num(j, "obj");
  r.obj_round = json_num(j, "obj_round");
  r.penalty = json_num(j, "penalty");
  r.residual = json_num(j, "residual");
  r.iterations = j.at("iterations").get<long>();
  r.rejected_steps = j.at("rejected_steps").get<long>();
  r.avg_iterations = json_num(j, "avg_iterations");
  r.time = j.at("time").get<double>();
  r.total_time = j.at("total_time").get<double>();
  r.converged = j.at("starts_converged").get<std::uint32_t>();
  r.max_iters = j.at("starts_max_iters").get<std::uint32_t>();
  r.diverged = j.at("starts_diverged").get<std::uint32_t>();
  r.step_violations = j.at("starts_step_violations").get<std::uint32_t>();
  r.failed = j.at("starts_failed").get<std::uint32_t>();
  r.cert_bound = json_num(j, "cert_bound");
  r.cert_simplified = json_num(j, "cert_simplified");
  r.cert_ok = j.at("cert_ok").get<bool>();
  r.timestamp = j.at("timestamp").get<std::string>();
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    r.has_oracle = true;
    r.oracle_value = o.at("value").get<double>();
    r.oracle_best = o.at("best").get<SignVec>();
    r.oracle_count = o.at("count").get<std::uint64_t>();
    r.oracle_time = o.at("time").get<double>();
    r.errobj = json_num(j, "errobj");
  }
  if (j.contains("sweep_axis")) {
    r.sweep_axis = j.at("sweep_axis").get<std::string>();
    r.sweep_value = j.at("sweep_value").get<double>();
  }
  return r;
}

inline std::string run_log_text(const std::vector<RunRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + '\n';
  return out;
}

inline std::vector<RunRecord> parse_run_log(const std::string& text) {
  std::vector<RunRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_json(nlohmann::json::parse(line)));
  return out;
}

inline std::vector<RunRecord> read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_log(ss.str());
}

/// Appends records to a JSON-lines log.
inline void append_run_log(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to run log " + path);
  out << run_log_text(records);
}

/// Seeded instance of one grid cell.
struct CellInstance {
  InstanceSpec spec;
  SparsePoly pi{1};
  std::string hash;
};

inline std::uint64_t cell_seed(std::uint64_t master, std::uint32_t n, std::uint32_t d) {
  return derive_seed(master, {n, d});
}

inline CellInstance make_cell_instance(const ExperimentConfig& cfg, std::uint32_t n,
                                       std::uint32_t d) {
  CellInstance ci;
  const auto seed = cell_seed(cfg.master_seed, n, d);
  double sparsity = cfg.sparsity;
  if (cfg.sparsity_range) {
    Rng rng(derive_seed(seed, {0x7370617273ULL}));
    sparsity = rng.uniform(cfg.sparsity_range->first, cfg.sparsity_range->second);
  }
  ci.spec = InstanceSpec{n, d, cfg.coeff_lo, cfg.coeff_hi, sparsity, seed};
  ci.pi = random_poly(ci.spec);
  ci.hash = hex64(fnv1a64(serialize_instance(InstanceFile{ci.pi, Domain::Sign, ci.spec, std::nullopt})));
  return ci;
}

namespace detail {

struct StartOutcome {
  std::optional<SolveReport> report;
  std::string error;
  double seconds = 0.0;
};

inline bool usable(const SolveReport& r) {
  return r.status != Status::Diverged && r.status != Status::StepConditionViolated &&
         std::isfinite(r.penalty_value);
}

}  // namespace detail

/// Runs the whole grid; records come out in (cell, epsilon, scheme) order.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t workers = cfg.workers ? cfg.workers : default_workers();
  const std::size_t ncell = cfg.grid.size();

  std::vector<CellInstance> cells(ncell);
  parallel_for(ncell, workers, [&](std::size_t i) {
    cells[i] = make_cell_instance(cfg, cfg.grid[i].first, cfg.grid[i].second);
  });

  std::vector<std::optional<OracleResult>> oracles(ncell);
  std::vector<double> oracle_secs(ncell, 0.0);
  parallel_for(ncell, workers, [&](std::size_t i) {
    if (cells[i].spec.nvars > cfg.oracle_max_n) return;
    const auto t0 = detail::Clock::now();
    oracles[i] = exhaustive_min(cells[i].pi, cfg.oracle_max_n);
    oracle_secs[i] = detail::seconds_since(t0);
  });

  std::vector<BooleanProblem> problems;
  problems.reserve(ncell);
  for (const auto& c : cells) problems.push_back(BooleanProblem::from_pm1(c.pi));

  const std::size_t ne = cfg.epsilons.size(), ns = cfg.schemes.size();
  const std::size_t starts = cfg.start == StartMode::Zero ? 1 : cfg.n_starts;
  const std::size_t groups = ncell * ne * ns;
  const SchemeParams params = cfg.scheme_params();

  std::vector<detail::StartOutcome> out(groups * starts);
  parallel_for(out.size(), workers, [&](std::size_t task) {
    const std::size_t g = task / starts, s = task % starts;
    const std::size_t cell = g / (ne * ns), e = (g / ns) % ne, k = g % ns;
    const auto n = cells[cell].spec.nvars;
    const PenaltyModel model(problems[cell], cfg.epsilons[e], cfg.c);
    const Vec u0 = cfg.start == StartMode::Zero ? Vec(n, 0.0)
                                                : random_start(n, cells[cell].spec.seed, s);
    const Vec v0(n, 0.0);
    const auto t0 = detail::Clock::now();
    try {
      out[task].report = solve(cfg.schemes[k], model, params, u0, v0);
    } catch (const std::exception& ex) {
      out[task].error = ex.what();
    }
    out[task].seconds = detail::seconds_since(t0);
  });

  std::vector<RunRecord> records;
  records.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t cell = g / (ne * ns), e = (g / ns) % ne, k = g % ns;
    const auto& ci = cells[cell];
    const PenaltyModel model(problems[cell], cfg.epsilons[e], cfg.c);
    RunRecord r;
    r.n = ci.spec.nvars;
    r.d = ci.spec.degree;
    r.spec = ci.spec;
    r.instance_hash = ci.hash;
    r.scheme = to_string(cfg.schemes[k]);
    r.epsilon = cfg.epsilons[e];
    r.m = cfg.m;
    r.gamma = cfg.gamma;
    r.c = cfg.c;
    r.tau_mode = to_string(cfg.tau_mode);
    r.theta = cfg.theta;
    r.n_starts = static_cast<std::uint32_t>(starts);
    r.start = cfg.start == StartMode::Zero ? "zero" : "random";

    std::optional<std::size_t> best;
    double iter_sum = 0.0;
    std::size_t iter_cnt = 0;
    std::string first_problem;
    for (std::size_t s = 0; s < starts; ++s) {
      const auto& o = out[g * starts + s];
      r.total_time += o.seconds;
      if (!o.report) {
        ++r.failed;
        if (first_problem.empty()) first_problem = "start " + std::to_string(s) + ": " + o.error;
        continue;
      }
      const auto& rep = *o.report;
      switch (rep.status) {
        case Status::Converged: ++r.converged; break;
        case Status::MaxIters: ++r.max_iters; break;
        case Status::Diverged: ++r.diverged; break;
        case Status::StepConditionViolated: ++r.step_violations; break;
      }
      if (!detail::usable(rep)) {
        if (first_problem.empty())
          first_problem = "start " + std::to_string(s) + ": " + to_string(rep.status) +
                          (rep.message.empty() ? "" : " (" + rep.message + ")");
        continue;
      }
      iter_sum += double(rep.iterations);
      ++iter_cnt;
      if (!best || rep.penalty_value < out[g * starts + *best].report->penalty_value) best = s;
    }

    if (best) {
      const auto& o = out[g * starts + *best];
      const auto& rep = *o.report;
      r.status = to_string(rep.status);
      r.message = rep.message;
      r.best_start = static_cast<std::uint32_t>(*best);
      r.u_final = rep.u_final;
      r.rounded = rep.rounded;
      r.delta = rep.delta;
      r.obj = rep.pi_at_solution;
      r.obj_round = rep.objective;
      r.penalty = rep.penalty_value;
      r.residual = rep.residual;
      r.iterations = rep.iterations;
      r.rejected_steps = rep.rejected_steps;
      r.tau0 = rep.tau0;
      r.tau_clamped = rep.tau_clamped;
      r.time = o.seconds;
      r.avg_iterations = iter_sum / double(iter_cnt);
      r.trajectory = rep.trajectory;
    } else {
      r.status = r.step_violations ? "step_condition_violated" : r.diverged ? "diverged" : "failed";
      r.message = first_problem;
    }

    const auto cert = bound_certificate(model);
    r.cert_bound = cert.bound;
    r.cert_simplified = cert.simplified_bound;
    r.cert_ok = std::isfinite(r.delta) && r.delta <= cert.simplified_bound;
    if (oracles[cell]) {
      const auto& orc = *oracles[cell];
      r.has_oracle = true;
      r.oracle_value = orc.value;
      r.oracle_best = orc.best;
      r.oracle_count = orc.count;
      r.oracle_time = oracle_secs[cell];
      if (best) r.errobj = errobj(ci.pi, r.u_final, orc);
    }
    if (cfg.record_timing) {
      r.timestamp = detail::utc_timestamp();
    } else {
      r.time = r.total_time = r.oracle_time = 0.0;
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline bool run_ok(const RunRecord& r) {
  return r.status == "converged" || r.status == "max_iters";
}

/// Writes the retained trajectory of a record as CSV.
inline void dump_trajectory(const RunRecord& r, const std::string& path) {
  if (r.trajectory.points.empty())
    throw std::runtime_error("no trajectory retained for this run; enable retain_trajectory "
                             "(CLI: --dump-traj) and run again");
  write_text(path, trajectory_csv(r.trajectory));
}

struct TableOutput {
  std::string csv;
  std::vector<std::string> warnings;
};

inline bool known_layout(const std::string& layout) {
  return layout == "table1" || layout == "table3" || layout == "table4";
}

/// One row per (n, d) plus an average row. The records must share one
/// epsilon value.
inline TableOutput emit_table(const std::vector<RunRecord>& records, const std::string& layout) {
  if (!known_layout(layout))
    throw std::invalid_argument("unknown table layout '" + layout + "' (expected table1|table3|table4)");
  if (records.empty()) throw std::invalid_argument("emit_table: no records");
  const double eps = records.front().epsilon;
  for (const auto& r : records)
    if (r.epsilon != eps)
      throw std::invalid_argument("emit_table: records span several epsilon values; select one");

  std::vector<std::string> schemes;
  for (auto s : {Scheme::Houbolt, Scheme::Lie, Scheme::Rk45}) {
    const std::string name = to_string(s);
    for (const auto& r : records)
      if (r.scheme == name) {
        schemes.push_back(name);
        break;
      }
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::map<std::string, const RunRecord*>> cells;
  for (const auto& r : records) cells[{r.n, r.d}][r.scheme] = &r;

  std::vector<std::string> fields;
  if (layout == "table1") fields = {"obj", "iter", "time", "delta"};
  if (layout == "table3") fields = {"obj", "avgiter", "tt", "delta"};
  if (layout == "table4") fields = {"errobj"};
  const bool exhaustive = layout == "table3";

  auto value = [&](const RunRecord& r, const std::string& f) -> double {
    if (f == "obj") return r.obj;
    if (f == "iter") return run_ok(r) ? double(r.iterations) : NAN;
    if (f == "avgiter") return r.avg_iterations;
    if (f == "time") return r.time;
    if (f == "tt") return r.total_time;
    if (f == "delta") return r.delta;
    if (f == "errobj") return r.has_oracle ? r.errobj : NAN;
    return NAN;
  };

  TableOutput out;
  out.csv = "# boolflow table v" + std::to_string(kTableVersion) + " layout=" + layout +
            " epsilon=" + format_double(eps) + "\n";
  std::string header = "n,d";
  for (const auto& s : schemes)
    for (const auto& f : fields) header += "," + s + "_" + f;
  if (exhaustive) header += ",exhaustive_obj,exhaustive_time";
  out.csv += header + "\n";

  const std::size_t ncol = schemes.size() * fields.size() + (exhaustive ? 2 : 0);
  std::vector<double> sum(ncol, 0.0);
  std::vector<std::size_t> cnt(ncol, 0);
  auto cell_text = [&](std::size_t col, double v) -> std::string {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : format_double(v);
    sum[col] += v;
    ++cnt[col];
    return format_double(v);
  };

  for (const auto& [key, by_scheme] : cells) {
    std::string row = std::to_string(key.first) + "," + std::to_string(key.second);
    std::size_t col = 0;
    const RunRecord* any = nullptr;
    for (const auto& s : schemes) {
      const auto it = by_scheme.find(s);
      if (it == by_scheme.end()) {
        out.warnings.push_back("missing " + s + " record for n=" + std::to_string(key.first) +
                               " d=" + std::to_string(key.second));
        for (std::size_t f = 0; f < fields.size(); ++f, ++col) row += ",";
        continue;
      }
      any = it->second;
      for (const auto& f : fields) row += "," + cell_text(col++, value(*it->second, f));
    }
    if (exhaustive) {
      if (any && any->has_oracle) {
        row += "," + cell_text(col, any->oracle_value);
        row += "," + cell_text(col + 1, any->oracle_time);
      } else {
        out.warnings.push_back("no oracle for n=" + std::to_string(key.first) +
                               " d=" + std::to_string(key.second));
        row += ",,";
      }
    }
    out.csv += row + "\n";
  }
  std::string avg = "average,";
  for (std::size_t col = 0; col < ncol; ++col)
    avg += "," + (cnt[col] ? format_double(sum[col] / double(cnt[col])) : std::string());
  out.csv += avg + "\n";
  return out;
}

enum class SweepAxis { Epsilon, Gamma, M, C, Tau };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "epsilon" || s == "eps") return SweepAxis::Epsilon;
  if (s == "gamma") return SweepAxis::Gamma;
  if (s == "m") return SweepAxis::M;
  if (s == "c") return SweepAxis::C;
  if (s == "tau") return SweepAxis::Tau;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (expected epsilon|gamma|m|c|tau)");
}

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Epsilon: return "epsilon";
    case SweepAxis::Gamma: return "gamma";
    case SweepAxis::M: return "m";
    case SweepAxis::C: return "c";
    case SweepAxis::Tau: return "tau";
  }
  return "?";
}

inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::Epsilon: cfg.epsilons = {v}; break;
    case SweepAxis::Gamma: cfg.gamma = v; break;
    case SweepAxis::M: cfg.m = v; break;
    case SweepAxis::C: cfg.c = v; break;
    case SweepAxis::Tau: cfg.tau0 = v; break;
  }
  return cfg;
}

struct SweepRow {
  std::string scheme;
  double value = 0.0;
  std::size_t runs = 0;
  std::size_t ok = 0;
  double median_delta = NAN;
  double mean_iterations = NAN;
  /// Fraction of cells whose rounded vector equals the one at the first value.
  double agreement = NAN;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Epsilon;
  std::vector<double> values;
  std::vector<RunRecord> records;
  std::vector<SweepRow> rows;
  /// Per scheme: "increasing", "decreasing", "nonincreasing", "nondecreasing"
  /// or "none", for median delta and mean iterations along the axis.
  std::map<std::string, std::string> delta_trend, iteration_trend;
};

inline std::string trend(const std::vector<double>& v) {
  if (v.size() < 2) return "none";
  bool inc = true, dec = true, ninc = true, ndec = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) inc = false;
    if (!(v[i] < v[i - 1])) dec = false;
    if (!(v[i] <= v[i - 1])) ninc = false;
    if (!(v[i] >= v[i - 1])) ndec = false;
  }
  if (dec) return "decreasing";
  if (inc) return "increasing";
  if (ninc) return "nonincreasing";
  if (ndec) return "nondecreasing";
  return "none";
}

inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const auto k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

/// Runs the config once per axis value with everything else fixed.
inline SweepResult parameter_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                                   const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("parameter_sweep: no axis values");
  SweepResult res;
  res.axis = axis;
  res.values = values;
  std::vector<std::vector<RunRecord>> per_value;
  for (double v : values) {
    auto recs = run_experiment(with_axis_value(cfg, axis, v));
    for (auto& r : recs) {
      r.sweep_axis = to_string(axis);
      r.sweep_value = v;
    }
    per_value.push_back(recs);
    res.records.insert(res.records.end(), recs.begin(), recs.end());
  }
  for (auto s : cfg.schemes) {
    const std::string name = to_string(s);
    std::vector<double> deltas, iters;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
      SweepRow row;
      row.scheme = name;
      row.value = values[vi];
      std::vector<double> ds;
      double isum = 0.0;
      std::size_t agree = 0, compared = 0;
      for (std::size_t i = 0; i < per_value[vi].size(); ++i) {
        const auto& r = per_value[vi][i];
        if (r.scheme != name) continue;
        ++row.runs;
        if (!run_ok(r)) continue;
        ++row.ok;
        ds.push_back(r.delta);
        isum += double(r.iterations);
        const auto& first = per_value[0][i];
        if (run_ok(first)) {
          ++compared;
          agree += first.rounded == r.rounded;
        }
      }
      row.median_delta = median(ds);
      row.mean_iterations = row.ok ? isum / double(row.ok) : NAN;
      row.agreement = compared ? double(agree) / double(compared) : NAN;
      deltas.push_back(row.median_delta);
      iters.push_back(row.mean_iterations);
      res.rows.push_back(row);
    }
    res.delta_trend[name] = trend(deltas);
    res.iteration_trend[name] = trend(iters);
  }
  return res;
}

inline std::string sweep_summary_csv(const SweepResult& s) {
  std::string out = "# boolflow sweep v" + std::to_string(kTableVersion) + " axis=" + to_string(s.axis) + "\n";
  out += "scheme,value,runs,ok,median_delta,mean_iterations,agreement_with_first\n";
  for (const auto& r : s.rows) {
    out += r.scheme + "," + format_double(r.value) + "," + std::to_string(r.runs) + "," +
           std::to_string(r.ok) + "," + format_double(r.median_delta) + "," +
           format_double(r.mean_iterations) + "," + format_double(r.agreement) + "\n";
  }
  for (const auto& [scheme, t] : s.delta_trend)
    out += "# trend " + scheme + " median_delta=" + t + " mean_iterations=" + s.iteration_trend.at(scheme) + "\n";
  return out;
}

}  // namespace boolflow
