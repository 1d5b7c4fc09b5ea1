// boolflow command-line driver.
//
//   boolflow generate --n N --d D [--coeff-lo L --coeff-hi H --sparsity S] --seed S --out FILE
//   boolflow solve    --in FILE [--scheme houbolt|lie|rk45] [--eps E --c C --gamma G --m M]
//                     [--tau-mode fixed|variable] [--starts K] [--seed S] [--out FILE]
//                     [--dump-traj FILE]
//   boolflow oracle   --in FILE [--max-n 24] [--json]
//   boolflow sweep    --config FILE [--axis A --values v1,v2,...] [--seed S] [--workers W]
//                     [--out LOG] [--table CSV --layout L]
//   boolflow table    --log FILE --layout table1|table3|table4 [--eps E] [--out CSV]
//   boolflow traj     --in FILE [solver flags] --out CSV [--json]
//
// Exit status: 0 on success, 2 when any run diverged or failed, 1 on usage or
// input errors.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "boolflow/harness.hpp"
#include "boolflow/instance_io.hpp"
#include "boolflow/integrators.hpp"
#include "boolflow/oracle_metrics.hpp"
#include "boolflow/trajectory_io.hpp"

namespace bf = boolflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;

struct SolverFlags {
  std::string in;
  std::string scheme = "houbolt";
  std::optional<double> eps, c;
  double gamma = 50.0, m = 1.0, theta = 0.8, t_final = 1.0, tol = 1e-6;
  std::optional<double> tau0, tau_star;
  std::string tau_mode = "fixed";
  unsigned starts = 1;
  std::uint64_t seed = 1;
  long max_iters = 100000;

  void add(CLI::App* app) {
    app->add_option("--in", in, "Instance file")->required()->check(CLI::ExistingFile);
    app->add_option("--scheme", scheme, "houbolt|lie|rk45");
    app->add_option("--eps", eps, "Penalty parameter (default: instance penalty block or 1e-4)");
    app->add_option("--c", c, "Regularization c (default: instance penalty block or 100)");
    app->add_option("--gamma", gamma, "Damping");
    app->add_option("--m", m, "Mass");
    app->add_option("--tau-mode", tau_mode, "fixed|variable (Lie)");
    app->add_option("--tau0", tau0, "Initial step override");
    app->add_option("--theta", theta, "Step reduction ratio (variable tau)");
    app->add_option("--tau-star", tau_star, "Step floor (variable tau)");
    app->add_option("--t-final", t_final, "RK horizon");
    app->add_option("--tol", tol, "Step tolerance");
    app->add_option("--max-iters", max_iters, "Iteration cap");
    app->add_option("--starts", starts, "Random starts (1: start at 0)");
    app->add_option("--seed", seed, "Seed of the random starts");
  }

  bf::SchemeParams params() const {
    bf::SchemeParams p;
    p.m = m;
    p.gamma = gamma;
    p.tau0 = tau0;
    p.tau_mode = bf::parse_tau_mode(tau_mode);
    p.theta = theta;
    p.tau_star = tau_star;
    p.t_final = t_final;
    p.tol_step = tol;
    p.max_iters = max_iters;
    return p;
  }

  bf::PenaltyModel model(const bf::InstanceFile& f) const {
    const auto pen = f.penalty.value_or(bf::PenaltyBlock{});
    return bf::PenaltyModel(bf::problem_of(f), eps.value_or(pen.epsilon), c.value_or(pen.c), pen.r);
  }
};

nlohmann::json report_json(const bf::SolveReport& r) {
  using bf::detail::num_json;
  nlohmann::json u = nlohmann::json::array();
  for (double x : r.u_final) u.push_back(num_json(x));
  return nlohmann::json{{"scheme", bf::to_string(r.scheme)},
                        {"status", bf::to_string(r.status)},
                        {"message", r.message},
                        {"u_final", u},
                        {"rounded", r.rounded},
                        {"delta", num_json(r.delta)},
                        {"objective", num_json(r.objective)},
                        {"pi_at_solution", num_json(r.pi_at_solution)},
                        {"penalty", num_json(r.penalty_value)},
                        {"residual", num_json(r.residual)},
                        {"iterations", r.iterations},
                        {"rejected_steps", r.rejected_steps},
                        {"tau0", r.tau0},
                        {"tau_clamped", r.tau_clamped},
                        {"wall_seconds", r.wall_seconds}};
}

bool bad_status(bf::Status s) { return s == bf::Status::Diverged || s == bf::Status::StepConditionViolated; }

// Runs the configured solve; multistart when more than one start is requested.
bf::SolveReport run_solver(const SolverFlags& f, const bf::InstanceFile& inst, bool retain,
                           std::size_t* best_start = nullptr) {
  const auto model = f.model(inst);
  auto p = f.params();
  const auto scheme = bf::parse_scheme(f.scheme);
  const auto n = model.nvars();
  const bf::Vec zero(n, 0.0);
  if (f.starts <= 1) {
    p.retain_trajectory = retain;
    return bf::solve(scheme, model, p, zero, zero);
  }
  const auto ms = bf::multistart(scheme, model, p, f.starts, f.seed, bf::default_workers());
  if (best_start) *best_start = ms.best_index;
  if (!retain) return ms.best();
  p.retain_trajectory = true;  // replay the selected start; solves are deterministic
  return bf::solve(scheme, model, p, bf::random_start(n, f.seed, ms.best_index), zero);
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    bf::write_text(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boolean polynomial minimization by quartic-penalty flows"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a seeded random instance");
  bf::InstanceSpec spec;
  std::string gen_out;
  std::optional<double> gen_eps, gen_c;
  gen->add_option("--n", spec.nvars, "Number of variables")->required();
  gen->add_option("--d", spec.degree, "Degree")->required();
  gen->add_option("--coeff-lo", spec.coeff_lo, "Smallest coefficient");
  gen->add_option("--coeff-hi", spec.coeff_hi, "Largest coefficient");
  gen->add_option("--sparsity", spec.sparsity, "Retention probability in (0,1]");
  gen->add_option("--seed", spec.seed, "Generator seed")->required();
  gen->add_option("--eps", gen_eps, "Embed a penalty block with this epsilon");
  gen->add_option("--c", gen_c, "Embed a penalty block with this c");
  gen->add_option("--out", gen_out, "Output file (default stdout)");

  // solve / traj
  auto* sol = app.add_subcommand("solve", "Solve one instance");
  SolverFlags sf;
  sf.add(sol);
  std::string sol_out, sol_traj;
  sol->add_option("--out", sol_out, "Report file (JSON, default stdout)");
  sol->add_option("--dump-traj", sol_traj, "Write the trajectory CSV of the reported run");

  auto* trj = app.add_subcommand("traj", "Solve one instance and write its trajectory");
  SolverFlags tf;
  tf.add(trj);
  std::string trj_out;
  bool trj_json = false;
  trj->add_option("--out", trj_out, "Trajectory file (default stdout)");
  trj->add_flag("--json", trj_json, "JSON instead of CSV");

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exhaustive minimum over {-1,1}^n");
  std::string orc_in;
  std::uint32_t orc_max = 24;
  bool orc_json = false;
  orc->add_option("--in", orc_in, "Instance file")->required()->check(CLI::ExistingFile);
  orc->add_option("--max-n", orc_max, "Refuse instances with more variables");
  orc->add_flag("--json", orc_json, "JSON output");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Run an experiment grid or a one-axis parameter sweep");
  std::string swp_cfg, swp_axis, swp_values, swp_out, swp_table, swp_layout, swp_summary;
  std::optional<std::uint64_t> swp_seed;
  std::optional<std::size_t> swp_workers;
  swp->add_option("--config", swp_cfg, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  swp->add_option("--axis", swp_axis, "epsilon|gamma|m|c|tau");
  swp->add_option("--values", swp_values, "Comma-separated axis values");
  swp->add_option("--seed", swp_seed, "Override the master seed");
  swp->add_option("--workers", swp_workers, "Worker threads (0: all cores)");
  swp->add_option("--out", swp_out, "Run log (JSON lines); default from config");
  swp->add_option("--table", swp_table, "Table CSV; default from config");
  swp->add_option("--layout", swp_layout, "table1|table3|table4");
  swp->add_option("--summary", swp_summary, "Sweep summary CSV (with --axis)");

  // table
  auto* tab = app.add_subcommand("table", "Build a CSV table from a run log");
  std::string tab_log, tab_layout = "table1", tab_out;
  std::optional<double> tab_eps;
  tab->add_option("--log", tab_log, "Run log")->required()->check(CLI::ExistingFile);
  tab->add_option("--layout", tab_layout, "table1|table3|table4");
  tab->add_option("--eps", tab_eps, "Keep records with this epsilon");
  tab->add_option("--out", tab_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      bf::InstanceFile f{bf::random_poly(spec), bf::Domain::Sign, spec, std::nullopt};
      if (gen_eps || gen_c) f.penalty = bf::PenaltyBlock{gen_eps.value_or(1e-4), gen_c.value_or(100.0), 0.0};
      emit(gen_out, bf::serialize_instance(f));
      return kExitOk;
    }

    if (*sol) {
      const auto inst = bf::read_instance(sf.in);
      std::size_t best = 0;
      bf::SolveReport rep;
      try {
        rep = run_solver(sf, inst, !sol_traj.empty(), &best);
      } catch (const std::runtime_error& e) {
        std::cerr << "error: run failed: " << e.what() << "\n";
        return kExitDiverged;
      }
      auto j = report_json(rep);
      if (sf.starts > 1) j["best_start"] = best;
      emit(sol_out, j.dump(2) + "\n");
      if (!sol_traj.empty()) bf::write_text(sol_traj, bf::trajectory_csv(rep.trajectory));
      return bad_status(rep.status) ? kExitDiverged : kExitOk;
    }

    if (*trj) {
      const auto inst = bf::read_instance(tf.in);
      bf::SolveReport rep;
      try {
        rep = run_solver(tf, inst, true);
      } catch (const std::runtime_error& e) {
        std::cerr << "error: run failed: " << e.what() << "\n";
        return kExitDiverged;
      }
      emit(trj_out, trj_json ? bf::trajectory_json(rep.trajectory).dump() + "\n"
                             : bf::trajectory_csv(rep.trajectory));
      return bad_status(rep.status) ? kExitDiverged : kExitOk;
    }

    if (*orc) {
      const auto inst = bf::read_instance(orc_in);
      const auto problem = bf::problem_of(inst);
      const auto r = bf::exhaustive_min(problem.pm1(), orc_max, bf::default_workers());
      if (orc_json) {
        std::cout << nlohmann::json{{"value", r.value}, {"best", r.best}, {"count", r.count},
                                    {"visited", r.visited}}.dump() << "\n";
      } else {
        std::cout << "value " << bf::format_double(r.value) << "\nbest";
        for (int s : r.best) std::cout << ' ' << s;
        std::cout << "\ncount " << r.count << "\n";
      }
      return kExitOk;
    }

    if (*swp) {
      auto cfg = bf::read_config(swp_cfg);
      if (swp_seed) cfg.master_seed = *swp_seed;
      if (swp_workers) cfg.workers = *swp_workers;
      if (!swp_out.empty()) cfg.run_log = swp_out;
      if (!swp_table.empty()) cfg.table = swp_table;
      if (!swp_layout.empty()) cfg.layout = swp_layout;
      if (!cfg.table.empty() && !bf::known_layout(cfg.layout)) {
        std::cerr << "error: unknown table layout '" << cfg.layout << "'\n";
        return kExitUsage;
      }
      std::vector<bf::RunRecord> records;
      if (!swp_axis.empty()) {
        const auto values = parse_values(swp_values);
        if (values.empty()) {
          std::cerr << "error: --axis needs --values\n";
          return kExitUsage;
        }
        auto res = bf::parameter_sweep(cfg, bf::parse_axis(swp_axis), values);
        emit(swp_summary, bf::sweep_summary_csv(res));
        records = std::move(res.records);
      } else {
        records = bf::run_experiment(cfg);
      }
      if (!cfg.run_log.empty()) bf::write_text(cfg.run_log, bf::run_log_text(records));
      if (!cfg.table.empty()) {
        if (cfg.epsilons.size() > 1 || !swp_axis.empty()) {
          std::cerr << "warning: table skipped, the records span several parameter values\n";
        } else {
          const auto t = bf::emit_table(records, cfg.layout);
          for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
          bf::write_text(cfg.table, t.csv);
        }
      }
      bool bad = false;
      for (const auto& r : records) bad = bad || !bf::run_ok(r);
      std::cerr << records.size() << " records" << (bad ? ", some runs diverged or failed" : "") << "\n";
      return bad ? kExitDiverged : kExitOk;
    }

    if (*tab) {
      auto records = bf::read_run_log(tab_log);
      if (tab_eps) {
        std::erase_if(records, [&](const bf::RunRecord& r) { return r.epsilon != *tab_eps; });
      }
      const auto t = bf::emit_table(records, tab_layout);
      for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
      emit(tab_out, t.csv);
      return kExitOk;
    }
  } catch (const bf::AllStartsDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
