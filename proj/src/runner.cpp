#include "submfg/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "submfg/equilibrium.hpp"
#include "submfg/errors.hpp"
#include "submfg/report.hpp"
#include "submfg/riccati.hpp"

namespace submfg {

namespace {

namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

struct RunContext {
  const RunConfig& cfg;
  fs::path dir;
  bool verbose = false;
  clock_type::time_point started = clock_type::now();

  void log(const std::string& msg) const {
    if (verbose) std::cerr << msg << "\n";
  }
  double elapsed_s() const {
    return std::chrono::duration<double>(clock_type::now() - started).count();
  }
  std::string file(const char* name) const { return (dir / name).string(); }
};

fs::path resolve_run_dir(const RunConfig& cfg, const RunnerOptions& opts) {
  fs::path dir = opts.output_override.empty() ? fs::path(cfg.outputs.directory)
                                              : fs::path(opts.output_override);
  const char* root = std::getenv("SUBMFG_OUTPUT_ROOT");
  if (root && *root && dir.is_relative()) dir = fs::path(root) / dir;
  return dir;
}

ojson base_run_doc(const RunContext& ctx, const std::string& subcommand,
                   const NoisePlan* plan) {
  ojson j;
  j["version"] = version_string();
  j["build"] = build_hash();
  j["subcommand"] = subcommand;
  j["model"] = ctx.cfg.model.name;
  if (plan) j["plan_fingerprint"] = fingerprint_hex(plan->fingerprint());
  j["seed"] = ctx.cfg.ensemble.seed;
  j["grid"] = {{"T", ctx.cfg.grid.horizon}, {"n_steps", ctx.cfg.grid.n_steps}};
  j["ensemble"] = {{"n_outer", ctx.cfg.ensemble.n_outer},
                   {"n_inner", ctx.cfg.ensemble.n_inner}};
  j["threads"] = ctx.cfg.threads;
  return j;
}

void finish_run_doc(const RunContext& ctx, ojson& j, int exit_code) {
  j["wall_seconds"] = ctx.elapsed_s();
  j["exit_code"] = exit_code;
  write_json_file(ctx.file("run.json"), j);
}

void write_bundles(const RunContext& ctx, const PathBundle& x,
                   const PathBundle* y) {
  switch (ctx.cfg.outputs.bundles) {
    case OutputConfig::Bundles::None:
      return;
    case OutputConfig::Bundles::Csv:
      write_bundle_csv(x, ctx.file("states.csv"), "x");
      if (y) write_bundle_csv(*y, ctx.file("adjoint.csv"), "y");
      return;
    case OutputConfig::Bundles::Binary:
      write_bundle_bin(x, ctx.file("states.bin"));
      if (y) write_bundle_bin(*y, ctx.file("adjoint.bin"));
      return;
  }
}

/// Enforce the built-in family's structural conditions before any compute
/// subcommand; `check` instead reports them.
bool lq_conditions_ok(const RunContext& ctx, ojson& run_doc) {
  if (!ctx.cfg.lq_family) return true;
  LqBuildReport rep = check_lq_conditions(ctx.cfg.lq);
  if (rep.pass) return true;
  run_doc["lq_conditions"] = to_json(rep);
  ctx.log("structural conditions fail; refusing to run the solver");
  return false;
}

// ---------------------------------------------------------------------------

int run_check(const RunContext& ctx) {
  NoisePlan plan = make_plan(ctx.cfg);
  ojson run_doc = base_run_doc(ctx, "check", &plan);

  bool pass = true;
  ojson report;
  LqBuildReport lq;
  if (ctx.cfg.lq_family) {
    lq = check_lq_conditions(ctx.cfg.lq);
    report["family_conditions"] = to_json(lq);
    pass = pass && lq.pass;
    ctx.log(std::string("family conditions: ") + (lq.pass ? "pass" : "FAIL"));
  }
  AssumptionReport suite = check_assumption_suite(ctx.cfg.model);
  report["assumptions"] = to_json(suite);
  pass = pass && suite.pass;
  for (const auto& c : suite.checks)
    ctx.log("  " + c.name + ": " + (c.pass ? "pass" : "FAIL"));

  RegularityReport reg = validate_regularity(ctx.cfg.model);
  report["regularity"] = to_json(reg);
  pass = pass && reg.pass;
  ctx.log(std::string("regularity: ") + (reg.pass ? "pass" : "FAIL"));

  write_json_file(ctx.file("check.json"), report);

  std::vector<std::vector<std::string>> rows;
  if (ctx.cfg.lq_family) {
    for (const auto& name : lq.conditions_checked) {
      bool ok = true;
      for (const auto& v : lq.violations)
        if (v.condition == name) ok = false;
      rows.push_back({name, ok ? "1" : "0", "", ""});
    }
  }
  for (const auto& c : suite.checks)
    rows.push_back({c.name, c.pass ? "1" : "0", format_number(c.worst),
                    std::to_string(c.n_evaluated)});
  write_table_csv(ctx.file("summary.csv"),
                  {"check", "pass", "worst", "n_evaluated"}, rows);

  run_doc["pass"] = pass;
  const int code = pass ? kExitOk : kExitAssertion;
  finish_run_doc(ctx, run_doc, code);
  return code;
}

SummaryTable constant_table(const RunConfig& cfg, const TimeGrid& grid,
                            const Eigen::VectorXd& values) {
  if (cfg.model.interaction.kind == InteractionSpec::Kind::Order1Kernel)
    throw ConfigError("flow.kind",
                      "a constant summary flow is unavailable for order-1 "
                      "kernels; use lower-bracket or upper-bracket");
  std::vector<Eigen::VectorXd> cells(
      static_cast<std::size_t>(cfg.ensemble.n_outer) * grid.n_points(), values);
  return SummaryTable(grid, cfg.ensemble.n_outer, std::move(cells));
}

int run_solve(const RunContext& ctx) {
  NoisePlan plan = make_plan(ctx.cfg);
  ojson run_doc = base_run_doc(ctx, "solve", &plan);
  if (!lq_conditions_ok(ctx, run_doc)) {
    finish_run_doc(ctx, run_doc, kExitAssertion);
    return kExitAssertion;
  }

  // the table may reference the flow, so both live through the solve
  ConditionalLawFlow flow;
  SummaryTable table;
  switch (ctx.cfg.flow.kind) {
    case FlowConfig::Kind::Constant:
      table = constant_table(ctx.cfg, plan.grid(), ctx.cfg.flow.values);
      break;
    case FlowConfig::Kind::LowerBracket:
      flow = conditional_empirical_law(
          lower_bound_process(ctx.cfg.model, plan, ctx.cfg.threads));
      table = SummaryTable(flow, ctx.cfg.model.interaction);
      break;
    case FlowConfig::Kind::UpperBracket:
      flow = conditional_empirical_law(
          upper_bound_process(ctx.cfg.model, plan, ctx.cfg.threads));
      table = SummaryTable(flow, ctx.cfg.model.interaction);
      break;
  }

  PicardSettings settings = picard_settings(ctx.cfg);
  PicardResult pr;
  try {
    pr = solve_fbsde_picard(ctx.cfg.model, plan, table, settings);
  } catch (const ConvergenceError& e) {
    run_doc["error"] = e.what();
    run_doc["change_history"] = e.history;
    finish_run_doc(ctx, run_doc, kExitNumerical);
    return kExitNumerical;
  }

  Eigen::VectorXd y0_mean = Eigen::VectorXd::Zero(ctx.cfg.model.d);
  for (int o = 0; o < plan.n_outer(); ++o)
    for (int i = 0; i < plan.n_inner(); ++i)
      y0_mean += pr.adjoint.y.state(o, i, 0);
  y0_mean /= plan.n_paths();

  run_doc["picard_iterations"] = pr.iterations;
  run_doc["final_change"] = pr.final_change;
  run_doc["converged"] = pr.converged;
  run_doc["ridge_fallbacks"] = pr.adjoint.ridge_fallbacks;
  run_doc["solver_warnings"] = pr.adjoint.warnings;
  {
    ojson arr = ojson::array();
    for (int i = 0; i < y0_mean.size(); ++i) arr.push_back(y0_mean(i));
    run_doc["y0_mean"] = arr;
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < pr.change_history.size(); ++i)
    rows.push_back({static_cast<double>(i + 1), pr.change_history[i]});
  write_table_csv(ctx.file("summary.csv"), {"iter", "change"}, rows);
  write_bundles(ctx, pr.x,
                ctx.cfg.outputs.write_adjoint ? &pr.adjoint.y : nullptr);

  ctx.log("solve: " + std::to_string(pr.iterations) + " sweeps, change " +
          format_number(pr.final_change));
  finish_run_doc(ctx, run_doc, kExitOk);
  return kExitOk;
}

int equilibrium_exit_code(const EquilibriumRun& run) {
  if (run.stop == StopReason::Divergence) return kExitNumerical;
  if (run.flagged) return kExitAssertion;
  if (run.stop == StopReason::MaxIters) return kExitNumerical;
  return kExitOk;
}

int run_equilibrium(const RunContext& ctx, bool averaged) {
  NoisePlan plan = make_plan(ctx.cfg);
  ojson run_doc = base_run_doc(ctx, averaged ? "fp" : "iterate", &plan);
  if (!lq_conditions_ok(ctx, run_doc)) {
    finish_run_doc(ctx, run_doc, kExitAssertion);
    return kExitAssertion;
  }

  EquilibriumRun run;
  if (averaged)
    run = fictitious_play(ctx.cfg.model, plan, ctx.cfg.equilibrium.direction,
                          fictitious_play_settings(ctx.cfg));
  else
    run = iterate_best_reply(ctx.cfg.model, plan, ctx.cfg.equilibrium.direction,
                             equilibrium_settings(ctx.cfg));

  for (const auto& s : run.history)
    ctx.log((averaged ? "round " : "iter ") + std::to_string(s.iter) +
            ": distance " + format_number(s.distance) + ", violation " +
            format_number(s.violation));
  for (const auto& w : run.warnings) ctx.log("warning: " + w);

  for (ojson doc = run_to_json(run); const auto& [key, value] : doc.items())
    run_doc[key] = value;
  write_history_csv(ctx.file("summary.csv"), run.history);
  write_history_jsonl(ctx.file("iterations.jsonl"), run.history);
  const bool have_adjoint =
      ctx.cfg.outputs.write_adjoint && run.adjoint.y.n_outer() > 0;
  write_bundles(ctx, run.x, have_adjoint ? &run.adjoint.y : nullptr);

  const int code = equilibrium_exit_code(run);
  finish_run_doc(ctx, run_doc, code);
  return code;
}

int run_compare(const RunContext& ctx) {
  NoisePlan plan = make_plan(ctx.cfg);
  ojson run_doc = base_run_doc(ctx, "compare", &plan);
  if (!lq_conditions_ok(ctx, run_doc)) {
    finish_run_doc(ctx, run_doc, kExitAssertion);
    return kExitAssertion;
  }

  PathBundle base =
      ctx.cfg.compare.base.kind == FlowConfig::Kind::UpperBracket
          ? upper_bound_process(ctx.cfg.model, plan, ctx.cfg.threads)
          : lower_bound_process(ctx.cfg.model, plan, ctx.cfg.threads);
  ConditionalLawFlow flow_low = conditional_empirical_law(base);
  ConditionalLawFlow flow_high = shift_flow(flow_low, ctx.cfg.compare.shift);

  ComparisonReport rep;
  try {
    rep = comparison_harness(ctx.cfg.model, plan, flow_low, flow_high,
                             picard_settings(ctx.cfg), ctx.cfg.compare.tol_scale);
  } catch (const ConvergenceError& e) {
    run_doc["error"] = e.what();
    finish_run_doc(ctx, run_doc, kExitNumerical);
    return kExitNumerical;
  }

  run_doc["comparison"] = to_json(rep);
  write_table_csv(ctx.file("summary.csv"),
                  {"v_state", "max_state", "v_adjoint", "max_adjoint",
                   "tolerance", "pass"},
                  {{rep.v_state, rep.max_state, rep.v_adjoint, rep.max_adjoint,
                    rep.tolerance, rep.pass ? 1.0 : 0.0}});
  ctx.log("comparison violation " + format_number(rep.v_state) +
          " against tolerance " + format_number(rep.tolerance));

  const int code = rep.pass ? kExitOk : kExitAssertion;
  finish_run_doc(ctx, run_doc, code);
  return code;
}

int run_bench(const RunContext& ctx) {
  if (!ctx.cfg.lq_family || ctx.cfg.lq.variant != 1)
    throw ConfigError("model.family",
                      "bench needs the separable quadratic family "
                      "(lq-example-1): its value function is exactly "
                      "linear-quadratic under a frozen summary");
  if (ctx.cfg.flow.kind != FlowConfig::Kind::Constant)
    throw ConfigError("flow.kind", "bench freezes the flow; use the constant "
                                   "kind");

  NoisePlan base_plan = make_plan(ctx.cfg);
  ojson run_doc = base_run_doc(ctx, "bench", &base_plan);
  if (!lq_conditions_ok(ctx, run_doc)) {
    finish_run_doc(ctx, run_doc, kExitAssertion);
    return kExitAssertion;
  }

  const Eigen::VectorXd frozen = ctx.cfg.flow.values;
  LqControlData data = lq_control_data_variant1(
      ctx.cfg.lq, [frozen](double) { return frozen; });

  bool pass = true;
  std::vector<std::string> failures;
  std::vector<std::vector<double>> rows;
  ojson cases = ojson::array();
  std::vector<double> mean_errs;

  for (const auto& [n_steps, n_inner] : ctx.cfg.bench.refinements) {
    TimeGrid grid(ctx.cfg.grid.horizon, n_steps);
    NoisePlan plan(ctx.cfg.ensemble.seed, grid, ctx.cfg.ensemble.n_outer,
                   n_inner, ctx.cfg.model.d1, ctx.cfg.model.d2,
                   ctx.cfg.model.initial);
    SummaryTable table = constant_table(ctx.cfg, grid, frozen);

    PicardResult pr;
    try {
      pr = solve_fbsde_picard(ctx.cfg.model, plan, table,
                              picard_settings(ctx.cfg));
    } catch (const ConvergenceError& e) {
      run_doc["error"] = e.what();
      finish_run_doc(ctx, run_doc, kExitNumerical);
      return kExitNumerical;
    }
    RiccatiSolution oracle = riccati_oracle(data, grid);

    // ensemble-mean adjoint at time zero against the affine oracle
    Eigen::VectorXd y0_mean = Eigen::VectorXd::Zero(ctx.cfg.model.d);
    Eigen::VectorXd oracle_mean = Eigen::VectorXd::Zero(ctx.cfg.model.d);
    double path_num = 0.0, path_den = 0.0;
    for (int o = 0; o < plan.n_outer(); ++o)
      for (int i = 0; i < plan.n_inner(); ++i) {
        y0_mean += pr.adjoint.y.state(o, i, 0);
        oracle_mean += oracle.adjoint(0, pr.x.state(o, i, 0));
        for (int s = 0; s <= grid.n_steps; ++s) {
          const Eigen::VectorXd ref = oracle.adjoint(s, pr.x.state(o, i, s));
          const double w = grid.quad_weight(s);
          path_num += w * (pr.adjoint.y.state(o, i, s) - ref).squaredNorm();
          path_den += w * ref.squaredNorm();
        }
      }
    y0_mean /= plan.n_paths();
    oracle_mean /= plan.n_paths();

    const double denom = std::max(oracle_mean.norm(), 1e-12);
    const double mean_err = (y0_mean - oracle_mean).norm() / denom;
    const double path_err = std::sqrt(path_num / std::max(path_den, 1e-12));
    mean_errs.push_back(mean_err);

    ojson c;
    c["n_steps"] = n_steps;
    c["n_inner"] = n_inner;
    {
      ojson a = ojson::array(), b = ojson::array();
      for (int i = 0; i < y0_mean.size(); ++i) {
        a.push_back(y0_mean(i));
        b.push_back(oracle_mean(i));
      }
      c["y0_mean"] = a;
      c["y0_oracle"] = b;
    }
    c["y0_mean_rel_err"] = mean_err;
    c["y_path_rel_err"] = path_err;
    c["picard_iterations"] = pr.iterations;
    cases.push_back(c);
    rows.push_back({static_cast<double>(n_steps), static_cast<double>(n_inner),
                    y0_mean.norm(), oracle_mean.norm(), mean_err, path_err,
                    static_cast<double>(pr.iterations)});
    ctx.log("bench n_steps=" + std::to_string(n_steps) +
            " n_inner=" + std::to_string(n_inner) + ": y0 rel err " +
            format_number(mean_err));

    if (mean_err > ctx.cfg.bench.max_rel_error) {
      pass = false;
      failures.push_back("relative error " + format_number(mean_err) +
                         " at n_steps=" + std::to_string(n_steps) +
                         " exceeds " +
                         format_number(ctx.cfg.bench.max_rel_error));
    }
  }

  if (ctx.cfg.bench.require_improvement && mean_errs.size() >= 2 &&
      !(mean_errs.back() < mean_errs.front())) {
    pass = false;
    failures.push_back("refinement did not reduce the relative error (" +
                       format_number(mean_errs.front()) + " -> " +
                       format_number(mean_errs.back()) + ")");
  }

  run_doc["cases"] = cases;
  run_doc["pass"] = pass;
  run_doc["failures"] = failures;
  write_table_csv(ctx.file("summary.csv"),
                  {"n_steps", "n_inner", "y0_mean_norm", "y0_oracle_norm",
                   "y0_mean_rel_err", "y_path_rel_err", "picard_iters"},
                  rows);

  const int code = pass ? kExitOk : kExitAssertion;
  finish_run_doc(ctx, run_doc, code);
  return code;
}

}  // namespace

int run_command(const std::string& subcommand, const RunnerOptions& opts) {
  RunConfig cfg;
  try {
    cfg = load_config_file(opts.config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  fs::path dir = resolve_run_dir(cfg, opts);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "cannot create run directory " << dir << ": " << ec.message()
              << "\n";
    return kExitConfig;
  }

  RunContext ctx{cfg, dir, opts.verbose};
  write_json_file(ctx.file("config.json"), cfg.snapshot);
  ctx.log("run directory: " + dir.string());

  try {
    if (subcommand == "check") return run_check(ctx);
    if (subcommand == "solve") return run_solve(ctx);
    if (subcommand == "iterate") return run_equilibrium(ctx, false);
    if (subcommand == "fp") return run_equilibrium(ctx, true);
    if (subcommand == "compare") return run_compare(ctx);
    if (subcommand == "bench") return run_bench(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  std::cerr << "unknown subcommand: " << subcommand << "\n";
  return kExitConfig;
}

}  // namespace submfg
