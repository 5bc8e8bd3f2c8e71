#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mfpm/config.hpp"
#include "mfpm/lq_oracle.hpp"
#include "mfpm/optimizer.hpp"
#include "mfpm/report.hpp"
#include "mfpm/validate.hpp"

namespace mfpm {

/// Exit codes shared by all commands.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2 };

struct CommandOptions {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

namespace detail {

inline std::filesystem::path prepare_output(RunConfig& cfg, const CommandOptions& opt)
{
  if (opt.out) cfg.outputs.directory = *opt.out;
  if (opt.seed) cfg.grid.seed = *opt.seed;
  std::filesystem::path dir(cfg.outputs.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

inline double convexity_lambda(const RunConfig& cfg)
{
  if (cfg.checks.lambda > 0.0) return cfg.checks.lambda;
  if (auto lq = lq_spec_of(cfg.problem)) {
    LQSpec s = *lq;
    s.validate();
    return s.lambda;
  }
  return 0.5;
}

inline bool wants_mfg(const RunConfig& cfg) { return cfg.solve.mode == SolveMode::mfg; }

}  // namespace detail

/// Runs the configured validators; exit 0 iff every check passes.
inline int cmd_validate(RunConfig cfg, const CommandOptions& opt, std::ostream& log = std::cout)
{
  const auto dir = detail::prepare_output(cfg, opt);
  const ProblemSpec p = build_problem(cfg.problem);
  json rep = report_header("validate", cfg, p);
  rep["checks"] = json::array();
  bool passed = true;
  auto add = [&](const CheckReport& r) {
    passed = passed && r.passed;
    rep["checks"].push_back(to_json(r));
    if (!opt.quiet) {
      log << (r.passed ? "PASS " : "FAIL ") << r.check;
      if (const CheckEntry* bad = r.first_failure()) log << " (" << bad->name << ", worst " << format_double(bad->worst) << ")";
      log << '\n';
    }
  };
  const auto& ch = cfg.checks;
  const std::uint64_t seed = cfg.grid.seed;
  if (ch.pointwise) add(validate_pointwise_derivatives(p, ch.samples, 1e-5, ch.tolerance, seed));
  if (ch.measure) {
    for (auto tag : {CoefficientTag::drift, CoefficientTag::volatility, CoefficientTag::running_cost, CoefficientTag::terminal_cost}) {
      const bool present = (tag == CoefficientTag::drift && p.drift) || (tag == CoefficientTag::volatility && p.volatility) ||
                           (tag == CoefficientTag::running_cost && p.running_cost) ||
                           (tag == CoefficientTag::terminal_cost && p.terminal_cost);
      if (present) add(validate_measure_derivative(p, tag, ch.samples, 1e-3, ch.tolerance, seed));
    }
  }
  if (ch.convexity != "none") {
    const auto mode = ch.convexity == "joint" ? ConvexityMode::joint : ConvexityMode::control_only;
    add(check_convexity_B3(p, mode, ch.samples, detail::convexity_lambda(cfg), seed));
  }
  if (ch.monotonicity == "displacement" || ch.monotonicity == "both")
    add(check_monotonicity(p, MonotonicityMode::displacement, ch.samples, seed));
  if (ch.monotonicity == "lasry-lions" || ch.monotonicity == "both")
    add(check_monotonicity(p, MonotonicityMode::lasry_lions, ch.samples, seed));
  rep["passed"] = passed;
  write_json_file(dir / "validate_report.json", rep);
  return passed ? exit_ok : exit_failure;
}

/// Solves the configured problem and writes the report and CSV artifacts.
/// Exit 0 iff the solver converged.
inline int cmd_solve(RunConfig cfg, const CommandOptions& opt, std::ostream& log = std::cout)
{
  const auto dir = detail::prepare_output(cfg, opt);
  const ProblemSpec p = build_problem(cfg.problem);
  const TimeGrid grid = TimeGrid::for_problem(p, cfg.grid.steps);
  json rep = report_header("solve", cfg, p);
  rep["config"] = to_json(cfg.solve);
  rep["warnings"] = json::array();

  if (cfg.checks.pointwise) {
    const CheckReport pre = validate_pointwise_derivatives(p, cfg.checks.samples, 1e-5, cfg.checks.tolerance, cfg.grid.seed);
    if (!pre.passed) rep["warnings"].push_back("derivative validation failed at '" + pre.first_failure()->name + "'");
  }

  std::optional<SolveReport> result;
  try {
    const auto noise = draw_sample(p, grid, cfg.grid.particles, cfg.grid.seed);
    result = solve(p, grid, noise, cfg.solve);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    rep["error"] = error_json(e.kind(), e.message());
  }

  if (result) {
    rep["result"] = to_json(*result);
    if (auto lq = lq_spec_of(cfg.problem)) {
      try {
        const RiccatiSolution sol = detail::wants_mfg(cfg) ? solve_lq_mfg(*lq, cfg.grid.steps, cfg.oracle.substeps)
                                                           : solve_lq_mfc(*lq, cfg.grid.steps, cfg.oracle.substeps);
        json o = oracle_summary(sol);
        o["relative_error"] = number_json(std::abs(result->final_cost - sol.cost) / std::max(std::abs(sol.cost), 1e-300));
        rep["oracle"] = o;
      } catch (const Error& e) {
        rep["oracle"] = {{"error", error_json(e.kind(), e.message())}};
      }
    }
    const auto& out = cfg.outputs;
    if (out.convergence_csv) write_text_file(dir / "convergence.csv", [&](std::ostream& os) { write_convergence_csv(*result, os); });
    if (out.control_csv)
      write_text_file(dir / "control.csv", [&](std::ostream& os) { write_control_csv(result->control, grid, out.particles_written, os); });
    if (result->paths) {
      if (out.trajectory_csv)
        write_text_file(dir / "trajectory.csv",
                        [&](std::ostream& os) { write_trajectory_csv(*result->paths, grid, out.particles_written, os); });
      if (out.moments_csv) write_text_file(dir / "moments.csv", [&](std::ostream& os) { write_moments_csv(*result->paths, grid, os); });
    }
    if (out.adjoint_csv && result->adjoint)
      write_text_file(dir / "adjoint.csv", [&](std::ostream& os) { write_adjoint_csv(*result->adjoint, grid, out.particles_written, os); });
  }
  write_json_file(dir / "solve_report.json", rep);

  if (!opt.quiet) {
    if (result)
      log << (result->converged ? "converged" : "not converged") << ": " << result->reason << ", cost "
          << format_double(result->final_cost) << ", residual " << format_double(result->final_residual) << ", iterations "
          << result->iterations << '\n';
    else
      log << "solve failed: " << rep["error"]["name"].get<std::string>() << ": " << rep["error"]["message"].get<std::string>() << '\n';
  }
  return result && result->converged ? exit_ok : exit_failure;
}

/// Adjoint gradient versus central finite differences; exit 0 iff within tolerance.
inline int cmd_gradcheck(RunConfig cfg, const CommandOptions& opt, std::ostream& log = std::cout)
{
  const auto dir = detail::prepare_output(cfg, opt);
  const ProblemSpec p = build_problem(cfg.problem);
  const TimeGrid grid = TimeGrid::for_problem(p, cfg.grid.steps);
  json rep = report_header("gradcheck", cfg, p);
  int code = exit_failure;
  try {
    const auto noise = draw_sample(p, grid, cfg.grid.particles, cfg.grid.seed);
    AdjointOptions aopt;
    aopt.q_estimator = cfg.solve.q_estimator;
    const Evaluator ev(p, grid, noise, cfg.solve.basis, aopt);
    ControlField ctrl = ev.zero_control();
    if (cfg.gradcheck.control == "random") {
      Rng rng = stream_rng(cfg.gradcheck.direction_seed, Stream::controls);
      ctrl = random_direction(ev, ev.forward(ctrl), cfg.gradcheck.direction_degree, rng);
    }
    GradCheckOptions g;
    g.directions = cfg.gradcheck.directions;
    g.epsilon = cfg.gradcheck.epsilon;
    g.tolerance = cfg.gradcheck.tolerance;
    g.common_random_numbers = cfg.gradcheck.crn;
    g.direction_seed = cfg.gradcheck.direction_seed;
    g.direction_degree = cfg.gradcheck.direction_degree;
    const GradCheckReport r = gradient_check(ev, ctrl, g);
    rep["result"] = to_json(r);
    code = r.passed ? exit_ok : exit_failure;
    if (!opt.quiet)
      log << (r.passed ? "PASS" : "FAIL") << " gradient check: max relative error " << format_double(r.max_relative_error)
          << " (tolerance " << format_double(r.tolerance) << ", crn " << (r.common_random_numbers ? "on" : "off") << ")\n";
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    rep["error"] = error_json(e.kind(), e.message());
    if (!opt.quiet) log << "gradient check failed: " << e.what() << '\n';
  }
  write_json_file(dir / "gradcheck_report.json", rep);
  return code;
}

/// Dumps Riccati schedules for LQ problems.
inline int cmd_oracle(RunConfig cfg, const CommandOptions& opt, std::ostream& log = std::cout)
{
  const auto dir = detail::prepare_output(cfg, opt);
  const auto lq = lq_spec_of(cfg.problem);
  if (!lq) throw ConfigError("config.problem.type: the oracle needs an LQ problem (lq, scalar_lqr, mean_coupled_lq, bsde_demo)");
  const ProblemSpec p = build_problem(cfg.problem);
  json rep = report_header("oracle", cfg, p);
  rep["solutions"] = json::array();
  std::string kind = cfg.oracle.kind;
  if (kind == "auto") kind = lq->has_mean_coupling() ? "both" : "mfc";
  int code = exit_ok;
  try {
    auto emit = [&](const RiccatiSolution& s) {
      write_text_file(dir / ("oracle_" + s.kind + ".csv"), [&](std::ostream& os) { write_riccati_csv(s, os); });
      rep["solutions"].push_back(oracle_summary(s));
      if (!opt.quiet) log << s.kind << " value " << format_double(s.value) << ", cost " << format_double(s.cost) << '\n';
    };
    if (kind == "mfc" || kind == "both") emit(solve_lq_mfc(*lq, cfg.grid.steps, cfg.oracle.substeps));
    if (kind == "mfg" || kind == "both") emit(solve_lq_mfg(*lq, cfg.grid.steps, cfg.oracle.substeps));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    rep["error"] = error_json(e.kind(), e.message());
    if (!opt.quiet) log << "oracle failed: " << e.what() << '\n';
    code = exit_failure;
  }
  write_json_file(dir / "oracle_report.json", rep);
  return code;
}

/// Loads the config and dispatches; maps configuration errors to exit 2 and
/// any other library error to exit 1.
inline int run_command(const std::string& command, const std::string& config_path, const CommandOptions& opt,
                       std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
  try {
    RunConfig cfg = load_config(config_path);
    if (command == "validate") return cmd_validate(std::move(cfg), opt, log);
    if (command == "solve") return cmd_solve(std::move(cfg), opt, log);
    if (command == "gradcheck") return cmd_gradcheck(std::move(cfg), opt, log);
    if (command == "oracle") return cmd_oracle(std::move(cfg), opt, log);
    err << "unknown command '" << command << "'\n";
    return exit_config;
  } catch (const ConfigError& e) {
    err << "config error: " << e.message() << '\n';
    return exit_config;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_failure;
  }
}

}  // namespace mfpm
