#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpm/errors.hpp"
#include "mfpm/lq.hpp"
#include "mfpm/optimizer.hpp"
#include "mfpm/problems.hpp"
#include "mfpm/validate.hpp"

namespace mfpm {

inline constexpr int kSchemaVersion = 1;

/// Problem selection. `type` is "lq", "scalar_lqr", "mean_coupled_lq",
/// "bsde_demo", "nonlinear_demo", "monotone_terminal", "antimonotone_terminal"
/// or "nonconvex_demo".
struct ProblemConfig {
  std::string type = "scalar_lqr";
  double sigma = 0.3;
  double T = 1.0;
  std::optional<LQSpec> lq;  // explicit spec for type "lq"
  Fault fault = Fault::none;
};

struct GridConfig {
  std::size_t steps = 100;
  Eigen::Index particles = 1000;
  std::uint64_t seed = 0;
};

struct OutputConfig {
  std::string directory = "out";
  bool convergence_csv = true;
  bool control_csv = true;
  bool trajectory_csv = true;
  bool adjoint_csv = false;
  bool moments_csv = true;
  /// Particle-level CSVs are written for the first this-many particles.
  Eigen::Index particles_written = 100;
};

struct ChecksConfig {
  bool pointwise = true;
  bool measure = true;
  std::string convexity = "control-only";   // none | control-only | joint
  std::string monotonicity = "none";        // none | displacement | lasry-lions | both
  std::size_t samples = 32;
  double lambda = 0.0;                      // 0: take from the problem (LQ) or 0.5
  double tolerance = 1e-6;
};

struct GradCheckConfig {
  std::size_t directions = 5;
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  bool crn = true;
  std::uint64_t direction_seed = 0;
  int direction_degree = 1;
  std::string control = "zero";  // zero | random
};

struct OracleConfig {
  std::size_t substeps = 10;
  std::string kind = "auto";  // auto | mfc | mfg | both
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  ProblemConfig problem;
  GridConfig grid;
  SolveConfig solve;
  OutputConfig outputs;
  ChecksConfig checks;
  GradCheckConfig gradcheck;
  OracleConfig oracle;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, _] : j.items())
    if (!ok.count(k)) {
      std::string list;
      for (const auto& a : ok) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(where + ": unknown key '" + k + "' (allowed: " + list + ")");
    }
}

inline double get_number(const json& j, const std::string& where)
{
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t get_count(const json& j, const std::string& where, bool allow_zero = true)
{
  if (!j.is_number_integer() || j.get<long long>() < 0 || (!allow_zero && j.get<long long>() == 0))
    throw ConfigError(where + (allow_zero ? ": expected a non-negative integer" : ": expected a positive integer"));
  return j.get<std::uint64_t>();
}

inline bool get_bool(const json& j, const std::string& where)
{
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

inline std::string get_string(const json& j, const std::string& where, std::initializer_list<const char*> choices = {})
{
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  std::string s = j.get<std::string>();
  if (choices.size() == 0) return s;
  std::string list;
  for (const char* c : choices) {
    if (s == c) return s;
    list += (list.empty() ? "" : ", ") + std::string(c);
  }
  throw ConfigError(where + ": '" + s + "' is not one of " + list);
}

inline Mat get_matrix(const json& j, const std::string& where, Eigen::Index rows, Eigen::Index cols)
{
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError(where + ": expected " + std::to_string(rows) + " rows");
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(where + "[" + std::to_string(r) + "]: expected " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = get_number(row[static_cast<std::size_t>(c)], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

inline Vec get_vector(const json& j, const std::string& where, Eigen::Index size)
{
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw ConfigError(where + ": expected " + std::to_string(size) + " entries");
  Vec v(size);
  for (Eigen::Index a = 0; a < size; ++a) v(a) = get_number(j[static_cast<std::size_t>(a)], where + "[" + std::to_string(a) + "]");
  return v;
}

inline std::vector<Mat> get_matrix_list(const json& j, const std::string& where, Eigen::Index count, Eigen::Index rows,
                                        Eigen::Index cols)
{
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != count)
    throw ConfigError(where + ": expected one matrix per noise (" + std::to_string(count) + ")");
  std::vector<Mat> out;
  for (Eigen::Index a = 0; a < count; ++a)
    out.push_back(get_matrix(j[static_cast<std::size_t>(a)], where + "[" + std::to_string(a) + "]", rows, cols));
  return out;
}

inline LQSpec parse_lq(const json& j, const std::string& where)
{
  reject_unknown(j, where, {"n", "d", "t0", "T", "f0", "A", "Abar", "B", "sigma0", "C", "Cbar", "D", "Q", "S", "Qbar", "R", "H",
                            "HS", "Hbar", "lambda", "bound", "initial_mean", "initial_cov", "moment_matched_initial"});
  const int n = j.contains("n") ? static_cast<int>(get_count(j["n"], where + ".n", false)) : 1;
  const int d = j.contains("d") ? static_cast<int>(get_count(j["d"], where + ".d", false)) : 1;
  LQSpec s = LQSpec::zeros(n, d);
  if (j.contains("t0")) s.t0 = get_number(j["t0"], where + ".t0");
  if (j.contains("T")) s.T = get_number(j["T"], where + ".T");
  if (j.contains("f0")) s.f0 = get_vector(j["f0"], where + ".f0", n);
  auto mat = [&](const char* key, Mat& dst, Eigen::Index r, Eigen::Index c) {
    if (j.contains(key)) dst = get_matrix(j[key], where + "." + key, r, c);
  };
  mat("A", s.A, n, n);
  mat("Abar", s.Abar, n, n);
  mat("B", s.B, n, d);
  mat("sigma0", s.sigma0, n, n);
  mat("Q", s.Q, n, n);
  mat("S", s.S, n, n);
  mat("Qbar", s.Qbar, n, n);
  mat("R", s.R, d, d);
  mat("H", s.H, n, n);
  mat("HS", s.HS, n, n);
  mat("Hbar", s.Hbar, n, n);
  mat("initial_cov", s.initial_cov, n, n);
  if (j.contains("C")) s.C = get_matrix_list(j["C"], where + ".C", n, n, n);
  if (j.contains("Cbar")) s.Cbar = get_matrix_list(j["Cbar"], where + ".Cbar", n, n, n);
  if (j.contains("D")) s.D = get_matrix_list(j["D"], where + ".D", n, n, d);
  if (j.contains("initial_mean")) s.initial_mean = get_vector(j["initial_mean"], where + ".initial_mean", n);
  if (j.contains("lambda")) s.lambda = get_number(j["lambda"], where + ".lambda");
  if (j.contains("bound")) s.bound = get_number(j["bound"], where + ".bound");
  if (j.contains("moment_matched_initial"))
    s.moment_matched_initial = get_bool(j["moment_matched_initial"], where + ".moment_matched_initial");
  return s;
}

}  // namespace detail

/// Parses and validates a configuration document. Every error is a
/// ConfigError whose message names the offending field (or, for malformed
/// JSON, the line and column).
inline RunConfig parse_config(const std::string& text)
{
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  detail::reject_unknown(j, "config", {"schema_version", "problem", "grid", "solve", "outputs", "checks", "gradcheck", "oracle"});
  RunConfig c;
  if (!j.contains("schema_version")) throw ConfigError("config: missing 'schema_version'");
  c.schema_version = static_cast<int>(detail::get_count(j["schema_version"], "config.schema_version"));
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");

  if (j.contains("problem")) {
    const json& p = j["problem"];
    detail::reject_unknown(p, "config.problem", {"type", "sigma", "T", "lq", "fault"});
    if (p.contains("type"))
      c.problem.type = detail::get_string(p["type"], "config.problem.type",
                                          {"lq", "scalar_lqr", "mean_coupled_lq", "bsde_demo", "nonlinear_demo",
                                           "monotone_terminal", "antimonotone_terminal", "nonconvex_demo"});
    if (p.contains("sigma")) c.problem.sigma = detail::get_number(p["sigma"], "config.problem.sigma");
    if (p.contains("T")) c.problem.T = detail::get_number(p["T"], "config.problem.T");
    if (p.contains("lq")) {
      if (c.problem.type != "lq") throw ConfigError("config.problem.lq: only allowed with type 'lq'");
      c.problem.lq = detail::parse_lq(p["lq"], "config.problem.lq");
    }
    if (c.problem.type == "lq" && !c.problem.lq) throw ConfigError("config.problem: type 'lq' needs an 'lq' object");
    if (p.contains("fault")) {
      try {
        c.problem.fault = parse_fault(detail::get_string(p["fault"], "config.problem.fault"));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("config.problem.fault: ") + e.what());
      }
    }
    if (!(c.problem.T > 0.0)) throw ConfigError("config.problem.T: must be positive");
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    detail::reject_unknown(g, "config.grid", {"steps", "particles", "seed"});
    if (g.contains("steps")) c.grid.steps = detail::get_count(g["steps"], "config.grid.steps", false);
    if (g.contains("particles"))
      c.grid.particles = static_cast<Eigen::Index>(detail::get_count(g["particles"], "config.grid.particles", false));
    if (g.contains("seed")) c.grid.seed = detail::get_count(g["seed"], "config.grid.seed");
  }

  if (j.contains("solve")) {
    const json& s = j["solve"];
    detail::reject_unknown(s, "config.solve",
                           {"mode", "max_iters", "step", "backtrack", "armijo", "max_halvings", "tol_grad", "tol_cost",
                            "damping", "noncontraction_window", "basis_degree", "ridge", "q_estimator"});
    auto& sc = c.solve;
    if (s.contains("mode")) sc.mode = parse_solve_mode(detail::get_string(s["mode"], "config.solve.mode", {"gradient", "picard", "mfg"}));
    if (s.contains("max_iters")) sc.max_iters = detail::get_count(s["max_iters"], "config.solve.max_iters");
    if (s.contains("step")) sc.step = detail::get_number(s["step"], "config.solve.step");
    if (s.contains("backtrack")) sc.backtrack = detail::get_number(s["backtrack"], "config.solve.backtrack");
    if (s.contains("armijo")) sc.armijo = detail::get_number(s["armijo"], "config.solve.armijo");
    if (s.contains("max_halvings")) sc.max_halvings = detail::get_count(s["max_halvings"], "config.solve.max_halvings");
    if (s.contains("tol_grad")) sc.tol_grad = detail::get_number(s["tol_grad"], "config.solve.tol_grad");
    if (s.contains("tol_cost")) sc.tol_cost = detail::get_number(s["tol_cost"], "config.solve.tol_cost");
    if (s.contains("damping")) sc.damping = detail::get_number(s["damping"], "config.solve.damping");
    if (s.contains("noncontraction_window"))
      sc.noncontraction_window = detail::get_count(s["noncontraction_window"], "config.solve.noncontraction_window", false);
    if (s.contains("basis_degree"))
      sc.basis.degree = static_cast<int>(detail::get_count(s["basis_degree"], "config.solve.basis_degree"));
    if (s.contains("ridge")) sc.basis.ridge_per_particle = detail::get_number(s["ridge"], "config.solve.ridge");
    if (s.contains("q_estimator")) {
      const auto q = detail::get_string(s["q_estimator"], "config.solve.q_estimator", {"joint", "product"});
      sc.q_estimator = q == "joint" ? QEstimator::joint : QEstimator::product;
    }
    try {
      sc.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("config.solve: ") + e.what());
    }
  }

  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    detail::reject_unknown(o, "config.outputs",
                           {"directory", "convergence_csv", "control_csv", "trajectory_csv", "adjoint_csv", "moments_csv",
                            "particles_written"});
    auto& oc = c.outputs;
    if (o.contains("directory")) oc.directory = detail::get_string(o["directory"], "config.outputs.directory");
    if (o.contains("convergence_csv")) oc.convergence_csv = detail::get_bool(o["convergence_csv"], "config.outputs.convergence_csv");
    if (o.contains("control_csv")) oc.control_csv = detail::get_bool(o["control_csv"], "config.outputs.control_csv");
    if (o.contains("trajectory_csv")) oc.trajectory_csv = detail::get_bool(o["trajectory_csv"], "config.outputs.trajectory_csv");
    if (o.contains("adjoint_csv")) oc.adjoint_csv = detail::get_bool(o["adjoint_csv"], "config.outputs.adjoint_csv");
    if (o.contains("moments_csv")) oc.moments_csv = detail::get_bool(o["moments_csv"], "config.outputs.moments_csv");
    if (o.contains("particles_written"))
      oc.particles_written = static_cast<Eigen::Index>(detail::get_count(o["particles_written"], "config.outputs.particles_written"));
  }

  if (j.contains("checks")) {
    const json& k = j["checks"];
    detail::reject_unknown(k, "config.checks", {"pointwise", "measure", "convexity", "monotonicity", "samples", "lambda", "tolerance"});
    auto& kc = c.checks;
    if (k.contains("pointwise")) kc.pointwise = detail::get_bool(k["pointwise"], "config.checks.pointwise");
    if (k.contains("measure")) kc.measure = detail::get_bool(k["measure"], "config.checks.measure");
    if (k.contains("convexity"))
      kc.convexity = detail::get_string(k["convexity"], "config.checks.convexity", {"none", "control-only", "joint"});
    if (k.contains("monotonicity"))
      kc.monotonicity =
          detail::get_string(k["monotonicity"], "config.checks.monotonicity", {"none", "displacement", "lasry-lions", "both"});
    if (k.contains("samples")) kc.samples = detail::get_count(k["samples"], "config.checks.samples", false);
    if (k.contains("lambda")) kc.lambda = detail::get_number(k["lambda"], "config.checks.lambda");
    if (k.contains("tolerance")) kc.tolerance = detail::get_number(k["tolerance"], "config.checks.tolerance");
    if (kc.lambda < 0.0) throw ConfigError("config.checks.lambda: must be non-negative");
    if (!(kc.tolerance > 0.0)) throw ConfigError("config.checks.tolerance: must be positive");
  }

  if (j.contains("gradcheck")) {
    const json& g = j["gradcheck"];
    detail::reject_unknown(g, "config.gradcheck",
                           {"directions", "epsilon", "tolerance", "crn", "direction_seed", "direction_degree", "control"});
    auto& gc = c.gradcheck;
    if (g.contains("directions")) gc.directions = detail::get_count(g["directions"], "config.gradcheck.directions", false);
    if (g.contains("epsilon")) gc.epsilon = detail::get_number(g["epsilon"], "config.gradcheck.epsilon");
    if (g.contains("tolerance")) gc.tolerance = detail::get_number(g["tolerance"], "config.gradcheck.tolerance");
    if (g.contains("crn")) gc.crn = detail::get_bool(g["crn"], "config.gradcheck.crn");
    if (g.contains("direction_seed")) gc.direction_seed = detail::get_count(g["direction_seed"], "config.gradcheck.direction_seed");
    if (g.contains("direction_degree"))
      gc.direction_degree = static_cast<int>(detail::get_count(g["direction_degree"], "config.gradcheck.direction_degree"));
    if (g.contains("control")) gc.control = detail::get_string(g["control"], "config.gradcheck.control", {"zero", "random"});
    if (!(gc.epsilon > 0.0)) throw ConfigError("config.gradcheck.epsilon: must be positive");
    if (!(gc.tolerance > 0.0)) throw ConfigError("config.gradcheck.tolerance: must be positive");
  }

  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    detail::reject_unknown(o, "config.oracle", {"substeps", "kind"});
    if (o.contains("substeps")) c.oracle.substeps = detail::get_count(o["substeps"], "config.oracle.substeps", false);
    if (o.contains("kind")) c.oracle.kind = detail::get_string(o["kind"], "config.oracle.kind", {"auto", "mfc", "mfg", "both"});
  }
  return c;
}

inline RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// The LQ specification behind a config, if the problem is linear-quadratic.
inline std::optional<LQSpec> lq_spec_of(const ProblemConfig& pc)
{
  if (pc.type == "lq") return pc.lq;
  if (pc.type == "scalar_lqr") return LQSpec::scalar_regulator(pc.sigma, pc.T);
  if (pc.type == "mean_coupled_lq") return mean_coupled_spec(pc.sigma, pc.T);
  if (pc.type == "bsde_demo") return bsde_demo_spec(pc.T);
  return std::nullopt;
}

inline ProblemSpec build_problem(const ProblemConfig& pc)
{
  ProblemSpec p;
  try {
    if (auto lq = lq_spec_of(pc)) {
      p = lq_to_problem(*lq);
      p.name = pc.type;
    } else if (pc.type == "nonlinear_demo") {
      p = nonlinear_demo(pc.sigma, pc.T);
    } else if (pc.type == "monotone_terminal") {
      p = mean_product_terminal(1.0);
    } else if (pc.type == "antimonotone_terminal") {
      p = mean_product_terminal(-1.0);
    } else if (pc.type == "nonconvex_demo") {
      p = nonconvex_demo(pc.T);
    } else {
      throw ConfigError("unknown problem type '" + pc.type + "'");
    }
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("config.problem: ") + e.what());
  }
  return inject_fault(std::move(p), pc.fault);
}

}  // namespace mfpm
