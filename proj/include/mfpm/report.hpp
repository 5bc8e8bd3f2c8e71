#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpm/config.hpp"
#include "mfpm/csv.hpp"
#include "mfpm/lq_oracle.hpp"
#include "mfpm/optimizer.hpp"
#include "mfpm/validate.hpp"

namespace mfpm {

using json = nlohmann::json;

/// Non-finite doubles become null so the output stays valid JSON.
inline json number_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const SolveConfig& c)
{
  json j;
  j["mode"] = to_string(c.mode);
  j["max_iters"] = c.max_iters;
  j["step"] = c.step;
  j["backtrack"] = c.backtrack;
  j["armijo"] = c.armijo;
  j["max_halvings"] = c.max_halvings;
  j["tol_grad"] = c.tol_grad;
  j["tol_cost"] = c.tol_cost;
  j["damping"] = c.damping;
  j["noncontraction_window"] = c.noncontraction_window;
  j["basis_degree"] = c.basis.degree;
  j["ridge"] = c.basis.ridge_per_particle;
  j["q_estimator"] = c.q_estimator == QEstimator::joint ? "joint" : "product";
  return j;
}

inline json to_json(const IterationRecord& r)
{
  return {{"iter", r.iter}, {"cost", number_json(r.cost)}, {"residual", number_json(r.residual)},
          {"step", number_json(r.step)}, {"update_norm", number_json(r.update_norm)}};
}

/// Summary of a solve (no particle-level data; those go to CSV files).
inline json to_json(const SolveReport& r)
{
  json j;
  j["mode"] = to_string(r.mode);
  j["converged"] = r.converged;
  j["reason"] = r.reason;
  j["iterations"] = r.iterations;
  j["final_cost"] = number_json(r.final_cost);
  j["final_residual"] = number_json(r.final_residual);
  j["history"] = json::array();
  for (const auto& h : r.history) j["history"].push_back(to_json(h));
  if (r.adjoint) {
    json diag = json::array();
    for (const auto& d : r.adjoint->diagnostics)
      diag.push_back({{"step", d.step}, {"residual_rms", number_json(d.residual_rms)}, {"condition", number_json(d.condition)}});
    j["regression"] = diag;
  }
  return j;
}

inline json to_json(const GradCheckReport& r)
{
  json j;
  j["cost"] = number_json(r.cost);
  j["tolerance"] = r.tolerance;
  j["common_random_numbers"] = r.common_random_numbers;
  j["max_relative_error"] = number_json(r.max_relative_error);
  j["passed"] = r.passed;
  j["directions"] = json::array();
  for (const auto& row : r.rows)
    j["directions"].push_back({{"adjoint", number_json(row.adjoint)},
                               {"finite_difference", number_json(row.finite_difference)},
                               {"relative_error", number_json(row.relative_error)}});
  return j;
}

inline json to_json(const CostConvexityReport& r)
{
  json j;
  j["cost1"] = r.cost1;
  j["cost2"] = r.cost2;
  j["distance_squared"] = r.distance_squared;
  j["slack"] = r.slack;
  j["passed"] = r.passed;
  j["rows"] = json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"theta", row.theta}, {"mixed_cost", row.mixed_cost}, {"chord_cost", row.chord_cost}, {"gap", row.gap}});
  return j;
}

inline json oracle_summary(const RiccatiSolution& s)
{
  return {{"kind", s.kind}, {"value", number_json(s.value)}, {"cost", number_json(s.cost)}, {"steps", s.steps()}};
}

/// Header block shared by every report.
inline json report_header(const std::string& command, const RunConfig& c, const ProblemSpec& p)
{
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["problem"] = {{"type", c.problem.type}, {"name", p.name}, {"n", p.n}, {"d", p.d}, {"t0", p.t0}, {"T", p.T},
                  {"fault", to_string(c.problem.fault)}};
  j["grid"] = {{"steps", c.grid.steps}, {"particles", c.grid.particles}, {"seed", c.grid.seed}};
  j["error"] = nullptr;
  return j;
}

inline json error_json(const std::string& name, const std::string& message) { return {{"name", name}, {"message", message}}; }

/// Structural check of an emitted report. Returns the list of violations
/// (empty when the report conforms).
inline std::vector<std::string> check_report_schema(const json& j)
{
  std::vector<std::string> bad;
  auto need = [&](const json& obj, const std::string& key, auto pred, const std::string& what, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
      bad.push_back(path + key + ": missing");
      return false;
    }
    if (!pred(obj[key])) {
      bad.push_back(path + key + ": expected " + what);
      return false;
    }
    return true;
  };
  auto is_int = [](const json& x) { return x.is_number_integer(); };
  auto is_num = [](const json& x) { return x.is_number() || x.is_null(); };
  auto is_str = [](const json& x) { return x.is_string(); };
  auto is_bool = [](const json& x) { return x.is_boolean(); };
  auto is_obj = [](const json& x) { return x.is_object(); };
  auto is_arr = [](const json& x) { return x.is_array(); };

  if (!j.is_object()) return {"report: expected an object"};
  need(j, "schema_version", is_int, "integer", "");
  if (!need(j, "command", is_str, "string", "")) return bad;
  if (need(j, "problem", is_obj, "object", "")) {
    need(j["problem"], "type", is_str, "string", "problem.");
    need(j["problem"], "n", is_int, "integer", "problem.");
    need(j["problem"], "d", is_int, "integer", "problem.");
  }
  if (need(j, "grid", is_obj, "object", "")) {
    need(j["grid"], "steps", is_int, "integer", "grid.");
    need(j["grid"], "particles", is_int, "integer", "grid.");
    need(j["grid"], "seed", is_int, "integer", "grid.");
  }
  if (j.contains("error") && !j["error"].is_null()) {
    need(j["error"], "name", is_str, "string", "error.");
    need(j["error"], "message", is_str, "string", "error.");
  }
  const std::string cmd = j["command"].get<std::string>();
  if (cmd == "validate") {
    need(j, "passed", is_bool, "boolean", "");
    if (need(j, "checks", is_arr, "array", ""))
      for (const auto& c : j["checks"]) {
        need(c, "check", is_str, "string", "checks[].");
        need(c, "passed", is_bool, "boolean", "checks[].");
        if (need(c, "entries", is_arr, "array", "checks[]."))
          for (const auto& e : c["entries"]) {
            need(e, "name", is_str, "string", "checks[].entries[].");
            need(e, "passed", is_bool, "boolean", "checks[].entries[].");
            need(e, "worst", is_num, "number", "checks[].entries[].");
            need(e, "witness", is_obj, "object", "checks[].entries[].");
          }
      }
  } else if (cmd == "solve") {
    need(j, "config", is_obj, "object", "");
    if (j["error"].is_null() && need(j, "result", is_obj, "object", "")) {
      const json& r = j["result"];
      need(r, "mode", is_str, "string", "result.");
      need(r, "converged", is_bool, "boolean", "result.");
      need(r, "reason", is_str, "string", "result.");
      need(r, "iterations", is_int, "integer", "result.");
      need(r, "final_cost", is_num, "number", "result.");
      need(r, "final_residual", is_num, "number", "result.");
      if (need(r, "history", is_arr, "array", "result."))
        for (const auto& h : r["history"]) {
          need(h, "iter", is_int, "integer", "result.history[].");
          need(h, "cost", is_num, "number", "result.history[].");
          need(h, "residual", is_num, "number", "result.history[].");
          need(h, "step", is_num, "number", "result.history[].");
        }
    }
  } else if (cmd == "gradcheck") {
    if (j["error"].is_null() && need(j, "result", is_obj, "object", "")) {
      need(j["result"], "passed", is_bool, "boolean", "result.");
      need(j["result"], "max_relative_error", is_num, "number", "result.");
      need(j["result"], "directions", is_arr, "array", "result.");
    }
  } else if (cmd == "oracle") {
    if (j["error"].is_null()) need(j, "solutions", is_arr, "array", "");
  } else {
    bad.push_back("command: unknown value '" + cmd + "'");
  }
  return bad;
}

// ---------------------------------------------------------------------------
// CSV artifacts

inline void write_convergence_csv(const SolveReport& r, std::ostream& os)
{
  CsvWriter w(os);
  w.header({"iter", "cost", "residual", "step", "update_norm"});
  for (const auto& h : r.history) {
    w.field(h.iter);
    w.field(h.cost);
    w.field(h.residual);
    w.field(h.step);
    w.field(h.update_norm);
    w.end_row();
  }
}

/// One row per (step, particle) for the first `limit` particles.
inline void write_control_csv(const ControlField& c, const TimeGrid& grid, Eigen::Index limit, std::ostream& os)
{
  CsvWriter w(os);
  std::vector<std::string> head{"step", "time", "particle"};
  const auto d = c.values.empty() ? 0 : c.values.front().rows();
  for (Eigen::Index a = 0; a < d; ++a) head.push_back("v" + std::to_string(a));
  w.header(head);
  for (std::size_t k = 0; k < c.steps(); ++k) {
    const Eigen::Index N = std::min(limit, c.values[k].cols());
    for (Eigen::Index i = 0; i < N; ++i) {
      w.field(k);
      w.field(grid.time(k));
      w.field(static_cast<std::int64_t>(i));
      for (Eigen::Index a = 0; a < d; ++a) w.field(c.values[k](a, i));
      w.end_row();
    }
  }
}

inline void write_trajectory_csv(const PathEnsemble& e, const TimeGrid& grid, Eigen::Index limit, std::ostream& os)
{
  CsvWriter w(os);
  std::vector<std::string> head{"step", "time", "particle"};
  const auto n = e.states.front().rows();
  for (Eigen::Index a = 0; a < n; ++a) head.push_back("x" + std::to_string(a));
  w.header(head);
  for (std::size_t k = 0; k < e.states.size(); ++k) {
    const Eigen::Index N = std::min(limit, e.particles());
    for (Eigen::Index i = 0; i < N; ++i) {
      w.field(k);
      w.field(grid.time(k));
      w.field(static_cast<std::int64_t>(i));
      for (Eigen::Index a = 0; a < n; ++a) w.field(e.states[k](a, i));
      w.end_row();
    }
  }
}

/// P at steps 0..K and Q (column-major vec(q)) at steps 0..K-1.
inline void write_adjoint_csv(const AdjointEnsemble& adj, const TimeGrid& grid, Eigen::Index limit, std::ostream& os)
{
  CsvWriter w(os);
  const auto n = adj.P.front().rows();
  const bool has_q = !adj.Q.empty();
  std::vector<std::string> head{"step", "time", "particle"};
  for (Eigen::Index a = 0; a < n; ++a) head.push_back("p" + std::to_string(a));
  if (has_q)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index a = 0; a < n; ++a) head.push_back("q" + std::to_string(j) + "_" + std::to_string(a));
  w.header(head);
  for (std::size_t k = 0; k < adj.P.size(); ++k) {
    const Eigen::Index N = std::min(limit, adj.P[k].cols());
    for (Eigen::Index i = 0; i < N; ++i) {
      w.field(k);
      w.field(grid.time(k));
      w.field(static_cast<std::int64_t>(i));
      for (Eigen::Index a = 0; a < n; ++a) w.field(adj.P[k](a, i));
      if (has_q) {
        for (Eigen::Index r = 0; r < n * n; ++r) {
          if (k < adj.Q.size())
            w.field(adj.Q[k](r, i));
          else
            w.field(std::string());
        }
      }
      w.end_row();
    }
  }
}

/// Per-step ensemble mean and L^2 norm.
inline void write_moments_csv(const PathEnsemble& e, const TimeGrid& grid, std::ostream& os)
{
  const MomentReport m = moment_diagnostics(e);
  CsvWriter w(os);
  const auto n = e.states.front().rows();
  std::vector<std::string> head{"step", "time"};
  for (Eigen::Index a = 0; a < n; ++a) head.push_back("mean" + std::to_string(a));
  head.push_back("l2_norm");
  w.header(head);
  for (std::size_t k = 0; k < m.norms.size(); ++k) {
    w.field(k);
    w.field(grid.time(k));
    for (Eigen::Index a = 0; a < n; ++a) w.field(m.means[k](a));
    w.field(m.norms[k]);
    w.end_row();
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

template <typename Fn>
void write_text_file(const std::filesystem::path& path, Fn&& fn)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  fn(os);
}

}  // namespace mfpm
