#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfpm/adjoint.hpp"
#include "mfpm/forward.hpp"

namespace mfpm {

enum class SolveMode { gradient, picard, mfg };

inline std::string to_string(SolveMode m)
{
  switch (m) {
    case SolveMode::gradient: return "gradient";
    case SolveMode::picard: return "picard";
    case SolveMode::mfg: return "mfg";
  }
  return "unknown";
}

inline SolveMode parse_solve_mode(const std::string& s)
{
  if (s == "gradient") return SolveMode::gradient;
  if (s == "picard") return SolveMode::picard;
  if (s == "mfg") return SolveMode::mfg;
  throw ConfigError("unknown solve mode '" + s + "' (expected gradient, picard or mfg)");
}

struct SolveConfig {
  SolveMode mode = SolveMode::gradient;
  std::size_t max_iters = 200;
  /// Initial step of the Armijo search and the multiplicative backtracking factor.
  double step = 1.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  std::size_t max_halvings = 30;
  /// Gradient mode stops on residual <= tol_grad; picard/mfg on update norm <= tol_grad.
  double tol_grad = 1e-6;
  double tol_cost = 1e-12;
  /// Damping of the fixed-point update in picard/mfg modes.
  double damping = 0.5;
  /// Consecutive growing updates after which a fixed-point iteration is declared divergent.
  std::size_t noncontraction_window = 5;
  RegressionBasis basis;
  QEstimator q_estimator = QEstimator::joint;

  void validate() const
  {
    if (!(step > 0.0)) throw ConfigError("step size must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("backtracking factor must lie in (0, 1)");
    if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("Armijo constant must lie in (0, 1)");
    if (!(tol_grad > 0.0) || !(tol_cost > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
    if (basis.degree < 0) throw ConfigError("regression degree must be nonnegative");
    if (!(basis.ridge_per_particle >= 0.0)) throw ConfigError("ridge must be nonnegative");
  }
};

struct IterationRecord {
  std::size_t iter = 0;
  double cost = 0.0;
  double residual = 0.0;
  /// Accepted step size (gradient) or damping (picard/mfg); zero when no update was made.
  double step = 0.0;
  /// L^2 norm of the control update applied after this record.
  double update_norm = 0.0;
};

struct SolveReport {
  SolveMode mode = SolveMode::gradient;
  std::vector<IterationRecord> history;
  ControlField control;
  std::optional<PathEnsemble> paths;
  std::optional<AdjointEnsemble> adjoint;
  bool converged = false;
  std::string reason;
  double final_cost = std::numeric_limits<double>::quiet_NaN();
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
};

/// Everything that depends only on the problem, the grid and the frozen noise.
class Evaluator {
 public:
  Evaluator(const ProblemSpec& p, TimeGrid grid, std::shared_ptr<const NoiseSample> noise, RegressionBasis basis = {},
            AdjointOptions opt = {})
      : p_(p), grid_(grid), noise_(std::move(noise)), basis_(basis), opt_(opt)
  {
  }

  const ProblemSpec& problem() const { return p_; }
  const TimeGrid& grid() const { return grid_; }
  const std::shared_ptr<const NoiseSample>& noise() const { return noise_; }
  const Vec& weights() const { return noise_->weights; }
  const AdjointOptions& adjoint_options() const { return opt_; }

  PathEnsemble forward(const ControlField& ctrl) const { return simulate_forward(p_, grid_, ctrl, noise_); }
  double cost(const PathEnsemble& ens, const ControlField& ctrl) const { return evaluate_cost(p_, grid_, ens, ctrl); }
  double cost(const ControlField& ctrl) const { return cost(forward(ctrl), ctrl); }
  AdjointEnsemble adjoint(const PathEnsemble& ens, const ControlField& ctrl) const
  {
    return solve_adjoint(p_, grid_, ens, ctrl, basis_, opt_);
  }
  ControlField gradient(const PathEnsemble& ens, const ControlField& ctrl, const AdjointEnsemble& adj) const
  {
    return adjoint_gradient(p_, grid_, ens, ctrl, adj);
  }
  double inner(const ControlField& a, const ControlField& b) const { return l2_inner(a, b, weights(), grid_.dt()); }
  double norm(const ControlField& a) const { return std::sqrt(inner(a, a)); }
  ControlField zero_control() const { return ControlField::zeros(p_.d, noise_->particles(), grid_.steps()); }

 private:
  const ProblemSpec& p_;
  TimeGrid grid_;
  std::shared_ptr<const NoiseSample> noise_;
  RegressionBasis basis_;
  AdjointOptions opt_;
};

struct CostGradient {
  double cost = 0.0;
  ControlField gradient;
  PathEnsemble paths;
  AdjointEnsemble adjoint;
};

/// Forward pass, adjoint pass and D_v L on the control grid.
inline CostGradient cost_gradient(const Evaluator& ev, const ControlField& ctrl)
{
  CostGradient out;
  out.paths = ev.forward(ctrl);
  out.cost = ev.cost(out.paths, ctrl);
  out.adjoint = ev.adjoint(out.paths, ctrl);
  out.gradient = ev.gradient(out.paths, ctrl, out.adjoint);
  return out;
}

/// Steepest descent in L^2 with Armijo backtracking on the sample-average
/// cost. Stops when the optimality residual or the cost decrease falls below
/// its tolerance.
inline SolveReport solve_gradient_descent(const Evaluator& ev, const SolveConfig& cfg,
                                          std::optional<ControlField> initial = std::nullopt)
{
  cfg.validate();
  SolveReport rep;
  rep.mode = SolveMode::gradient;
  ControlField ctrl = initial ? std::move(*initial) : ev.zero_control();
  CostGradient cur = cost_gradient(ev, ctrl);

  for (std::size_t it = 0;; ++it) {
    const double gnorm2 = ev.inner(cur.gradient, cur.gradient);
    IterationRecord rec;
    rec.iter = it;
    rec.cost = cur.cost;
    rec.residual = std::sqrt(gnorm2);
    rep.iterations = it;
    if (rec.residual <= cfg.tol_grad) {
      rep.history.push_back(rec);
      rep.converged = true;
      rep.reason = "optimality residual below tolerance";
      break;
    }
    if (it >= cfg.max_iters) {
      rep.history.push_back(rec);
      rep.reason = "iteration limit reached";
      break;
    }

    double eta = cfg.step;
    bool accepted = false;
    ControlField trial;
    PathEnsemble trial_paths;
    double trial_cost = 0.0;
    for (std::size_t h = 0; h <= cfg.max_halvings; ++h) {
      trial = ctrl;
      trial.axpy(-eta, cur.gradient);
      try {
        trial_paths = ev.forward(trial);
        trial_cost = ev.cost(trial_paths, trial);
      } catch (const BlowUpError&) {
        eta *= cfg.backtrack;
        continue;
      } catch (const EvaluationError&) {
        eta *= cfg.backtrack;
        continue;
      }
      if (trial_cost <= cur.cost - cfg.armijo * eta * gnorm2) {
        accepted = true;
        break;
      }
      eta *= cfg.backtrack;
    }
    if (!accepted) {
      rep.history.push_back(rec);
      throw StallError("line search failed after " + std::to_string(cfg.max_halvings) + " reductions at iteration " +
                       std::to_string(it) + " (cost " + format_double(cur.cost) + ", residual " +
                       format_double(rec.residual) + ")");
    }
    rec.step = eta;
    rec.update_norm = eta * rec.residual;
    rep.history.push_back(rec);

    const double decrease = cur.cost - trial_cost;
    ctrl = std::move(trial);
    cur.paths = std::move(trial_paths);
    cur.cost = trial_cost;
    cur.adjoint = ev.adjoint(cur.paths, ctrl);
    cur.gradient = ev.gradient(cur.paths, ctrl, cur.adjoint);
    if (decrease <= cfg.tol_cost) {
      IterationRecord last;
      last.iter = it + 1;
      last.cost = cur.cost;
      last.residual = ev.norm(cur.gradient);
      rep.history.push_back(last);
      rep.iterations = it + 1;
      rep.converged = true;
      rep.reason = "cost decrease below tolerance";
      break;
    }
  }
  rep.final_cost = cur.cost;
  rep.final_residual = rep.history.back().residual;
  rep.control = std::move(ctrl);
  rep.paths = std::move(cur.paths);
  rep.adjoint = std::move(cur.adjoint);
  return rep;
}

/// Zero of v -> D_v L(x, m, v, s; p, q) by damped Newton with a
/// finite-difference Jacobian, falling back to bisection when d = 1.
inline Vec solve_pointwise_argmin(const ProblemSpec& pr, const Vec& x, const EmpiricalMeasure& m, double s,
                                  const AdjointPoint& ap, const Vec& v_guess, std::size_t max_iter = 50, double tol = 1e-10)
{
  auto grad = [&](const Vec& v) { return grad_v_L(pr, x, m, v, s, ap); };
  Vec v = v_guess;
  Vec g = grad(v);
  for (std::size_t it = 0; it < max_iter && g.norm() > tol; ++it) {
    const double h = 1e-6;
    Mat J(pr.d, pr.d);
    for (int c = 0; c < pr.d; ++c) {
      Vec vp = v, vm = v;
      vp(c) += h;
      vm(c) -= h;
      J.col(c) = (grad(vp) - grad(vm)) / (2.0 * h);
    }
    const Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible()) break;
    const Vec dir = lu.solve(g);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      const Vec cand = v - t * dir;
      const Vec gc = grad(cand);
      if (gc.allFinite() && gc.norm() < g.norm()) {
        v = cand;
        g = gc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (g.allFinite() && g.norm() <= tol * std::max(1.0, std::abs(v.norm()))) return v;

  if (pr.d == 1) {
    auto gs = [&](double a) { return grad(Vec::Constant(1, a))(0); };
    double lo = v_guess(0) - 1.0, hi = v_guess(0) + 1.0;
    double glo = gs(lo), ghi = gs(hi);
    for (int e = 0; e < 60 && glo * ghi > 0.0; ++e) {
      const double w = hi - lo;
      lo -= w;
      hi += w;
      glo = gs(lo);
      ghi = gs(hi);
    }
    if (glo * ghi <= 0.0) {
      for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = gs(mid);
        if ((gm <= 0.0) == (glo <= 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      return Vec::Constant(1, 0.5 * (lo + hi));
    }
  }
  throw InnerSolveError("no zero of D_v L found (residual " + format_double(g.norm()) + ")");
}

/// Damped fixed-point iteration of the forward-backward system: the control
/// is relaxed toward the pointwise minimizer of the Lagrangian evaluated on
/// the current forward and adjoint ensembles. In mfg mode the adjoint omits
/// the measure-derivative terms, so the fixed point is an equilibrium rather
/// than a social optimum.
inline SolveReport solve_fixed_point(const ProblemSpec& p, const TimeGrid& grid, std::shared_ptr<const NoiseSample> noise,
                                     const SolveConfig& cfg, std::optional<ControlField> initial = std::nullopt)
{
  cfg.validate();
  if (cfg.mode == SolveMode::gradient) throw ConfigError("fixed-point solver needs mode picard or mfg");
  AdjointOptions opt;
  opt.include_measure_terms = cfg.mode == SolveMode::picard;
  opt.q_estimator = cfg.q_estimator;
  const Evaluator ev(p, grid, std::move(noise), cfg.basis, opt);

  SolveReport rep;
  rep.mode = cfg.mode;
  ControlField ctrl = initial ? std::move(*initial) : ev.zero_control();
  double prev_update = std::numeric_limits<double>::infinity();
  std::size_t growing = 0;

  for (std::size_t it = 0;; ++it) {
    PathEnsemble ens = ev.forward(ctrl);
    const double J = ev.cost(ens, ctrl);
    AdjointEnsemble adj = ev.adjoint(ens, ctrl);
    const ControlField grad = ev.gradient(ens, ctrl, adj);

    ControlField target = ctrl;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      const EmpiricalMeasure mu = ens.law(k);
      const double s = grid.time(k);
      for (Eigen::Index i = 0; i < ens.particles(); ++i) {
        const Vec x = ens.states[k].col(i);
        const Vec v = ctrl.values[k].col(i);
        const AdjointPoint ap = adj.at(k, i, p.n);
        const Mat q = p.has_volatility() ? ap.q : Mat::Zero(p.n, p.n);
        target.values[k].col(i) =
            p.argmin_control ? p.argmin_control(x, mu, s, ap.p, q, v) : solve_pointwise_argmin(p, x, mu, s, ap, v);
      }
    }
    ControlField update = target;
    update.axpy(-1.0, ctrl);
    const double unorm = ev.norm(update);

    IterationRecord rec;
    rec.iter = it;
    rec.cost = J;
    rec.residual = ev.norm(grad);
    rep.iterations = it;
    rep.final_cost = J;
    rep.final_residual = rec.residual;

    if (!std::isfinite(unorm)) throw NonContractionError("control update is not finite at iteration " + std::to_string(it));
    if (unorm <= cfg.tol_grad) {
      rec.update_norm = unorm;
      rep.history.push_back(rec);
      rep.converged = true;
      rep.reason = "control update below tolerance";
      rep.paths = std::move(ens);
      rep.adjoint = std::move(adj);
      break;
    }
    growing = unorm > prev_update ? growing + 1 : 0;
    prev_update = unorm;
    if (growing >= cfg.noncontraction_window) {
      rep.history.push_back(rec);
      throw NonContractionError("control updates grew for " + std::to_string(growing) +
                                " consecutive iterations (latest norm " + format_double(unorm) + ")");
    }
    if (it >= cfg.max_iters) {
      rec.update_norm = unorm;
      rep.history.push_back(rec);
      rep.reason = "iteration limit reached";
      rep.paths = std::move(ens);
      rep.adjoint = std::move(adj);
      break;
    }
    rec.step = cfg.damping;
    rec.update_norm = cfg.damping * unorm;
    rep.history.push_back(rec);
    ctrl.axpy(cfg.damping, update);
  }
  rep.control = std::move(ctrl);
  return rep;
}

inline SolveReport solve_picard_fbsde(const ProblemSpec& p, const TimeGrid& grid, std::shared_ptr<const NoiseSample> noise,
                                      SolveConfig cfg, std::optional<ControlField> initial = std::nullopt)
{
  cfg.mode = SolveMode::picard;
  return solve_fixed_point(p, grid, std::move(noise), cfg, std::move(initial));
}

inline SolveReport solve_mfg(const ProblemSpec& p, const TimeGrid& grid, std::shared_ptr<const NoiseSample> noise,
                             SolveConfig cfg, std::optional<ControlField> initial = std::nullopt)
{
  cfg.mode = SolveMode::mfg;
  return solve_fixed_point(p, grid, std::move(noise), cfg, std::move(initial));
}

/// Dispatches on `cfg.mode`.
inline SolveReport solve(const ProblemSpec& p, const TimeGrid& grid, std::shared_ptr<const NoiseSample> noise,
                         const SolveConfig& cfg, std::optional<ControlField> initial = std::nullopt)
{
  if (cfg.mode == SolveMode::gradient) {
    AdjointOptions opt;
    opt.q_estimator = cfg.q_estimator;
    const Evaluator ev(p, grid, std::move(noise), cfg.basis, opt);
    return solve_gradient_descent(ev, cfg, std::move(initial));
  }
  return solve_fixed_point(p, grid, std::move(noise), cfg, std::move(initial));
}

// ---------------------------------------------------------------------------
// Cost convexity along segments.

struct ConvexityRow {
  double theta = 0.0;
  double mixed_cost = 0.0;
  double chord_cost = 0.0;
  double gap = 0.0;
};

struct CostConvexityReport {
  double cost1 = 0.0;
  double cost2 = 0.0;
  double distance_squared = 0.0;  // ||v2 - v1||^2 in L^2
  double slack = 0.0;
  std::vector<ConvexityRow> rows;
  bool passed = true;
};

/// J(theta v1 + (1-theta) v2) - theta J(v1) - (1-theta) J(v2) for each theta,
/// all under the same noise. Passes when every gap is <= slack.
inline CostConvexityReport check_cost_convexity(const Evaluator& ev, const ControlField& v1, const ControlField& v2,
                                                const std::vector<double>& thetas, double slack = 0.0)
{
  CostConvexityReport rep;
  rep.slack = slack;
  rep.cost1 = ev.cost(v1);
  rep.cost2 = ev.cost(v2);
  ControlField diff = v2;
  diff.axpy(-1.0, v1);
  rep.distance_squared = ev.inner(diff, diff);
  for (double th : thetas) {
    ConvexityRow row;
    row.theta = th;
    if (th == 0.0) {
      row.mixed_cost = rep.cost2;
    } else if (th == 1.0) {
      row.mixed_cost = rep.cost1;
    } else {
      ControlField mix = v2;
      for (std::size_t k = 0; k < mix.steps(); ++k) mix.values[k] = th * v1.values[k] + (1.0 - th) * v2.values[k];
      row.mixed_cost = ev.cost(mix);
    }
    row.chord_cost = th * rep.cost1 + (1.0 - th) * rep.cost2;
    row.gap = (th == 0.0 || th == 1.0) ? 0.0 : row.mixed_cost - row.chord_cost;
    rep.passed = rep.passed && row.gap <= slack;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Adjoint gradient versus finite differences of the cost.

struct GradCheckOptions {
  std::size_t directions = 5;
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  bool common_random_numbers = true;
  std::uint64_t direction_seed = 0;
  /// Directions are random combinations of state monomials up to this degree
  /// with smoothly time-varying coefficients, normalized to unit L^2 norm.
  int direction_degree = 1;
};

struct GradCheckRow {
  double adjoint = 0.0;
  double finite_difference = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  double cost = 0.0;
  std::vector<GradCheckRow> rows;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool common_random_numbers = true;
  bool passed = false;
};

/// Adapted random direction: a function of the particle's own state at each step.
inline ControlField random_direction(const Evaluator& ev, const PathEnsemble& ens, int degree, Rng& rng)
{
  const auto& p = ev.problem();
  const auto& grid = ev.grid();
  RegressionBasis basis;
  basis.degree = degree;
  const Eigen::Index B = basis.size(p.n);
  const Mat a = standard_normal(p.d, B, rng);
  const Mat b = standard_normal(p.d, B, rng);
  const double pi = std::acos(-1.0);
  ControlField dir;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double c = std::cos(pi * (grid.time(k) - grid.t0()) / (grid.T() - grid.t0()));
    const Mat coef = a + c * b;
    dir.values.push_back(coef * basis.features(ens.states[k]));
  }
  const double nrm = ev.norm(dir);
  if (nrm > 0.0)
    for (auto& v : dir.values) v /= nrm;
  return dir;
}

inline GradCheckReport gradient_check(const Evaluator& ev, const ControlField& ctrl, const GradCheckOptions& opt)
{
  GradCheckReport rep;
  rep.tolerance = opt.tolerance;
  rep.common_random_numbers = opt.common_random_numbers;
  const CostGradient cg = cost_gradient(ev, ctrl);
  rep.cost = cg.cost;
  Rng rng = stream_rng(opt.direction_seed, Stream::directions);

  std::optional<Evaluator> other;
  std::shared_ptr<const NoiseSample> other_noise;
  if (!opt.common_random_numbers) {
    other_noise = draw_sample(ev.problem(), ev.grid(), ev.noise()->particles(), ev.noise()->seed + 1);
    other.emplace(ev.problem(), ev.grid(), other_noise);
  }
  for (std::size_t r = 0; r < opt.directions; ++r) {
    const ControlField dir = random_direction(ev, cg.paths, opt.direction_degree, rng);
    ControlField plus = ctrl, minus = ctrl;
    plus.axpy(opt.epsilon, dir);
    minus.axpy(-opt.epsilon, dir);
    const double jp = opt.common_random_numbers ? ev.cost(plus) : other->cost(plus);
    const double jm = ev.cost(minus);
    GradCheckRow row;
    row.finite_difference = (jp - jm) / (2.0 * opt.epsilon);
    row.adjoint = ev.inner(cg.gradient, dir);
    row.relative_error = std::abs(row.adjoint - row.finite_difference) / (1.0 + std::abs(row.finite_difference));
    rep.max_relative_error = std::max(rep.max_relative_error, row.relative_error);
    rep.rows.push_back(row);
  }
  rep.passed = rep.max_relative_error <= opt.tolerance;
  return rep;
}

}  // namespace mfpm
