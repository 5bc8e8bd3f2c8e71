#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "mfpm/errors.hpp"
#include "mfpm/measure.hpp"
#include "mfpm/problem.hpp"

namespace mfpm {

/// Uniform grid t_k = t0 + k dt, k = 0..K.
class TimeGrid {
 public:
  TimeGrid(double t0, double T, std::size_t K) : t0_(t0), T_(T), K_(K)
  {
    if (K == 0) throw DimensionError("time grid needs at least one step");
    if (!(T > t0)) throw DimensionError("time grid needs T > t0");
  }
  static TimeGrid for_problem(const ProblemSpec& p, std::size_t K) { return TimeGrid(p.t0, p.T, K); }

  double t0() const { return t0_; }
  double T() const { return T_; }
  std::size_t steps() const { return K_; }
  double dt() const { return (T_ - t0_) / static_cast<double>(K_); }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * dt(); }

 private:
  double t0_;
  double T_;
  std::size_t K_;
};

/// One fixed realization of the randomness: initial states drawn from the
/// problem's sampler and Brownian increments dW_k ~ N(0, dt I), k = 0..K-1.
/// Shared between every evaluation of a solve (common random numbers).
struct NoiseSample {
  std::uint64_t seed = 0;
  Mat initial;                    // n x N
  Vec weights;                    // N, uniform
  std::vector<Mat> increments;    // K entries of n x N; empty without volatility

  Eigen::Index particles() const { return initial.cols(); }
  bool has_increments() const { return !increments.empty(); }
};

/// Draws initial states from stream (seed, initial_state) and increments from
/// stream (seed, increments).
inline std::shared_ptr<const NoiseSample> draw_sample(const ProblemSpec& p, const TimeGrid& grid, Eigen::Index N,
                                                      std::uint64_t seed)
{
  if (N < 1) throw EmptyMeasureError("need at least one particle");
  if (!p.initial_sampler) throw DimensionError("problem has no initial sampler");
  auto out = std::make_shared<NoiseSample>();
  out->seed = seed;
  Rng init_rng = stream_rng(seed, Stream::initial_state);
  out->initial = p.initial_sampler(N, init_rng);
  if (out->initial.rows() != p.n || out->initial.cols() != N) throw DimensionError("initial sampler returned wrong shape");
  out->weights = Vec::Constant(N, 1.0 / static_cast<double>(N));
  if (p.has_volatility()) {
    Rng inc_rng = stream_rng(seed, Stream::increments);
    const double sq = std::sqrt(grid.dt());
    out->increments.reserve(grid.steps());
    for (std::size_t k = 0; k < grid.steps(); ++k) out->increments.push_back(sq * standard_normal(p.n, N, inc_rng));
  }
  return out;
}

/// Open-loop control values v_i(t_k), k = 0..K-1, each a d x N block.
struct ControlField {
  std::vector<Mat> values;

  static ControlField zeros(int d, Eigen::Index N, std::size_t K)
  {
    ControlField c;
    c.values.assign(K, Mat::Zero(d, N));
    return c;
  }
  std::size_t steps() const { return values.size(); }
  Eigen::Index particles() const { return values.empty() ? 0 : values.front().cols(); }

  ControlField& axpy(double a, const ControlField& x)
  {
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += a * x.values[k];
    return *this;
  }
  bool all_finite() const
  {
    for (const auto& v : values)
      if (!v.allFinite()) return false;
    return true;
  }
};

/// <a, b> = sum_k dt sum_i w_i a_i(t_k).b_i(t_k), summed in a fixed order.
inline double l2_inner(const ControlField& a, const ControlField& b, const Vec& weights, double dt)
{
  if (a.steps() != b.steps()) throw DimensionError("control fields live on different grids");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.steps(); ++k) {
    double step = 0.0;
    const Mat& A = a.values[k];
    const Mat& B = b.values[k];
    for (Eigen::Index i = 0; i < A.cols(); ++i) step += weights(i) * A.col(i).dot(B.col(i));
    acc += dt * step;
  }
  return acc;
}

inline double l2_norm(const ControlField& a, const Vec& weights, double dt) { return std::sqrt(l2_inner(a, a, weights, dt)); }

/// Particle trajectories X_i(t_k), k = 0..K, with the noise that produced them.
struct PathEnsemble {
  std::shared_ptr<const NoiseSample> noise;
  std::vector<Mat> states;  // K+1 entries of n x N

  const Vec& weights() const { return noise->weights; }
  Eigen::Index particles() const { return states.front().cols(); }
  std::size_t steps() const { return states.size() - 1; }
  EmpiricalMeasure law(std::size_t k) const { return EmpiricalMeasure(states[k], noise->weights); }
};

namespace detail {

constexpr double kBlowUpThreshold = 1e8;

inline void check_state(const Mat& X, std::size_t k)
{
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    for (Eigen::Index a = 0; a < X.rows(); ++a) {
      const double x = X(a, i);
      if (!std::isfinite(x)) throw BlowUpError(k, "non-finite state at particle " + std::to_string(i));
      if (std::abs(x) > kBlowUpThreshold) throw BlowUpError(k, "state magnitude exceeds 1e8 at particle " + std::to_string(i));
    }
  }
}

inline void check_control_shape(const ProblemSpec& p, const TimeGrid& grid, const ControlField& ctrl, Eigen::Index N)
{
  if (ctrl.steps() != grid.steps())
    throw DimensionError("control has " + std::to_string(ctrl.steps()) + " steps, grid has " + std::to_string(grid.steps()));
  for (const auto& v : ctrl.values)
    if (v.rows() != p.d || v.cols() != N) throw DimensionError("control block has wrong shape");
}

inline PathEnsemble integrate(const ProblemSpec& p, const TimeGrid& grid, const ControlField& ctrl,
                              std::shared_ptr<const NoiseSample> noise, bool with_noise)
{
  const auto N = noise->particles();
  check_control_shape(p, grid, ctrl, N);
  if (with_noise && !noise->has_increments()) throw DimensionError("noise sample carries no Brownian increments");
  PathEnsemble ens;
  ens.noise = noise;
  ens.states.reserve(grid.steps() + 1);
  ens.states.push_back(noise->initial);
  check_state(ens.states.back(), 0);
  const double dt = grid.dt();
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const Mat& X = ens.states[k];
    const EmpiricalMeasure mu(X, noise->weights);
    const double s = grid.time(k);
    Mat next = X;
    Vec x(p.n), v(p.d);
    for (Eigen::Index i = 0; i < N; ++i) {
      x = X.col(i);
      v = ctrl.values[k].col(i);
      if (p.drift) next.col(i).noalias() += dt * p.drift(x, mu, v, s);
      if (with_noise) next.col(i).noalias() += p.volatility(x, mu, v, s) * noise->increments[k].col(i);
    }
    check_state(next, k + 1);
    ens.states.push_back(std::move(next));
  }
  return ens;
}

}  // namespace detail

/// Euler-Maruyama for the controlled particle system; the law entering the
/// coefficients is the empirical law at the left endpoint of each step.
inline PathEnsemble simulate_forward(const ProblemSpec& p, const TimeGrid& grid, const ControlField& ctrl,
                                     std::shared_ptr<const NoiseSample> noise)
{
  return detail::integrate(p, grid, ctrl, std::move(noise), p.has_volatility());
}

/// Noise-free recursion; requires the volatility to vanish identically along
/// the computed characteristics.
inline PathEnsemble simulate_deterministic(const ProblemSpec& p, const TimeGrid& grid, const ControlField& ctrl,
                                           std::shared_ptr<const NoiseSample> noise)
{
  PathEnsemble ens = detail::integrate(p, grid, ctrl, std::move(noise), false);
  if (p.has_volatility()) {
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      const EmpiricalMeasure mu = ens.law(k);
      for (Eigen::Index i = 0; i < ens.particles(); ++i) {
        const Mat sig = p.volatility(ens.states[k].col(i), mu, ctrl.values[k].col(i), grid.time(k));
        if (!sig.isZero(0.0)) throw ModeError("deterministic mode requires zero volatility (step " + std::to_string(k) + ")");
      }
    }
  }
  return ens;
}

/// Left-endpoint quadrature of the running cost plus the terminal cost,
/// averaged over particles with their weights.
inline double evaluate_cost(const ProblemSpec& p, const TimeGrid& grid, const PathEnsemble& ens, const ControlField& ctrl)
{
  detail::check_control_shape(p, grid, ctrl, ens.particles());
  const Vec& w = ens.weights();
  double total = 0.0;
  if (p.running_cost) {
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      const EmpiricalMeasure mu = ens.law(k);
      const double s = grid.time(k);
      double step = 0.0;
      Vec x(p.n), v(p.d);
      for (Eigen::Index i = 0; i < ens.particles(); ++i) {
        x = ens.states[k].col(i);
        v = ctrl.values[k].col(i);
        step += w(i) * p.running_cost(x, mu, v, s);
      }
      total += grid.dt() * step;
    }
  }
  if (p.terminal_cost) {
    const EmpiricalMeasure mu = ens.law(grid.steps());
    double term = 0.0;
    Vec x(p.n);
    for (Eigen::Index i = 0; i < ens.particles(); ++i) {
      x = ens.states.back().col(i);
      term += w(i) * p.terminal_cost(x, mu);
    }
    total += term;
  }
  if (!std::isfinite(total)) throw EvaluationError("cost is not finite");
  return total;
}

/// Per-step L^2(m) norms and means of the ensemble.
struct MomentReport {
  std::vector<double> norms;
  std::vector<Vec> means;
  double max_norm = 0.0;
  std::size_t argmax = 0;
};

inline MomentReport moment_diagnostics(const PathEnsemble& ens)
{
  MomentReport r;
  for (std::size_t k = 0; k < ens.states.size(); ++k) {
    const double nrm = ensemble_norm(ens.states[k], ens.weights());
    r.norms.push_back(nrm);
    r.means.push_back(ens.states[k] * ens.weights());
    if (nrm > r.max_norm || k == 0) {
      r.max_norm = nrm;
      r.argmax = k;
    }
  }
  return r;
}

}  // namespace mfpm
