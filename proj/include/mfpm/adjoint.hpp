#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mfpm/forward.hpp"
#include "mfpm/lagrangian.hpp"

namespace mfpm {

/// Polynomial features of total degree <= `degree` in the state coordinates,
/// constant first. Conditional expectations given the state are approximated
/// by ridge-regularized least squares on these features.
struct RegressionBasis {
  int degree = 2;
  /// Ridge parameter per particle: the normal equations use rho = this * N.
  double ridge_per_particle = 1e-8;

  static std::vector<std::vector<int>> exponents(int n, int degree)
  {
    std::vector<std::vector<int>> out;
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    // enumerate by total degree so the constant comes first
    for (int total = 0; total <= degree; ++total) {
      std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == n - 1) {
          e[static_cast<std::size_t>(pos)] = left;
          out.push_back(e);
          return;
        }
        for (int a = left; a >= 0; --a) {
          e[static_cast<std::size_t>(pos)] = a;
          rec(pos + 1, left - a);
        }
      };
      rec(0, total);
    }
    return out;
  }

  Eigen::Index size(int n) const { return static_cast<Eigen::Index>(exponents(n, degree).size()); }

  /// B x N feature matrix for the columns of X.
  Mat features(const Mat& X) const
  {
    const auto ex = exponents(static_cast<int>(X.rows()), degree);
    Mat phi(static_cast<Eigen::Index>(ex.size()), X.cols());
    for (std::size_t b = 0; b < ex.size(); ++b) {
      for (Eigen::Index i = 0; i < X.cols(); ++i) {
        double val = 1.0;
        for (Eigen::Index a = 0; a < X.rows(); ++a)
          for (int r = 0; r < ex[b][static_cast<std::size_t>(a)]; ++r) val *= X(a, i);
        phi(static_cast<Eigen::Index>(b), i) = val;
      }
    }
    return phi;
  }
};

struct RegressionDiagnostics {
  std::size_t step = 0;
  double residual_rms = 0.0;
  double condition = 1.0;
};

/// Weighted ridge least squares: coefficients C (r x B) minimizing
/// sum_i N w_i |Y_i - C phi_i|^2 + rho |C|^2.
struct RegressionFit {
  Mat coefficients;
  double condition = 1.0;
  double residual_rms = 0.0;
};

inline RegressionFit fit_regression(const Mat& phi, const Vec& weights, const Mat& Y, double ridge)
{
  const auto N = phi.cols();
  if (Y.cols() != N || weights.size() != N) throw DimensionError("regression: inconsistent sample counts");
  const Vec nw = static_cast<double>(N) * weights;
  const Mat wphi = phi * nw.asDiagonal();
  Mat gram = wphi * phi.transpose();
  gram.diagonal().array() += ridge;
  const Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-14 * hi) || !std::isfinite(hi))
    throw RegressionError("normal equations are singular (eigenvalues " + std::to_string(lo) + " .. " + std::to_string(hi) +
                          "); increase the ridge parameter or the particle count");
  const Eigen::LDLT<Mat> ldlt(gram);
  RegressionFit fit;
  fit.coefficients = ldlt.solve(wphi * Y.transpose()).transpose();
  fit.condition = hi / lo;
  const Mat resid = Y - fit.coefficients * phi;
  fit.residual_rms = ensemble_norm(resid, weights);
  return fit;
}

/// How Q is estimated from P(t_{k+1}) and the increments.
enum class QEstimator {
  /// Q^j = E[P(t_{k+1}) dW^j | X(t_k)] / dt by regressing the product.
  product,
  /// Regress P(t_{k+1}) on [phi, phi * dW^1/sqrt(dt), ..., phi * dW^n/sqrt(dt)]:
  /// the phi block gives E[P(t_{k+1}) | X(t_k)] and the dW blocks give Q.
  joint,
};

struct AdjointOptions {
  /// Drop all measure-derivative (independent-copy) terms: the equilibrium
  /// (mean field game) adjoint instead of the social-optimum one.
  bool include_measure_terms = true;
  QEstimator q_estimator = QEstimator::joint;
};

/// Discrete adjoint on the forward grid.
///
/// `P[k]`, k = 0..K, is the adjoint state; `P_next[k]` = E[P(t_{k+1}) | X(t_k)]
/// and `Q[k]` (columns vec(q), n*n x N) are the values used in the Lagrangian
/// at step k. Without volatility, P_next[k] = P[k+1] and Q is empty.
struct AdjointEnsemble {
  std::vector<Mat> P;
  std::vector<Mat> P_next;
  std::vector<Mat> Q;
  std::vector<RegressionDiagnostics> diagnostics;

  AdjointPoint at(std::size_t k, Eigen::Index i, int n) const
  {
    static const Mat none;
    return adjoint_at(P_next[k], Q.empty() ? none : Q[k], i, n);
  }
};

/// D_x g_T(X_i, mu) + sum_y w_y Dxi dg_T/dnu(X_y, mu)(X_i) at the terminal
/// slice. n x N.
inline Mat terminal_gradient(const ProblemSpec& p, const Mat& X, const Vec& weights, bool include_measure_terms = true)
{
  if (X.rows() != p.n || X.cols() != weights.size()) throw DimensionError("terminal_gradient: inconsistent shapes");
  const auto N = X.cols();
  const EmpiricalMeasure mu(X, weights);
  Mat out = Mat::Zero(p.n, N);
  Vec x(p.n);
  if (p.terminal_cost_dx)
    for (Eigen::Index i = 0; i < N; ++i) {
      x = X.col(i);
      out.col(i) = p.terminal_cost_dx(x, mu);
    }
  if (include_measure_terms && p.terminal_cost_dmeasure) {
    if (p.measure_kernels_xi_independent) {
      Vec acc = Vec::Zero(p.n);
      const Vec xi = X.col(0);
      for (Eigen::Index y = 0; y < N; ++y) acc += weights(y) * p.terminal_cost_dmeasure(X.col(y), mu, xi);
      out.colwise() += acc;
    } else {
      for (Eigen::Index i = 0; i < N; ++i) {
        const Vec xi = X.col(i);
        Vec acc = Vec::Zero(p.n);
        for (Eigen::Index y = 0; y < N; ++y) acc += weights(y) * p.terminal_cost_dmeasure(X.col(y), mu, xi);
        out.col(i) += acc;
      }
    }
  }
  return out;
}

namespace detail {

inline void check_adjoint(const Mat& M, std::size_t k)
{
  if (!M.allFinite()) throw BlowUpError(k, "non-finite adjoint value");
}

// x-gradient of the lifted Lagrangian at step k, all particles.
inline Mat adjoint_driver(const ProblemSpec& p, const PathEnsemble& ens, const ControlField& ctrl, std::size_t k, double s,
                          const Mat& P, const Mat& Q, bool include_measure_terms)
{
  const Mat& X = ens.states[k];
  const EmpiricalMeasure mu(X, ens.weights());
  const auto N = X.cols();
  Mat driver(p.n, N);
  Vec x(p.n), v(p.d);
  for (Eigen::Index i = 0; i < N; ++i) {
    x = X.col(i);
    v = ctrl.values[k].col(i);
    driver.col(i) = grad_x_L_local(p, x, mu, v, s, adjoint_at(P, Q, i, p.n));
  }
  if (include_measure_terms) driver += meanfield_driver_terms(p, X, ctrl.values[k], P, Q, mu, s);
  return driver;
}

}  // namespace detail

/// Backward recursion for the adjoint pair (P, Q):
///
///   P(t_K)     = terminal gradient
///   P_next(t_k), Q(t_k) = regression of P(t_{k+1}) on features of X(t_k)
///   P(t_k)     = P_next(t_k) + dt * D_x L(X(t_k), v(t_k); P_next(t_k), Q(t_k))
///
/// where D_x L includes the independent-copy terms unless disabled. Without
/// volatility no regression is done and the recursion is the exact discrete
/// adjoint of the Euler scheme.
inline AdjointEnsemble solve_adjoint(const ProblemSpec& p, const TimeGrid& grid, const PathEnsemble& ens,
                                     const ControlField& ctrl, const RegressionBasis& basis, const AdjointOptions& opt = {})
{
  const std::size_t K = grid.steps();
  const auto N = ens.particles();
  detail::check_control_shape(p, grid, ctrl, N);
  if (ens.steps() != K) throw DimensionError("path ensemble and grid disagree on the step count");
  const bool stochastic = p.has_volatility();
  if (stochastic && !ens.noise->has_increments()) throw DimensionError("stochastic adjoint needs the Brownian increments");

  AdjointEnsemble adj;
  adj.P.assign(K + 1, Mat());
  adj.P_next.assign(K, Mat());
  if (stochastic) adj.Q.assign(K, Mat());

  adj.P[K] = terminal_gradient(p, ens.states[K], ens.weights(), opt.include_measure_terms);
  detail::check_adjoint(adj.P[K], K);

  const double dt = grid.dt();
  const int n = p.n;
  Eigen::Index B = 0;
  if (stochastic) {
    B = basis.size(n);
    const Eigen::Index cols = opt.q_estimator == QEstimator::joint ? B * (1 + n) : B;
    if (4 * cols > N)
      throw RegressionError("regression basis with " + std::to_string(cols) + " functions needs at least " +
                            std::to_string(4 * cols) + " particles");
  }
  const double ridge = basis.ridge_per_particle * static_cast<double>(N);

  for (std::size_t kk = K; kk-- > 0;) {
    const Mat& Pn = adj.P[kk + 1];
    if (!stochastic) {
      adj.P_next[kk] = Pn;
    } else {
      const Mat phi = basis.features(ens.states[kk]);
      const Mat& dW = ens.noise->increments[kk];
      RegressionDiagnostics diag;
      diag.step = kk;
      Mat Qk(n * n, N);
      if (opt.q_estimator == QEstimator::joint) {
        const double isq = 1.0 / std::sqrt(dt);
        Mat design(B * (1 + n), N);
        design.topRows(B) = phi;
        for (int j = 0; j < n; ++j)
          design.middleRows(B * (1 + j), B) = phi * (isq * dW.row(j)).asDiagonal();
        const RegressionFit fit = fit_regression(design, ens.weights(), Pn, ridge);
        adj.P_next[kk] = fit.coefficients.leftCols(B) * phi;
        for (int j = 0; j < n; ++j)
          Qk.middleRows(n * j, n) = isq * fit.coefficients.middleCols(B * (1 + j), B) * phi;
        diag.condition = fit.condition;
        diag.residual_rms = fit.residual_rms;
      } else {
        const RegressionFit fit = fit_regression(phi, ens.weights(), Pn, ridge);
        adj.P_next[kk] = fit.coefficients * phi;
        diag.condition = fit.condition;
        diag.residual_rms = fit.residual_rms;
        for (int j = 0; j < n; ++j) {
          const Mat target = Pn * (dW.row(j) / dt).asDiagonal();
          const RegressionFit qfit = fit_regression(phi, ens.weights(), target, ridge);
          Qk.middleRows(n * j, n) = qfit.coefficients * phi;
        }
      }
      adj.Q[kk] = std::move(Qk);
      adj.diagnostics.push_back(diag);
    }
    static const Mat none;
    const Mat& Qk = stochastic ? adj.Q[kk] : none;
    const Mat driver =
        detail::adjoint_driver(p, ens, ctrl, kk, grid.time(kk), adj.P_next[kk], Qk, opt.include_measure_terms);
    adj.P[kk] = adj.P_next[kk] + dt * driver;
    detail::check_adjoint(adj.P[kk], kk);
  }
  std::reverse(adj.diagnostics.begin(), adj.diagnostics.end());
  return adj;
}

/// D_v L at every particle and step, using P_next and Q of step k. This is
/// the L^2 gradient of the cost with respect to the open-loop control.
inline ControlField adjoint_gradient(const ProblemSpec& p, const TimeGrid& grid, const PathEnsemble& ens,
                                     const ControlField& ctrl, const AdjointEnsemble& adj)
{
  detail::check_control_shape(p, grid, ctrl, ens.particles());
  ControlField g;
  g.values.reserve(grid.steps());
  Vec x(p.n), v(p.d);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const EmpiricalMeasure mu = ens.law(k);
    Mat gk(p.d, ens.particles());
    static const Mat none;
    const Mat& Qk = adj.Q.empty() ? none : adj.Q[k];
    for (Eigen::Index i = 0; i < ens.particles(); ++i) {
      x = ens.states[k].col(i);
      v = ctrl.values[k].col(i);
      gk.col(i) = grad_v_L(p, x, mu, v, grid.time(k), adjoint_at(adj.P_next[k], Qk, i, p.n));
    }
    g.values.push_back(std::move(gk));
  }
  return g;
}

/// sqrt(sum_k dt mean_i |D_v L_i(t_k)|^2).
inline double optimality_residual(const ProblemSpec& p, const TimeGrid& grid, const PathEnsemble& ens,
                                  const ControlField& ctrl, const AdjointEnsemble& adj)
{
  return l2_norm(adjoint_gradient(p, grid, ens, ctrl, adj), ens.weights(), grid.dt());
}

}  // namespace mfpm
