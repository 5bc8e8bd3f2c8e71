#pragma once

#include "mfpm/problem.hpp"

namespace mfpm {

/// Adjoint value at one particle: p in R^n and the n loadings q^j stored as
/// the columns of an n x n matrix.
struct AdjointPoint {
  Vec p;
  Mat q;
};

namespace detail {

inline void require_adjoint_dims(const ProblemSpec& pr, const AdjointPoint& ap, const char* where)
{
  if (ap.p.size() != pr.n) throw DimensionError(std::string(where) + ": adjoint p has wrong dimension");
  if (pr.has_volatility() && (ap.q.rows() != pr.n || ap.q.cols() != pr.n))
    throw DimensionError(std::string(where) + ": adjoint q must be n x n");
}

}  // namespace detail

/// L(x, m, v, s; p, q) = p.f + sum_j q^j.sigma^j + g.
inline double eval_L(const ProblemSpec& pr, const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s,
                     const AdjointPoint& ap)
{
  detail::require_dims(pr, x, v, "eval_L");
  detail::require_adjoint_dims(pr, ap, "eval_L");
  double out = 0.0;
  if (pr.drift) out += ap.p.dot(pr.drift(x, m, v, s));
  if (pr.volatility) {
    const Mat sig = pr.volatility(x, m, v, s);
    for (int j = 0; j < pr.n; ++j) out += ap.q.col(j).dot(sig.col(j));
  }
  if (pr.running_cost) out += pr.running_cost(x, m, v, s);
  return out;
}

/// Gradient of L in v: D_v f' p + sum_j (D_v sigma^j)' q^j + D_v g.
inline Vec grad_v_L(const ProblemSpec& pr, const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s,
                    const AdjointPoint& ap)
{
  detail::require_dims(pr, x, v, "grad_v_L");
  detail::require_adjoint_dims(pr, ap, "grad_v_L");
  Vec out = Vec::Zero(pr.d);
  if (pr.drift_dv) out.noalias() += pr.drift_dv(x, m, v, s).transpose() * ap.p;
  if (pr.volatility_dv)
    for (int j = 0; j < pr.n; ++j) out.noalias() += pr.volatility_dv(x, m, v, s, j).transpose() * ap.q.col(j);
  if (pr.running_cost_dv) out += pr.running_cost_dv(x, m, v, s);
  return out;
}

/// Gradient of L in x with the law held fixed (no independent-copy terms).
inline Vec grad_x_L_local(const ProblemSpec& pr, const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s,
                          const AdjointPoint& ap)
{
  detail::require_dims(pr, x, v, "grad_x_L_local");
  detail::require_adjoint_dims(pr, ap, "grad_x_L_local");
  Vec out = Vec::Zero(pr.n);
  if (pr.drift_dx) out.noalias() += pr.drift_dx(x, m, v, s).transpose() * ap.p;
  if (pr.volatility_dx)
    for (int j = 0; j < pr.n; ++j) out.noalias() += pr.volatility_dx(x, m, v, s, j).transpose() * ap.q.col(j);
  if (pr.running_cost_dx) out += pr.running_cost_dx(x, m, v, s);
  return out;
}

/// Columns of `Q` hold vec(q) (column-major n x n) per particle; an empty
/// matrix means q = 0.
inline AdjointPoint adjoint_at(const Mat& P, const Mat& Q, Eigen::Index i, int n)
{
  AdjointPoint ap;
  ap.p = P.col(i);
  ap.q = Q.size() == 0 ? Mat::Zero(n, n) : Mat(Eigen::Map<const Mat>(Q.col(i).data(), n, n));
  return ap;
}

/// Independent-copy part of the x-gradient of the lifted Lagrangian, with the
/// ensemble standing in for both the law and its independent copy:
///
///   term_i = sum_y w_y [ Dxi df/dnu(X_y, mu, v_y, s)(X_i)' P_y
///                        + sum_j Dxi dsigma^j/dnu(X_y, mu, v_y, s)(X_i)' q^j_y
///                        + Dxi dg/dnu(X_y, mu, v_y, s)(X_i) ]
///
/// `mu` must be the law of the columns of X. Returns an n x N matrix.
inline Mat meanfield_driver_terms(const ProblemSpec& pr, const Mat& X, const Mat& V, const Mat& P, const Mat& Q,
                                  const EmpiricalMeasure& mu, double s)
{
  const auto N = X.cols();
  if (X.rows() != pr.n || V.rows() != pr.d || V.cols() != N || P.rows() != pr.n || P.cols() != N || mu.size() != N)
    throw DimensionError("meanfield_driver_terms: inconsistent ensemble shapes");
  if (Q.size() != 0 && (Q.rows() != pr.n * pr.n || Q.cols() != N))
    throw DimensionError("meanfield_driver_terms: q block must be (n*n) x N");
  Mat out = Mat::Zero(pr.n, N);
  if (!pr.depends_on_measure()) return out;

  const bool use_vol = pr.volatility_dmeasure && Q.size() != 0;
  auto kernel = [&](Eigen::Index y, const Vec& xi) {
    const Vec xy = X.col(y);
    const Vec vy = V.col(y);
    Vec k = Vec::Zero(pr.n);
    if (pr.drift_dmeasure) k.noalias() += pr.drift_dmeasure(xy, mu, vy, s, xi).transpose() * P.col(y);
    if (use_vol) {
      const Eigen::Map<const Mat> qy(Q.col(y).data(), pr.n, pr.n);
      for (int j = 0; j < pr.n; ++j) k.noalias() += pr.volatility_dmeasure(xy, mu, vy, s, xi, j).transpose() * qy.col(j);
    }
    if (pr.running_cost_dmeasure) k += pr.running_cost_dmeasure(xy, mu, vy, s, xi);
    return k;
  };

  if (pr.measure_kernels_xi_independent) {
    Vec acc = Vec::Zero(pr.n);
    const Vec xi = X.col(0);
    for (Eigen::Index y = 0; y < N; ++y) acc += mu.weight(y) * kernel(y, xi);
    out.colwise() = acc;
    return out;
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vec xi = X.col(i);
    Vec acc = Vec::Zero(pr.n);
    for (Eigen::Index y = 0; y < N; ++y) acc += mu.weight(y) * kernel(y, xi);
    out.col(i) = acc;
  }
  return out;
}

}  // namespace mfpm
