#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mfpm/errors.hpp"
#include "mfpm/types.hpp"

namespace mfpm {

/// Weighted point cloud on R^n. Points are stored column-wise (n x N).
///
/// The measure is immutable after construction; its mean is computed once so
/// coefficient callables that depend on the first moment stay O(1) per call.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(Mat points, Vec weights) : points_(std::move(points)), weights_(std::move(weights))
  {
    if (points_.cols() == 0 || weights_.size() == 0) throw EmptyMeasureError("measure has no atoms");
    if (points_.rows() == 0) throw DimensionError("atoms must have dimension >= 1");
    if (points_.cols() != weights_.size())
      throw DimensionError("got " + std::to_string(points_.cols()) + " atoms but " +
                           std::to_string(weights_.size()) + " weights");
    double total = 0.0;
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!(weights_(i) >= 0.0)) throw DimensionError("weights must be nonnegative");
      total += weights_(i);
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw DimensionError("weights sum to " + std::to_string(total) + ", expected 1");
    mean_ = points_ * weights_;
  }

  /// Equal weights 1/N.
  static EmpiricalMeasure uniform(Mat points)
  {
    const auto N = points.cols();
    if (N == 0) throw EmptyMeasureError("measure has no atoms");
    return EmpiricalMeasure(std::move(points), Vec::Constant(N, 1.0 / static_cast<double>(N)));
  }

  /// Single atom at `at`.
  static EmpiricalMeasure dirac(const Vec& at) { return EmpiricalMeasure(Mat(at), Vec::Ones(1)); }

  /// delta_0 in R^n.
  static EmpiricalMeasure origin(Eigen::Index n) { return dirac(Vec::Zero(n)); }

  /// m + eps (m' - m), realized by concatenating atoms with scaled weights.
  static EmpiricalMeasure mixture(const EmpiricalMeasure& m, const EmpiricalMeasure& m2, double eps)
  {
    if (m.dim() != m2.dim()) throw DimensionError("mixture of measures with different dimensions");
    if (eps < 0.0 || eps > 1.0) throw DimensionError("mixture parameter must lie in [0, 1]");
    Mat pts(m.dim(), m.size() + m2.size());
    pts << m.points(), m2.points();
    Vec w(m.size() + m2.size());
    w << (1.0 - eps) * m.weights(), eps * m2.weights();
    return EmpiricalMeasure(std::move(pts), std::move(w));
  }

  Eigen::Index dim() const { return points_.rows(); }
  Eigen::Index size() const { return points_.cols(); }
  const Mat& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  auto point(Eigen::Index i) const { return points_.col(i); }
  double weight(Eigen::Index i) const { return weights_(i); }
  const Vec& mean() const { return mean_; }

  bool has_uniform_weights() const
  {
    const double w0 = weights_(0);
    for (Eigen::Index i = 1; i < weights_.size(); ++i)
      if (weights_(i) != w0) return false;
    return true;
  }

  /// Sum_i w_i phi(x_i), accumulated in atom order.
  template <typename Fn>
  double integrate(Fn&& phi) const
  {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i) acc += weights_(i) * phi(Vec(points_.col(i)));
    return acc;
  }

 private:
  Mat points_;
  Vec weights_;
  Vec mean_;
};

namespace detail {

inline void require_1d(const EmpiricalMeasure& m)
{
  if (m.dim() != 1) throw DimensionError("expected a one-dimensional measure, got dimension " + std::to_string(m.dim()));
}

}  // namespace detail

/// Exact W2 between one-dimensional measures with arbitrary weights, via the
/// quantile (monotone) coupling of the two CDFs.
inline double wasserstein2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b)
{
  detail::require_1d(a);
  detail::require_1d(b);

  auto sorted_order = [](const EmpiricalMeasure& m) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) { return m.points()(0, i) < m.points()(0, j); });
    return idx;
  };
  const auto ia = sorted_order(a);
  const auto ib = sorted_order(b);

  std::size_t p = 0;
  std::size_t q = 0;
  double ra = a.weight(ia[0]);
  double rb = b.weight(ib[0]);
  double acc = 0.0;
  // walk the merged breakpoints of the two quantile functions
  while (p < ia.size() && q < ib.size()) {
    const double mass = std::min(ra, rb);
    const double diff = a.points()(0, ia[p]) - b.points()(0, ib[q]);
    acc += mass * diff * diff;
    ra -= mass;
    rb -= mass;
    if (ra <= 0.0) {
      if (++p < ia.size()) ra = a.weight(ia[p]);
    }
    if (rb <= 0.0) {
      if (++q < ib.size()) rb = b.weight(ib[q]);
    }
  }
  return std::sqrt(std::max(acc, 0.0));
}

namespace detail {

inline Mat squared_cost_matrix(const EmpiricalMeasure& a, const EmpiricalMeasure& b)
{
  const auto N = a.size();
  Mat cost(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) cost(i, j) = (a.point(i) - b.point(j)).squaredNorm();
  return cost;
}

// Minimum over all permutations by dynamic programming on subsets of
// already-assigned targets: O(N 2^N), exact.
inline double assignment_subset_dp(const Mat& cost)
{
  const auto N = static_cast<std::size_t>(cost.rows());
  const std::size_t full = (std::size_t{1} << N);
  std::vector<double> best(full, std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  for (std::size_t mask = 0; mask < full; ++mask) {
    if (!std::isfinite(best[mask])) continue;
    const auto row = static_cast<Eigen::Index>(std::popcount(mask));
    if (static_cast<std::size_t>(row) == N) continue;
    for (std::size_t j = 0; j < N; ++j) {
      if (mask & (std::size_t{1} << j)) continue;
      const std::size_t next = mask | (std::size_t{1} << j);
      best[next] = std::min(best[next], best[mask] + cost(row, static_cast<Eigen::Index>(j)));
    }
  }
  return best[full - 1];
}

// Hungarian method (shortest augmenting paths with potentials), O(N^3).
inline double assignment_hungarian(const Mat& cost)
{
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost(static_cast<Eigen::Index>(p[j] - 1), static_cast<Eigen::Index>(j - 1));
  return total;
}

}  // namespace detail

/// Exact W2 between two equal-size, uniformly weighted clouds in any
/// dimension. Up to `exhaustive_cap` atoms every permutation is covered by a
/// subset DP; larger clouds use the Hungarian method. Intended as a test
/// oracle, not for production-size ensembles.
inline double wasserstein2_small_n(const EmpiricalMeasure& a, const EmpiricalMeasure& b, Eigen::Index exhaustive_cap = 12)
{
  if (a.dim() != b.dim()) throw DimensionError("measures have different dimensions");
  if (a.size() != b.size())
    throw UnsupportedCouplingError("exact coupling needs equal atom counts (" + std::to_string(a.size()) + " vs " +
                                   std::to_string(b.size()) + ")");
  if (!a.has_uniform_weights() || !b.has_uniform_weights())
    throw UnsupportedCouplingError("exact coupling needs uniform weights");
  const Mat cost = detail::squared_cost_matrix(a, b);
  const double total = a.size() <= exhaustive_cap ? detail::assignment_subset_dp(cost) : detail::assignment_hungarian(cost);
  return std::sqrt(std::max(total / static_cast<double>(a.size()), 0.0));
}

/// Law of the particle values X_i under the weights of m.
inline EmpiricalMeasure push_forward(const Mat& X, const EmpiricalMeasure& m)
{
  if (X.cols() != m.size())
    throw DimensionError("push_forward: " + std::to_string(X.cols()) + " images for " + std::to_string(m.size()) + " atoms");
  return EmpiricalMeasure(X, m.weights());
}

/// sqrt(sum_i w_i |X_i|^2), i.e. the norm of X in L^2(m).
inline double ensemble_norm(const Mat& X, const Vec& weights)
{
  if (X.cols() != weights.size())
    throw DimensionError("ensemble_norm: " + std::to_string(X.cols()) + " values for " + std::to_string(weights.size()) + " weights");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) acc += weights(i) * X.col(i).squaredNorm();
  return std::sqrt(acc);
}

inline double ensemble_norm(const Mat& X, const EmpiricalMeasure& m) { return ensemble_norm(X, m.weights()); }

// CSV: header "weight,x0,...,x{n-1}", one atom per row.

inline void write_measure_csv(std::ostream& os, const EmpiricalMeasure& m);
inline EmpiricalMeasure read_measure_csv(std::istream& is);

}  // namespace mfpm

#include "mfpm/csv.hpp"

namespace mfpm {

inline void write_measure_csv(std::ostream& os, const EmpiricalMeasure& m)
{
  CsvWriter csv(os);
  std::vector<std::string> header{"weight"};
  for (Eigen::Index a = 0; a < m.dim(); ++a) header.push_back("x" + std::to_string(a));
  csv.header(header);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    csv.field(m.weight(i));
    for (Eigen::Index a = 0; a < m.dim(); ++a) csv.field(m.points()(a, i));
    csv.end_row();
  }
}

inline EmpiricalMeasure read_measure_csv(std::istream& is)
{
  const auto rows = read_csv(is);
  if (rows.size() < 2) throw EmptyMeasureError("measure CSV has no atom rows");
  const auto width = rows[0].size();
  if (width < 2 || rows[0][0] != "weight") throw DimensionError("measure CSV header must start with 'weight'");
  Mat pts(static_cast<Eigen::Index>(width - 1), static_cast<Eigen::Index>(rows.size() - 1));
  Vec w(static_cast<Eigen::Index>(rows.size() - 1));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw DimensionError("measure CSV row " + std::to_string(r) + " has wrong width");
    const auto i = static_cast<Eigen::Index>(r - 1);
    w(i) = parse_double(rows[r][0]);
    for (std::size_t c = 1; c < width; ++c) pts(static_cast<Eigen::Index>(c - 1), i) = parse_double(rows[r][c]);
  }
  return EmpiricalMeasure(std::move(pts), std::move(w));
}

}  // namespace mfpm
