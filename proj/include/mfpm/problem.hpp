#pragma once

#include <functional>
#include <string>

#include "mfpm/measure.hpp"
#include "mfpm/types.hpp"

namespace mfpm {

/// Coefficients of a mean-field control problem on [t0, T] with state in R^n,
/// control in R^d and an n-dimensional Brownian motion.
///
/// Every callable receives the state x, the current law m, the control v and
/// the time s. Jacobians follow the row = output, column = input convention:
/// `drift_dx(...)(a, b) = d f_a / d x_b`. The volatility is an n x n matrix
/// whose column j is sigma^j. Measure derivatives are the xi-gradient of the
/// linear functional derivative, e.g. `drift_dmeasure(x, m, v, s, xi)(a, b) =
/// d/dxi_b (d f_a / d nu)(x, m, v, s)(xi)`.
///
/// Empty callables stand for identically zero terms (e.g. no volatility, or
/// coefficients that do not depend on the measure).
struct ProblemSpec {
  using VecField = std::function<Vec(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s)>;
  using MatField = std::function<Mat(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s)>;
  using ColumnJacobian = std::function<Mat(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s, int j)>;
  using MeasureJacobian = std::function<Mat(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s, const Vec& xi)>;
  using ColumnMeasureJacobian =
      std::function<Mat(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s, const Vec& xi, int j)>;
  using Scalar = std::function<double(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s)>;
  using ScalarFlat = std::function<double(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s, const Vec& xi)>;
  using VecFlat = std::function<Vec(const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s, const Vec& xi)>;
  using Terminal = std::function<double(const Vec& x, const EmpiricalMeasure& m)>;
  using TerminalGrad = std::function<Vec(const Vec& x, const EmpiricalMeasure& m)>;
  using TerminalFlat = std::function<double(const Vec& x, const EmpiricalMeasure& m, const Vec& xi)>;
  using TerminalFlatGrad = std::function<Vec(const Vec& x, const EmpiricalMeasure& m, const Vec& xi)>;
  /// Pointwise minimizer of the Lagrangian in v. `q` holds q^j as columns and
  /// `v_guess` is the current control (a warm start for iterative solvers).
  using Argmin = std::function<Vec(const Vec& x, const EmpiricalMeasure& m, double s, const Vec& p, const Mat& q,
                                   const Vec& v_guess)>;
  /// Draws N i.i.d. initial states as the columns of an n x N matrix.
  using Sampler = std::function<Mat(Eigen::Index N, Rng& rng)>;

  std::string name = "custom";
  int n = 1;
  int d = 1;
  double t0 = 0.0;
  double T = 1.0;
  /// Declared bound on the derivatives; only used for diagnostics.
  double lipschitz = 1.0;

  VecField drift;
  MatField drift_dx;
  MatField drift_dv;
  MeasureJacobian drift_dmeasure;

  MatField volatility;
  ColumnJacobian volatility_dx;
  ColumnJacobian volatility_dv;
  ColumnMeasureJacobian volatility_dmeasure;

  Scalar running_cost;
  VecField running_cost_dx;
  VecField running_cost_dv;
  VecFlat running_cost_dmeasure;
  ScalarFlat running_cost_flat;

  Terminal terminal_cost;
  TerminalGrad terminal_cost_dx;
  TerminalFlatGrad terminal_cost_dmeasure;
  TerminalFlat terminal_cost_flat;

  Argmin argmin_control;
  Sampler initial_sampler;

  /// Set when every measure-derivative kernel is independent of its xi
  /// argument (true for coefficients that see the law only through its mean).
  /// The independent-copy sums then collapse from O(N^2) to O(N).
  bool measure_kernels_xi_independent = false;

  bool has_volatility() const { return static_cast<bool>(volatility); }
  bool depends_on_measure() const
  {
    return drift_dmeasure || volatility_dmeasure || running_cost_dmeasure || terminal_cost_dmeasure;
  }
};

namespace detail {

inline void require_dims(const ProblemSpec& p, const Vec& x, const Vec& v, const char* where)
{
  if (x.size() != p.n) throw DimensionError(std::string(where) + ": state has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(p.n));
  if (v.size() != p.d) throw DimensionError(std::string(where) + ": control has dimension " + std::to_string(v.size()) + ", expected " + std::to_string(p.d));
}

}  // namespace detail

/// Gaussian initial law N(mean, cov). With `moment_matched`, the raw draws are
/// affinely corrected so the sample mean and covariance equal the targets
/// exactly (N must exceed n).
inline ProblemSpec::Sampler gaussian_sampler(Vec mean, Mat cov, bool moment_matched = false)
{
  return [mean = std::move(mean), cov = std::move(cov), moment_matched](Eigen::Index N, Rng& rng) {
    const auto n = mean.size();
    Mat z = standard_normal(n, N, rng);
    if (moment_matched && N > n) {
      const Vec zbar = z.rowwise().mean();
      z.colwise() -= zbar;
      const Mat emp = z * z.transpose() / static_cast<double>(N);
      const Eigen::LLT<Mat> emp_llt(emp);
      if (emp_llt.info() == Eigen::Success) {
        // whiten: L^{-1} z has identity sample covariance
        z = emp_llt.matrixL().solve(z);
      }
    }
    Mat factor = Mat::Zero(n, n);
    const Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) {
      factor = llt.matrixL();
    } else {
      // positive semidefinite covariance: use the symmetric square root
      Eigen::SelfAdjointEigenSolver<Mat> es(cov);
      factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    }
    Mat out = factor * z;
    out.colwise() += mean;
    return out;
  };
}

}  // namespace mfpm
