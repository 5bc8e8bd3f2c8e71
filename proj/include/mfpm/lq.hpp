#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mfpm/errors.hpp"
#include "mfpm/problem.hpp"

namespace mfpm {

/// Linear-quadratic mean-field problem with constant coefficients:
///
///   dX = (f0 + A X + Abar xbar + B v) ds + sum_j (c_j + C_j X + Cbar_j xbar + D_j v) dW_j
///   g   = 1/2 x'Qx + x'S xbar + 1/2 xbar'Qbar xbar + 1/2 v'Rv
///   g_T = 1/2 x'Hx + x'HS xbar + 1/2 xbar'Hbar xbar
///
/// where xbar is the mean of the current law. `sigma0` stores c_j as column j.
/// Empty per-noise matrix lists mean zero.
struct LQSpec {
  int n = 1;
  int d = 1;
  double t0 = 0.0;
  double T = 1.0;

  Vec f0;
  Mat A, Abar, B;
  Mat sigma0;
  std::vector<Mat> C, Cbar, D;

  Mat Q, S, Qbar, R;
  Mat H, HS, Hbar;

  /// Strong-convexity level in v: R >= 2 lambda I. Zero means "use the
  /// largest admissible value", i.e. half the smallest eigenvalue of R.
  double lambda = 0.0;
  /// Declared bound on coefficient entries; zero means "derive from data".
  double bound = 0.0;

  Vec initial_mean;
  Mat initial_cov;
  bool moment_matched_initial = true;

  /// All-zero coefficients with R = I and a standard normal initial law.
  static LQSpec zeros(int n, int d)
  {
    LQSpec s;
    s.n = n;
    s.d = d;
    s.f0 = Vec::Zero(n);
    s.A = Mat::Zero(n, n);
    s.Abar = Mat::Zero(n, n);
    s.B = Mat::Zero(n, d);
    s.sigma0 = Mat::Zero(n, n);
    s.Q = Mat::Zero(n, n);
    s.S = Mat::Zero(n, n);
    s.Qbar = Mat::Zero(n, n);
    s.R = Mat::Identity(d, d);
    s.H = Mat::Zero(n, n);
    s.HS = Mat::Zero(n, n);
    s.Hbar = Mat::Zero(n, n);
    s.initial_mean = Vec::Zero(n);
    s.initial_cov = Mat::Identity(n, n);
    return s;
  }

  /// Scalar regulator f = v, g = 1/2 (x^2 + v^2), g_T = 0, constant noise sigma.
  static LQSpec scalar_regulator(double sigma, double T = 1.0)
  {
    LQSpec s = zeros(1, 1);
    s.T = T;
    s.B(0, 0) = 1.0;
    s.Q(0, 0) = 1.0;
    s.R(0, 0) = 1.0;
    s.sigma0(0, 0) = sigma;
    return s;
  }

  bool has_noise() const
  {
    auto nonzero = [](const std::vector<Mat>& ms) {
      for (const auto& m : ms)
        if (m.size() > 0 && !m.isZero(0.0)) return true;
      return false;
    };
    return !sigma0.isZero(0.0) || nonzero(C) || nonzero(Cbar) || nonzero(D);
  }

  bool has_mean_coupling() const
  {
    auto nonzero = [](const std::vector<Mat>& ms) {
      for (const auto& m : ms)
        if (m.size() > 0 && !m.isZero(0.0)) return true;
      return false;
    };
    return !Abar.isZero(0.0) || nonzero(Cbar) || !S.isZero(0.0) || !Qbar.isZero(0.0) || !HS.isZero(0.0) ||
           !Hbar.isZero(0.0);
  }

  const Mat& noise_matrix(const std::vector<Mat>& list, int j, const Mat& zero) const
  {
    return list.empty() ? zero : list[static_cast<std::size_t>(j)];
  }

  /// Largest absolute coefficient entry.
  double max_entry() const
  {
    double m = 0.0;
    auto upd = [&](const Mat& x) {
      if (x.size() > 0) m = std::max(m, x.cwiseAbs().maxCoeff());
    };
    for (const Mat* x : {&A, &Abar, &B, &sigma0, &Q, &S, &Qbar, &R, &H, &HS, &Hbar}) upd(*x);
    upd(f0);
    for (const auto* list : {&C, &Cbar, &D})
      for (const auto& x : *list) upd(x);
    return m;
  }

  /// Checks shapes, symmetry and strong convexity of R. Throws DimensionError
  /// or ConvexityError; fills in `lambda` and `bound` when left at zero.
  void validate()
  {
    auto shape = [](const Mat& m, Eigen::Index r, Eigen::Index c, const char* what) {
      if (m.rows() != r || m.cols() != c)
        throw DimensionError(std::string("LQ coefficient ") + what + " has shape " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
    };
    if (n < 1 || d < 1) throw DimensionError("LQ dimensions must be positive");
    if (!(T > t0)) throw DimensionError("LQ horizon must satisfy T > t0");
    if (f0.size() != n) throw DimensionError("LQ coefficient f0 has wrong length");
    shape(A, n, n, "A");
    shape(Abar, n, n, "Abar");
    shape(B, n, d, "B");
    shape(sigma0, n, n, "sigma0");
    for (const auto* list : {&C, &Cbar})
      if (!list->empty()) {
        if (list->size() != static_cast<std::size_t>(n)) throw DimensionError("LQ volatility lists need one matrix per noise");
        for (const auto& m : *list) shape(m, n, n, "C/Cbar");
      }
    if (!D.empty()) {
      if (D.size() != static_cast<std::size_t>(n)) throw DimensionError("LQ volatility lists need one matrix per noise");
      for (const auto& m : D) shape(m, n, d, "D");
    }
    shape(Q, n, n, "Q");
    shape(S, n, n, "S");
    shape(Qbar, n, n, "Qbar");
    shape(R, d, d, "R");
    shape(H, n, n, "H");
    shape(HS, n, n, "HS");
    shape(Hbar, n, n, "Hbar");
    if (initial_mean.size() != n) throw DimensionError("LQ initial mean has wrong length");
    shape(initial_cov, n, n, "initial_cov");

    const double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ConvexityError("R must be symmetric");
    const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(R).eigenvalues().minCoeff();
    if (!(min_eig > 0.0)) throw ConvexityError("R must be positive definite (smallest eigenvalue " + std::to_string(min_eig) + ")");
    if (lambda == 0.0) lambda = 0.5 * min_eig;
    if (!(lambda > 0.0)) throw ConvexityError("convexity level lambda must be positive");
    if (min_eig < 2.0 * lambda * (1.0 - 1e-12))
      throw ConvexityError("R must dominate 2 lambda I (smallest eigenvalue " + std::to_string(min_eig) + ", lambda " +
                           std::to_string(lambda) + ")");
    const double entries = max_entry();
    if (bound == 0.0) bound = std::max(1.0, entries);
    if (entries > bound) throw ConfigError("LQ coefficient entries exceed the declared bound " + std::to_string(bound));
  }
};

/// Closed-form coefficients and exact derivatives of an LQ specification.
inline ProblemSpec lq_to_problem(LQSpec spec)
{
  spec.validate();
  auto s = std::make_shared<const LQSpec>(std::move(spec));
  const int n = s->n;
  const int d = s->d;
  const Mat zero_nn = Mat::Zero(n, n);
  const Mat zero_nd = Mat::Zero(n, d);

  ProblemSpec p;
  p.name = "lq";
  p.n = n;
  p.d = d;
  p.t0 = s->t0;
  p.T = s->T;
  p.lipschitz = s->bound;

  p.drift = [s](const Vec& x, const EmpiricalMeasure& m, const Vec& v, double) -> Vec {
    return s->f0 + s->A * x + s->Abar * m.mean() + s->B * v;
  };
  p.drift_dx = [s](const Vec&, const EmpiricalMeasure&, const Vec&, double) -> Mat { return s->A; };
  p.drift_dv = [s](const Vec&, const EmpiricalMeasure&, const Vec&, double) -> Mat { return s->B; };
  if (!s->Abar.isZero(0.0))
    p.drift_dmeasure = [s](const Vec&, const EmpiricalMeasure&, const Vec&, double, const Vec&) -> Mat { return s->Abar; };

  if (s->has_noise()) {
    p.volatility = [s, zero_nn, zero_nd](const Vec& x, const EmpiricalMeasure& m, const Vec& v, double) -> Mat {
      Mat out = s->sigma0;
      for (int j = 0; j < s->n; ++j) {
        out.col(j) += s->noise_matrix(s->C, j, zero_nn) * x + s->noise_matrix(s->Cbar, j, zero_nn) * m.mean() +
                      s->noise_matrix(s->D, j, zero_nd) * v;
      }
      return out;
    };
    p.volatility_dx = [s, zero_nn](const Vec&, const EmpiricalMeasure&, const Vec&, double, int j) -> Mat {
      return s->noise_matrix(s->C, j, zero_nn);
    };
    p.volatility_dv = [s, zero_nd](const Vec&, const EmpiricalMeasure&, const Vec&, double, int j) -> Mat {
      return s->noise_matrix(s->D, j, zero_nd);
    };
    bool cbar = false;
    for (const auto& m : s->Cbar) cbar = cbar || !m.isZero(0.0);
    if (cbar)
      p.volatility_dmeasure = [s, zero_nn](const Vec&, const EmpiricalMeasure&, const Vec&, double, const Vec&, int j) -> Mat {
        return s->noise_matrix(s->Cbar, j, zero_nn);
      };
  }

  const Mat Q = 0.5 * (s->Q + s->Q.transpose());
  const Mat Qbar = 0.5 * (s->Qbar + s->Qbar.transpose());
  const Mat H = 0.5 * (s->H + s->H.transpose());
  const Mat Hbar = 0.5 * (s->Hbar + s->Hbar.transpose());
  const Mat S = s->S;
  const Mat HS = s->HS;
  const Mat R = s->R;

  p.running_cost = [=](const Vec& x, const EmpiricalMeasure& m, const Vec& v, double) {
    const Vec& xb = m.mean();
    return 0.5 * x.dot(Q * x) + x.dot(S * xb) + 0.5 * xb.dot(Qbar * xb) + 0.5 * v.dot(R * v);
  };
  p.running_cost_dx = [=](const Vec& x, const EmpiricalMeasure& m, const Vec&, double) -> Vec { return Q * x + S * m.mean(); };
  p.running_cost_dv = [=](const Vec&, const EmpiricalMeasure&, const Vec& v, double) -> Vec { return R * v; };
  if (!S.isZero(0.0) || !Qbar.isZero(0.0)) {
    p.running_cost_flat = [=](const Vec& x, const EmpiricalMeasure& m, const Vec&, double, const Vec& xi) {
      return x.dot(S * xi) + m.mean().dot(Qbar * xi);
    };
    p.running_cost_dmeasure = [=](const Vec& x, const EmpiricalMeasure& m, const Vec&, double, const Vec&) -> Vec {
      return S.transpose() * x + Qbar * m.mean();
    };
  } else {
    p.running_cost_flat = [](const Vec&, const EmpiricalMeasure&, const Vec&, double, const Vec&) { return 0.0; };
  }

  p.terminal_cost = [=](const Vec& x, const EmpiricalMeasure& m) {
    const Vec& xb = m.mean();
    return 0.5 * x.dot(H * x) + x.dot(HS * xb) + 0.5 * xb.dot(Hbar * xb);
  };
  p.terminal_cost_dx = [=](const Vec& x, const EmpiricalMeasure& m) -> Vec { return H * x + HS * m.mean(); };
  if (!HS.isZero(0.0) || !Hbar.isZero(0.0)) {
    p.terminal_cost_flat = [=](const Vec& x, const EmpiricalMeasure& m, const Vec& xi) {
      return x.dot(HS * xi) + m.mean().dot(Hbar * xi);
    };
    p.terminal_cost_dmeasure = [=](const Vec& x, const EmpiricalMeasure& m, const Vec&) -> Vec {
      return HS.transpose() * x + Hbar * m.mean();
    };
  } else {
    p.terminal_cost_flat = [](const Vec&, const EmpiricalMeasure&, const Vec&) { return 0.0; };
  }

  // v_hat = -R^{-1} (B'p + sum_j D_j' q^j)
  const Eigen::LLT<Mat> R_llt(R);
  p.argmin_control = [s, R_llt](const Vec&, const EmpiricalMeasure&, double, const Vec& pv, const Mat& q, const Vec&) -> Vec {
    Vec rhs = s->B.transpose() * pv;
    for (std::size_t j = 0; j < s->D.size(); ++j) rhs += s->D[j].transpose() * q.col(static_cast<Eigen::Index>(j));
    return -R_llt.solve(rhs);
  };

  p.initial_sampler = gaussian_sampler(s->initial_mean, s->initial_cov, s->moment_matched_initial);
  p.measure_kernels_xi_independent = true;
  return p;
}

}  // namespace mfpm
