#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mfpm/errors.hpp"
#include "mfpm/lq.hpp"
#include "mfpm/problem.hpp"

namespace mfpm {

/// Scalar nonlinear mean-field problem used for gradient checks:
///
///   f   = -0.5 sin x + 0.3 tanh(xbar) + (1 + 0.2 cos x) v
///   sigma = sigma0 (1 + 0.2 sin x)
///   g   = 1/2 x^2 + 1/4 (x - xbar)^2 + 1/2 v^2 + 0.1 log cosh v
///   g_T = 1/2 x^2 + 0.3 x xbar
///   X(t0) ~ N(0.5, 0.25)
inline ProblemSpec nonlinear_demo(double sigma0 = 0.0, double T = 1.0)
{
  ProblemSpec p;
  p.name = "nonlinear_demo";
  p.n = 1;
  p.d = 1;
  p.T = T;
  p.lipschitz = 2.0;
  auto one = [](double a) { return Vec::Constant(1, a); };
  auto one_m = [](double a) { return Mat::Constant(1, 1, a); };

  p.drift = [=](const Vec& x, const EmpiricalMeasure& m, const Vec& v, double) {
    return one(-0.5 * std::sin(x(0)) + 0.3 * std::tanh(m.mean()(0)) + (1.0 + 0.2 * std::cos(x(0))) * v(0));
  };
  p.drift_dx = [=](const Vec& x, const EmpiricalMeasure&, const Vec& v, double) {
    return one_m(-0.5 * std::cos(x(0)) - 0.2 * std::sin(x(0)) * v(0));
  };
  p.drift_dv = [=](const Vec& x, const EmpiricalMeasure&, const Vec&, double) { return one_m(1.0 + 0.2 * std::cos(x(0))); };
  p.drift_dmeasure = [=](const Vec&, const EmpiricalMeasure& m, const Vec&, double, const Vec&) {
    const double c = std::cosh(m.mean()(0));
    return one_m(0.3 / (c * c));
  };

  if (sigma0 != 0.0) {
    p.volatility = [=](const Vec& x, const EmpiricalMeasure&, const Vec&, double) {
      return one_m(sigma0 * (1.0 + 0.2 * std::sin(x(0))));
    };
    p.volatility_dx = [=](const Vec& x, const EmpiricalMeasure&, const Vec&, double, int) {
      return one_m(0.2 * sigma0 * std::cos(x(0)));
    };
  }

  p.running_cost = [](const Vec& x, const EmpiricalMeasure& m, const Vec& v, double) {
    const double dev = x(0) - m.mean()(0);
    return 0.5 * x(0) * x(0) + 0.25 * dev * dev + 0.5 * v(0) * v(0) + 0.1 * std::log(std::cosh(v(0)));
  };
  p.running_cost_dx = [=](const Vec& x, const EmpiricalMeasure& m, const Vec&, double) {
    return one(x(0) + 0.5 * (x(0) - m.mean()(0)));
  };
  p.running_cost_dv = [=](const Vec&, const EmpiricalMeasure&, const Vec& v, double) {
    return one(v(0) + 0.1 * std::tanh(v(0)));
  };
  p.running_cost_flat = [](const Vec& x, const EmpiricalMeasure& m, const Vec&, double, const Vec& xi) {
    return -0.5 * (x(0) - m.mean()(0)) * xi(0);
  };
  p.running_cost_dmeasure = [=](const Vec& x, const EmpiricalMeasure& m, const Vec&, double, const Vec&) {
    return one(-0.5 * (x(0) - m.mean()(0)));
  };

  p.terminal_cost = [](const Vec& x, const EmpiricalMeasure& m) { return 0.5 * x(0) * x(0) + 0.3 * x(0) * m.mean()(0); };
  p.terminal_cost_dx = [=](const Vec& x, const EmpiricalMeasure& m) { return one(x(0) + 0.3 * m.mean()(0)); };
  p.terminal_cost_flat = [](const Vec& x, const EmpiricalMeasure&, const Vec& xi) { return 0.3 * x(0) * xi(0); };
  p.terminal_cost_dmeasure = [=](const Vec& x, const EmpiricalMeasure&, const Vec&) { return one(0.3 * x(0)); };

  p.initial_sampler = gaussian_sampler(Vec::Constant(1, 0.5), Mat::Constant(1, 1, 0.25));
  p.measure_kernels_xi_independent = true;
  return p;
}

/// Terminal cost g_T(x, m) = sign * x . mean(m) on top of the scalar
/// regulator f = v, g = 1/2 (x^2 + v^2). sign = +1 is monotone in both the
/// Lasry-Lions and the displacement sense; sign = -1 is neither.
inline ProblemSpec mean_product_terminal(double sign, int n = 1)
{
  LQSpec s = LQSpec::zeros(n, n);
  s.B = Mat::Identity(n, n);
  s.Q = Mat::Identity(n, n);
  s.HS = sign * Mat::Identity(n, n);
  s.bound = 1.0;
  ProblemSpec p = lq_to_problem(s);
  p.name = sign > 0 ? "monotone_terminal" : "antimonotone_terminal";
  return p;
}

/// f = v, g = 1/2 x^2 - 1/2 v^2, g_T = 3/2 x^2. The Lagrangian is concave in v,
/// so the pointwise stationary control v = -p pushes the fixed-point map away
/// from contraction.
inline ProblemSpec nonconvex_demo(double T = 1.0)
{
  ProblemSpec p;
  p.name = "nonconvex_demo";
  p.T = T;
  auto one = [](double a) { return Vec::Constant(1, a); };
  p.drift = [](const Vec&, const EmpiricalMeasure&, const Vec& v, double) { return v; };
  p.drift_dx = [](const Vec&, const EmpiricalMeasure&, const Vec&, double) { return Mat::Zero(1, 1).eval(); };
  p.drift_dv = [](const Vec&, const EmpiricalMeasure&, const Vec&, double) { return Mat::Identity(1, 1).eval(); };
  p.running_cost = [](const Vec& x, const EmpiricalMeasure&, const Vec& v, double) {
    return 0.5 * x(0) * x(0) - 0.5 * v(0) * v(0);
  };
  p.running_cost_dx = [](const Vec& x, const EmpiricalMeasure&, const Vec&, double) { return x; };
  p.running_cost_dv = [=](const Vec&, const EmpiricalMeasure&, const Vec& v, double) { return one(-v(0)); };
  p.terminal_cost = [](const Vec& x, const EmpiricalMeasure&) { return 1.5 * x(0) * x(0); };
  p.terminal_cost_dx = [=](const Vec& x, const EmpiricalMeasure&) { return one(3.0 * x(0)); };
  // D_v L = p - v = 0
  p.argmin_control = [](const Vec&, const EmpiricalMeasure&, double, const Vec& pv, const Mat&, const Vec&) { return pv; };
  p.initial_sampler = gaussian_sampler(Vec::Constant(1, 1.0), Mat::Constant(1, 1, 0.25));
  return p;
}

/// Uncontrolled Brownian motion with g_T = 1/2 x^2: the adjoint is P = X,
/// Q = 1.
inline LQSpec bsde_demo_spec(double T = 1.0)
{
  LQSpec s = LQSpec::zeros(1, 1);
  s.T = T;
  s.sigma0(0, 0) = 1.0;
  s.H(0, 0) = 1.0;
  return s;
}

/// Mean-coupled LQ instance: f = v, g = 1/2 x^2 + 1/2 x xbar + 1/4 xbar^2 +
/// 1/2 v^2, g_T = 0, sigma = 0.3, X(0) ~ N(1, 0.25).
inline LQSpec mean_coupled_spec(double sigma = 0.3, double T = 1.0)
{
  LQSpec s = LQSpec::scalar_regulator(sigma, T);
  s.S(0, 0) = 0.5;
  s.Qbar(0, 0) = 0.5;
  s.initial_mean = Vec::Constant(1, 1.0);
  s.initial_cov = Mat::Constant(1, 1, 0.25);
  return s;
}

/// Deliberate derivative faults for exercising the validators.
enum class Fault { none, double_dv_g, flip_flat_g_T, drop_dx_f };

inline Fault parse_fault(const std::string& s)
{
  if (s == "none") return Fault::none;
  if (s == "double_dv_g") return Fault::double_dv_g;
  if (s == "flip_flat_g_T") return Fault::flip_flat_g_T;
  if (s == "drop_dx_f") return Fault::drop_dx_f;
  throw ConfigError("unknown fault '" + s + "' (expected none, double_dv_g, flip_flat_g_T or drop_dx_f)");
}

inline std::string to_string(Fault f)
{
  switch (f) {
    case Fault::none: return "none";
    case Fault::double_dv_g: return "double_dv_g";
    case Fault::flip_flat_g_T: return "flip_flat_g_T";
    case Fault::drop_dx_f: return "drop_dx_f";
  }
  return "?";
}

inline ProblemSpec inject_fault(ProblemSpec p, Fault f)
{
  switch (f) {
    case Fault::none: break;
    case Fault::double_dv_g:
      if (p.running_cost_dv) {
        auto g = p.running_cost_dv;
        p.running_cost_dv = [g](const Vec& x, const EmpiricalMeasure& m, const Vec& v, double s) -> Vec {
          return 2.0 * g(x, m, v, s);
        };
      }
      break;
    case Fault::flip_flat_g_T: {
      auto fl = p.terminal_cost_flat;
      auto dm = p.terminal_cost_dmeasure;
      if (fl) p.terminal_cost_flat = [fl](const Vec& x, const EmpiricalMeasure& m, const Vec& xi) { return -fl(x, m, xi); };
      if (dm)
        p.terminal_cost_dmeasure = [dm](const Vec& x, const EmpiricalMeasure& m, const Vec& xi) -> Vec {
          return -dm(x, m, xi);
        };
      break;
    }
    case Fault::drop_dx_f: p.drift_dx = nullptr; break;
  }
  return p;
}

}  // namespace mfpm
