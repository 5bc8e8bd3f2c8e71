#include <gtest/gtest.h>

#include "mfpm/lagrangian.hpp"
#include "mfpm/lq.hpp"
#include "mfpm/problems.hpp"

using namespace mfpm;

namespace {

LQSpec small_lq()
{
  LQSpec s = LQSpec::zeros(2, 1);
  s.A << 0.0, 1.0, -0.5, 0.0;
  s.Abar << 0.2, 0.0, 0.0, 0.1;
  s.B << 0.0, 1.0;
  s.sigma0 << 0.3, 0.0, 0.0, 0.2;
  s.C = {Mat::Identity(2, 2) * 0.1, Mat::Zero(2, 2)};
  s.Cbar = {Mat::Zero(2, 2), Mat::Identity(2, 2) * 0.2};
  s.D = {Mat::Zero(2, 1), Mat::Constant(2, 1, 0.3)};
  s.Q = Mat::Identity(2, 2);
  s.S << 0.5, 0.0, 0.1, 0.2;
  s.Qbar = Mat::Identity(2, 2) * 0.3;
  s.R = Mat::Identity(1, 1) * 2.0;
  return s;
}

}  // namespace

TEST(Lagrangian, ScalarHandValues)
{
  // f = v, sigma = 0.3, g = 1/2 (x^2 + v^2)
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  const auto m = EmpiricalMeasure::dirac(Vec::Constant(1, 0.0));
  const Vec x = Vec::Constant(1, 2.0), v = Vec::Constant(1, -1.0);
  const AdjointPoint ap{Vec::Constant(1, 0.5), Mat::Constant(1, 1, 4.0)};
  // 0.5 * (-1) + 4 * 0.3 + 0.5 * (4 + 1)
  EXPECT_NEAR(eval_L(p, x, m, v, 0.0, ap), -0.5 + 1.2 + 2.5, 1e-14);
  EXPECT_NEAR(grad_v_L(p, x, m, v, 0.0, ap)(0), 0.5 - 1.0, 1e-14);
  EXPECT_NEAR(grad_x_L_local(p, x, m, v, 0.0, ap)(0), 2.0, 1e-14);
}

TEST(Lagrangian, GradientsMatchFiniteDifferences)
{
  const ProblemSpec p = lq_to_problem(small_lq());
  Rng rng = stream_rng(1, 50);
  const auto m = EmpiricalMeasure::uniform(standard_normal(2, 8, rng));
  const Vec x = standard_normal(2, rng), v = standard_normal(1, rng);
  const AdjointPoint ap{standard_normal(2, rng), standard_normal(2, 2, rng)};
  const double h = 1e-6;
  const Vec gv = grad_v_L(p, x, m, v, 0.3, ap);
  Vec vp = v, vm = v;
  vp(0) += h;
  vm(0) -= h;
  EXPECT_NEAR(gv(0), (eval_L(p, x, m, vp, 0.3, ap) - eval_L(p, x, m, vm, 0.3, ap)) / (2 * h), 1e-7);
  const Vec gx = grad_x_L_local(p, x, m, v, 0.3, ap);
  for (int a = 0; a < 2; ++a) {
    Vec xp = x, xm = x;
    xp(a) += h;
    xm(a) -= h;
    EXPECT_NEAR(gx(a), (eval_L(p, xp, m, v, 0.3, ap) - eval_L(p, xm, m, v, 0.3, ap)) / (2 * h), 1e-7);
  }
}

TEST(Lagrangian, DimensionChecks)
{
  const ProblemSpec p = lq_to_problem(small_lq());
  const auto m = EmpiricalMeasure::origin(2);
  const AdjointPoint ap{Vec::Zero(2), Mat::Zero(2, 2)};
  EXPECT_THROW(eval_L(p, Vec::Zero(3), m, Vec::Zero(1), 0.0, ap), DimensionError);
  EXPECT_THROW(grad_v_L(p, Vec::Zero(2), m, Vec::Zero(2), 0.0, ap), DimensionError);
  const AdjointPoint bad{Vec::Zero(1), Mat::Zero(2, 2)};
  EXPECT_THROW(grad_x_L_local(p, Vec::Zero(2), m, Vec::Zero(1), 0.0, bad), DimensionError);
}

TEST(Lagrangian, CopyTermsFastPathMatchesDoubleSum)
{
  ProblemSpec fast = lq_to_problem(small_lq());
  ProblemSpec slow = fast;
  slow.measure_kernels_xi_independent = false;
  Rng rng = stream_rng(2, 50);
  const Eigen::Index N = 40;
  const Mat X = standard_normal(2, N, rng), V = standard_normal(1, N, rng), P = standard_normal(2, N, rng),
            Q = standard_normal(4, N, rng);
  const auto mu = EmpiricalMeasure::uniform(X);
  const Mat a = meanfield_driver_terms(fast, X, V, P, Q, mu, 0.1);
  const Mat b = meanfield_driver_terms(slow, X, V, P, Q, mu, 0.1);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lagrangian, CopyTermsHandValue)
{
  // f = Abar xbar with scalar Abar = 2: term_i = sum_y w_y * 2 * P_y = 2 mean(P)
  LQSpec s = LQSpec::zeros(1, 1);
  s.Abar(0, 0) = 2.0;
  s.bound = 2.0;
  ProblemSpec p = lq_to_problem(s);
  p.measure_kernels_xi_independent = false;
  Mat X(1, 3), V = Mat::Zero(1, 3), P(1, 3);
  X << 0.0, 1.0, 2.0;
  P << 1.0, 2.0, 6.0;
  const Mat t = meanfield_driver_terms(p, X, V, P, Mat(), EmpiricalMeasure::uniform(X), 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(t(0, i), 2.0 * 3.0, 1e-14);
  EXPECT_THROW(meanfield_driver_terms(p, X, V, Mat::Zero(1, 2), Mat(), EmpiricalMeasure::uniform(X), 0.0), DimensionError);
}

TEST(Lagrangian, MeasureFreeProblemHasNoCopyTerms)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  Rng rng = stream_rng(3, 50);
  const Mat X = standard_normal(1, 10, rng);
  const Mat t = meanfield_driver_terms(p, X, Mat::Zero(1, 10), standard_normal(1, 10, rng), standard_normal(1, 10, rng),
                                       EmpiricalMeasure::uniform(X), 0.0);
  EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}
