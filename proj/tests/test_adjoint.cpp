#include <gtest/gtest.h>

#include "mfpm/adjoint.hpp"
#include "mfpm/lq.hpp"
#include "mfpm/problems.hpp"

using namespace mfpm;

namespace {

// f = v, no volatility, g = 1/2 v^2, g_T = x
ProblemSpec linear_terminal()
{
  LQSpec s = LQSpec::zeros(1, 1);
  s.B(0, 0) = 1.0;
  ProblemSpec p = lq_to_problem(s);
  p.terminal_cost = [](const Vec& x, const EmpiricalMeasure&) { return x(0); };
  p.terminal_cost_dx = [](const Vec&, const EmpiricalMeasure&) { return Vec::Ones(1).eval(); };
  p.terminal_cost_flat = nullptr;
  p.terminal_cost_dmeasure = nullptr;
  return p;
}

double rms(const Mat& a) { return std::sqrt(a.squaredNorm() / static_cast<double>(a.size())); }

}  // namespace

TEST(Regression, RecoversPolynomialExactly)
{
  Rng rng = stream_rng(1, 60);
  const Mat X = standard_normal(1, 200, rng);
  RegressionBasis basis;
  const Mat phi = basis.features(X);
  const Mat Y = (1.0 + 2.0 * X.array() + 3.0 * X.array().square()).matrix();
  const Vec w = Vec::Constant(200, 1.0 / 200.0);
  const auto fit = fit_regression(phi, w, Y, 0.0);
  EXPECT_NEAR(fit.coefficients(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(fit.coefficients(0, 1), 2.0, 1e-10);
  EXPECT_NEAR(fit.coefficients(0, 2), 3.0, 1e-10);
  EXPECT_LT(fit.residual_rms, 1e-10);
}

TEST(Regression, BasisEnumeration)
{
  EXPECT_EQ(RegressionBasis{2}.size(1), 3);
  EXPECT_EQ(RegressionBasis{2}.size(2), 6);
  EXPECT_EQ(RegressionBasis{3}.size(3), 20);
  const auto ex = RegressionBasis::exponents(2, 1);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_EQ(ex[0], (std::vector<int>{0, 0}));
}

TEST(Regression, SingularDesignIsReported)
{
  const Mat phi = Mat::Ones(2, 10);  // two identical features
  EXPECT_THROW(fit_regression(phi, Vec::Constant(10, 0.1), Mat::Ones(1, 10), 0.0), RegressionError);
}

TEST(Adjoint, ConstantSolutionAndGradient)
{
  // P solves a backward ODE with zero driver and P(T) = 1, so D_v L = P + v = 1 + v
  const ProblemSpec p = linear_terminal();
  const TimeGrid g(0.0, 1.0, 20);
  const auto noise = draw_sample(p, g, 16, 1);
  Rng rng = stream_rng(2, 60);
  ControlField u;
  for (int k = 0; k < 20; ++k) u.values.push_back(standard_normal(1, 16, rng));
  const auto ens = simulate_forward(p, g, u, noise);
  const auto adj = solve_adjoint(p, g, ens, u, RegressionBasis{});
  for (const auto& P : adj.P) EXPECT_LT((P.array() - 1.0).abs().maxCoeff(), 1e-15);
  const auto grad = adjoint_gradient(p, g, ens, u, adj);
  for (int k = 0; k < 20; ++k) EXPECT_LT((grad.values[k].array() - 1.0 - u.values[k].array()).abs().maxCoeff(), 1e-14);
}

TEST(Adjoint, TerminalCopyTerm)
{
  // g_T = x xbar: D_x g_T = xbar plus the copy term E[X] = xbar; MFG drops the copy
  const ProblemSpec p = mean_product_terminal(1.0);
  Mat X(1, 4);
  X << 1.0, 2.0, 3.0, 6.0;
  const Vec w = Vec::Constant(4, 0.25);
  EXPECT_LT((terminal_gradient(p, X, w, true).array() - 6.0).abs().maxCoeff(), 1e-14);
  EXPECT_LT((terminal_gradient(p, X, w, false).array() - 3.0).abs().maxCoeff(), 1e-14);
  ProblemSpec slow = p;
  slow.measure_kernels_xi_independent = false;
  EXPECT_LT((terminal_gradient(slow, X, w, true) - terminal_gradient(p, X, w, true)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adjoint, BrownianMartingaleRepresentation)
{
  // X = X0 + W, g_T = x^2/2: P = E[X_T | X_t] = X_t and Q = 1
  const ProblemSpec p = lq_to_problem(bsde_demo_spec());
  const TimeGrid g(0.0, 1.0, 50);
  const auto noise = draw_sample(p, g, 4000, 11);
  const auto u = ControlField::zeros(1, 4000, 50);
  const auto ens = simulate_forward(p, g, u, noise);
  for (auto est : {QEstimator::joint, QEstimator::product}) {
    AdjointOptions opt;
    opt.q_estimator = est;
    const auto adj = solve_adjoint(p, g, ens, u, RegressionBasis{}, opt);
    double p_err = 0.0, q_err = 0.0;
    for (std::size_t k = 1; k < 50; ++k) {
      p_err = std::max(p_err, rms(adj.P[k] - ens.states[k]) / rms(ens.states[k]));
      q_err = std::max(q_err, rms(adj.Q[k].array() - 1.0));
    }
    // the product estimator is the cruder baseline: P only, loosely
    if (est == QEstimator::joint) {
      EXPECT_LT(p_err, 0.02);
      EXPECT_LT(q_err, 0.02);
    } else {
      EXPECT_LT(p_err, 0.05);
    }
    EXPECT_EQ(adj.diagnostics.size(), 50u);
  }
}

TEST(Adjoint, TooFewParticlesForBasis)
{
  const ProblemSpec p = lq_to_problem(bsde_demo_spec());
  const TimeGrid g(0.0, 1.0, 3);
  const auto noise = draw_sample(p, g, 20, 1);
  const auto u = ControlField::zeros(1, 20, 3);
  EXPECT_THROW(solve_adjoint(p, g, simulate_forward(p, g, u, noise), u, RegressionBasis{}), RegressionError);
}

TEST(Adjoint, DeterministicLqMatchesRiccatiCostate)
{
  // f = v, g = 1/2 (x^2 + v^2): at the optimal feedback v = -tanh(T - s) x the
  // costate equals tanh(T - s) x
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.0));
  const std::size_t K = 2000;
  const TimeGrid g(0.0, 1.0, K);
  const auto noise = draw_sample(p, g, 8, 1);
  ControlField u = ControlField::zeros(1, 8, K);
  PathEnsemble ens;
  ens.noise = noise;
  ens.states.push_back(noise->initial);
  for (std::size_t k = 0; k < K; ++k) {
    u.values[k] = -std::tanh(1.0 - g.time(k)) * ens.states[k];
    ens.states.push_back(ens.states[k] + g.dt() * u.values[k]);
  }
  const auto adj = solve_adjoint(p, g, ens, u, RegressionBasis{});
  const Mat expect = std::tanh(1.0) * noise->initial;
  EXPECT_LT((adj.P[0] - expect).cwiseAbs().maxCoeff(), 2e-3);
}
