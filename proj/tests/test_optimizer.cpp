#include <gtest/gtest.h>

#include "mfpm/lq.hpp"
#include "mfpm/lq_oracle.hpp"
#include "mfpm/optimizer.hpp"
#include "mfpm/problems.hpp"

using namespace mfpm;

namespace {

GradCheckReport run_gradcheck(const ProblemSpec& p, std::size_t K, Eigen::Index N, double tol, bool crn = true,
                              bool random_control = true)
{
  const TimeGrid g = TimeGrid::for_problem(p, K);
  const auto noise = draw_sample(p, g, N, 21);
  const Evaluator ev(p, g, noise);
  ControlField u = ev.zero_control();
  if (random_control) {
    Rng rng = stream_rng(4, Stream::controls);
    u = random_direction(ev, ev.forward(u), 1, rng);
  }
  GradCheckOptions opt;
  opt.tolerance = tol;
  opt.common_random_numbers = crn;
  return gradient_check(ev, u, opt);
}

// f = v, g = 1/2 v^2, g_T = x: the adjoint is constant and independent of X
ProblemSpec decoupled()
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

}  // namespace

TEST(GradCheck, DeterministicLq)
{
  const auto r = run_gradcheck(lq_to_problem(LQSpec::scalar_regulator(0.0)), 200, 64, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_relative_error;
  EXPECT_EQ(r.rows.size(), 5u);
}

TEST(GradCheck, DeterministicNonlinear)
{
  const auto r = run_gradcheck(nonlinear_demo(0.0), 200, 128, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(GradCheck, StochasticNonlinearWithCommonNumbers)
{
  const auto r = run_gradcheck(nonlinear_demo(0.3), 50, 2048, 1e-2);
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(GradCheck, StochasticLqWithoutCommonNumbersFails)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  EXPECT_TRUE(run_gradcheck(p, 50, 2048, 1e-2, true).passed);
  const auto r = run_gradcheck(p, 50, 2048, 1e-2, false);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(r.common_random_numbers);
}

TEST(GradCheck, CoupledLqTwoDimensional)
{
  LQSpec s = LQSpec::zeros(2, 1);
  s.A << 0.0, 1.0, -0.5, 0.0;
  s.Abar << 0.2, 0.0, 0.0, 0.1;
  s.B << 0.0, 1.0;
  s.Q = Mat::Identity(2, 2);
  s.S << 0.5, 0.0, 0.1, 0.2;
  s.HS = Mat::Identity(2, 2) * 0.3;
  const auto r = run_gradcheck(lq_to_problem(s), 200, 32, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(GradientDescent, StationaryStartStopsImmediately)
{
  LQSpec s = LQSpec::zeros(1, 1);
  s.B(0, 0) = 1.0;
  const ProblemSpec p = lq_to_problem(s);  // zero cost except 1/2 v^2
  const TimeGrid g = TimeGrid::for_problem(p, 10);
  const Evaluator ev(p, g, draw_sample(p, g, 8, 1));
  const auto r = solve_gradient_descent(ev, SolveConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.final_cost, 0.0);
}

TEST(GradientDescent, ZeroIterationsReportsInitialCost)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.0));
  const TimeGrid g = TimeGrid::for_problem(p, 10);
  const Evaluator ev(p, g, draw_sample(p, g, 8, 1));
  SolveConfig cfg;
  cfg.max_iters = 0;
  const auto r = solve_gradient_descent(ev, cfg);
  EXPECT_FALSE(r.converged);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.final_cost, ev.cost(ev.zero_control()));
}

TEST(GradientDescent, DeterministicLqMatchesRiccati)
{
  const LQSpec s = LQSpec::scalar_regulator(0.0);
  const ProblemSpec p = lq_to_problem(s);
  const TimeGrid g = TimeGrid::for_problem(p, 200);
  const Evaluator ev(p, g, draw_sample(p, g, 64, 2));
  SolveConfig cfg;
  cfg.tol_grad = 1e-8;
  const auto r = solve_gradient_descent(ev, cfg);
  ASSERT_TRUE(r.converged) << r.reason;
  const auto oracle = solve_lq_mfc(s, 200);
  // sample variance of the moment-matched initial law is exactly 1
  EXPECT_NEAR(r.final_cost / oracle.value, 1.0, 0.01);
  for (std::size_t k : {0u, 100u, 180u}) {
    const double gain = -std::tanh(1.0 - g.time(k));
    const Mat expect = gain * r.paths->states[k];
    EXPECT_LT((r.control.values[k] - expect).cwiseAbs().maxCoeff(), 0.02);
  }
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i].cost, r.history[i - 1].cost);
}

TEST(GradientDescent, WrongGradientStalls)
{
  ProblemSpec p = decoupled();
  p.terminal_cost = nullptr;
  p.terminal_cost_dx = nullptr;
  p.running_cost_dv = [](const Vec&, const EmpiricalMeasure&, const Vec& v, double) -> Vec { return -v; };
  const TimeGrid g = TimeGrid::for_problem(p, 5);
  const Evaluator ev(p, g, draw_sample(p, g, 4, 1));
  ControlField u = ev.zero_control();
  for (auto& v : u.values) v.setOnes();
  EXPECT_THROW(solve_gradient_descent(ev, SolveConfig{}, u), StallError);
}

TEST(Picard, OneShotOnDecoupledInstance)
{
  const ProblemSpec p = decoupled();
  const TimeGrid g = TimeGrid::for_problem(p, 10);
  SolveConfig cfg;
  cfg.mode = SolveMode::picard;
  cfg.damping = 1.0;
  const auto r = solve(p, g, draw_sample(p, g, 8, 1), cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2u);
  for (const auto& v : r.control.values) EXPECT_LT((v.array() + 1.0).abs().maxCoeff(), 1e-14);
}

TEST(Picard, AgreesWithGradientModeOnLq)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  const TimeGrid g = TimeGrid::for_problem(p, 50);
  const auto noise = draw_sample(p, g, 2000, 3);
  SolveConfig gcfg;
  gcfg.tol_grad = 1e-3;
  SolveConfig pcfg;
  pcfg.mode = SolveMode::picard;
  pcfg.tol_grad = 1e-7;
  const auto a = solve(p, g, noise, gcfg);
  const auto b = solve(p, g, noise, pcfg);
  ASSERT_TRUE(b.converged);
  EXPECT_NEAR(a.final_cost / b.final_cost, 1.0, 0.005);
}

TEST(Picard, NewtonInnerSolveOnNonlinearProblem)
{
  const ProblemSpec p = nonlinear_demo(0.0);
  ASSERT_FALSE(p.argmin_control);
  const TimeGrid g = TimeGrid::for_problem(p, 50);
  const auto noise = draw_sample(p, g, 64, 3);
  SolveConfig pcfg;
  pcfg.mode = SolveMode::picard;
  pcfg.tol_grad = 1e-9;
  const auto b = solve(p, g, noise, pcfg);
  ASSERT_TRUE(b.converged);
  EXPECT_LT(b.final_residual, 1e-7);
  SolveConfig gcfg;
  gcfg.tol_grad = 1e-8;
  const auto a = solve(p, g, noise, gcfg);
  EXPECT_NEAR(a.final_cost / b.final_cost, 1.0, 1e-6);
}

TEST(Picard, PointwiseArgminSolvesStationarity)
{
  const ProblemSpec p = nonlinear_demo(0.0);
  const auto m = EmpiricalMeasure::dirac(Vec::Constant(1, 0.4));
  const AdjointPoint ap{Vec::Constant(1, 2.5), Mat::Zero(1, 1)};
  const Vec x = Vec::Constant(1, -0.7);
  const Vec v = solve_pointwise_argmin(p, x, m, 0.0, ap, Vec::Zero(1));
  EXPECT_LT(std::abs(grad_v_L(p, x, m, v, 0.0, ap)(0)), 1e-10);
}

TEST(Picard, NonConvexInstanceDiverges)
{
  const ProblemSpec p = nonconvex_demo();
  const TimeGrid g = TimeGrid::for_problem(p, 20);
  SolveConfig cfg;
  cfg.mode = SolveMode::picard;
  EXPECT_THROW(solve(p, g, draw_sample(p, g, 8, 1), cfg), NonContractionError);
}

TEST(Mfg, IdenticalToPicardWithoutMeasureDependence)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  const TimeGrid g = TimeGrid::for_problem(p, 20);
  const auto noise = draw_sample(p, g, 200, 3);
  SolveConfig cfg;
  cfg.mode = SolveMode::picard;
  const auto a = solve(p, g, noise, cfg);
  cfg.mode = SolveMode::mfg;
  const auto b = solve(p, g, noise, cfg);
  EXPECT_EQ(a.final_cost, b.final_cost);
  EXPECT_EQ(a.iterations, b.iterations);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(a.control.values[k], b.control.values[k]);
}

TEST(Mfg, MonotoneInstanceConverges)
{
  const ProblemSpec p = mean_product_terminal(1.0);
  const TimeGrid g = TimeGrid::for_problem(p, 20);
  SolveConfig cfg;
  cfg.mode = SolveMode::mfg;
  cfg.damping = 0.5;
  cfg.max_iters = 200;
  const auto r = solve(p, g, draw_sample(p, g, 200, 3), cfg);
  EXPECT_TRUE(r.converged);
}

TEST(Mfg, DiffersFromControlOnCoupledInstance)
{
  const ProblemSpec p = lq_to_problem(mean_coupled_spec(0.0));
  const TimeGrid g = TimeGrid::for_problem(p, 50);
  const auto noise = draw_sample(p, g, 64, 3);
  SolveConfig cfg;
  cfg.mode = SolveMode::picard;
  cfg.tol_grad = 1e-9;
  const auto a = solve(p, g, noise, cfg);
  cfg.mode = SolveMode::mfg;
  const auto b = solve(p, g, noise, cfg);
  EXPECT_GT(b.final_cost, a.final_cost * 1.01);
}

TEST(CostConvexity, TrivialRowsAndStrictGap)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  const TimeGrid g = TimeGrid::for_problem(p, 20);
  const Evaluator ev(p, g, draw_sample(p, g, 500, 3));
  Rng rng = stream_rng(1, Stream::controls);
  const auto ens = ev.forward(ev.zero_control());
  const ControlField v1 = random_direction(ev, ens, 1, rng);
  ControlField v2 = random_direction(ev, ens, 1, rng);
  const auto same = check_cost_convexity(ev, v1, v1, {0.0, 0.3, 1.0});
  for (const auto& row : same.rows) EXPECT_LE(std::abs(row.gap), 1e-14 * (1.0 + same.cost1));
  const auto r = check_cost_convexity(ev, v1, v2, {0.0, 0.25, 0.5, 0.75, 1.0});
  EXPECT_EQ(r.rows.front().gap, 0.0);
  EXPECT_EQ(r.rows.back().gap, 0.0);
  for (const auto& row : r.rows)
    EXPECT_LE(row.gap, -0.9 * 0.5 * row.theta * (1.0 - row.theta) * r.distance_squared + 1e-15);
  EXPECT_TRUE(r.passed);
}

TEST(SolveConfigTest, Validation)
{
  SolveConfig c;
  c.backtrack = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolveConfig{};
  c.damping = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_solve_mode("newton"), ConfigError);
  EXPECT_EQ(parse_solve_mode("mfg"), SolveMode::mfg);
}
