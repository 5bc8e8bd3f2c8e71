#include <gtest/gtest.h>

#include "mfpm/lq.hpp"
#include "mfpm/problems.hpp"
#include "mfpm/validate.hpp"

using namespace mfpm;

namespace {

// g(x, v) = x v: linear in v, hence not strongly convex for any lambda > 0.
ProblemSpec bilinear_cost()
{
  ProblemSpec p;
  p.running_cost = [](const Vec& x, const EmpiricalMeasure&, const Vec& v, double) { return x(0) * v(0); };
  p.running_cost_dx = [](const Vec&, const EmpiricalMeasure&, const Vec& v, double) { return v; };
  p.running_cost_dv = [](const Vec& x, const EmpiricalMeasure&, const Vec&, double) { return x; };
  return p;
}

LQSpec coupled_2d()
{
  LQSpec s = LQSpec::zeros(2, 2);
  s.A << 0.0, 1.0, -1.0, 0.0;
  s.Abar << 0.1, 0.0, 0.0, 0.2;
  s.B = Mat::Identity(2, 2);
  s.sigma0 << 0.2, 0.0, 0.1, 0.3;
  s.C = {Mat::Identity(2, 2) * 0.1, Mat::Zero(2, 2)};
  s.Cbar = {Mat::Zero(2, 2), Mat::Identity(2, 2) * 0.05};
  s.Q = Mat::Identity(2, 2);
  s.S << 0.2, 0.1, 0.0, 0.3;
  s.Qbar = Mat::Identity(2, 2) * 0.5;
  s.HS = Mat::Identity(2, 2) * 0.3;
  s.Hbar = Mat::Identity(2, 2) * 0.2;
  s.H = Mat::Identity(2, 2);
  return s;
}

}  // namespace

TEST(Validators, LqInstancePassesEverything)
{
  const ProblemSpec p = lq_to_problem(coupled_2d());
  EXPECT_TRUE(validate_pointwise_derivatives(p).passed);
  for (auto tag : {CoefficientTag::drift, CoefficientTag::volatility, CoefficientTag::running_cost, CoefficientTag::terminal_cost}) {
    const auto r = validate_measure_derivative(p, tag);
    EXPECT_TRUE(r.passed) << to_json(r).dump();
    EXPECT_FALSE(r.entries.empty());
  }
  EXPECT_NO_THROW(enforce(check_convexity_B3(p, ConvexityMode::control_only, 64, 0.5)));
}

TEST(Validators, NonlinearDemoPasses)
{
  for (double sigma : {0.0, 0.3}) {
    const ProblemSpec p = nonlinear_demo(sigma);
    EXPECT_TRUE(validate_pointwise_derivatives(p).passed);
    for (auto tag : {CoefficientTag::drift, CoefficientTag::volatility, CoefficientTag::running_cost, CoefficientTag::terminal_cost})
      EXPECT_TRUE(validate_measure_derivative(p, tag).passed);
    EXPECT_TRUE(check_convexity_B3(p, ConvexityMode::control_only, 64, 0.5).passed);
  }
}

TEST(Validators, DoubledControlGradientIsNamed)
{
  const ProblemSpec p = inject_fault(lq_to_problem(LQSpec::scalar_regulator(0.3)), Fault::double_dv_g);
  const auto r = validate_pointwise_derivatives(p);
  ASSERT_FALSE(r.passed);
  EXPECT_EQ(r.first_failure()->name, "D_v g");
  EXPECT_TRUE(r.find("D_x g")->passed);
  EXPECT_THROW(enforce(r), DerivativeMismatch);
}

TEST(Validators, MissingStateJacobianIsDetected)
{
  const ProblemSpec p = inject_fault(nonlinear_demo(0.0), Fault::drop_dx_f);
  const auto r = validate_pointwise_derivatives(p);
  EXPECT_FALSE(r.find("D_x f")->passed);
}

TEST(Validators, FlippedFlatDerivativeFails)
{
  const ProblemSpec good = mean_product_terminal(1.0);
  EXPECT_TRUE(validate_measure_derivative(good, CoefficientTag::terminal_cost).passed);
  const ProblemSpec bad = inject_fault(good, Fault::flip_flat_g_T);
  const auto r = validate_measure_derivative(bad, CoefficientTag::terminal_cost);
  EXPECT_FALSE(r.find("flat")->passed);
  EXPECT_FALSE(r.find("L-derivative")->passed);
  EXPECT_THROW(enforce(r), DerivativeMismatch);
}

TEST(Validators, MeasureIndependentCoefficientHasZeroDerivative)
{
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.3));
  const auto r = validate_measure_derivative(p, CoefficientTag::running_cost);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.find("L-derivative")->worst_abs_error, 0.0);
}

TEST(Validators, RejectsBadSteps)
{
  const ProblemSpec p = nonlinear_demo();
  EXPECT_THROW(validate_pointwise_derivatives(p, 4, 0.0), DerivativeMismatch);
  EXPECT_THROW(validate_measure_derivative(p, CoefficientTag::drift, 4, 0.0), DerivativeMismatch);
  EXPECT_THROW(check_convexity_B3(p, ConvexityMode::joint, 4, 0.0), ConvexityError);
}

TEST(Convexity, BilinearCostFailsWithWitness)
{
  for (auto mode : {ConvexityMode::control_only, ConvexityMode::joint}) {
    const auto r = check_convexity_B3(bilinear_cost(), mode, 16, 0.1);
    ASSERT_FALSE(r.passed);
    const CheckEntry* bad = r.first_failure();
    EXPECT_LT(bad->worst, 0.0);
    EXPECT_TRUE(bad->witness.contains("v_prime"));
    EXPECT_THROW(enforce(r), ConvexityError);
  }
}

TEST(Convexity, QuadraticMarginIsExact)
{
  // g = 1/2 v^2 with lambda = 1/2: the margin is identically zero
  const ProblemSpec p = lq_to_problem(LQSpec::scalar_regulator(0.0));
  const auto r = check_convexity_B3(p, ConvexityMode::control_only, 32, 0.5);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.entries[0].worst, 0.0, 1e-12);
  // any larger lambda must fail
  EXPECT_FALSE(check_convexity_B3(p, ConvexityMode::control_only, 32, 0.6).passed);
}

TEST(Convexity, JointPassImpliesControlOnlyPass)
{
  std::vector<ProblemSpec> problems{lq_to_problem(coupled_2d()), nonlinear_demo(0.2), mean_product_terminal(1.0),
                                    mean_product_terminal(-1.0), bilinear_cost()};
  for (const auto& p : problems) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto joint = check_convexity_B3(p, ConvexityMode::joint, 32, 0.25, seed);
      const auto ctrl = check_convexity_B3(p, ConvexityMode::control_only, 32, 0.25, seed);
      if (joint.passed) EXPECT_TRUE(ctrl.passed) << p.name;
      EXPECT_EQ(joint.entries[0].worst, ctrl.entries[0].worst);
    }
  }
}

TEST(Convexity, AntimonotoneTerminalIsNotJointlyConvex)
{
  // g_T = -x xbar has an indefinite Hessian in (x, xbar)
  const auto r = check_convexity_B3(mean_product_terminal(-1.0), ConvexityMode::joint, 64, 0.5);
  EXPECT_FALSE(r.find("g_T jointly convex in (x, m)")->passed);
}

TEST(Monotonicity, MeanProductTerminal)
{
  const ProblemSpec mono = mean_product_terminal(1.0);
  const ProblemSpec anti = mean_product_terminal(-1.0);
  for (auto mode : {MonotonicityMode::displacement, MonotonicityMode::lasry_lions}) {
    const auto ok = check_monotonicity(mono, mode, 100);
    EXPECT_TRUE(ok.passed);
    EXPECT_GE(ok.entries[0].worst, 0.0);
    const auto bad = check_monotonicity(anti, mode, 100);
    EXPECT_FALSE(bad.passed);
    EXPECT_TRUE(bad.entries[0].witness.contains("eta1"));
    EXPECT_THROW(enforce(bad), MonotonicityError);
  }
}

TEST(Monotonicity, HandComputedValues)
{
  // g_T = x * mean: Lasry-Lions value is (mean1 - mean2)^2, displacement is
  // (mean2 - mean1)^2 for index-paired ensembles
  const ProblemSpec p = mean_product_terminal(1.0);
  Mat e1(1, 2), e2(1, 2);
  e1 << 0.0, 2.0;
  e2 << 3.0, 5.0;
  EXPECT_NEAR(lasry_lions_value(p, e1, e2), 9.0, 1e-12);
  EXPECT_NEAR(displacement_value(p, e1, e2), 9.0, 1e-12);
}

TEST(Monotonicity, NeedsTerminalCost)
{
  ProblemSpec p;
  EXPECT_THROW(check_monotonicity(p, MonotonicityMode::lasry_lions, 4), MonotonicityError);
}

TEST(Reports, JsonHasStableShape)
{
  const auto r = check_monotonicity(mean_product_terminal(-1.0), MonotonicityMode::displacement, 5);
  const auto j = to_json(r);
  EXPECT_EQ(j["check"], "monotonicity:displacement");
  EXPECT_FALSE(j["passed"].get<bool>());
  EXPECT_EQ(j["entries"].size(), 1u);
  EXPECT_EQ(j.dump(), to_json(check_monotonicity(mean_product_terminal(-1.0), MonotonicityMode::displacement, 5)).dump());
}

TEST(LqSpec, ValidationErrors)
{
  LQSpec s = LQSpec::scalar_regulator(0.3);
  s.R(0, 0) = -1.0;
  EXPECT_THROW(lq_to_problem(s), ConvexityError);
  s = LQSpec::scalar_regulator(0.3);
  s.lambda = 0.9;  // needs R >= 1.8
  EXPECT_THROW(lq_to_problem(s), ConvexityError);
  s = LQSpec::scalar_regulator(0.3);
  s.B = Mat::Zero(2, 1);
  EXPECT_THROW(lq_to_problem(s), DimensionError);
  s = LQSpec::scalar_regulator(0.3);
  s.bound = 0.5;
  EXPECT_THROW(lq_to_problem(s), ConfigError);
}
