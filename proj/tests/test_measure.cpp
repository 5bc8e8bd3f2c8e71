#include <gtest/gtest.h>

#include <sstream>

#include "mfpm/measure.hpp"

using namespace mfpm;

namespace {

EmpiricalMeasure line(std::initializer_list<double> xs)
{
  Mat pts(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) pts(0, i++) = x;
  return EmpiricalMeasure::uniform(pts);
}

}  // namespace

TEST(Measure, RejectsEmptyAndBadWeights)
{
  EXPECT_THROW(EmpiricalMeasure(Mat(1, 0), Vec(0)), EmptyMeasureError);
  EXPECT_THROW(EmpiricalMeasure::uniform(Mat(2, 0)), EmptyMeasureError);
  EXPECT_THROW(EmpiricalMeasure(Mat::Zero(1, 2), Vec::Constant(2, 0.4)), DimensionError);
  Vec w(2);
  w << 1.5, -0.5;
  EXPECT_THROW(EmpiricalMeasure(Mat::Zero(1, 2), w), DimensionError);
  EXPECT_THROW(EmpiricalMeasure(Mat::Zero(1, 3), Vec::Constant(2, 0.5)), DimensionError);
}

TEST(Measure, MeanAndIntegrate)
{
  const auto m = line({1.0, 2.0, 6.0});
  EXPECT_DOUBLE_EQ(m.mean()(0), 3.0);
  EXPECT_NEAR(m.integrate([](const Vec& x) { return x(0) * x(0); }), 41.0 / 3.0, 1e-14);
  const auto d = EmpiricalMeasure::dirac(Vec::Constant(2, 4.0));
  EXPECT_EQ(d.size(), 1);
  EXPECT_EQ(d.mean(), Vec::Constant(2, 4.0));
}

TEST(Measure, MixtureWeights)
{
  const auto a = line({0.0, 2.0});
  const auto b = line({10.0});
  const auto mix = EmpiricalMeasure::mixture(a, b, 0.25);
  EXPECT_EQ(mix.size(), 3);
  EXPECT_NEAR(mix.mean()(0), 0.75 * 1.0 + 0.25 * 10.0, 1e-14);
  EXPECT_THROW(EmpiricalMeasure::mixture(a, b, 1.5), DimensionError);
  EXPECT_THROW(EmpiricalMeasure::mixture(a, EmpiricalMeasure::origin(2), 0.5), DimensionError);
}

TEST(Wasserstein, OneDimensionalHandValues)
{
  // shift by 2: every quantile moves by 2
  EXPECT_NEAR(wasserstein2_1d(line({0.0, 1.0}), line({2.0, 3.0})), 2.0, 1e-14);
  // single atom against two atoms: sqrt(0.5*1 + 0.5*9)
  EXPECT_NEAR(wasserstein2_1d(line({0.0}), line({1.0, 3.0})), std::sqrt(5.0), 1e-14);
  // unequal weights: quantile pieces [0,.25) 0-0, [.25,.5) 1-0, [.5,1) 1-2
  Mat pa(1, 2), pb(1, 2);
  pa << 0.0, 1.0;
  pb << 0.0, 2.0;
  Vec wa(2), wb(2);
  wa << 0.25, 0.75;
  wb << 0.5, 0.5;
  EXPECT_NEAR(wasserstein2_1d(EmpiricalMeasure(pa, wa), EmpiricalMeasure(pb, wb)), std::sqrt(0.75), 1e-14);
}

TEST(Wasserstein, IdentityOfIndiscernibles)
{
  const auto m = line({3.0, -1.0, 2.5});
  EXPECT_EQ(wasserstein2_1d(m, m), 0.0);
  EXPECT_THROW(wasserstein2_1d(EmpiricalMeasure::origin(2), EmpiricalMeasure::origin(2)), DimensionError);
}

TEST(Wasserstein, SmallNExactMatchesSortCoupling)
{
  Rng rng = stream_rng(5, 99);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index N = 2 + rep % 9;
    const auto a = EmpiricalMeasure::uniform(standard_normal(1, N, rng));
    const auto b = EmpiricalMeasure::uniform(standard_normal(1, N, rng));
    EXPECT_NEAR(wasserstein2_small_n(a, b), wasserstein2_1d(a, b), 1e-10);
  }
}

TEST(Wasserstein, HungarianAgreesWithSubsetDp)
{
  Rng rng = stream_rng(6, 99);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = EmpiricalMeasure::uniform(standard_normal(2, 9, rng));
    const auto b = EmpiricalMeasure::uniform(standard_normal(2, 9, rng));
    const Mat c = detail::squared_cost_matrix(a, b);
    EXPECT_NEAR(detail::assignment_hungarian(c), detail::assignment_subset_dp(c), 1e-10);
  }
}

TEST(Wasserstein, TwoDimensionalPermutation)
{
  Mat pa(2, 2), pb(2, 2);
  pa << 0.0, 1.0, 0.0, 0.0;
  pb << 1.0, 0.0, 0.0, 0.0;
  EXPECT_NEAR(wasserstein2_small_n(EmpiricalMeasure::uniform(pa), EmpiricalMeasure::uniform(pb)), 0.0, 1e-15);
  EXPECT_THROW(wasserstein2_small_n(EmpiricalMeasure::uniform(pa), EmpiricalMeasure::origin(2)), UnsupportedCouplingError);
}

TEST(Wasserstein, PushForwardNormAndContraction)
{
  Rng rng = stream_rng(7, 99);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index N = 1 + rep;
    const auto m = EmpiricalMeasure::uniform(standard_normal(1, N, rng));
    const Mat X = standard_normal(1, N, rng);
    const Mat Y = standard_normal(1, N, rng);
    const auto lx = push_forward(X, m);
    EXPECT_NEAR(wasserstein2_1d(lx, EmpiricalMeasure::origin(1)), ensemble_norm(X, m), 1e-10);
    EXPECT_LE(wasserstein2_1d(lx, push_forward(Y, m)), ensemble_norm(X - Y, m) + 1e-10);
  }
  EXPECT_THROW(push_forward(Mat::Zero(1, 3), line({1.0})), DimensionError);
}

TEST(Measure, CsvRoundTrip)
{
  Rng rng = stream_rng(8, 99);
  Vec w(3);
  w << 0.2, 0.3, 0.5;
  const EmpiricalMeasure m(standard_normal(2, 3, rng), w);
  std::stringstream ss;
  write_measure_csv(ss, m);
  const auto back = read_measure_csv(ss);
  EXPECT_EQ(back.points(), m.points());
  EXPECT_EQ(back.weights(), m.weights());
  std::stringstream empty("weight,x0\n");
  EXPECT_THROW(read_measure_csv(empty), EmptyMeasureError);
}
