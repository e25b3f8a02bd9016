#include <gtest/gtest.h>

#include "gpds/predictive_density.hpp"
#include "oracles.hpp"

using namespace gpds;

namespace {

double gfun(double x) { return 2.0 * std::sin(5.0 * x) - 0.3; }

// A posterior whose function cannot move: tiny amplitude around gfun and no
// hyperparameter or function updates.
DensityConfig frozen_config() {
  DensityConfig c;
  c.theta0.amplitude = 1e-6;
  c.theta0.lengthscales = {0.2};
  c.theta0.mean_function = [](const Point& x) { return gfun(x[0]); };
  c.history.hyper_move = false;
  c.history.function_move = false;
  c.schedule = {3000, 100, 1};
  c.posterior_schedule = {3000, 100, 1};
  return c;
}

PointList line_points(std::initializer_list<double> xs) {
  PointList p;
  for (double x : xs) p.push_back(Point::Constant(1, x));
  return p;
}

const PointList kData = line_points({0.2, 0.35, 0.6});

double phi_g(double x) { return oracle::logistic(gfun(x)); }

double normalizer() { return oracle::simpson(phi_g, 0.0, 1.0, 4000); }

}  // namespace

TEST(NumeratorTermTest, Value) {
  EXPECT_NEAR((NumeratorTerm{std::log(0.5), 1.0, 2.0}.value()), 0.5 * oracle::logistic(1.0) / oracle::logistic(2.0), 1e-14);
  EXPECT_DOUBLE_EQ((NumeratorTerm{std::log(0.5), 2.0, 1.0}.value()), 0.5);
  EXPECT_EQ((NumeratorTerm{-kInf, 2.0, 1.0}.value()), 0.0);
  EXPECT_THROW(estimate_numerator({}), InvalidArgument);
}

TEST(Predictive, FrozenFunctionNumeratorMatchesQuadrature) {
  Rng rng(1);
  const PointList grid = line_points({0.1, 0.45, 0.9});
  const std::vector<McEstimate> nums = posterior_numerators(grid, kData, frozen_config(), rng);
  const double z = normalizer();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i][0];
    const double want = oracle::simpson(
        [&](double xp) { return std::min(1.0, phi_g(x) / phi_g(xp)) * phi_g(xp) / z; }, 0.0, 1.0, 4000);
    EXPECT_NEAR(nums[i].mean, want, 4.0 * nums[i].std_error) << "x = " << x;
  }
}

TEST(Predictive, FrozenFunctionDenominatorMatchesQuadrature) {
  Rng rng(2);
  for (double x : {0.1, 0.7}) {
    const McEstimate d = estimate_denominator(Point::Constant(1, x), kData, frozen_config(), rng);
    const double want = oracle::simpson([&](double xp) { return std::min(1.0, phi_g(xp) / phi_g(x)); }, 0.0, 1.0, 4000);
    EXPECT_NEAR(d.mean, want, 4.0 * d.std_error) << "x = " << x;
  }
}

TEST(Predictive, FrozenFunctionRatioRecoversDensity) {
  const PointList grid = line_points({0.15, 0.5, 0.8});
  const DensityGrid out = density_grid_seeded(grid, kData, frozen_config(), 3, 1);
  const double z = normalizer();
  for (const DensityEstimate& e : out.estimates) {
    EXPECT_NEAR(e.ratio, phi_g(e.x[0]) / z, 4.0 * e.ratio_std_error) << "x = " << e.x[0];
  }
}

TEST(Predictive, PredictiveDrawsFollowFrozenDensity) {
  Rng rng(4);
  DensityConfig c = frozen_config();
  c.posterior_schedule = {2000, 0, 1};
  PointList draws;
  posterior_numerators(line_points({0.5}), kData, c, rng, &draws);
  ASSERT_EQ(draws.size(), 2000u);
  std::vector<double> xs;
  for (const Point& p : draws) xs.push_back(p[0]);
  const double z = normalizer();
  const auto cdf = [&](double x) { return oracle::simpson(phi_g, 0.0, x, 400) / z; };
  EXPECT_GT(ks_one_sample(xs, cdf).p_value, 0.01);
}

// When Phi(g) is the same everywhere the density is the base density itself.
TEST(Predictive, ConstantFunctionCollapsesToBase) {
  DensityConfig c;
  c.theta0.amplitude = 1e-4;
  c.theta0.mean = 0.8;
  c.history.hyper_move = false;
  c.schedule = {300, 50, 1};
  c.posterior_schedule = {300, 50, 1};
  const DensityGrid out = density_grid_seeded(line_points({0.1, 0.5, 0.95}), kData, c, 5, 1);
  for (const DensityEstimate& e : out.estimates) {
    EXPECT_LE(e.numerator.mean, 1.0);
    EXPECT_GT(e.numerator.mean, 0.999);
    EXPECT_LE(e.denominator.mean, 1.0);
    EXPECT_GT(e.denominator.mean, 0.999);
    EXPECT_NEAR(e.ratio, 1.0, 2e-3);
  }
}

TEST(Predictive, DeltaMethodCombination) {
  McEstimate num{0.6, 0.03, 100}, den{0.8, 0.02, 100};
  const DensityEstimate e = combine_estimates(Point::Constant(1, 0.1), num, den);
  EXPECT_DOUBLE_EQ(e.ratio, 0.75);
  EXPECT_NEAR(e.ratio_std_error, 0.75 * std::sqrt(0.05 * 0.05 + 0.025 * 0.025), 1e-14);
  const DensityEstimate zero = combine_estimates(Point::Constant(1, 0.1), McEstimate{0.0, 0.0, 10}, den);
  EXPECT_EQ(zero.ratio, 0.0);
}

TEST(Predictive, TrapezoidIntegral) {
  std::vector<DensityEstimate> es;
  for (double x : {1.0, 0.0, 0.5}) {
    DensityEstimate e;
    e.x = Point::Constant(1, x);
    e.ratio = 2.0 * x;
    es.push_back(e);
  }
  EXPECT_NEAR(*trapezoid_integral(es), 1.0, 1e-14);
  EXPECT_FALSE(trapezoid_integral({es.front()}).has_value());
}

TEST(Predictive, ResultDoesNotDependOnWorkers) {
  DensityConfig c = frozen_config();
  c.theta0.amplitude = 0.5;
  c.history.function_move = true;
  c.schedule = {60, 10, 1};
  c.posterior_schedule = {60, 10, 1};
  const PointList grid = line_points({0.1, 0.3, 0.5, 0.7});
  const DensityGrid a = density_grid_seeded(grid, kData, c, 9, 1);
  const DensityGrid b = density_grid_seeded(grid, kData, c, 9, 3);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(a.estimates[i].ratio, b.estimates[i].ratio);
    EXPECT_EQ(a.estimates[i].ratio_std_error, b.estimates[i].ratio_std_error);
  }
  EXPECT_EQ(*a.integral, *b.integral);
}

TEST(Predictive, OutsideBoxIsZeroAndSinglePointHasNoIntegral) {
  DensityConfig c = frozen_config();
  c.schedule = {50, 10, 1};
  c.posterior_schedule = {50, 10, 1};
  const DensityGrid out = density_grid_seeded(line_points({1.5}), kData, c, 10, 1);
  ASSERT_EQ(out.estimates.size(), 1u);
  EXPECT_EQ(out.estimates[0].ratio, 0.0);
  EXPECT_FALSE(out.integral.has_value());
  EXPECT_THROW(density_grid_seeded({}, kData, c, 10, 1), InvalidArgument);
}
