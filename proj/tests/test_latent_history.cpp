#include <gtest/gtest.h>

#include "gpds/latent_history.hpp"
#include "gpds/stats.hpp"
#include "oracles.hpp"

using namespace gpds;

namespace {

PointList line_points(std::initializer_list<double> xs) {
  PointList p;
  for (double x : xs) p.push_back(Point::Constant(1, x));
  return p;
}

LatentHistory sample_history() {
  GpHyper h;
  h.lengthscales = {0.3, 0.5};
  h.amplitude = 1.4;
  const PointList data = {Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.7, 0.4), Eigen::Vector2d(0.5, 0.9)};
  const PointList rej = {Eigen::Vector2d(0.3, 0.3), Eigen::Vector2d(0.9, 0.1)};
  return LatentHistory::from_values(data, {0.4, 1.2, -0.3}, rej, {-0.8, 0.6}, h, unit_box(2));
}

// Frozen function: the GP collapses onto its mean function.
GpHyper frozen(std::function<double(const Point&)> g) {
  GpHyper h;
  h.amplitude = 1e-6;
  h.lengthscales = {0.2};
  h.mean_function = std::move(g);
  return h;
}

HistorySweepConfig only_number_and_location() {
  HistorySweepConfig c;
  c.function_move = false;
  c.hyper_move = false;
  c.walk_scales = {0.15};
  return c;
}

}  // namespace

TEST(NumberMove, InsertAndDeleteAreReciprocal) {
  ZetaSchedule zeta;
  zeta.insert_probability = [](std::size_t m, std::size_t n) { return 1.0 / (1.0 + 0.1 * static_cast<double>(m + n)); };
  for (std::size_t m : {0u, 1u, 4u, 20u}) {
    for (double g : {-2.0, 0.1, 3.0}) {
      EXPECT_NEAR(insert_log_ratio(m, 5, g, zeta) + delete_log_ratio(m + 1, 5, g, zeta), 0.0, 1e-12);
    }
  }
}

TEST(NumberMove, BlockRatioReducesToSingleInsert) {
  ZetaSchedule zeta;
  for (std::size_t m : {0u, 2u, 7u}) {
    const double g = 0.35;
    const double lqf = std::log(zeta(m, 4));
    const double lqr = std::log1p(-zeta(m + 1, 4));
    EXPECT_NEAR(number_change_log_ratio(m, m + 1, 4, {g}, lqf, lqr), insert_log_ratio(m, 4, g, zeta), 1e-12);
    EXPECT_NEAR(number_change_log_ratio(m + 1, m, 4, {g}, lqr, lqf), delete_log_ratio(m + 1, 4, g, zeta), 1e-12);
  }
  EXPECT_THROW(number_change_log_ratio(2, 2, 4, {}, 0, 0), InvalidArgument);
  EXPECT_THROW(number_change_log_ratio(2, 4, 4, {0.1}, 0, 0), DimensionMismatch);
}

TEST(NumberMove, ZetaRules) {
  ZetaSchedule zeta;
  EXPECT_EQ(zeta(0, 3), 1.0);
  EXPECT_EQ(zeta(5, 3), 0.5);
  zeta.insert_probability = [](std::size_t, std::size_t) { return 0.0; };
  EXPECT_THROW(zeta(1, 3), InvalidArgument);
  EXPECT_THROW(delete_log_ratio(0, 3, 0.0, ZetaSchedule{}), InvalidArgument);
}

TEST(HistoryDensity, MatchesDirectComputation) {
  const LatentHistory h = sample_history();
  const PointList pts = h.g.points();
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = oracle::se_kernel(pts[i], pts[j], 1.4, {0.3, 0.5});
  }
  k.diagonal().array() += h.g.jitter();
  const Eigen::VectorXd g = h.g.values_vector();
  double want = oracle::mvn_logpdf(g, Eigen::VectorXd::Zero(n), k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = oracle::logistic(g[i]);
    want += std::log(i < 3 ? p : 1.0 - p);
  }
  EXPECT_NEAR(history_logdensity(h), want, 1e-8);
  EXPECT_EQ(h.N(), 3u);
  EXPECT_EQ(h.M(), 2u);
}

TEST(HistoryDensity, InvariantUnderRejectionOrder) {
  GpHyper h;
  h.lengthscales = {0.3};
  const PointList data = line_points({0.1, 0.6});
  const PointList rej = line_points({0.3, 0.8, 0.45});
  const PointList rej_perm = line_points({0.45, 0.3, 0.8});
  const LatentHistory a = LatentHistory::from_values(data, {0.5, 1.0}, rej, {-0.2, 0.3, -1.1}, h, unit_box(1));
  const LatentHistory b = LatentHistory::from_values(data, {0.5, 1.0}, rej_perm, {-1.1, -0.2, 0.3}, h, unit_box(1));
  EXPECT_NEAR(history_logdensity(a), history_logdensity(b), 1e-10);
}

TEST(HistoryDensity, RejectsMalformedInput) {
  EXPECT_THROW(LatentHistory::from_values(line_points({0.1}), {0.1, 0.2}, {}, {}, GpHyper{}, unit_box(1)),
               DimensionMismatch);
  EXPECT_THROW(LatentHistory::from_values({}, {}, {}, {}, GpHyper{}, unit_box(1)), InvalidArgument);
  EXPECT_THROW(LatentHistory::from_values(line_points({0.1}), {std::nan("")}, {}, {}, GpHyper{}, unit_box(1)),
               InvalidArgument);
}

TEST(Hmc, GradientMatchesFiniteDifferences) {
  const LatentHistory h = sample_history();
  const Eigen::VectorXd v = h.g.whitened();
  Eigen::VectorXd grad;
  history_potential(h, v, &grad);
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    Eigen::VectorXd a = v, b = v;
    a[i] += eps;
    b[i] -= eps;
    EXPECT_NEAR(grad[i], (history_potential(h, a) - history_potential(h, b)) / (2 * eps), 1e-6);
  }
}

TEST(Hmc, PotentialIsNegativeLogDensityUpToConstant) {
  Rng rng(3);
  LatentHistory h = sample_history();
  const Eigen::VectorXd v0 = h.g.whitened();
  const double u0 = history_potential(h, v0);
  const double l0 = history_logdensity(h);
  const Eigen::VectorXd v1 = v0 + 0.3 * standard_normal_vector(static_cast<std::size_t>(v0.size()), rng);
  const double u1 = history_potential(h, v1);
  h.g.set_whitened(v1);
  EXPECT_NEAR(u1 - u0, l0 - history_logdensity(h), 1e-8);
}

TEST(Hmc, EnergyErrorIsSecondOrder) {
  Rng rng(4);
  const LatentHistory h = sample_history();
  const Eigen::VectorXd v0 = h.g.whitened();
  const Eigen::VectorXd p0 = standard_normal_vector(static_cast<std::size_t>(v0.size()), rng);
  const auto err = [&](double eps, int steps) {
    const HmcTrajectory t = hmc_trajectory(h, v0, p0, eps, steps);
    return std::abs(t.final_energy - t.initial_energy);
  };
  const double ratio = err(0.02, 25) / err(0.01, 50);
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
}

TEST(Hmc, LeapfrogIsReversible) {
  Rng rng(5);
  const LatentHistory h = sample_history();
  const Eigen::VectorXd v0 = h.g.whitened();
  const Eigen::VectorXd p0 = standard_normal_vector(static_cast<std::size_t>(v0.size()), rng);
  const HmcTrajectory fwd = hmc_trajectory(h, v0, p0, 0.05, 20);
  const HmcTrajectory back = hmc_trajectory(h, fwd.position, -fwd.momentum, 0.05, 20);
  EXPECT_LT((back.position - v0).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((back.momentum + p0).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Hmc, VanishingStepIsAlwaysAccepted) {
  Rng rng(11);
  LatentHistory h = sample_history();
  for (int i = 0; i < 20; ++i) {
    const StepResult r = step_function_hmc(h, 1e-7, 3, rng);
    EXPECT_NEAR(r.log_ratio, 0.0, 1e-9);
    EXPECT_TRUE(r.accepted);
  }
}

TEST(Hmc, RejectsBadSettings) {
  Rng rng(6);
  LatentHistory h = sample_history();
  EXPECT_THROW(step_function_hmc(h, 0.0, 5, rng), InvalidArgument);
  EXPECT_THROW(step_function_hmc(h, 0.1, 0, rng), InvalidArgument);
}

TEST(LocationMove, RatioFormula) {
  const BaseHyper psi = GaussianBase{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.0)};
  const Point x = Point::Constant(1, 0.2), y = Point::Constant(1, -0.9);
  const double want = -0.5 * (0.81 - 0.04) + std::log(1 - oracle::logistic(0.7)) - std::log(1 - oracle::logistic(-0.4));
  EXPECT_NEAR(location_log_ratio(x, -0.4, y, 0.7, psi), want, 1e-12);
  EXPECT_EQ(location_log_ratio(x, 0.0, Point::Constant(1, 1.5), 0.0, unit_box(1)), -kInf);
}

// With g frozen at a constant c the number of rejections before N acceptances
// is negative binomial: E[M] = N (1 - p) / p and P(M = 0) = p^N, p = Phi(c).
TEST(HistoryChain, RejectionCountIsNegativeBinomialForFrozenFunction) {
  Rng rng(7);
  const double p = 0.3;
  const GpHyper theta = frozen([p](const Point&) { return std::log(p / (1 - p)); });
  LatentHistory h = LatentHistory::initialize(line_points({0.2, 0.5, 0.8}), theta, unit_box(1), rng);
  const HistorySweepConfig cfg = only_number_and_location();
  HistoryDiagnostics diag;
  for (int i = 0; i < 2000; ++i) sweep(h, cfg, HyperPrior{}, diag, rng);
  std::vector<double> m, zero;
  for (int i = 0; i < 60000; ++i) {
    sweep(h, cfg, HyperPrior{}, diag, rng);
    m.push_back(static_cast<double>(h.M()));
    zero.push_back(h.M() == 0 ? 1.0 : 0.0);
  }
  const McEstimate em = batch_means_estimate(m);
  const McEstimate ez = batch_means_estimate(zero);
  EXPECT_NEAR(em.mean, 7.0, 4.0 * em.std_error);
  EXPECT_NEAR(ez.mean, p * p * p, 4.0 * ez.std_error);
}

// Given a frozen g, each rejection location is distributed as
// pi(x) (1 - Phi(g(x))) normalized. Independent chains give independent draws.
TEST(HistoryChain, RejectionLocationsFollowRejectionDensity) {
  Rng rng(8);
  const auto gfun = [](double x) { return 2.5 * std::sin(6.0 * x); };
  const GpHyper theta = frozen([&](const Point& x) { return gfun(x[0]); });
  const HistorySweepConfig cfg = only_number_and_location();
  const auto rej = [&](double x) { return 1.0 - oracle::logistic(gfun(x)); };
  const double z = oracle::simpson(rej, 0.0, 1.0, 4000);
  std::vector<double> xs;
  while (xs.size() < 1500) {
    LatentHistory h = LatentHistory::initialize(line_points({0.15, 0.3}), theta, unit_box(1), rng);
    HistoryDiagnostics diag;
    for (int i = 0; i < 40; ++i) sweep(h, cfg, HyperPrior{}, diag, rng);
    if (h.M() > 0) xs.push_back(h.rejection(h.M() - 1)[0]);
  }
  const auto cdf = [&](double x) { return oracle::simpson(rej, 0.0, x, 400) / z; };
  EXPECT_GT(ks_one_sample(xs, cdf).p_value, 0.01);
}

TEST(HistoryChain, DisabledMovesLeaveStateAlone) {
  Rng rng(9);
  LatentHistory h = sample_history();
  const std::vector<double> before = h.g.values();
  HistorySweepConfig cfg;
  cfg.number_move = cfg.location_move = cfg.function_move = cfg.hyper_move = false;
  HistoryDiagnostics diag;
  sweep(h, cfg, HyperPrior{}, diag, rng);
  EXPECT_EQ(h.g.values(), before);
}

TEST(HistoryPredictive, LeavesHistoryUntouched) {
  Rng rng(10);
  const LatentHistory h = sample_history();
  const std::size_t size = h.g.size();
  const PointList p = predictive_sample_history(h, 30, rng);
  EXPECT_EQ(p.size(), 30u);
  EXPECT_EQ(h.g.size(), size);
}

TEST(HistoryDefaults, WalkScalesFollowData) {
  const std::vector<double> s = default_walk_scales(line_points({0.0, 1.0}), unit_box(1));
  EXPECT_NEAR(s[0], 0.1 * std::sqrt(0.5), 1e-12);
  const std::vector<double> t = default_walk_scales(line_points({0.4}), unit_box(1));
  EXPECT_NEAR(t[0], 0.1 / std::sqrt(12.0), 1e-12);
}
