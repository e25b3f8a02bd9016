#include <gtest/gtest.h>

#include "gpds/realization.hpp"
#include "oracles.hpp"

using namespace gpds;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

GpHyper hyper(double amp, std::vector<double> ls, double mean = 0.0) {
  GpHyper h;
  h.amplitude = amp;
  h.lengthscales = std::move(ls);
  h.mean = mean;
  return h;
}

// Random points in [0, 4]^d at least `sep` apart.
PointList spread_points(std::size_t n, std::size_t d, double sep, Rng& rng) {
  PointList out;
  int misses = 0;
  while (out.size() < n) {
    Point p(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) p[static_cast<Eigen::Index>(k)] = 4.0 * uniform01(rng);
    bool ok = true;
    for (const Point& q : out) ok = ok && (p - q).norm() >= sep;
    if (ok) {
      out.push_back(p);
    } else if (++misses > 1000) {
      // Sequential placement can jam; start over.
      out.clear();
      misses = 0;
    }
  }
  return out;
}

}  // namespace

TEST(Kernel, MatchesClosedForm) {
  const GpHyper h = hyper(2.0, {1.0, 2.0});
  EXPECT_NEAR(covariance(pt({0, 0}), pt({1, 2}), h), 4.0 * std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(covariance(pt({0.3, -1}), pt({0.3, -1}), h), 4.0);
}

TEST(Kernel, Symmetric) {
  Rng rng(3);
  const GpHyper h = hyper(1.3, {0.7, 1.9, 0.4});
  for (int i = 0; i < 50; ++i) {
    const Point x = standard_normal_vector(3, rng);
    const Point y = standard_normal_vector(3, rng);
    EXPECT_DOUBLE_EQ(covariance(x, y, h), covariance(y, x, h));
  }
}

TEST(Kernel, PinnedKernelVanishesAtPin) {
  GpHyper h = hyper(1.5, {0.8});
  h.pin_location = pt({0.4});
  EXPECT_NEAR(covariance(pt({0.4}), pt({0.9}), h), 0.0, 1e-15);
  EXPECT_NEAR(covariance(pt({0.4}), pt({0.4}), h), 0.0, 1e-15);
  // Away from the pin the result is the kernel conditioned on one noiseless observation.
  const double k = oracle::se_kernel(pt({0.1}), pt({0.7}), 1.5, {0.8}) -
                   oracle::se_kernel(pt({0.1}), pt({0.4}), 1.5, {0.8}) *
                       oracle::se_kernel(pt({0.4}), pt({0.7}), 1.5, {0.8}) / (1.5 * 1.5);
  EXPECT_NEAR(covariance(pt({0.1}), pt({0.7}), h), k, 1e-14);
}

TEST(Kernel, DimensionMismatchThrows) {
  const GpHyper h = hyper(1.0, {1.0, 1.0});
  EXPECT_THROW(covariance(pt({0.0}), pt({1.0, 2.0}), h), DimensionMismatch);
}

TEST(Kernel, InvalidHyperparametersRejected) {
  EXPECT_THROW(hyper(0.0, {1.0}).validate(), InvalidArgument);
  EXPECT_THROW(hyper(1.0, {-1.0}).validate(), InvalidArgument);
  EXPECT_THROW(hyper(1.0, {}).validate(), InvalidArgument);
  GpHyper h = hyper(1.0, {1.0, 1.0});
  h.pin_location = pt({0.0});
  EXPECT_THROW(h.validate(), DimensionMismatch);
}

TEST(Conditional, MatchesPartitionedFormulaOnRandomInstances) {
  Rng rng(11);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t d = 1 + inst % 3;
    const std::size_t nc = 1 + static_cast<std::size_t>(uniform01(rng) * 4);
    const std::size_t nq = 6 - nc;
    std::vector<double> ls;
    for (std::size_t k = 0; k < d; ++k) ls.push_back(0.5 + uniform01(rng));
    const double amp = 0.5 + 1.5 * uniform01(rng);
    const double mean = standard_normal(rng);
    const GpHyper h = hyper(amp, ls, mean);
    PointList all = spread_points(nc + nq, d, 0.5, rng);
    ConditioningSet cond;
    for (std::size_t i = 0; i < nc; ++i) cond.push_back(all[i], mean + amp * standard_normal(rng));
    const PointList query(all.begin() + static_cast<std::ptrdiff_t>(nc), all.end());
    const GaussianConditional got = conditional(query, cond, h);
    const oracle::Conditional want =
        oracle::partitioned_conditional(query, cond.points, cond.values, amp, ls, mean, got.jitter);
    worst = std::max({worst, (got.mean - want.mean).cwiseAbs().maxCoeff(), (got.cov - want.cov).cwiseAbs().maxCoeff()});
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Conditional, EmptyConditioningGivesPrior) {
  const GpHyper h = hyper(1.2, {0.5}, 0.7);
  const PointList q{pt({0.0}), pt({0.3})};
  const GaussianConditional c = conditional(q, {}, h);
  EXPECT_DOUBLE_EQ(c.mean[0], 0.7);
  EXPECT_DOUBLE_EQ(c.cov(0, 1), covariance(q[0], q[1], h));
}

TEST(Conditional, QueryAtRevealedPointReturnsItsValue) {
  const GpHyper h = hyper(1.0, {0.5});
  ConditioningSet cond;
  cond.push_back(pt({0.2}), 0.9);
  cond.push_back(pt({0.8}), -0.4);
  const GaussianConditional c = conditional({pt({0.2})}, cond, h);
  EXPECT_NEAR(c.mean[0], 0.9, 1e-6);
  EXPECT_LT(c.cov(0, 0), 1e-6);
}

TEST(Conditional, SamplesHaveConditionalMoments) {
  Rng rng(5);
  const GpHyper h = hyper(1.0, {0.6});
  ConditioningSet cond;
  cond.push_back(pt({0.0}), 1.0);
  const PointList q{pt({0.5}), pt({1.0})};
  const GaussianConditional c = conditional(q, cond, h);
  const int n = 20000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd s = sample_conditional(q, cond, h, rng);
    sum += s;
    outer += (s - c.mean) * (s - c.mean).transpose();
  }
  const Eigen::VectorXd mean = sum / n;
  const Eigen::MatrixXd cov = outer / n;
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(mean[i], c.mean[i], 4.0 * std::sqrt(c.cov(i, i) / n));
    EXPECT_NEAR(cov(i, i), c.cov(i, i), 4.0 * c.cov(i, i) * std::sqrt(2.0 / n));
  }
  EXPECT_NEAR(cov(0, 1), c.cov(0, 1), 0.03);
}

TEST(PriorDensity, MatchesMultivariateNormal) {
  Rng rng(9);
  const GpHyper h = hyper(1.4, {0.3, 0.9}, -0.5);
  const PointList pts = spread_points(5, 2, 0.3, rng);
  std::vector<double> vals;
  for (std::size_t i = 0; i < pts.size(); ++i) vals.push_back(standard_normal(rng));
  const CholeskyFactor f = gp_chol(pts, h);
  Eigen::MatrixXd cov(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) cov(i, j) = oracle::se_kernel(pts[i], pts[j], 1.4, {0.3, 0.9});
  cov.diagonal().array() += f.jitter;
  const Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(), 5);
  EXPECT_NEAR(log_prior_density(vals, pts, h), oracle::mvn_logpdf(v, Eigen::VectorXd::Constant(5, -0.5), cov), 1e-8);
}

TEST(Whitening, RoundTrip) {
  Rng rng(4);
  const GpHyper h = hyper(0.8, {0.5}, 0.3);
  const PointList pts = spread_points(6, 1, 0.1, rng);
  const Eigen::VectorXd g = standard_normal_vector(6, rng);
  EXPECT_LT((unwhiten(whiten(g, pts, h), pts, h) - g).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Cholesky, JitterEscalatesForDuplicatePoints) {
  const GpHyper h = hyper(1.0, {1.0});
  const PointList pts{pt({0.5}), pt({0.5}), pt({0.5})};
  const CholeskyFactor f = gp_chol(pts, h);
  EXPECT_GE(f.jitter, kJitterStart);
  EXPECT_TRUE(f.lower.allFinite());
}

TEST(Cholesky, FailsBeyondCap) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(chol(m, 0.0), IllConditioned);
}

TEST(Realization, IncrementalFactorMatchesBatch) {
  Rng rng(21);
  const GpHyper h = hyper(1.1, {0.4}, 0.2);
  GpRealization g(h);
  for (int i = 0; i < 8; ++i) g.draw(Point::Constant(1, uniform01(rng)), rng);
  Eigen::MatrixXd k = covariance_matrix(g.points(), h);
  k.diagonal().array() += g.jitter();
  EXPECT_LT((g.lower() * g.lower().transpose() - k).cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::VectorXd whitened = whiten(g.values_vector(), g.points(), h);
  EXPECT_LT((g.whitened() - whitened).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Realization, PredictMatchesConditional) {
  Rng rng(22);
  const GpHyper h = hyper(0.9, {0.3, 0.6}, 0.0);
  GpRealization g(h);
  for (const Point& p : spread_points(6, 2, 0.3, rng)) g.draw(p, rng);
  const Point x = pt({1.1, 2.3});
  const GpRealization::Prediction p = g.predict(x);
  const GaussianConditional c = conditional({x}, g.conditioning_set(), h);
  EXPECT_NEAR(p.mean, c.mean[0], 1e-9);
  EXPECT_NEAR(p.variance, c.cov(0, 0) + g.jitter(), 1e-9);
}

TEST(Realization, RemoveRepairsFactor) {
  Rng rng(23);
  const GpHyper h = hyper(1.0, {0.5});
  GpRealization g(h);
  for (int i = 0; i < 10; ++i) g.draw(Point::Constant(1, 3.0 * uniform01(rng)), rng);
  for (std::size_t idx : {0u, 4u, 7u}) {
    g.remove(idx);
    const GpRealization fresh(h, g.conditioning_set());
    EXPECT_LT((g.lower() - fresh.lower()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((g.whitened() - fresh.whitened()).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_NEAR(g.log_prior_density(), fresh.log_prior_density(), 1e-7);
  }
  EXPECT_EQ(g.size(), 7u);
}

TEST(Realization, LogPriorDensityMatchesFreeFunction) {
  Rng rng(24);
  const GpHyper h = hyper(1.3, {0.7}, 0.4);
  GpRealization g(h);
  for (int i = 0; i < 6; ++i) g.draw(Point::Constant(1, 2.0 * uniform01(rng)), rng);
  EXPECT_NEAR(g.log_prior_density(), log_prior_density(g.values(), g.points(), h), 1e-9);
  const GpHyper h2 = hyper(0.6, {1.4}, -0.1);
  EXPECT_NEAR(g.with_hyper(h2).log_prior_density(), log_prior_density(g.values(), g.points(), h2), 1e-9);
}

TEST(Realization, WhitenedRoundTrip) {
  Rng rng(25);
  GpRealization g(hyper(1.0, {0.5}));
  for (int i = 0; i < 5; ++i) g.draw(Point::Constant(1, uniform01(rng) * 2.0), rng);
  const Eigen::VectorXd v = standard_normal_vector(5, rng);
  g.set_whitened(v);
  EXPECT_LT((g.whitened() - v).cwiseAbs().maxCoeff(), 1e-12);
  const GpRealization fresh(g.hyper(), g.conditioning_set());
  EXPECT_LT((fresh.whitened() - v).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Realization, PrefixReusesLeadingFactor) {
  Rng rng(26);
  GpRealization g(hyper(1.0, {0.5}));
  for (int i = 0; i < 6; ++i) g.draw(Point::Constant(1, uniform01(rng) * 2.0), rng);
  const Eigen::VectorXd v = standard_normal_vector(3, rng);
  const GpRealization p = g.prefix_with_whitened(3, v);
  EXPECT_EQ(p.size(), 3u);
  EXPECT_LT((p.lower() - g.leading_factor(3)).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::VectorXd expect = p.prior_means() + g.leading_factor(3) * v;
  EXPECT_LT((p.values_vector() - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pinning, DrawsAtPinAreZeroEvenWithNonzeroMean) {
  Rng rng(27);
  GpHyper h = hyper(2.0, {0.5}, 1.5);
  h.pin_location = pt({0.3});
  for (int i = 0; i < 200; ++i) {
    GpRealization g(h);
    g.draw(pt({0.9}), rng);
    // The jitter scale is sqrt(1e-8) * amplitude.
    EXPECT_LT(std::abs(g.draw(pt({0.3}), rng)), 2e-3);
  }
  // Far from the pin the prior mean is the unconditioned mean.
  EXPECT_NEAR(prior_mean({pt({10.0})}, h)[0], 1.5, 1e-12);
}
