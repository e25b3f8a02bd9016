#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpds/common.hpp"

namespace gpds {

/// Jitter is expressed relative to the kernel amplitude squared.
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterCap = 1e-2;

/// Hyperparameters of the squared-exponential Gaussian process prior on g.
///
/// The prior mean is the constant `mean` unless `mean_function` is set, in
/// which case that function is used instead. `pin_location`, when present,
/// conditions the prior mean and kernel on g(x0) = 0.
struct GpHyper {
  double amplitude = 1.0;
  std::vector<double> lengthscales{1.0};
  std::optional<Point> pin_location;
  double mean = 0.0;
  std::function<double(const Point&)> mean_function;

  std::size_t dimension() const { return lengthscales.size(); }

  double mean_at(const Point& x) const { return mean_function ? mean_function(x) : mean; }

  double variance_scale() const { return amplitude * amplitude; }

  void validate() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
      throw InvalidArgument("GP amplitude must be positive and finite");
    }
    if (lengthscales.empty()) throw InvalidArgument("GP needs at least one lengthscale");
    for (double l : lengthscales) {
      if (!(l > 0.0) || !std::isfinite(l)) {
        throw InvalidArgument("GP lengthscales must be positive and finite");
      }
    }
    if (pin_location && static_cast<std::size_t>(pin_location->size()) != dimension()) {
      throw DimensionMismatch("pin location dimension does not match lengthscales");
    }
  }
};

/// Locations and the function values revealed there, in draw order.
struct ConditioningSet {
  PointList points;
  std::vector<double> values;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void push_back(Point x, double g) {
    points.push_back(std::move(x));
    values.push_back(g);
  }
};

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  /// Absolute amount added to the diagonal before factorizing.
  double jitter = 0.0;
};

namespace detail {

inline double squared_exponential(const Point& x, const Point& y, const GpHyper& hyper) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double r = (x[d] - y[d]) / hyper.lengthscales[static_cast<std::size_t>(d)];
    s += r * r;
  }
  return hyper.amplitude * hyper.amplitude * std::exp(-0.5 * s);
}

inline void check_dimension(const Point& x, const GpHyper& hyper) {
  if (static_cast<std::size_t>(x.size()) != hyper.dimension()) {
    throw DimensionMismatch("point has dimension " + std::to_string(x.size()) + ", kernel expects " +
                            std::to_string(hyper.dimension()));
  }
}

}  // namespace detail

namespace detail {

// Covariance for points whose dimensions have already been checked.
inline double covariance_unchecked(const Point& x, const Point& y, const GpHyper& hyper) {
  const double k = squared_exponential(x, y, hyper);
  if (!hyper.pin_location) return k;
  const Point& x0 = *hyper.pin_location;
  return k - squared_exponential(x, x0, hyper) * squared_exponential(x0, y, hyper) / hyper.variance_scale();
}

// Prior mean of g, conditioned on g(x0) = 0 when the kernel is pinned.
inline double prior_mean_unchecked(const Point& x, const GpHyper& hyper) {
  const double m = hyper.mean_at(x);
  if (!hyper.pin_location) return m;
  const Point& x0 = *hyper.pin_location;
  return m - squared_exponential(x, x0, hyper) / hyper.variance_scale() * hyper.mean_at(x0);
}

inline void check_dimensions(const PointList& points, const GpHyper& hyper) {
  for (const Point& p : points) check_dimension(p, hyper);
}

}  // namespace detail

/// Squared-exponential covariance, optionally conditioned on g(x0) = 0.
inline double covariance(const Point& x, const Point& y, const GpHyper& hyper) {
  detail::check_dimension(x, hyper);
  detail::check_dimension(y, hyper);
  return detail::covariance_unchecked(x, y, hyper);
}

inline Eigen::MatrixXd covariance_matrix(const PointList& points, const GpHyper& hyper) {
  detail::check_dimensions(points, hyper);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = detail::covariance_unchecked(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)], hyper);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

inline Eigen::MatrixXd cross_covariance(const PointList& a, const PointList& b, const GpHyper& hyper) {
  detail::check_dimensions(a, hyper);
  detail::check_dimensions(b, hyper);
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::covariance_unchecked(a[i], b[j], hyper);
    }
  }
  return k;
}

inline Eigen::VectorXd prior_mean(const PointList& points, const GpHyper& hyper) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(points.size()));
  detail::check_dimensions(points, hyper);
  for (std::size_t i = 0; i < points.size(); ++i) {
    m[static_cast<Eigen::Index>(i)] = detail::prior_mean_unchecked(points[i], hyper);
  }
  return m;
}

/// Factorizes cov + j * diag_scale * I. j starts at base_jitter and grows
/// tenfold (from kJitterStart when base_jitter is zero) until the
/// factorization succeeds or j exceeds kJitterCap.
inline CholeskyFactor chol(const Eigen::MatrixXd& cov, double base_jitter, double diag_scale = 1.0) {
  if (cov.rows() != cov.cols()) throw DimensionMismatch("covariance matrix must be square");
  if (base_jitter < 0.0) throw InvalidArgument("jitter must be non-negative");
  const Eigen::Index n = cov.rows();
  double j = base_jitter;
  while (true) {
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += j * diag_scale;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd lower = llt.matrixL();
      bool ok = true;
      for (Eigen::Index i = 0; i < n; ++i) ok = ok && lower(i, i) > 0.0 && std::isfinite(lower(i, i));
      if (ok) return CholeskyFactor{std::move(lower), j * diag_scale};
    }
    j = (j == 0.0) ? kJitterStart : j * 10.0;
    if (j > kJitterCap * (1.0 + 1e-9)) {
      throw IllConditioned("covariance matrix is not positive definite at the jitter cap");
    }
  }
}

inline CholeskyFactor gp_chol(const PointList& points, const GpHyper& hyper) {
  return chol(covariance_matrix(points, hyper), kJitterStart, hyper.variance_scale());
}

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  /// Jitter applied to the conditioning covariance (zero when cond is empty).
  double jitter = 0.0;
};

/// Gaussian conditioning of the GP at `query` given the revealed values in `cond`.
/// The returned covariance is that of the latent function (no jitter on the query block).
inline GaussianConditional conditional(const PointList& query, const ConditioningSet& cond, const GpHyper& hyper) {
  hyper.validate();
  if (cond.points.size() != cond.values.size()) {
    throw DimensionMismatch("conditioning set has mismatched points and values");
  }
  GaussianConditional out;
  out.mean = prior_mean(query, hyper);
  out.cov = covariance_matrix(query, hyper);
  if (cond.empty() || query.empty()) return out;

  const CholeskyFactor f = gp_chol(cond.points, hyper);
  const auto lower = f.lower.triangularView<Eigen::Lower>();
  const Eigen::VectorXd residual =
      Eigen::Map<const Eigen::VectorXd>(cond.values.data(), static_cast<Eigen::Index>(cond.size())) -
      prior_mean(cond.points, hyper);
  const Eigen::VectorXd w = lower.solve(residual);
  const Eigen::MatrixXd v = lower.solve(cross_covariance(cond.points, query, hyper));
  out.mean += v.transpose() * w;
  out.cov -= v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.jitter = f.jitter;
  return out;
}

/// Joint draw at `query` from the conditional. The caller appends the draw to
/// its conditioning set if the function is to be evaluated again.
inline Eigen::VectorXd sample_conditional(const PointList& query, const ConditioningSet& cond, const GpHyper& hyper,
                                          Rng& rng) {
  if (query.empty()) return {};
  const GaussianConditional c = conditional(query, cond, hyper);
  const CholeskyFactor f = chol(c.cov, kJitterStart, hyper.variance_scale());
  return c.mean + f.lower * standard_normal_vector(query.size(), rng);
}

inline double log_prior_density(const std::vector<double>& values, const PointList& points, const GpHyper& hyper) {
  hyper.validate();
  if (values.size() != points.size()) throw DimensionMismatch("values and points differ in length");
  if (points.empty()) return 0.0;
  const CholeskyFactor f = gp_chol(points, hyper);
  const Eigen::VectorXd residual =
      Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())) -
      prior_mean(points, hyper);
  const Eigen::VectorXd w = f.lower.triangularView<Eigen::Lower>().solve(residual);
  const double n = static_cast<double>(points.size());
  return -0.5 * w.squaredNorm() - f.lower.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

/// v = L^{-1} (g - m) for the jittered prior covariance L L^T at `points`.
inline Eigen::VectorXd whiten(const Eigen::VectorXd& values, const PointList& points, const GpHyper& hyper) {
  if (static_cast<std::size_t>(values.size()) != points.size()) {
    throw DimensionMismatch("values and points differ in length");
  }
  if (points.empty()) return {};
  const CholeskyFactor f = gp_chol(points, hyper);
  return f.lower.triangularView<Eigen::Lower>().solve(values - prior_mean(points, hyper));
}

inline Eigen::VectorXd unwhiten(const Eigen::VectorXd& whitened, const PointList& points, const GpHyper& hyper) {
  if (static_cast<std::size_t>(whitened.size()) != points.size()) {
    throw DimensionMismatch("whitened values and points differ in length");
  }
  if (points.empty()) return {};
  const CholeskyFactor f = gp_chol(points, hyper);
  return prior_mean(points, hyper) + f.lower.triangularView<Eigen::Lower>() * whitened;
}

}  // namespace gpds
