#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "gpds/gp.hpp"

namespace gpds {

/// One Gaussian process sample path, revealed lazily.
///
/// Holds every (location, value) pair drawn so far together with the Cholesky
/// factor L of the jittered prior covariance at those locations and the
/// whitened residual w = L^{-1}(g - m). New draws condition on everything
/// already revealed and extend the factor by one row, so revealing n values
/// costs O(n^3) overall rather than O(n^4).
///
/// The model is the GP with a nugget of `jitter()` on the diagonal; draws,
/// densities and whitening all use the same nugget.
class GpRealization {
 public:
  struct Prediction {
    double mean = 0.0;
    /// Conditional variance of a new value, nugget included.
    double variance = 0.0;
    double prior_mean = 0.0;
    /// L^{-1} k(X, x); becomes the new factor row on append.
    Eigen::VectorXd projection;
  };

  explicit GpRealization(GpHyper hyper) : hyper_(std::move(hyper)) {
    hyper_.validate();
    jitter_ = kJitterStart * hyper_.variance_scale();
  }

  GpRealization(GpHyper hyper, const ConditioningSet& cond) : GpRealization(std::move(hyper)) {
    if (cond.points.size() != cond.values.size()) {
      throw DimensionMismatch("conditioning set has mismatched points and values");
    }
    refactor(cond.points, cond.values);
  }

  const GpHyper& hyper() const { return hyper_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const PointList& points() const { return points_; }
  const std::vector<double>& values() const { return values_; }
  const Point& point(std::size_t i) const { return points_[i]; }
  double value(std::size_t i) const { return values_[i]; }
  double jitter() const { return jitter_; }
  /// Number of values drawn through draw() over this object's lifetime.
  std::size_t draw_count() const { return draws_; }

  ConditioningSet conditioning_set() const { return ConditioningSet{points_, values_}; }

  Eigen::MatrixXd lower() const {
    const auto n = static_cast<Eigen::Index>(size());
    return factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>();
  }

  Eigen::VectorXd whitened() const { return whitened_.head(static_cast<Eigen::Index>(size())); }

  Eigen::VectorXd values_vector() const {
    return Eigen::Map<const Eigen::VectorXd>(values_.data(), static_cast<Eigen::Index>(size()));
  }

  Eigen::VectorXd prior_means() const {
    return Eigen::Map<const Eigen::VectorXd>(means_.data(), static_cast<Eigen::Index>(size()));
  }

  Prediction predict(const Point& x) const {
    detail::check_dimension(x, hyper_);
    const auto n = static_cast<Eigen::Index>(size());
    Prediction p;
    p.prior_mean = detail::prior_mean_unchecked(x, hyper_);
    const double prior_var = detail::covariance_unchecked(x, x, hyper_) + jitter_;
    if (n == 0) {
      p.mean = p.prior_mean;
      p.variance = prior_var;
      return p;
    }
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = detail::covariance_unchecked(x, points_[static_cast<std::size_t>(i)], hyper_);
    factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(k);
    p.mean = p.prior_mean + k.dot(whitened_.head(n));
    // The Schur complement of K + jI is at least j; anything below is roundoff.
    p.variance = std::max(prior_var - k.squaredNorm(), jitter_);
    p.projection = std::move(k);
    return p;
  }

  /// Draws g(x) conditional on everything revealed and reveals it.
  double draw(const Point& x, Rng& rng) {
    Prediction p = predict(x);
    const double z = standard_normal(rng);
    const double g = p.mean + std::sqrt(p.variance) * z;
    append(x, g, p);
    ++draws_;
    return g;
  }

  void append(const Point& x, double g) { append(x, g, predict(x)); }

  /// Appends using a prediction computed against the current contents.
  void append(const Point& x, double g, const Prediction& p) {
    const auto n = static_cast<Eigen::Index>(size());
    reserve(size() + 1);
    const double diag = std::sqrt(p.variance);
    if (n > 0) factor_.row(n).head(n) = p.projection.transpose();
    factor_(n, n) = diag;
    whitened_[n] = (g - p.mean) / diag;
    points_.push_back(x);
    values_.push_back(g);
    means_.push_back(p.prior_mean);
  }

  /// Removes the i-th revealed value; the factor is repaired with a rank-one update.
  void remove(std::size_t index) {
    const auto n = static_cast<Eigen::Index>(size());
    const auto i = static_cast<Eigen::Index>(index);
    if (i >= n) throw InvalidArgument("remove index out of range");
    const Eigen::Index tail = n - i - 1;
    if (tail > 0) {
      Eigen::VectorXd v = factor_.block(i + 1, i, tail, 1);
      rank_one_update(i + 1, tail, v);
      // Shift the rows below i up by one and the trailing block up and left by
      // one, column by column in place (the factor is column-major).
      const auto bytes = [](Eigen::Index k) { return static_cast<std::size_t>(k) * sizeof(double); };
      for (Eigen::Index c = 0; c < i; ++c) {
        double* col = factor_.col(c).data();
        std::memmove(col + i, col + i + 1, bytes(tail));
      }
      for (Eigen::Index j = 0; j < tail; ++j) {
        // Only the lower triangle (rows i + j onward) is meaningful.
        std::memmove(factor_.col(i + j).data() + i + j, factor_.col(i + j + 1).data() + i + j + 1, bytes(tail - j));
      }
    }
    points_.erase(points_.begin() + i);
    values_.erase(values_.begin() + i);
    means_.erase(means_.begin() + i);
    recompute_whitened(i);
  }

  /// Replaces all values at the current locations.
  void set_values(const Eigen::VectorXd& g) {
    if (static_cast<std::size_t>(g.size()) != size()) throw DimensionMismatch("value count mismatch");
    for (std::size_t i = 0; i < size(); ++i) values_[i] = g[static_cast<Eigen::Index>(i)];
    recompute_whitened();
  }

  /// Sets values to m + L v.
  void set_whitened(const Eigen::VectorXd& v) {
    const auto n = static_cast<Eigen::Index>(size());
    if (v.size() != n) throw DimensionMismatch("whitened length mismatch");
    whitened_.head(n) = v;
    const Eigen::VectorXd g = prior_means() + factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>() * v;
    for (Eigen::Index i = 0; i < n; ++i) values_[static_cast<std::size_t>(i)] = g[i];
  }

  /// Maps whitened coordinates to function values without changing state.
  Eigen::VectorXd unwhiten(const Eigen::VectorXd& v) const {
    const auto n = static_cast<Eigen::Index>(size());
    return prior_means() + factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>() * v;
  }

  /// L^T d, used for gradients taken through the whitening map.
  Eigen::VectorXd lower_transpose_times(const Eigen::VectorXd& d) const {
    const auto n = static_cast<Eigen::Index>(size());
    return factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().transpose() * d;
  }

  /// Log density of the revealed values under the (jittered) GP prior.
  double log_prior_density() const {
    const auto n = static_cast<Eigen::Index>(size());
    if (n == 0) return 0.0;
    return -0.5 * whitened_.head(n).squaredNorm() - factor_.diagonal().head(n).array().log().sum() -
           0.5 * static_cast<double>(n) * kLog2Pi;
  }

  /// Leading k x k block of the factor: the factor of the first k locations.
  Eigen::MatrixXd leading_factor(std::size_t k) const {
    const auto m = static_cast<Eigen::Index>(k);
    return factor_.topLeftCorner(m, m).triangularView<Eigen::Lower>();
  }

  /// A realization over the first k locations with whitened values `v`,
  /// reusing the leading block of this factor.
  GpRealization prefix_with_whitened(std::size_t k, const Eigen::VectorXd& v) const {
    if (k > size() || static_cast<std::size_t>(v.size()) != k) throw InvalidArgument("bad prefix");
    GpRealization out(hyper_);
    out.jitter_ = jitter_;
    const auto m = static_cast<Eigen::Index>(k);
    out.reserve(k);
    out.points_.assign(points_.begin(), points_.begin() + m);
    out.means_.assign(means_.begin(), means_.begin() + m);
    out.values_.assign(k, 0.0);
    out.factor_.topLeftCorner(m, m) = factor_.topLeftCorner(m, m);
    out.set_whitened(v);
    return out;
  }

  /// Same values under different hyperparameters (full refactorization).
  GpRealization with_hyper(GpHyper hyper) const {
    GpRealization out(std::move(hyper));
    out.refactor(points_, values_);
    return out;
  }

 private:
  void reserve(std::size_t n) {
    const auto cap = static_cast<std::size_t>(factor_.rows());
    if (n <= cap) return;
    const auto next = static_cast<Eigen::Index>(std::max<std::size_t>({16, 2 * cap, n}));
    factor_.conservativeResize(next, next);
    whitened_.conservativeResize(next);
  }

  void refactor(const PointList& points, const std::vector<double>& values) {
    for (const Point& p : points) detail::check_dimension(p, hyper_);
    points_ = points;
    values_ = values;
    means_.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) means_[i] = detail::prior_mean_unchecked(points[i], hyper_);
    const auto n = static_cast<Eigen::Index>(points.size());
    factor_.resize(0, 0);
    whitened_.resize(0);
    reserve(points.size());
    jitter_ = kJitterStart * hyper_.variance_scale();
    if (n == 0) return;
    CholeskyFactor f = gp_chol(points, hyper_);
    jitter_ = f.jitter;
    factor_.topLeftCorner(n, n) = f.lower;
    recompute_whitened();
  }

  // Whitened values from row `from` on; earlier rows are unaffected by changes below them.
  void recompute_whitened(Eigen::Index from = 0) {
    const auto n = static_cast<Eigen::Index>(size());
    if (n <= from) return;
    const Eigen::Index t = n - from;
    Eigen::VectorXd r = values_vector().tail(t) - prior_means().tail(t);
    if (from > 0) r -= factor_.block(from, 0, t, from) * whitened_.head(from);
    factor_.block(from, from, t, t).triangularView<Eigen::Lower>().solveInPlace(r);
    whitened_.segment(from, t) = r;
  }

  // In-place update of the lower factor T (rows/cols [start, start+m)) so that
  // T T^T becomes T T^T + v v^T.
  void rank_one_update(Eigen::Index start, Eigen::Index m, Eigen::VectorXd& v) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const double lkk = factor_(start + k, start + k);
      const double r = std::hypot(lkk, v[k]);
      const double c = r / lkk;
      const double s = v[k] / lkk;
      factor_(start + k, start + k) = r;
      const Eigen::Index rest = m - k - 1;
      if (rest > 0) {
        auto col = factor_.block(start + k + 1, start + k, rest, 1);
        col = (col + s * v.segment(k + 1, rest)) / c;
        v.segment(k + 1, rest) = c * v.segment(k + 1, rest) - s * col;
      }
    }
  }

  GpHyper hyper_;
  double jitter_ = 0.0;
  PointList points_;
  std::vector<double> values_;
  std::vector<double> means_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd whitened_;
  std::size_t draws_ = 0;
};

}  // namespace gpds
