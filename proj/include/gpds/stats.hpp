#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "gpds/common.hpp"

namespace gpds {

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (effective-size correction of Stephens).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "KS test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
inline KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  require(!a.empty(), "KS test needs a non-empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

/// Sample mean with a Monte Carlo standard error.
struct McEstimate {
  double mean = 0.0;
  /// NaN when fewer than two values were averaged.
  double std_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;

  bool stderr_defined() const { return std::isfinite(std_error); }
};

inline double sample_mean(const std::vector<double>& v) {
  require(!v.empty(), "mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

/// Mean with the i.i.d. standard error.
inline McEstimate iid_estimate(const std::vector<double>& v) {
  require(!v.empty(), "no samples to average");
  McEstimate e;
  e.mean = sample_mean(v);
  e.count = v.size();
  if (v.size() >= 2) e.std_error = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
  return e;
}

/// Mean with a batch-means standard error for autocorrelated sequences,
/// using about sqrt(n) contiguous batches. Short sequences fall back to the
/// i.i.d. formula.
inline McEstimate batch_means_estimate(const std::vector<double>& v) {
  require(!v.empty(), "no samples to average");
  if (v.size() < 16) return iid_estimate(v);
  const auto batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(v.size())));
  const std::size_t size = v.size() / batches;
  std::vector<double> means;
  means.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const auto first = v.begin() + static_cast<std::ptrdiff_t>(b * size);
    means.push_back(std::accumulate(first, first + static_cast<std::ptrdiff_t>(size), 0.0) / static_cast<double>(size));
  }
  McEstimate e;
  e.mean = sample_mean(v);
  e.count = v.size();
  // The i.i.d. error is used as a floor; a handful of batches can badly underestimate.
  const double iid = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
  e.std_error = std::max(std::sqrt(sample_variance(means) / static_cast<double>(batches)), iid);
  return e;
}

}  // namespace gpds
