#pragma once

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "gpds/gp.hpp"

namespace gpds {

// ---------------------------------------------------------------------------
// Logistic link

/// Logistic function, evaluated without overflow for any finite z.
inline double phi(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double log_phi(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

inline double log_one_minus_phi(double z) { return log_phi(-z); }

/// d/dz log phi(z) = 1 - phi(z).
inline double log_phi_grad(double z) { return phi(-z); }

/// d/dz log(1 - phi(z)) = -phi(z).
inline double log_one_minus_phi_grad(double z) { return -phi(z); }

// ---------------------------------------------------------------------------
// Base density

struct BoxBase {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Axis-aligned Gaussian.
struct GaussianBase {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

using BaseHyper = std::variant<BoxBase, GaussianBase>;

inline BoxBase unit_box(std::size_t dim) {
  return BoxBase{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
                 Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))};
}

inline std::size_t dimension(const BaseHyper& psi) {
  return std::visit(
      [](const auto& b) -> std::size_t {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, BoxBase>) {
          return static_cast<std::size_t>(b.lower.size());
        } else {
          return static_cast<std::size_t>(b.mean.size());
        }
      },
      psi);
}

inline bool is_valid(const BaseHyper& psi) {
  if (const auto* box = std::get_if<BoxBase>(&psi)) {
    return box->lower.size() == box->upper.size() && box->lower.size() > 0 &&
           (box->lower.array() < box->upper.array()).all();
  }
  const auto& g = std::get<GaussianBase>(psi);
  return g.mean.size() == g.stddev.size() && g.mean.size() > 0 && (g.stddev.array() > 0.0).all() &&
         g.stddev.allFinite() && g.mean.allFinite();
}

inline void validate(const BaseHyper& psi) {
  if (!is_valid(psi)) throw InvalidArgument("invalid base density parameters");
}

inline Point base_sample(const BaseHyper& psi, Rng& rng) {
  if (const auto* box = std::get_if<BoxBase>(&psi)) {
    Point x(box->lower.size());
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      x[d] = box->lower[d] + (box->upper[d] - box->lower[d]) * uniform01(rng);
    }
    return x;
  }
  const auto& g = std::get<GaussianBase>(psi);
  Point x(g.mean.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) x[d] = g.mean[d] + g.stddev[d] * standard_normal(rng);
  return x;
}

/// Normalized log density; -inf outside a box.
inline double base_logpdf(const Point& x, const BaseHyper& psi) {
  if (static_cast<std::size_t>(x.size()) != dimension(psi)) {
    throw DimensionMismatch("point dimension does not match base density");
  }
  if (const auto* box = std::get_if<BoxBase>(&psi)) {
    double lp = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      if (!(x[d] >= box->lower[d] && x[d] <= box->upper[d])) return -kInf;
      lp -= std::log(box->upper[d] - box->lower[d]);
    }
    return lp;
  }
  const auto& g = std::get<GaussianBase>(psi);
  double lp = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double r = (x[d] - g.mean[d]) / g.stddev[d];
    lp += -0.5 * r * r - std::log(g.stddev[d]) - 0.5 * kLog2Pi;
  }
  return lp;
}

/// phi(g(x)) * pi(x | psi); bounded above by pi(x | psi).
inline double unnormalized_density(const Point& x, double g_at_x, const BaseHyper& psi) {
  const double lp = base_logpdf(x, psi);
  if (lp == -kInf) return 0.0;
  return phi(g_at_x) * std::exp(lp);
}

// ---------------------------------------------------------------------------
// Hyperpriors

struct NormalPrior {
  double location = 0.0;
  double scale = 1.0;

  double logpdf(double v) const {
    const double r = (v - location) / scale;
    return -0.5 * r * r - std::log(scale) - 0.5 * kLog2Pi;
  }
};

/// Priors on (theta, psi). Positive parameters carry normal priors on their
/// logarithms and densities are taken with respect to those log coordinates,
/// which is also the space the random-walk proposals move in.
struct HyperPrior {
  NormalPrior log_amplitude{1.0, 0.5};
  NormalPrior log_lengthscale{0.05, 0.5};
  /// All lengthscales share one value (isotropic kernel).
  bool isotropic = false;
  /// Gaussian-base priors; empty means psi is held fixed.
  std::vector<NormalPrior> base_mean;
  std::vector<NormalPrior> base_log_stddev;
  /// Uniform prior region for the pin location x0.
  std::optional<BoxBase> pin_region;

  bool infers_base() const { return !base_mean.empty(); }
};

/// Weakly informative, data-scaled priors for a Gaussian base density:
/// mean ~ N(data mean, 2 sd), log sd ~ N(log data sd, 1).
inline void set_data_scaled_base_priors(HyperPrior& priors, const PointList& data) {
  require(!data.empty(), "data required for data-scaled priors");
  const auto dim = data.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const Point& x : data) mean += x;
  mean /= static_cast<double>(data.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const Point& x : data) var += (x - mean).cwiseAbs2();
  var /= static_cast<double>(std::max<std::size_t>(data.size() - 1, 1));
  priors.base_mean.clear();
  priors.base_log_stddev.clear();
  for (Eigen::Index d = 0; d < dim; ++d) {
    const double sd = std::sqrt(std::max(var[d], 1e-12));
    priors.base_mean.push_back({mean[d], 2.0 * sd});
    priors.base_log_stddev.push_back({std::log(sd), 1.0});
  }
}

inline double gp_hyperprior_logpdf(const GpHyper& theta, const HyperPrior& priors) {
  if (!(theta.amplitude > 0.0)) return -kInf;
  for (double l : theta.lengthscales) {
    if (!(l > 0.0)) return -kInf;
  }
  double lp = priors.log_amplitude.logpdf(std::log(theta.amplitude));
  if (priors.isotropic) {
    const double l0 = theta.lengthscales.front();
    for (double l : theta.lengthscales) {
      if (l != l0) return -kInf;
    }
    lp += priors.log_lengthscale.logpdf(std::log(l0));
  } else {
    for (double l : theta.lengthscales) lp += priors.log_lengthscale.logpdf(std::log(l));
  }
  if (theta.pin_location) {
    if (!priors.pin_region) throw InvalidArgument("pinned GP needs a pin prior region");
    lp += base_logpdf(*theta.pin_location, BaseHyper{*priors.pin_region});
  }
  return lp;
}

inline double base_hyperprior_logpdf(const BaseHyper& psi, const HyperPrior& priors) {
  if (!is_valid(psi)) return -kInf;
  if (!priors.infers_base()) return 0.0;
  const auto* g = std::get_if<GaussianBase>(&psi);
  if (g == nullptr) return 0.0;
  if (static_cast<std::size_t>(g->mean.size()) != priors.base_mean.size() ||
      priors.base_log_stddev.size() != priors.base_mean.size()) {
    throw DimensionMismatch("base prior dimension mismatch");
  }
  double lp = 0.0;
  for (Eigen::Index d = 0; d < g->mean.size(); ++d) {
    lp += priors.base_mean[static_cast<std::size_t>(d)].logpdf(g->mean[d]);
    lp += priors.base_log_stddev[static_cast<std::size_t>(d)].logpdf(std::log(g->stddev[d]));
  }
  return lp;
}

inline double hyperprior_logpdf(const GpHyper& theta, const BaseHyper& psi, const HyperPrior& priors) {
  const double a = gp_hyperprior_logpdf(theta, priors);
  if (a == -kInf) return -kInf;
  return a + base_hyperprior_logpdf(psi, priors);
}

// ---------------------------------------------------------------------------
// Hyperparameter proposals

/// Random-walk step sizes in the transformed (log / identity) coordinates.
/// A zero scale freezes that component.
struct HyperProposalScales {
  double log_amplitude = 0.1;
  double log_lengthscale = 0.1;
  double pin = 0.1;
  double base_mean = 0.1;
  double base_log_stddev = 0.1;
};

namespace detail {

// Transformed coordinates of the moving hyperparameters, paired with walk scales.
inline std::vector<std::pair<double, double>> hyper_coordinates(const GpHyper& theta, const BaseHyper& psi,
                                                                const HyperPrior& priors,
                                                                const HyperProposalScales& s) {
  std::vector<std::pair<double, double>> c;
  c.emplace_back(std::log(theta.amplitude), s.log_amplitude);
  if (priors.isotropic) {
    c.emplace_back(std::log(theta.lengthscales.front()), s.log_lengthscale);
  } else {
    for (double l : theta.lengthscales) c.emplace_back(std::log(l), s.log_lengthscale);
  }
  if (theta.pin_location) {
    for (Eigen::Index d = 0; d < theta.pin_location->size(); ++d) c.emplace_back((*theta.pin_location)[d], s.pin);
  }
  if (priors.infers_base()) {
    if (const auto* g = std::get_if<GaussianBase>(&psi)) {
      for (Eigen::Index d = 0; d < g->mean.size(); ++d) c.emplace_back(g->mean[d], s.base_mean);
      for (Eigen::Index d = 0; d < g->stddev.size(); ++d) c.emplace_back(std::log(g->stddev[d]), s.base_log_stddev);
    }
  }
  return c;
}

inline void apply_hyper_coordinates(const std::vector<double>& c, GpHyper& theta, BaseHyper& psi,
                                    const HyperPrior& priors) {
  std::size_t k = 0;
  theta.amplitude = std::exp(c[k++]);
  if (priors.isotropic) {
    const double l = std::exp(c[k++]);
    for (double& v : theta.lengthscales) v = l;
  } else {
    for (double& v : theta.lengthscales) v = std::exp(c[k++]);
  }
  if (theta.pin_location) {
    for (Eigen::Index d = 0; d < theta.pin_location->size(); ++d) (*theta.pin_location)[d] = c[k++];
  }
  if (priors.infers_base()) {
    if (auto* g = std::get_if<GaussianBase>(&psi)) {
      for (Eigen::Index d = 0; d < g->mean.size(); ++d) g->mean[d] = c[k++];
      for (Eigen::Index d = 0; d < g->stddev.size(); ++d) g->stddev[d] = std::exp(c[k++]);
    }
  }
}

}  // namespace detail

/// Symmetric Gaussian random walk on log amplitude, log lengthscales, the pin
/// location and (when inferred) the Gaussian base mean and log scales.
/// Box bases are never moved.
inline std::pair<GpHyper, BaseHyper> propose_hyper(const GpHyper& theta, const BaseHyper& psi,
                                                   const HyperPrior& priors, const HyperProposalScales& scales,
                                                   Rng& rng) {
  const auto coords = detail::hyper_coordinates(theta, psi, priors, scales);
  std::vector<double> next;
  next.reserve(coords.size());
  for (const auto& [value, scale] : coords) next.push_back(value + scale * standard_normal(rng));
  GpHyper theta_hat = theta;
  BaseHyper psi_hat = psi;
  detail::apply_hyper_coordinates(next, theta_hat, psi_hat, priors);
  return {std::move(theta_hat), std::move(psi_hat)};
}

/// log q(to <- from) in transformed coordinates (frozen components ignored).
inline double hyper_proposal_logdensity(const GpHyper& to_theta, const BaseHyper& to_psi, const GpHyper& from_theta,
                                        const BaseHyper& from_psi, const HyperPrior& priors,
                                        const HyperProposalScales& scales) {
  const auto to = detail::hyper_coordinates(to_theta, to_psi, priors, scales);
  const auto from = detail::hyper_coordinates(from_theta, from_psi, priors, scales);
  if (to.size() != from.size()) throw DimensionMismatch("hyperparameter layouts differ");
  double lq = 0.0;
  for (std::size_t i = 0; i < to.size(); ++i) {
    const double s = from[i].second;
    if (s <= 0.0) continue;
    lq += NormalPrior{from[i].first, s}.logpdf(to[i].first);
  }
  return lq;
}

}  // namespace gpds
