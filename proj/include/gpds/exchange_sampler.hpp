#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gpds/mcmc.hpp"
#include "gpds/prior_sampler.hpp"

namespace gpds {

struct ExchangeDiagnostics {
  MoveCounter prior;
  MoveCounter control;
  MoveCounter hyper;
  std::size_t budget_failures = 0;
};

/// Markov state of the exchange sampler.
///
/// `g` holds everything revealed about the current function. Its first
/// `num_controls` locations are the control points and the first
/// `data.size()` of those are the data themselves.
struct ExchangeState {
  PointList data;
  std::size_t num_controls = 0;
  GpRealization g;
  BaseHyper psi;
  ExchangeDiagnostics diagnostics;

  const GpHyper& theta() const { return g.hyper(); }

  std::vector<double> g_data() const {
    return {g.values().begin(), g.values().begin() + static_cast<std::ptrdiff_t>(data.size())};
  }

  PointList controls() const {
    return {g.points().begin(), g.points().begin() + static_cast<std::ptrdiff_t>(num_controls)};
  }

  /// Function values at data and extra controls drawn from the GP prior.
  static ExchangeState initialize(PointList data, GpHyper theta, BaseHyper psi, Rng& rng,
                                  const PointList& extra_controls = {}) {
    require(!data.empty(), "exchange sampler needs data");
    validate(psi);
    GpRealization g(std::move(theta));
    for (const Point& x : data) g.draw(x, rng);
    for (const Point& x : extra_controls) g.draw(x, rng);
    const std::size_t b = data.size() + extra_controls.size();
    return ExchangeState{std::move(data), b, std::move(g), std::move(psi), {}};
  }
};

/// log of prod_n phi(g_hat(x_n)) phi(g(w_n)) / [phi(g(x_n)) phi(g_hat(w_n))].
inline double exchange_log_ratio(std::span<const double> g_hat_data, std::span<const double> g_data,
                                 std::span<const double> g_fantasies, std::span<const double> g_hat_fantasies) {
  if (g_hat_data.size() != g_data.size() || g_fantasies.size() != g_hat_fantasies.size()) {
    throw DimensionMismatch("exchange ratio inputs differ in length");
  }
  double r = 0.0;
  for (std::size_t n = 0; n < g_data.size(); ++n) r += log_phi(g_hat_data[n]) - log_phi(g_data[n]);
  for (std::size_t n = 0; n < g_fantasies.size(); ++n) r += log_phi(g_fantasies[n]) - log_phi(g_hat_fantasies[n]);
  return r;
}

/// Base-density factors of the hyperparameter swap:
/// prod_n pi(x_n|psi_hat) pi(w_n|psi) / [pi(x_n|psi) pi(w_n|psi_hat)].
inline double exchange_base_log_ratio(const PointList& data, const PointList& fantasies, const BaseHyper& psi,
                                      const BaseHyper& psi_hat) {
  double r = 0.0;
  for (const Point& x : data) {
    const double a = base_logpdf(x, psi_hat);
    if (a == -kInf) return -kInf;
    r += a - base_logpdf(x, psi);
  }
  for (const Point& w : fantasies) {
    const double a = base_logpdf(w, psi);
    if (a == -kInf) return -kInf;
    r += a - base_logpdf(w, psi_hat);
  }
  return r;
}

/// Full log acceptance ratio for swapping (g, theta, psi) with (g_hat, theta_hat, psi_hat).
inline double exchange_hyper_log_ratio(std::span<const double> g_hat_data, std::span<const double> g_data,
                                       std::span<const double> g_fantasies, std::span<const double> g_hat_fantasies,
                                       const PointList& data, const PointList& fantasies, const GpHyper& theta,
                                       const BaseHyper& psi, const GpHyper& theta_hat, const BaseHyper& psi_hat,
                                       const HyperPrior& priors, const HyperProposalScales& scales) {
  const double prior_hat = hyperprior_logpdf(theta_hat, psi_hat, priors);
  if (prior_hat == -kInf) return -kInf;
  const double base = exchange_base_log_ratio(data, fantasies, psi, psi_hat);
  if (base == -kInf) return -kInf;
  const double q = hyper_proposal_logdensity(theta, psi, theta_hat, psi_hat, priors, scales) -
                   hyper_proposal_logdensity(theta_hat, psi_hat, theta, psi, priors, scales);
  return q + prior_hat - hyperprior_logpdf(theta, psi, priors) + base +
         exchange_log_ratio(g_hat_data, g_data, g_fantasies, g_hat_fantasies);
}

/// Prior-reversible perturbation of whitened control values:
/// w_hat = sqrt(1 - eps^2) w + eps * eta, i.e. in function space
/// G_hat = mu + sqrt(1 - eps^2)(G - mu) + eps L eta.
/// step_scale = 0 is allowed here (identity map); the exchange move itself requires it positive.
inline Eigen::VectorXd crankshaft_whitened(const Eigen::VectorXd& w, double step_scale, Rng& rng) {
  require(step_scale >= 0.0 && step_scale <= 1.0, "crankshaft step scale must lie in [0, 1]");
  const Eigen::VectorXd eta = standard_normal_vector(static_cast<std::size_t>(w.size()), rng);
  return std::sqrt(1.0 - step_scale * step_scale) * w + step_scale * eta;
}

inline Eigen::VectorXd crankshaft_proposal(const Eigen::VectorXd& g_controls, const Eigen::VectorXd& prior_mean,
                                           const Eigen::MatrixXd& lower, double step_scale, Rng& rng) {
  const auto l = lower.triangularView<Eigen::Lower>();
  const Eigen::VectorXd w = l.solve(g_controls - prior_mean);
  return prior_mean + l * crankshaft_whitened(w, step_scale, rng);
}

namespace detail {

// Generates fantasies under g_hat, reveals the current function at them and
// applies the Metropolis-Hastings rule to the swap.
inline StepResult exchange_swap(ExchangeState& s, GpRealization g_hat, const BaseHyper& psi_hat, bool base_changes,
                                double extra_log_ratio, const RejectionOptions& options, Rng& rng) {
  StepResult result;
  const std::size_t n = s.data.size();
  RejectionRun run;
  if (!run_rejection(g_hat, n, psi_hat, options.max_proposals, rng, run)) {
    result.budget_exceeded = true;
    ++s.diagnostics.budget_failures;
    return result;
  }
  const std::vector<double> g_hat_data(g_hat.values().begin(), g_hat.values().begin() + static_cast<std::ptrdiff_t>(n));
  const std::vector<double> g_data = s.g_data();
  std::vector<double> g_fant;
  g_fant.reserve(n);
  for (const Point& w : run.accepted) g_fant.push_back(s.g.draw(w, rng));

  double log_a = extra_log_ratio + exchange_log_ratio(g_hat_data, g_data, g_fant, run.accepted_values);
  if (base_changes) log_a += exchange_base_log_ratio(s.data, run.accepted, s.psi, psi_hat);
  result.log_ratio = log_a;
  if (std::log(uniform01(rng)) < log_a) {
    s.g = std::move(g_hat);
    s.psi = psi_hat;
    result.accepted = true;
  }
  return result;
}

}  // namespace detail

/// Exchange move with the GP prior as the function proposal.
inline StepResult exchange_step_prior(ExchangeState& s, Rng& rng, const RejectionOptions& options = {}) {
  const Eigen::VectorXd eta = standard_normal_vector(s.num_controls, rng);
  StepResult r = detail::exchange_swap(s, s.g.prefix_with_whitened(s.num_controls, eta), s.psi, false, 0.0, options, rng);
  s.diagnostics.prior.record(r.accepted);
  return r;
}

/// Exchange move with a crankshaft perturbation at the control points; the
/// rest of g_hat is revealed retrospectively given (C, G_hat_C). The
/// proposal leaves the prior at C invariant, so only the data/fantasy
/// product remains in the ratio.
inline StepResult exchange_step_control(ExchangeState& s, double step_scale, Rng& rng,
                                        const RejectionOptions& options = {}) {
  require(s.num_controls > 0, "no control points");
  require(step_scale > 0.0 && step_scale <= 1.0, "crankshaft step scale must lie in (0, 1]");
  const Eigen::VectorXd w = s.g.whitened().head(static_cast<Eigen::Index>(s.num_controls));
  const Eigen::VectorXd w_hat = step_scale == 1.0 ? standard_normal_vector(s.num_controls, rng)
                                                  : crankshaft_whitened(w, step_scale, rng);
  StepResult r = detail::exchange_swap(s, s.g.prefix_with_whitened(s.num_controls, w_hat), s.psi, false, 0.0,
                                       options, rng);
  s.diagnostics.control.record(r.accepted);
  return r;
}

/// Swaps (g, theta, psi) for a fresh prior function under proposed
/// hyperparameters. Proposals outside the prior support, or that put an
/// observed datum outside the base support, are rejected outright.
inline StepResult exchange_step_hyper(ExchangeState& s, const HyperPrior& priors, const HyperProposalScales& scales,
                                      Rng& rng, const RejectionOptions& options = {}) {
  auto [theta_hat, psi_hat] = propose_hyper(s.theta(), s.psi, priors, scales, rng);
  StepResult r;
  const double prior_hat = hyperprior_logpdf(theta_hat, psi_hat, priors);
  bool data_supported = prior_hat > -kInf;
  for (std::size_t i = 0; data_supported && i < s.data.size(); ++i) {
    data_supported = base_logpdf(s.data[i], psi_hat) > -kInf;
  }
  if (!data_supported) {
    s.diagnostics.hyper.record(false);
    return r;
  }
  const double extra = prior_hat - hyperprior_logpdf(s.theta(), s.psi, priors) +
                       hyper_proposal_logdensity(s.theta(), s.psi, theta_hat, psi_hat, priors, scales) -
                       hyper_proposal_logdensity(theta_hat, psi_hat, s.theta(), s.psi, priors, scales);
  GpRealization g_hat(theta_hat);
  for (std::size_t i = 0; i < s.num_controls; ++i) g_hat.draw(s.g.point(i), rng);
  r = detail::exchange_swap(s, std::move(g_hat), psi_hat, true, extra, options, rng);
  s.diagnostics.hyper.record(r.accepted);
  return r;
}

/// Samples from the current function's density, leaving the chain untouched.
inline PointList predictive_sample_exchange(const ExchangeState& s, std::size_t n_samples, Rng& rng,
                                            const RejectionOptions& options = {}) {
  if (n_samples == 0) return {};
  GpRealization g = s.g;
  detail::RejectionRun run;
  if (!detail::run_rejection(g, n_samples, s.psi, options.max_proposals, rng, run)) {
    throw BudgetExceeded("predictive sampling exhausted its proposal budget", detail::make_trace(g, s.g.size(), std::move(run)));
  }
  return std::move(run.accepted);
}

struct ExchangeSweepConfig {
  /// Crankshaft scale for control-point moves; 1 gives independent prior proposals.
  double step_scale = 0.2;
  bool function_move = true;
  bool hyper_move = true;
  HyperProposalScales hyper_scales;
  RejectionOptions rejection;
};

/// One function move followed by one hyperparameter move.
inline void exchange_sweep(ExchangeState& s, const ExchangeSweepConfig& config, const HyperPrior& priors, Rng& rng) {
  if (config.function_move) exchange_step_control(s, config.step_scale, rng, config.rejection);
  if (config.hyper_move) exchange_step_hyper(s, priors, config.hyper_scales, rng, config.rejection);
}

}  // namespace gpds
