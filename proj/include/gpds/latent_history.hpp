#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <type_traits>
#include <vector>

#include "gpds/mcmc.hpp"
#include "gpds/prior_sampler.hpp"

namespace gpds {

/// The accepted data and the latent rejections of the generative process,
/// with the function values at both.
///
/// `g` reveals the data first (indices 0..N-1), then the rejections.
struct LatentHistory {
  std::size_t num_data = 0;
  GpRealization g;
  BaseHyper psi;

  std::size_t N() const { return num_data; }
  std::size_t M() const { return g.size() - num_data; }
  const GpHyper& theta() const { return g.hyper(); }

  PointList data() const { return {g.points().begin(), g.points().begin() + offset()}; }
  PointList rejections() const { return {g.points().begin() + offset(), g.points().end()}; }
  std::vector<double> g_data() const { return {g.values().begin(), g.values().begin() + offset()}; }
  std::vector<double> g_rejections() const { return {g.values().begin() + offset(), g.values().end()}; }
  const Point& rejection(std::size_t m) const { return g.point(num_data + m); }
  double g_rejection(std::size_t m) const { return g.value(num_data + m); }

  /// No rejections; the function at the data drawn from the GP prior.
  static LatentHistory initialize(const PointList& data, GpHyper theta, BaseHyper psi, Rng& rng) {
    require(!data.empty(), "latent history needs data");
    validate(psi);
    GpRealization g(std::move(theta));
    for (const Point& x : data) g.draw(x, rng);
    return LatentHistory{data.size(), std::move(g), std::move(psi)};
  }

  static LatentHistory from_values(const PointList& data, const std::vector<double>& g_data,
                                   const PointList& rejections, const std::vector<double>& g_rejections,
                                   GpHyper theta, BaseHyper psi) {
    require(!data.empty(), "latent history needs data");
    if (data.size() != g_data.size() || rejections.size() != g_rejections.size()) {
      throw DimensionMismatch("history points and values differ in length");
    }
    validate(psi);
    ConditioningSet cond;
    for (std::size_t i = 0; i < data.size(); ++i) cond.push_back(data[i], g_data[i]);
    for (std::size_t i = 0; i < rejections.size(); ++i) cond.push_back(rejections[i], g_rejections[i]);
    for (double v : cond.values) {
      if (!std::isfinite(v)) throw InvalidArgument("latent function values must be finite");
    }
    return LatentHistory{data.size(), GpRealization(std::move(theta), cond), std::move(psi)};
  }

 private:
  std::ptrdiff_t offset() const { return static_cast<std::ptrdiff_t>(num_data); }
};

/// The same history with x appended to the data and g(x) drawn from the GP
/// given everything the history has revealed.
inline LatentHistory with_extra_datum(const LatentHistory& h, const Point& x, Rng& rng) {
  const GpRealization::Prediction p = h.g.predict(x);
  PointList data = h.data();
  std::vector<double> g_data = h.g_data();
  data.push_back(x);
  g_data.push_back(p.mean + std::sqrt(p.variance) * standard_normal(rng));
  return LatentHistory::from_values(data, g_data, h.rejections(), h.g_rejections(), h.theta(), h.psi);
}

/// Probability of proposing an insertion; zeta(0, N) is always 1.
struct ZetaSchedule {
  /// Used for M >= 1; defaults to 1/2 when empty.
  std::function<double(std::size_t, std::size_t)> insert_probability;

  double operator()(std::size_t m, std::size_t n) const {
    if (m == 0) return 1.0;
    const double z = insert_probability ? insert_probability(m, n) : 0.5;
    if (!(z > 0.0 && z <= 1.0)) throw InvalidArgument("insert probability must lie in (0, 1]");
    return z;
  }
};

/// Sum of the acceptance/rejection and base-density terms of the history density.
inline double history_likelihood_logdensity(const LatentHistory& h) {
  double r = 0.0;
  for (std::size_t i = 0; i < h.g.size(); ++i) {
    const double lp = base_logpdf(h.g.point(i), h.psi);
    if (lp == -kInf) return -kInf;
    r += lp + (i < h.num_data ? log_phi(h.g.value(i)) : log_one_minus_phi(h.g.value(i)));
  }
  return r;
}

/// Joint log density of the history: GP prior at all revealed locations plus
/// the likelihood terms.
inline double history_logdensity(const LatentHistory& h) {
  const double lik = history_likelihood_logdensity(h);
  if (lik == -kInf) return -kInf;
  return h.g.log_prior_density() + lik;
}

/// log a for inserting one rejection whose function value is g_plus.
/// `corrupt` flips the sign of the (1 - Phi) factor; it exists so the joint
/// distribution test can demonstrate that it detects a wrong ratio.
inline double insert_log_ratio(std::size_t m, std::size_t n, double g_plus, const ZetaSchedule& zeta,
                               bool corrupt = false) {
  const double label = log_one_minus_phi(g_plus);
  return std::log1p(-zeta(m + 1, n)) + std::log(static_cast<double>(m + n)) + (corrupt ? -label : label) -
         std::log(zeta(m, n)) - std::log(static_cast<double>(m + 1));
}

/// log a for deleting one of m >= 1 rejections whose function value is g_minus.
inline double delete_log_ratio(std::size_t m, std::size_t n, double g_minus, const ZetaSchedule& zeta) {
  require(m >= 1, "nothing to delete");
  return std::log(zeta(m - 1, n)) + std::log(static_cast<double>(m)) - std::log1p(-zeta(m, n)) -
         std::log(static_cast<double>(m + n - 1)) - log_one_minus_phi(g_minus);
}

/// log a for changing the rejection count from m to m_hat in one block.
/// `changed_values` are the function values of the inserted (m_hat > m) or
/// removed (m_hat < m) rejections; log_q_forward / log_q_reverse are
/// log q(m_hat <- m) and log q(m <- m_hat).
inline double number_change_log_ratio(std::size_t m, std::size_t m_hat, std::size_t n,
                                      const std::vector<double>& changed_values, double log_q_forward,
                                      double log_q_reverse) {
  require(m != m_hat, "number move must change the count");
  const std::size_t delta = m_hat > m ? m_hat - m : m - m_hat;
  if (changed_values.size() != delta) throw DimensionMismatch("need one value per inserted or removed rejection");
  const auto lf = [](std::size_t k) { return std::lgamma(static_cast<double>(k) + 1.0); };
  double r = log_q_reverse - log_q_forward + lf(m) + lf(m_hat + n - 1) - lf(m_hat) - lf(m + n - 1);
  double label = 0.0;
  for (double g : changed_values) label += log_one_minus_phi(g);
  return m_hat > m ? r + label : r - label;
}

struct NumberMoveResult : StepResult {
  enum class Kind { none, insert, remove } kind = Kind::none;
};

/// Insert-or-delete move on the number of rejections.
inline NumberMoveResult step_number(LatentHistory& h, const ZetaSchedule& zeta, Rng& rng, bool corrupt = false) {
  NumberMoveResult r;
  const std::size_t m = h.M();
  const std::size_t n = h.N();
  if (uniform01(rng) < zeta(m, n)) {
    r.kind = NumberMoveResult::Kind::insert;
    Point x = base_sample(h.psi, rng);
    const GpRealization::Prediction p = h.g.predict(x);
    const double g_plus = p.mean + std::sqrt(p.variance) * standard_normal(rng);
    r.log_ratio = insert_log_ratio(m, n, g_plus, zeta, corrupt);
    if (std::log(uniform01(rng)) < r.log_ratio) {
      h.g.append(x, g_plus, p);
      r.accepted = true;
    }
  } else if (m > 0) {
    r.kind = NumberMoveResult::Kind::remove;
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    const std::size_t k = pick(rng);
    r.log_ratio = delete_log_ratio(m, n, h.g_rejection(k), zeta);
    if (std::log(uniform01(rng)) < r.log_ratio) {
      h.g.remove(n + k);
      r.accepted = true;
    }
  }
  return r;
}

/// Location ratio for one rejection moved from x to x_hat.
inline double location_log_ratio(const Point& x, double g_x, const Point& x_hat, double g_hat, const BaseHyper& psi) {
  const double lp_hat = base_logpdf(x_hat, psi);
  if (lp_hat == -kInf) return -kInf;
  return lp_hat + log_one_minus_phi(g_hat) - base_logpdf(x, psi) - log_one_minus_phi(g_x);
}

/// Random-walk update of every rejection location, one at a time. The
/// rejections present at entry are each visited once; an accepted move
/// re-reveals the rejection at the end of the list.
inline std::size_t step_locations(LatentHistory& h, const std::vector<double>& walk_scales, Rng& rng) {
  require(walk_scales.size() == dimension(h.psi), "one walk scale per dimension");
  const std::size_t n = h.N();
  std::size_t accepted = 0;
  for (std::size_t m = h.M(); m-- > 0;) {
    const Point& x = h.rejection(m);
    Point x_hat = x;
    for (Eigen::Index d = 0; d < x_hat.size(); ++d) {
      x_hat[d] += walk_scales[static_cast<std::size_t>(d)] * standard_normal(rng);
    }
    if (base_logpdf(x_hat, h.psi) == -kInf) continue;
    const GpRealization::Prediction p = h.g.predict(x_hat);
    const double g_hat = p.mean + std::sqrt(p.variance) * standard_normal(rng);
    const double log_a = location_log_ratio(x, h.g_rejection(m), x_hat, g_hat, h.psi);
    if (std::log(uniform01(rng)) < log_a) {
      h.g.remove(n + m);
      h.g.append(x_hat, g_hat);
      ++accepted;
    }
  }
  return accepted;
}

/// Potential energy of the function values in whitened coordinates,
/// U(v) = |v|^2/2 - sum_data log Phi(g) - sum_rejections log(1 - Phi(g)),
/// with g = m + L v. Writes the gradient v - L^T d when `gradient` is given.
inline double history_potential(const LatentHistory& h, const Eigen::VectorXd& v, Eigen::VectorXd* gradient = nullptr) {
  const Eigen::VectorXd g = h.g.unwhiten(v);
  double u = 0.5 * v.squaredNorm();
  Eigen::VectorXd d(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (static_cast<std::size_t>(i) < h.num_data) {
      u -= log_phi(g[i]);
      d[i] = log_phi_grad(g[i]);
    } else {
      u -= log_one_minus_phi(g[i]);
      d[i] = log_one_minus_phi_grad(g[i]);
    }
  }
  if (gradient) *gradient = v - h.g.lower_transpose_times(d);
  return u;
}

struct HmcTrajectory {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  double initial_energy = 0.0;
  double final_energy = kInf;
};

/// Leapfrog integration of the whitened dynamics from (v0, p0).
inline HmcTrajectory hmc_trajectory(const LatentHistory& h, const Eigen::VectorXd& v0, const Eigen::VectorXd& p0,
                                    double step_size, int n_leapfrog) {
  HmcTrajectory t{v0, p0, 0.0, kInf};
  Eigen::VectorXd grad;
  t.initial_energy = history_potential(h, v0, &grad) + 0.5 * p0.squaredNorm();
  t.momentum -= 0.5 * step_size * grad;
  double u = 0.0;
  for (int s = 0; s < n_leapfrog; ++s) {
    t.position += step_size * t.momentum;
    u = history_potential(h, t.position, &grad);
    if (!std::isfinite(u) || !grad.allFinite()) return t;
    t.momentum -= (s + 1 < n_leapfrog ? 1.0 : 0.5) * step_size * grad;
  }
  t.final_energy = u + 0.5 * t.momentum.squaredNorm();
  return t;
}

/// Hamiltonian Monte Carlo on the function values at data and rejections.
inline StepResult step_function_hmc(LatentHistory& h, double step_size, int n_leapfrog, Rng& rng) {
  require(step_size > 0.0, "HMC step size must be positive");
  require(n_leapfrog >= 1, "HMC needs at least one leapfrog step");
  StepResult r;
  const Eigen::VectorXd v0 = h.g.whitened();
  const Eigen::VectorXd p0 = standard_normal_vector(static_cast<std::size_t>(v0.size()), rng);
  const HmcTrajectory t = hmc_trajectory(h, v0, p0, step_size, n_leapfrog);
  r.log_ratio = std::isfinite(t.final_energy) ? t.initial_energy - t.final_energy : -kInf;
  if (std::log(uniform01(rng)) < r.log_ratio) {
    h.g.set_whitened(t.position);
    r.accepted = true;
  }
  return r;
}

/// Step multiplier for the whitened HMC move. The potential's Hessian is
/// I + L^T D L with D <= 1/4, and n * amplitude^2 bounds the largest
/// eigenvalue of K = L L^T, so a fixed base step stays stable as the
/// amplitude and the number of rejections drift. It depends only on state
/// the move leaves fixed.
inline double hmc_step_multiplier(const LatentHistory& h) {
  const double a = h.theta().amplitude;
  return 1.0 / std::sqrt(1.0 + 0.25 * static_cast<double>(h.g.size()) * a * a);
}

/// Metropolis-Hastings move on (theta, psi) with locations and function values fixed.
inline StepResult step_hyper_history(LatentHistory& h, const HyperProposalScales& scales, const HyperPrior& priors,
                                     Rng& rng) {
  StepResult r;
  auto [theta_hat, psi_hat] = propose_hyper(h.theta(), h.psi, priors, scales, rng);
  const double prior_hat = hyperprior_logpdf(theta_hat, psi_hat, priors);
  double log_a = prior_hat - hyperprior_logpdf(h.theta(), h.psi, priors) +
                 hyper_proposal_logdensity(h.theta(), h.psi, theta_hat, psi_hat, priors, scales) -
                 hyper_proposal_logdensity(theta_hat, psi_hat, h.theta(), h.psi, priors, scales);
  for (std::size_t i = 0; std::isfinite(log_a) && i < h.g.size(); ++i) {
    log_a += base_logpdf(h.g.point(i), psi_hat) - base_logpdf(h.g.point(i), h.psi);
  }
  const double u = uniform01(rng);
  if (!std::isfinite(log_a)) return r;
  std::optional<GpRealization> g_hat;
  try {
    g_hat.emplace(h.g.with_hyper(theta_hat));
  } catch (const IllConditioned&) {
    return r;
  }
  log_a += g_hat->log_prior_density() - h.g.log_prior_density();
  r.log_ratio = log_a;
  if (std::log(u) < log_a) {
    h.g = std::move(*g_hat);
    h.psi = std::move(psi_hat);
    r.accepted = true;
  }
  return r;
}

/// Samples from the current function's density by continuing the rejection
/// process from the history; the history itself is not modified.
inline PointList predictive_sample_history(const LatentHistory& h, std::size_t n_samples, Rng& rng,
                                           const RejectionOptions& options = {}) {
  if (n_samples == 0) return {};
  GpRealization g = h.g;
  detail::RejectionRun run;
  if (!detail::run_rejection(g, n_samples, h.psi, options.max_proposals, rng, run)) {
    throw BudgetExceeded("predictive sampling exhausted its proposal budget",
                         detail::make_trace(g, h.g.size(), std::move(run)));
  }
  return std::move(run.accepted);
}

/// Location walk scale per dimension: 0.1 times the data standard deviation,
/// falling back to the base density's scale when the data do not vary.
inline std::vector<double> default_walk_scales(const PointList& data, const BaseHyper& psi) {
  const std::size_t dim = dimension(psi);
  std::vector<double> out(dim, 0.1);
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const Point& x : data) mean += x[static_cast<Eigen::Index>(d)];
    mean /= static_cast<double>(data.size());
    double ss = 0.0;
    for (const Point& x : data) ss += std::pow(x[static_cast<Eigen::Index>(d)] - mean, 2);
    double sd = data.size() > 1 ? std::sqrt(ss / static_cast<double>(data.size() - 1)) : 0.0;
    if (!(sd > 0.0)) {
      sd = std::visit(
          [d](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, BoxBase>) {
              return (b.upper[static_cast<Eigen::Index>(d)] - b.lower[static_cast<Eigen::Index>(d)]) / std::sqrt(12.0);
            } else {
              return b.stddev[static_cast<Eigen::Index>(d)];
            }
          },
          psi);
    }
    out[d] = 0.1 * sd;
  }
  return out;
}

struct HistorySweepConfig {
  bool number_move = true;
  /// Insert/delete attempts per sweep.
  int number_moves = 1;
  bool location_move = true;
  bool function_move = true;
  bool hyper_move = true;
  ZetaSchedule zeta;
  /// Empty means default_walk_scales of the data.
  std::vector<double> walk_scales;
  /// Base step; the sweep multiplies it by hmc_step_multiplier when scale_hmc_step is set.
  double hmc_step_size = 0.5;
  bool scale_hmc_step = true;
  int n_leapfrog = 10;
  HyperProposalScales hyper_scales;
  /// Deliberately wrong insertion ratio; only for checking the joint distribution test.
  bool corrupt_insert_ratio = false;
};

struct HistoryDiagnostics {
  MoveCounter insert;
  MoveCounter remove;
  MoveCounter location;
  MoveCounter hmc;
  MoveCounter hyper;
  /// Acceptance probability of the most recent HMC proposal, for step-size adaptation.
  double last_hmc_accept_prob = 0.0;
};

/// One iteration: number move, location moves, HMC, then hyperparameters.
inline void sweep(LatentHistory& h, const HistorySweepConfig& config, const HyperPrior& priors,
                  HistoryDiagnostics& diag, Rng& rng) {
  for (int k = 0; config.number_move && k < config.number_moves; ++k) {
    const NumberMoveResult r = step_number(h, config.zeta, rng, config.corrupt_insert_ratio);
    if (r.kind == NumberMoveResult::Kind::insert) diag.insert.record(r.accepted);
    if (r.kind == NumberMoveResult::Kind::remove) diag.remove.record(r.accepted);
  }
  if (config.location_move && h.M() > 0) {
    const std::vector<double> scales =
        config.walk_scales.empty() ? default_walk_scales(h.data(), h.psi) : config.walk_scales;
    const std::size_t m = h.M();
    const std::size_t a = step_locations(h, scales, rng);
    diag.location.proposed += m;
    diag.location.accepted += a;
  }
  if (config.function_move) {
    const double step = config.scale_hmc_step ? config.hmc_step_size * hmc_step_multiplier(h) : config.hmc_step_size;
    const StepResult r = step_function_hmc(h, step, config.n_leapfrog, rng);
    diag.hmc.record(r.accepted);
    diag.last_hmc_accept_prob = std::isfinite(r.log_ratio) ? std::min(1.0, std::exp(r.log_ratio)) : 0.0;
  }
  if (config.hyper_move) diag.hyper.record(step_hyper_history(h, config.hyper_scales, priors, rng).accepted);
}

}  // namespace gpds
