#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "gpds/chain.hpp"
#include "gpds/parallel.hpp"
#include "gpds/stats.hpp"

namespace gpds {

/// Settings shared by the posterior chain (numerator) and the augmented
/// chains (denominators).
struct DensityConfig {
  SamplerKind sampler = SamplerKind::latent_history;
  GpHyper theta0;
  BaseHyper psi0 = unit_box(1);
  HyperPrior priors;
  HistorySweepConfig history;
  ExchangeSweepConfig exchange;
  StepAdaptation adaptation;
  /// Per-point augmented chains.
  ChainSchedule schedule{2500, 500, 1};
  /// The posterior chain that supplies the numerators.
  ChainSchedule posterior_schedule{2500, 500, 1};
  RejectionOptions rejection;
  /// Start each augmented chain from a posterior-chain state instead of from
  /// an empty history.
  bool warm_start = true;
};

/// Posterior states handed to the augmented chains as starting points.
struct WarmStarts {
  std::vector<LatentHistory> history;
  std::vector<ExchangeState> exchange;
};

/// One posterior draw's contribution to the numerator at x: the base log
/// density at x and the function at x and at a predictive draw x'.
struct NumeratorTerm {
  double base_logpdf_x = 0.0;
  double g_x = 0.0;
  double g_x_prime = 0.0;

  /// pi(x|psi) min(1, Phi(g(x)) / Phi(g(x'))).
  double value() const {
    if (base_logpdf_x == -kInf) return 0.0;
    return std::exp(base_logpdf_x + std::min(0.0, log_phi(g_x) - log_phi(g_x_prime)));
  }
};

inline McEstimate estimate_numerator(const std::vector<NumeratorTerm>& draws) {
  require(!draws.empty(), "numerator needs at least one posterior draw");
  std::vector<double> v;
  v.reserve(draws.size());
  for (const NumeratorTerm& t : draws) v.push_back(t.value());
  return batch_means_estimate(v);
}

/// Collects numerator terms at a fixed set of points from successive
/// posterior states.
class NumeratorAccumulator {
 public:
  explicit NumeratorAccumulator(PointList points) : points_(std::move(points)), terms_(points_.size()) {}

  const PointList& points() const { return points_; }
  std::size_t draws() const { return terms_.empty() ? 0 : terms_.front().size(); }

  /// Draws x' from the current function's density, then g at every point
  /// given the state and x'. Returns x', which is itself a predictive sample.
  Point add(const GpRealization& g, const BaseHyper& psi, Rng& rng, const RejectionOptions& options = {}) {
    GpRealization h = g;
    detail::RejectionRun run;
    if (!detail::run_rejection(h, 1, psi, options.max_proposals, rng, run)) {
      throw BudgetExceeded("predictive draw exhausted its proposal budget", detail::make_trace(h, g.size(), std::move(run)));
    }
    const double g_prime = run.accepted_values.front();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const GpRealization::Prediction p = h.predict(points_[i]);
      const double gx = p.mean + std::sqrt(p.variance) * standard_normal(rng);
      terms_[i].push_back(NumeratorTerm{base_logpdf(points_[i], psi), gx, g_prime}.value());
    }
    return run.accepted.front();
  }

  McEstimate estimate(std::size_t i) const { return batch_means_estimate(terms_.at(i)); }

 private:
  PointList points_;
  std::vector<std::vector<double>> terms_;
};

/// Denominator at x: a chain on the data augmented with x, averaging
/// min(1, Phi(g(x')) / Phi(g(x))) with x' drawn from the base density.
inline McEstimate estimate_denominator(const Point& x, const PointList& data, DensityConfig config, Rng& rng,
                                      const LatentHistory* history_start = nullptr,
                                      const ExchangeState* exchange_start = nullptr) {
  PointList augmented = data;
  augmented.push_back(x);
  const std::size_t ix = data.size();
  std::vector<double> terms;
  terms.reserve(config.schedule.retained());
  auto record = [&](const GpRealization& g, const BaseHyper& psi) {
    const Point xp = base_sample(psi, rng);
    const GpRealization::Prediction p = g.predict(xp);
    const double gp = p.mean + std::sqrt(p.variance) * standard_normal(rng);
    terms.push_back(std::exp(std::min(0.0, log_phi(gp) - log_phi(g.value(ix)))));
  };
  if (config.sampler == SamplerKind::latent_history) {
    LatentHistory h = history_start ? with_extra_datum(*history_start, x, rng)
                                    : LatentHistory::initialize(augmented, config.theta0, config.psi0, rng);
    HistoryDiagnostics diag;
    run_history_chain(h, config.history, config.priors, config.schedule, config.adaptation, diag, rng,
                      [&](const LatentHistory& s, std::size_t) { record(s.g, s.psi); });
  } else {
    ExchangeState s = exchange_start
                          ? ExchangeState::initialize(augmented, exchange_start->theta(), exchange_start->psi, rng)
                          : ExchangeState::initialize(augmented, config.theta0, config.psi0, rng);
    run_exchange_chain(s, config.exchange, config.priors, config.schedule, rng,
                       [&](const ExchangeState& st, std::size_t) { record(st.g, st.psi); });
  }
  require(!terms.empty(), "denominator chain retained no samples");
  return batch_means_estimate(terms);
}

struct DensityEstimate {
  Point x;
  McEstimate numerator;
  McEstimate denominator;
  double ratio = 0.0;
  /// Delta-method combination of the two standard errors.
  double ratio_std_error = 0.0;
};

inline DensityEstimate combine_estimates(Point x, const McEstimate& num, const McEstimate& den) {
  DensityEstimate e{std::move(x), num, den, 0.0, 0.0};
  if (num.mean == 0.0) return e;
  e.ratio = num.mean / den.mean;
  e.ratio_std_error = std::abs(e.ratio) * std::hypot(num.std_error / num.mean, den.std_error / den.mean);
  return e;
}

struct DensityGrid {
  std::vector<DensityEstimate> estimates;
  /// Trapezoid integral of the ratio estimates, for 1-D grids with two or more points.
  std::optional<double> integral;
};

inline std::optional<double> trapezoid_integral(const std::vector<DensityEstimate>& estimates) {
  if (estimates.size() < 2 || estimates.front().x.size() != 1) return std::nullopt;
  std::vector<std::size_t> order(estimates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return estimates[a].x[0] < estimates[b].x[0]; });
  double s = 0.0;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const DensityEstimate& lo = estimates[order[k - 1]];
    const DensityEstimate& hi = estimates[order[k]];
    s += 0.5 * (hi.x[0] - lo.x[0]) * (lo.ratio + hi.ratio);
  }
  return s;
}

/// Numerator terms at every grid point from one posterior chain on the data.
/// Predictive samples x' drawn along the way are appended to `predictive`
/// when it is given.
/// When `starts` is given, `n_starts` states evenly spaced over the retained
/// iterations are copied into it.
inline std::vector<McEstimate> posterior_numerators(const PointList& grid, const PointList& data, DensityConfig config,
                                                    Rng& rng, PointList* predictive = nullptr,
                                                    WarmStarts* starts = nullptr, std::size_t n_starts = 0) {
  NumeratorAccumulator acc(grid);
  const std::size_t retained = config.posterior_schedule.retained();
  std::size_t seen = 0;
  // Snapshot k is taken at retained draw floor((k + 1/2) R / n).
  auto wanted = [&](std::size_t k) { return (2 * k + 1) * retained / (2 * n_starts); };
  auto record = [&](const GpRealization& g, const BaseHyper& psi) {
    Point xp = acc.add(g, psi, rng, config.rejection);
    if (predictive) predictive->push_back(std::move(xp));
  };
  if (config.sampler == SamplerKind::latent_history) {
    LatentHistory h = LatentHistory::initialize(data, config.theta0, config.psi0, rng);
    HistoryDiagnostics diag;
    run_history_chain(h, config.history, config.priors, config.posterior_schedule, config.adaptation, diag, rng,
                      [&](const LatentHistory& s, std::size_t) {
                        record(s.g, s.psi);
                        while (starts && starts->history.size() < n_starts && wanted(starts->history.size()) == seen) {
                          starts->history.push_back(s);
                        }
                        ++seen;
                      });
  } else {
    ExchangeState s = ExchangeState::initialize(data, config.theta0, config.psi0, rng);
    run_exchange_chain(s, config.exchange, config.priors, config.posterior_schedule, rng,
                       [&](const ExchangeState& st, std::size_t) {
                         record(st.g, st.psi);
                         while (starts && starts->exchange.size() < n_starts &&
                                wanted(starts->exchange.size()) == seen) {
                           starts->exchange.push_back(st);
                         }
                         ++seen;
                       });
  }
  require(acc.draws() > 0, "posterior chain retained no samples");
  std::vector<McEstimate> out;
  for (std::size_t i = 0; i < grid.size(); ++i) out.push_back(acc.estimate(i));
  return out;
}

/// Predictive density at every grid point: one posterior chain for all the
/// numerators and one augmented chain per point for the denominators. Every
/// chain has its own generator derived from `seed`, so the result does not
/// depend on `workers`.
inline DensityGrid density_grid_seeded(const PointList& grid, const PointList& data, const DensityConfig& config,
                                       std::uint64_t seed, std::size_t workers = 1,
                                       PointList* predictive = nullptr) {
  require(!grid.empty(), "density grid needs at least one point");
  std::vector<McEstimate> nums;
  std::vector<McEstimate> dens(grid.size());
  WarmStarts starts;
  auto numerators = [&] {
    Rng r(derive_seed(seed, 0));
    nums = posterior_numerators(grid, data, config, r, predictive, config.warm_start ? &starts : nullptr, grid.size());
  };
  auto denominator = [&](std::size_t i) {
    Rng r(derive_seed(seed, i + 1));
    const Point& x = grid[i];
    if (base_logpdf(x, config.psi0) == -kInf && std::holds_alternative<BoxBase>(config.psi0)) {
      // Outside a fixed box the predictive density is zero and the augmented chain is undefined.
      dens[i] = McEstimate{1.0, 0.0, 0};
      return;
    }
    const LatentHistory* hs = i < starts.history.size() ? &starts.history[i] : nullptr;
    const ExchangeState* es = i < starts.exchange.size() ? &starts.exchange[i] : nullptr;
    dens[i] = estimate_denominator(x, data, config, r, hs, es);
  };
  if (config.warm_start) {
    // The augmented chains start where the posterior chain has been, so it runs first.
    numerators();
    parallel_for(grid.size(), workers, denominator);
  } else {
    parallel_for(grid.size() + 1, workers, [&](std::size_t task) {
      if (task == 0) {
        numerators();
      } else {
        denominator(task - 1);
      }
    });
  }
  DensityGrid out;
  for (std::size_t i = 0; i < grid.size(); ++i) out.estimates.push_back(combine_estimates(grid[i], nums[i], dens[i]));
  out.integral = trapezoid_integral(out.estimates);
  return out;
}

inline DensityGrid density_grid(const PointList& grid, const PointList& data, const DensityConfig& config, Rng& rng) {
  return density_grid_seeded(grid, data, config, rng());
}

}  // namespace gpds
