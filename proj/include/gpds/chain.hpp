#pragma once

#include <algorithm>
#include <cmath>

#include "gpds/exchange_sampler.hpp"
#include "gpds/latent_history.hpp"

namespace gpds {

enum class SamplerKind { latent_history, exchange };

/// Iteration counts of one chain. Iterations before `burn_in` are discarded
/// and every `thin`-th iteration after that is retained.
struct ChainSchedule {
  std::size_t total = 5000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;

  void validate() const {
    require(thin >= 1, "thinning must be at least 1");
    require(burn_in < total || (total == 0 && burn_in == 0), "burn-in must be shorter than the run");
  }
  std::size_t retained() const { return total == 0 ? 0 : (total - burn_in) / thin; }
  bool keeps(std::size_t iteration) const {
    return iteration >= burn_in && (iteration - burn_in + 1) % thin == 0;
  }
};

/// Multiplicative HMC step-size adaptation toward a target acceptance
/// probability, applied only during burn-in.
struct StepAdaptation {
  bool enabled = true;
  double target = 0.8;
  double rate = 0.05;
  double min_step = 1e-4;
  double max_step = 20.0;

  double update(double step, double accept_prob) const {
    return std::clamp(step * std::exp(rate * (accept_prob - target)), min_step, max_step);
  }
};

/// Runs the latent-history sampler, calling observer(h, iteration) on every
/// retained iteration. The HMC step size in `config` is adapted in place
/// during burn-in and frozen afterwards.
template <class Observer>
void run_history_chain(LatentHistory& h, HistorySweepConfig& config, const HyperPrior& priors,
                       const ChainSchedule& schedule, const StepAdaptation& adaptation, HistoryDiagnostics& diag,
                       Rng& rng, Observer&& observer) {
  schedule.validate();
  for (std::size_t it = 0; it < schedule.total; ++it) {
    sweep(h, config, priors, diag, rng);
    if (it < schedule.burn_in && adaptation.enabled && config.function_move) {
      config.hmc_step_size = adaptation.update(config.hmc_step_size, diag.last_hmc_accept_prob);
    }
    if (schedule.keeps(it)) observer(static_cast<const LatentHistory&>(h), it);
  }
}

template <class Observer>
void run_exchange_chain(ExchangeState& s, const ExchangeSweepConfig& config, const HyperPrior& priors,
                        const ChainSchedule& schedule, Rng& rng, Observer&& observer) {
  schedule.validate();
  for (std::size_t it = 0; it < schedule.total; ++it) {
    exchange_sweep(s, config, priors, rng);
    if (schedule.keeps(it)) observer(static_cast<const ExchangeState&>(s), it);
  }
}

}  // namespace gpds
