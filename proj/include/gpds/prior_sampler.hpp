#pragma once

#include <string>
#include <vector>

#include "gpds/density_model.hpp"
#include "gpds/realization.hpp"

namespace gpds {

inline constexpr std::size_t kDefaultMaxProposals = 1'000'000;

struct RejectionOptions {
  std::size_t max_proposals = kDefaultMaxProposals;
  /// Keep the uniform variate of every proposal (for auditing accept flags).
  bool record_uniforms = false;
};

/// Record of one run of the retrospective rejection sampler.
struct GenerativeTrace {
  PointList accepted;
  /// Every revealed (location, value) pair, including any supplied up front.
  ConditioningSet cond;
  /// Index in `cond` of this run's first proposal; entries before it were given.
  std::size_t first_proposal = 0;
  /// accept_flags[i] belongs to cond entry first_proposal + i.
  std::vector<bool> accept_flags;
  std::vector<double> uniforms;
  std::size_t proposal_count = 0;

  std::size_t rejection_count() const { return proposal_count - accepted.size(); }
};

class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, GenerativeTrace partial) : Error(what), partial_(std::move(partial)) {}
  const GenerativeTrace& partial() const { return partial_; }

 private:
  GenerativeTrace partial_;
};

namespace detail {

struct RejectionRun {
  PointList accepted;
  std::vector<double> accepted_values;
  std::vector<bool> flags;
  std::vector<double> uniforms;
  std::size_t proposals = 0;
};

/// Sequential rejection sampling against the base density, revealing g at
/// each proposal (accepted or not) in `g`. Returns false when the proposal
/// budget runs out before `n` acceptances.
inline bool run_rejection(GpRealization& g, std::size_t n, const BaseHyper& psi, std::size_t max_proposals, Rng& rng,
                          RejectionRun& run, bool record_uniforms = false) {
  while (run.accepted.size() < n) {
    if (run.proposals >= max_proposals) return false;
    Point x = base_sample(psi, rng);
    const double gx = g.draw(x, rng);
    const double u = uniform01(rng);
    ++run.proposals;
    const bool accept = u < phi(gx);
    run.flags.push_back(accept);
    if (record_uniforms) run.uniforms.push_back(u);
    if (accept) {
      run.accepted.push_back(std::move(x));
      run.accepted_values.push_back(gx);
    }
  }
  return true;
}

inline GenerativeTrace make_trace(const GpRealization& g, std::size_t first, RejectionRun&& run) {
  GenerativeTrace t;
  t.accepted = std::move(run.accepted);
  t.cond = g.conditioning_set();
  t.first_proposal = first;
  t.accept_flags = std::move(run.flags);
  t.uniforms = std::move(run.uniforms);
  t.proposal_count = run.proposals;
  return t;
}

}  // namespace detail

/// Continues the generative process for a function already revealed at
/// `cond`, producing `n_more` further acceptances.
inline GenerativeTrace continue_sampler(const ConditioningSet& cond, std::size_t n_more, const GpHyper& theta,
                                        const BaseHyper& psi, Rng& rng, const RejectionOptions& options = {}) {
  validate(psi);
  if (dimension(psi) != theta.dimension()) throw DimensionMismatch("base and kernel dimensions differ");
  GpRealization g(theta, cond);
  const std::size_t first = g.size();
  detail::RejectionRun run;
  const bool ok = detail::run_rejection(g, n_more, psi, options.max_proposals, rng, run, options.record_uniforms);
  GenerativeTrace trace = detail::make_trace(g, first, std::move(run));
  if (!ok) {
    throw BudgetExceeded("proposal budget of " + std::to_string(options.max_proposals) + " exhausted after " +
                             std::to_string(trace.accepted.size()) + " acceptances",
                         std::move(trace));
  }
  return trace;
}

/// Draws n exact samples from a density drawn from the prior.
inline GenerativeTrace draw_prior_dataset(std::size_t n, const GpHyper& theta, const BaseHyper& psi, Rng& rng,
                                          const RejectionOptions& options = {}) {
  require(n >= 1, "need at least one sample");
  require(options.max_proposals >= n, "proposal budget smaller than sample count");
  return continue_sampler(ConditioningSet{}, n, theta, psi, rng, options);
}

}  // namespace gpds
