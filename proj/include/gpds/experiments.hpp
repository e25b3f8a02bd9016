#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gpds/chain.hpp"
#include "gpds/parallel.hpp"
#include "gpds/stats.hpp"

namespace gpds {

// ---------------------------------------------------------------------------
// Synthetic data

/// Mixture of an exponential and a normal density on [0, 1].
inline double f1_density(double x) {
  if (x < 0.0 || x > 1.0) return 0.0;
  return 0.75 * 3.0 * std::exp(-3.0 * x) +
         0.25 * std::sqrt(32.0 / std::numbers::pi) * std::exp(-32.0 * (x - 0.75) * (x - 0.75));
}

inline double f1_sample(Rng& rng) {
  // f1 peaks at x = 0 with value 2.25 (plus a negligible Gaussian tail).
  constexpr double bound = 2.26;
  while (true) {
    const double x = uniform01(rng);
    if (uniform01(rng) * bound < f1_density(x)) return x;
  }
}

inline constexpr double kRingRadius = 1.5;
inline constexpr double kRingNoise = 0.25;

/// Gaussians with standard deviation 1/4 whose means lie uniformly on a ring of radius 3/2.
inline double f2_density(const Point& x) {
  const double s2 = kRingNoise * kRingNoise;
  const double r = x.norm();
  // Averaging the isotropic Gaussian over the ring angle gives a Bessel I0 term;
  // the scaled form keeps it finite far from the origin.
  const double z = r * kRingRadius / s2;
  const double i0_scaled = std::cyl_bessel_i(0.0, std::min(z, 700.0)) * std::exp(-std::min(z, 700.0));
  return std::exp(-(r - kRingRadius) * (r - kRingRadius) / (2.0 * s2)) * i0_scaled / (2.0 * std::numbers::pi * s2);
}

inline Point f2_sample(Rng& rng) {
  const double angle = std::numbers::pi * (2.0 * uniform01(rng) - 1.0);
  Point x(2);
  x[0] = kRingRadius * std::cos(angle) + kRingNoise * standard_normal(rng);
  x[1] = kRingRadius * std::sin(angle) + kRingNoise * standard_normal(rng);
  return x;
}

/// n i.i.d. draws from "f1" or "f2".
inline PointList gen_synthetic(const std::string& name, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "need at least one synthetic draw");
  Rng rng(seed);
  PointList out;
  out.reserve(n);
  if (name == "f1") {
    for (std::size_t i = 0; i < n; ++i) out.push_back(Point::Constant(1, f1_sample(rng)));
  } else if (name == "f2") {
    for (std::size_t i = 0; i < n; ++i) out.push_back(f2_sample(rng));
  } else {
    throw InvalidArgument("unknown synthetic dataset '" + name + "' (expected f1 or f2)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter draws

/// Draws theta from the hyperprior; the template supplies the dimension,
/// mean and (if pinned) the presence of a pin.
inline GpHyper sample_gp_hyper(const GpHyper& templ, const HyperPrior& priors, Rng& rng) {
  GpHyper t = templ;
  t.amplitude = std::exp(priors.log_amplitude.location + priors.log_amplitude.scale * standard_normal(rng));
  if (priors.isotropic) {
    const double l = std::exp(priors.log_lengthscale.location + priors.log_lengthscale.scale * standard_normal(rng));
    for (double& v : t.lengthscales) v = l;
  } else {
    for (double& v : t.lengthscales) {
      v = std::exp(priors.log_lengthscale.location + priors.log_lengthscale.scale * standard_normal(rng));
    }
  }
  if (t.pin_location) {
    require(priors.pin_region.has_value(), "pinned GP needs a pin prior region");
    t.pin_location = base_sample(BaseHyper{*priors.pin_region}, rng);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Joint-distribution ("getting it right") test

struct GewekeConfig {
  SamplerKind sampler = SamplerKind::latent_history;
  std::size_t n_data = 3;
  /// Draws on each side.
  std::size_t samples = 5000;
  /// Successive-conditional chains, each started from an exact forward draw.
  /// With chains == samples every recorded state comes from its own chain.
  std::size_t chains = 5000;
  /// Resample-and-update cycles per recorded state.
  std::size_t thin = 2;
  /// MCMC sweeps per cycle; states are recorded right after the sweeps.
  std::size_t sweeps = 5;
  GpHyper theta_template;
  BaseHyper psi = unit_box(1);
  HyperPrior priors{{0.0, 0.25}, {-1.0, 0.5}, false, {}, {}, std::nullopt};
  HistorySweepConfig history;
  ExchangeSweepConfig exchange;
  RejectionOptions rejection{20000, false};
};

struct GewekeStatistic {
  std::string name;
  double ks_statistic = 0.0;
  double p_value = 1.0;
  bool pass = true;
};

struct GewekeReport {
  SamplerKind sampler = SamplerKind::latent_history;
  std::size_t forward_count = 0;
  std::size_t successive_count = 0;
  std::vector<GewekeStatistic> statistics;
  bool pass = true;
};

inline constexpr double kGewekeAlpha = 0.01;

namespace detail {

struct GewekeSample {
  double rejections = 0.0;
  double mean_g_data = 0.0;
  double data_mean = 0.0;
  double log_amplitude = 0.0;
};

inline double mean_first_coordinate(const PointList& pts) {
  double s = 0.0;
  for (const Point& p : pts) s += p[0];
  return s / static_cast<double>(pts.size());
}

inline double mean_of(const std::vector<double>& v) { return sample_mean(v); }

inline GenerativeTrace geweke_forward(const GewekeConfig& c, Rng& rng, GpHyper& theta) {
  theta = sample_gp_hyper(c.theta_template, c.priors, rng);
  return draw_prior_dataset(c.n_data, theta, c.psi, rng, c.rejection);
}

inline GewekeSample trace_sample(const GenerativeTrace& t, const GpHyper& theta) {
  GewekeSample s;
  s.log_amplitude = std::log(theta.amplitude);
  s.rejections = static_cast<double>(t.rejection_count());
  double g = 0.0;
  for (std::size_t i = 0; i < t.accept_flags.size(); ++i) {
    if (t.accept_flags[i]) g += t.cond.values[t.first_proposal + i];
  }
  s.mean_g_data = g / static_cast<double>(t.accepted.size());
  s.data_mean = mean_first_coordinate(t.accepted);
  return s;
}

// Splits the revealed proposals of a run into data (accepted) and rejections.
inline LatentHistory history_from_run(const GpRealization& g, std::size_t first, const std::vector<bool>& flags,
                                      const BaseHyper& psi) {
  PointList data, rej;
  std::vector<double> gd, gr;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    (flags[i] ? data : rej).push_back(g.point(first + i));
    (flags[i] ? gd : gr).push_back(g.value(first + i));
  }
  return LatentHistory::from_values(data, gd, rej, gr, g.hyper(), psi);
}

// Exchange state whose first entries are the accepted points of the run.
inline ExchangeState exchange_from_run(const GpRealization& g, std::size_t first, const std::vector<bool>& flags,
                                       const BaseHyper& psi) {
  ConditioningSet cond;
  PointList data;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) {
      cond.push_back(g.point(first + i), g.value(first + i));
      data.push_back(g.point(first + i));
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i >= first && flags[i - first]) continue;
    cond.push_back(g.point(i), g.value(i));
  }
  const std::size_t n = data.size();
  return ExchangeState{std::move(data), n, GpRealization(g.hyper(), cond), psi, {}};
}

}  // namespace detail

/// Compares forward simulation of (theta, function, data) with a
/// successive-conditional simulator that alternates MCMC updates with
/// resampling the data given the current function. Chains start from exact
/// forward draws, so every recorded state should follow the forward law. Each statistic must pass
/// a two-sample KS test at the 0.01 level.
inline GewekeReport run_geweke(const GewekeConfig& c, std::uint64_t seed, std::size_t workers = 1) {
  require(c.samples >= 2, "insufficient samples for the joint-distribution test");
  require(c.chains >= 1 && c.thin >= 1 && c.sweeps >= 1, "chains, thinning and sweeps must be positive");
  require(c.n_data >= 1, "need at least one datum");
  const std::size_t per_chain = (c.samples + c.chains - 1) / c.chains;

  std::vector<detail::GewekeSample> forward(c.samples);
  {
    Rng rng(derive_seed(seed, 0));
    GpHyper theta;
    for (auto& f : forward) {
      const GenerativeTrace t = detail::geweke_forward(c, rng, theta);
      f = detail::trace_sample(t, theta);
    }
  }

  std::vector<std::vector<detail::GewekeSample>> chains(c.chains);
  parallel_for(c.chains, workers, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k + 1));
    GpHyper theta;
    const GenerativeTrace t = detail::geweke_forward(c, rng, theta);
    const GpRealization g0(theta, t.cond);
    auto& out = chains[k];
    if (c.sampler == SamplerKind::latent_history) {
      LatentHistory h = detail::history_from_run(g0, t.first_proposal, t.accept_flags, c.psi);
      HistoryDiagnostics diag;
      while (out.size() < per_chain) {
        for (std::size_t cycle = 0; cycle < c.thin; ++cycle) {
          if (cycle > 0 || !out.empty()) {
            GpRealization g = h.g;
            const std::size_t first = g.size();
            detail::RejectionRun run;
            if (!detail::run_rejection(g, c.n_data, h.psi, c.rejection.max_proposals, rng, run)) {
              throw BudgetExceeded("data resampling exhausted its budget", detail::make_trace(g, first, std::move(run)));
            }
            h = detail::history_from_run(g, first, run.flags, h.psi);
          }
          for (std::size_t s = 0; s < c.sweeps; ++s) sweep(h, c.history, c.priors, diag, rng);
        }
        const std::vector<double> gd = h.g_data();
        out.push_back({static_cast<double>(h.M()), detail::mean_of(gd), detail::mean_first_coordinate(h.data()),
                       std::log(h.theta().amplitude)});
      }
    } else {
      ExchangeState s = detail::exchange_from_run(g0, t.first_proposal, t.accept_flags, c.psi);
      while (out.size() < per_chain) {
        for (std::size_t cycle = 0; cycle < c.thin; ++cycle) {
          if (cycle > 0 || !out.empty()) {
            GpRealization g = s.g;
            const std::size_t first = g.size();
            detail::RejectionRun run;
            if (!detail::run_rejection(g, c.n_data, s.psi, c.rejection.max_proposals, rng, run)) {
              throw BudgetExceeded("data resampling exhausted its budget", detail::make_trace(g, first, std::move(run)));
            }
            s = detail::exchange_from_run(g, first, run.flags, s.psi);
          }
          for (std::size_t i = 0; i < c.sweeps; ++i) exchange_sweep(s, c.exchange, c.priors, rng);
        }
        out.push_back({0.0, detail::mean_of(s.g_data()), detail::mean_first_coordinate(s.data), std::log(s.theta().amplitude)});
      }
    }
  });

  std::vector<detail::GewekeSample> successive;
  for (const auto& ch : chains) successive.insert(successive.end(), ch.begin(), ch.end());

  GewekeReport report;
  report.sampler = c.sampler;
  report.forward_count = forward.size();
  report.successive_count = successive.size();
  auto add = [&](const std::string& name, double detail::GewekeSample::*field) {
    std::vector<double> a, b;
    for (const auto& f : forward) a.push_back(f.*field);
    for (const auto& f : successive) b.push_back(f.*field);
    const KsResult ks = ks_two_sample(a, b);
    report.statistics.push_back({name, ks.statistic, ks.p_value, ks.p_value > kGewekeAlpha});
    report.pass = report.pass && ks.p_value > kGewekeAlpha;
  };
  if (c.sampler == SamplerKind::latent_history) add("num_rejections", &detail::GewekeSample::rejections);
  add("mean_g_data", &detail::GewekeSample::mean_g_data);
  add("data_mean", &detail::GewekeSample::data_mean);
  add("log_amplitude", &detail::GewekeSample::log_amplitude);
  return report;
}

}  // namespace gpds
