#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpds/experiments.hpp"
#include "gpds/io.hpp"
#include "gpds/predictive_density.hpp"

namespace gpds {

// ---------------------------------------------------------------------------
// Run configuration

/// Every recognised configuration key with its default value.
inline const KeyValues& config_defaults() {
  static const KeyValues defaults = {
      {"sampler", "latent-history"},
      {"dimension", "1"},
      {"iterations", "5000"},
      {"burn_in", "1000"},
      {"thin", "1"},
      {"amplitude", "1"},
      {"lengthscale", "1"},
      {"isotropic", "false"},
      {"gp_mean", "0"},
      {"pin", "false"},
      {"infer_kernel", "true"},
      {"log_amplitude_prior_mean", "1"},
      {"log_amplitude_prior_sd", "0.5"},
      {"log_lengthscale_prior_mean", "0.05"},
      {"log_lengthscale_prior_sd", "0.5"},
      {"base", "box"},
      {"box_lower", "0"},
      {"box_upper", "1"},
      {"base_mean", "0"},
      {"base_stddev", "1"},
      {"infer_base", "true"},
      {"hyper_step", "0.1"},
      {"hmc_steps", "10"},
      {"hmc_step_size", "0.5"},
      {"adapt_step_size", "true"},
      {"target_accept", "0.8"},
      {"walk_scale", ""},
      {"zeta", "0.5"},
      {"number_moves", "1"},
      {"crankshaft", "0.2"},
      {"extra_controls", "0"},
      {"max_proposals", "1000000"},
      {"predictive_per_iteration", "1"},
      {"grid_min", "0"},
      {"grid_max", "1"},
      {"grid_count", "50"},
      {"density_iterations", "2500"},
      {"density_burn_in", "500"},
      {"density_warm_start", "true"},
      {"prior_samples", "250"},
      {"geweke_n", "3"},
      {"geweke_samples", "5000"},
      {"geweke_chains", "5000"},
      {"geweke_thin", "2"},
      {"geweke_sweeps", "5"},
      {"geweke_log_amplitude_prior_mean", "0"},
      {"geweke_log_amplitude_prior_sd", "0.25"},
      {"geweke_log_lengthscale_prior_mean", "-1"},
      {"geweke_log_lengthscale_prior_sd", "0.5"},
      {"geweke_hmc_step_size", "0.2"},
      {"geweke_max_proposals", "20000"},
      {"geweke_corrupt_insert", "false"},
      {"seed", "1"},
  };
  return defaults;
}

/// Overlays user settings on the defaults; unknown keys are rejected.
inline KeyValues merge_config(const KeyValues& user) {
  KeyValues out = config_defaults();
  for (const auto& [k, v] : user) {
    if (!out.count(k)) throw ParseError("unknown configuration key '" + k + "'");
    out[k] = v;
  }
  return out;
}

/// Hash of the fully merged configuration, excluding the seed.
inline std::string config_hash(const KeyValues& merged) {
  std::string canon;
  for (const auto& [k, v] : merged) {
    if (k != "seed") canon += k + "=" + v + "\n";
  }
  return hex64(fnv1a64(canon));
}

struct RunConfig {
  KeyValues values;

  const std::string& text(const std::string& key) const { return values.at(key); }

  double real(const std::string& key) const { return parse_double(text(key), key); }

  std::uint64_t u64(const std::string& key) const {
    const std::string& t = text(key);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      if (!t.empty() && t.front() == '-') throw std::invalid_argument("negative");
      v = std::stoull(t, &used);
    } catch (const std::exception&) {
      throw ParseError(key + ": expected a non-negative integer, got '" + t + "'");
    }
    if (used != t.size()) throw ParseError(key + ": expected a non-negative integer, got '" + t + "'");
    return v;
  }

  std::size_t count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  bool flag(const std::string& key) const {
    const std::string& t = text(key);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ParseError(key + ": expected true or false, got '" + t + "'");
  }

  /// Comma-separated reals; a single value is repeated to `dim` entries.
  std::vector<double> reals(const std::string& key, std::size_t dim) const {
    std::vector<double> v;
    for (const std::string& f : split(text(key), ',')) v.push_back(parse_double(f, key));
    if (v.size() == 1) v.assign(dim, v.front());
    if (v.size() != dim) throw ParseError(key + ": expected 1 or " + std::to_string(dim) + " values");
    return v;
  }

  SamplerKind sampler() const {
    if (text("sampler") == "latent-history") return SamplerKind::latent_history;
    if (text("sampler") == "exchange") return SamplerKind::exchange;
    throw ParseError("sampler: expected latent-history or exchange");
  }

  ChainSchedule schedule() const {
    ChainSchedule s{count("iterations"), count("burn_in"), count("thin")};
    if (s.thin < 1 || !(s.burn_in < s.total || (s.total == 0 && s.burn_in == 0))) {
      throw ParseError("need burn_in < iterations (or both zero) and thin >= 1");
    }
    return s;
  }

  std::uint64_t seed() const { return u64("seed"); }
};

inline RunConfig load_run_config(const std::string& path) {
  const KeyValues user = path.empty() ? KeyValues{} : parse_key_values(read_file(path), path);
  return RunConfig{merge_config(user)};
}

/// GP, base density, priors and proposal scales for a model of dimension `dim`.
struct ModelSetup {
  GpHyper theta0;
  BaseHyper psi0;
  HyperPrior priors;
  HyperProposalScales scales;
};

inline Point to_point(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ModelSetup make_model(const RunConfig& c, std::size_t dim, const PointList& data = {}) {
  ModelSetup m;
  m.theta0.amplitude = c.real("amplitude");
  m.theta0.lengthscales = c.reals("lengthscale", dim);
  m.theta0.mean = c.real("gp_mean");
  m.priors.log_amplitude = {c.real("log_amplitude_prior_mean"), c.real("log_amplitude_prior_sd")};
  m.priors.log_lengthscale = {c.real("log_lengthscale_prior_mean"), c.real("log_lengthscale_prior_sd")};
  m.priors.isotropic = c.flag("isotropic");
  if (m.priors.isotropic) m.theta0.lengthscales.assign(dim, m.theta0.lengthscales.front());

  const double step = c.real("hyper_step");
  m.scales = {step, step, step, step, step};
  if (!c.flag("infer_kernel")) {
    m.scales.log_amplitude = 0.0;
    m.scales.log_lengthscale = 0.0;
    m.scales.pin = 0.0;
  }

  if (c.text("base") == "box") {
    BoxBase box{to_point(c.reals("box_lower", dim)), to_point(c.reals("box_upper", dim))};
    m.psi0 = box;
    if (c.flag("pin")) {
      m.theta0.pin_location = 0.5 * (box.lower + box.upper);
      m.priors.pin_region = box;
    }
  } else if (c.text("base") == "gaussian") {
    if (c.flag("pin")) throw ParseError("pin requires a box base density");
    GaussianBase g{to_point(c.reals("base_mean", dim)), to_point(c.reals("base_stddev", dim))};
    if (c.flag("infer_base") && !data.empty()) {
      set_data_scaled_base_priors(m.priors, data);
      for (std::size_t d = 0; d < dim; ++d) {
        g.mean[static_cast<Eigen::Index>(d)] = m.priors.base_mean[d].location;
        g.stddev[static_cast<Eigen::Index>(d)] = std::exp(m.priors.base_log_stddev[d].location);
      }
    }
    m.psi0 = g;
  } else {
    throw ParseError("base: expected box or gaussian");
  }
  validate(m.psi0);
  m.theta0.validate();
  return m;
}

inline HistorySweepConfig make_history_config(const RunConfig& c, const ModelSetup& m, std::size_t dim) {
  HistorySweepConfig h;
  const double z = c.real("zeta");
  if (!(z > 0.0 && z < 1.0)) throw ParseError("zeta: must lie strictly between 0 and 1");
  h.zeta.insert_probability = [z](std::size_t, std::size_t) { return z; };
  if (!c.text("walk_scale").empty()) h.walk_scales = c.reals("walk_scale", dim);
  h.hmc_step_size = c.real("hmc_step_size");
  h.n_leapfrog = static_cast<int>(c.count("hmc_steps"));
  h.number_moves = static_cast<int>(c.count("number_moves"));
  h.hyper_scales = m.scales;
  return h;
}

inline ExchangeSweepConfig make_exchange_config(const RunConfig& c, const ModelSetup& m) {
  ExchangeSweepConfig e;
  e.step_scale = c.real("crankshaft");
  e.hyper_scales = m.scales;
  e.rejection.max_proposals = c.count("max_proposals");
  return e;
}

inline StepAdaptation make_adaptation(const RunConfig& c) {
  StepAdaptation a;
  a.enabled = c.flag("adapt_step_size");
  a.target = c.real("target_accept");
  return a;
}

/// Regular grid from grid_min / grid_max / grid_count, first coordinate varying fastest.
inline PointList make_grid(const RunConfig& c, std::size_t dim) {
  const std::vector<double> lo = c.reals("grid_min", dim);
  const std::vector<double> hi = c.reals("grid_max", dim);
  std::vector<std::size_t> n;
  for (const std::string& f : split(c.text("grid_count"), ',')) {
    n.push_back(RunConfig{{{"grid_count", f}}}.count("grid_count"));
  }
  if (n.size() == 1) n.assign(dim, n.front());
  if (n.size() != dim) throw ParseError("grid_count: expected 1 or " + std::to_string(dim) + " values");
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) {
    if (n[d] == 0 || !(hi[d] >= lo[d])) throw ParseError("grid: need count >= 1 and max >= min");
    total *= n[d];
  }
  PointList grid;
  grid.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    Point p(static_cast<Eigen::Index>(dim));
    std::size_t r = k;
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t i = r % n[d];
      r /= n[d];
      p[static_cast<Eigen::Index>(d)] =
          n[d] == 1 ? lo[d] : lo[d] + (hi[d] - lo[d]) * static_cast<double>(i) / static_cast<double>(n[d] - 1);
    }
    grid.push_back(std::move(p));
  }
  return grid;
}

inline DensityConfig make_density_config(const RunConfig& c, const ModelSetup& m, std::size_t dim) {
  DensityConfig d;
  d.sampler = c.sampler();
  d.theta0 = m.theta0;
  d.psi0 = m.psi0;
  d.priors = m.priors;
  d.history = make_history_config(c, m, dim);
  d.exchange = make_exchange_config(c, m);
  d.adaptation = make_adaptation(c);
  d.schedule = {c.count("density_iterations"), c.count("density_burn_in"), 1};
  d.posterior_schedule = c.schedule();
  d.warm_start = c.flag("density_warm_start");
  d.schedule.validate();
  if (d.schedule.retained() == 0 || d.posterior_schedule.retained() == 0) {
    throw ParseError("density estimation needs retained samples in every chain");
  }
  d.rejection.max_proposals = c.count("max_proposals");
  return d;
}

// ---------------------------------------------------------------------------
// Output helpers

using Json = nlohmann::ordered_json;

inline Json meta_header(const std::string& command, const RunConfig& c) {
  Json j;
  j["command"] = command;
  j["seed"] = c.seed();
  j["config_hash"] = config_hash(c.values);
  Json cfg = Json::object();
  for (const auto& [k, v] : c.values) cfg[k] = v;
  j["config"] = cfg;
  return j;
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

inline Json move_json(const MoveCounter& m) {
  return Json{{"proposed", m.proposed}, {"accepted", m.accepted}, {"rate", m.rate()}};
}

inline void append_hyper_columns(std::vector<std::string>& header, std::size_t dim, const GpHyper& theta,
                                 const BaseHyper& psi) {
  header.push_back("amplitude");
  for (std::size_t d = 0; d < dim; ++d) header.push_back("lengthscale" + std::to_string(d + 1));
  if (theta.pin_location) {
    for (std::size_t d = 0; d < dim; ++d) header.push_back("pin" + std::to_string(d + 1));
  }
  if (std::holds_alternative<GaussianBase>(psi)) {
    for (std::size_t d = 0; d < dim; ++d) header.push_back("base_mean" + std::to_string(d + 1));
    for (std::size_t d = 0; d < dim; ++d) header.push_back("base_stddev" + std::to_string(d + 1));
  }
}

inline void append_hyper_values(std::vector<double>& row, const GpHyper& theta, const BaseHyper& psi) {
  row.push_back(theta.amplitude);
  row.insert(row.end(), theta.lengthscales.begin(), theta.lengthscales.end());
  if (theta.pin_location) row.insert(row.end(), theta.pin_location->data(), theta.pin_location->data() + theta.pin_location->size());
  if (const auto* g = std::get_if<GaussianBase>(&psi)) {
    row.insert(row.end(), g->mean.data(), g->mean.data() + g->mean.size());
    row.insert(row.end(), g->stddev.data(), g->stddev.data() + g->stddev.size());
  }
}

inline std::size_t check_data(const PointList& data) {
  require(!data.empty(), "data file has no rows");
  const auto dim = static_cast<std::size_t>(data.front().size());
  for (const Point& p : data) {
    if (static_cast<std::size_t>(p.size()) != dim) throw DimensionMismatch("inconsistent data dimension");
    if (!p.allFinite()) throw ParseError("data contain non-finite values");
  }
  return dim;
}

// ---------------------------------------------------------------------------
// fit

struct ChainOutput {
  std::vector<std::vector<double>> trace;
  std::vector<std::vector<double>> rejections;
  std::vector<std::vector<double>> predictive;
  Json summary;
};

inline ChainOutput fit_history_chain(const RunConfig& c, const ModelSetup& m, const PointList& data, std::size_t chain,
                                     Rng& rng) {
  const std::size_t dim = static_cast<std::size_t>(data.front().size());
  HistorySweepConfig sweep_cfg = make_history_config(c, m, dim);
  const StepAdaptation adapt = make_adaptation(c);
  const std::size_t n_pred = c.count("predictive_per_iteration");
  RejectionOptions opts;
  opts.max_proposals = c.count("max_proposals");
  ChainOutput out;
  std::size_t budget_failures = 0;
  LatentHistory h = LatentHistory::initialize(data, m.theta0, m.psi0, rng);
  HistoryDiagnostics diag;
  HistoryDiagnostics last;
  run_history_chain(h, sweep_cfg, m.priors, c.schedule(), adapt, diag, rng, [&](const LatentHistory& s, std::size_t it) {
    auto delta = [](const MoveCounter& now, const MoveCounter& before) {
      const std::size_t p = now.proposed - before.proposed;
      return p == 0 ? std::nan("") : static_cast<double>(now.accepted - before.accepted) / static_cast<double>(p);
    };
    std::vector<double> row{static_cast<double>(chain), static_cast<double>(it), static_cast<double>(s.M()),
                            delta(diag.insert, last.insert),
                            delta(diag.remove, last.remove),
                            delta(diag.location, last.location),
                            delta(diag.hmc, last.hmc),
                            delta(diag.hyper, last.hyper)};
    append_hyper_values(row, s.theta(), s.psi);
    row.push_back(history_logdensity(s));
    out.trace.push_back(std::move(row));
    last = diag;
    for (std::size_t i = 0; i < s.M(); ++i) {
      std::vector<double> r{static_cast<double>(chain), static_cast<double>(it)};
      const Point& x = s.rejection(i);
      r.insert(r.end(), x.data(), x.data() + x.size());
      out.rejections.push_back(std::move(r));
    }
    if (n_pred > 0) {
      try {
        for (const Point& x : predictive_sample_history(s, n_pred, rng, opts)) {
          std::vector<double> r{static_cast<double>(chain), static_cast<double>(it)};
          r.insert(r.end(), x.data(), x.data() + x.size());
          out.predictive.push_back(std::move(r));
        }
      } catch (const BudgetExceeded&) {
        ++budget_failures;
      }
    }
  });
  out.summary = Json{{"chain", chain},
                     {"insert", move_json(diag.insert)},
                     {"delete", move_json(diag.remove)},
                     {"location", move_json(diag.location)},
                     {"hmc", move_json(diag.hmc)},
                     {"hyper", move_json(diag.hyper)},
                     {"hmc_step_size", sweep_cfg.hmc_step_size},
                     {"final_rejections", h.M()},
                     {"budget_failures", budget_failures}};
  return out;
}

inline ChainOutput fit_exchange_chain(const RunConfig& c, const ModelSetup& m, const PointList& data, std::size_t chain,
                                      Rng& rng) {
  const ExchangeSweepConfig cfg = make_exchange_config(c, m);
  const std::size_t n_pred = c.count("predictive_per_iteration");
  ChainOutput out;
  std::size_t predictive_failures = 0;
  PointList extra;
  for (std::size_t i = 0; i < c.count("extra_controls"); ++i) extra.push_back(base_sample(m.psi0, rng));
  ExchangeState st = ExchangeState::initialize(data, m.theta0, m.psi0, rng, extra);
  ExchangeDiagnostics last;
  run_exchange_chain(st, cfg, m.priors, c.schedule(), rng, [&](const ExchangeState& s, std::size_t it) {
    auto delta = [](const MoveCounter& now, const MoveCounter& before) {
      const std::size_t p = now.proposed - before.proposed;
      return p == 0 ? std::nan("") : static_cast<double>(now.accepted - before.accepted) / static_cast<double>(p);
    };
    std::vector<double> row{static_cast<double>(chain), static_cast<double>(it), static_cast<double>(s.g.size()),
                            delta(s.diagnostics.control, last.control), delta(s.diagnostics.hyper, last.hyper)};
    append_hyper_values(row, s.theta(), s.psi);
    row.push_back(s.g.log_prior_density());
    out.trace.push_back(std::move(row));
    last = s.diagnostics;
    if (n_pred > 0) {
      try {
        for (const Point& x : predictive_sample_exchange(s, n_pred, rng, cfg.rejection)) {
          std::vector<double> r{static_cast<double>(chain), static_cast<double>(it)};
          r.insert(r.end(), x.data(), x.data() + x.size());
          out.predictive.push_back(std::move(r));
        }
      } catch (const BudgetExceeded&) {
        ++predictive_failures;
      }
    }
  });
  out.summary = Json{{"chain", chain},
                     {"function", move_json(st.diagnostics.control)},
                     {"hyper", move_json(st.diagnostics.hyper)},
                     {"fantasy_budget_failures", st.diagnostics.budget_failures},
                     {"predictive_budget_failures", predictive_failures},
                     {"revealed_values", st.g.size()}};
  return out;
}

/// Runs `chains` independent chains and writes trace.csv, rejections.csv,
/// predictive_samples.csv and meta.json to `out_dir`.
inline Json run_fit(const RunConfig& c, const PointList& data, const std::string& out_dir, std::size_t chains,
                    std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t dim = check_data(data);
  require(chains >= 1, "need at least one chain");
  const ModelSetup m = make_model(c, dim, data);
  if (const auto* box = std::get_if<BoxBase>(&m.psi0)) {
    for (const Point& x : data) {
      if (base_logpdf(x, *box) == -kInf) throw InvalidArgument("data lie outside the box base density");
    }
  }
  const ChainSchedule schedule = c.schedule();
  const SamplerKind kind = c.sampler();
  std::vector<ChainOutput> results(chains);
  parallel_for(chains, workers, [&](std::size_t k) {
    Rng rng(derive_seed(c.seed(), k));
    results[k] = kind == SamplerKind::latent_history ? fit_history_chain(c, m, data, k, rng)
                                                     : fit_exchange_chain(c, m, data, k, rng);
  });

  std::vector<std::string> header{"chain", "iteration"};
  if (kind == SamplerKind::latent_history) {
    for (const char* h : {"num_rejections", "accept_insert", "accept_delete", "accept_location", "accept_hmc",
                          "accept_hyper"}) {
      header.emplace_back(h);
    }
  } else {
    for (const char* h : {"revealed_values", "accept_function", "accept_hyper"}) header.emplace_back(h);
  }
  append_hyper_columns(header, dim, m.theta0, m.psi0);
  header.emplace_back(kind == SamplerKind::latent_history ? "log_history_density" : "log_gp_density");
  std::vector<std::string> point_header{"chain", "iteration"};
  for (const std::string& h : coordinate_header(dim)) point_header.push_back(h);

  std::vector<std::vector<double>> trace, rejections, predictive;
  Json summaries = Json::array();
  for (auto& r : results) {
    trace.insert(trace.end(), r.trace.begin(), r.trace.end());
    rejections.insert(rejections.end(), r.rejections.begin(), r.rejections.end());
    predictive.insert(predictive.end(), r.predictive.begin(), r.predictive.end());
    summaries.push_back(r.summary);
  }
  std::filesystem::create_directories(out_dir);
  write_csv(out_dir + "/trace.csv", header, trace);
  write_csv(out_dir + "/rejections.csv", point_header, rejections);
  write_csv(out_dir + "/predictive_samples.csv", point_header, predictive);

  Json meta = meta_header("fit", c);
  meta["sampler"] = c.text("sampler");
  meta["data_points"] = data.size();
  meta["dimension"] = dim;
  meta["chains"] = chains;
  meta["iterations"] = schedule.total;
  meta["burn_in"] = schedule.burn_in;
  meta["thin"] = schedule.thin;
  meta["retained_per_chain"] = schedule.retained();
  meta["acceptance"] = summaries;
  meta["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir + "/meta.json", meta);
  return meta;
}

// ---------------------------------------------------------------------------
// sample-prior

/// Draws n samples from one density drawn from the prior and writes them with
/// a grid of Phi(conditional mean of g) times the base density.
inline Json run_sample_prior(const RunConfig& c, std::size_t n, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  require(n >= 1, "need at least one sample");
  const std::size_t dim = c.count("dimension");
  require(dim >= 1, "dimension must be at least 1");
  const ModelSetup m = make_model(c, dim);
  Rng rng(c.seed());
  RejectionOptions opts;
  opts.max_proposals = c.count("max_proposals");
  const GenerativeTrace t = draw_prior_dataset(n, m.theta0, m.psi0, rng, opts);
  const GpRealization g(m.theta0, t.cond);
  const PointList grid = make_grid(c, dim);
  std::vector<std::vector<double>> rows;
  rows.reserve(grid.size());
  for (const Point& x : grid) {
    const double mean = g.predict(x).mean;
    std::vector<double> r(x.data(), x.data() + x.size());
    r.push_back(mean);
    r.push_back(phi(mean) * std::exp(base_logpdf(x, m.psi0)));
    rows.push_back(std::move(r));
  }
  std::vector<std::string> header = coordinate_header(dim);
  header.emplace_back("g_mean");
  header.emplace_back("unnormalized_density");
  std::filesystem::create_directories(out_dir);
  write_points_csv(out_dir + "/prior_samples.csv", t.accepted, dim);
  write_csv(out_dir + "/prior_grid.csv", header, rows);
  Json meta = meta_header("sample-prior", c);
  meta["samples"] = n;
  meta["proposals"] = t.proposal_count;
  meta["rejections"] = t.rejection_count();
  meta["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir + "/meta.json", meta);
  return meta;
}

// ---------------------------------------------------------------------------
// predict-density

inline Json run_predict_density(const RunConfig& c, const PointList& data, const std::string& out_dir,
                                std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t dim = check_data(data);
  const ModelSetup m = make_model(c, dim, data);
  const DensityConfig dc = make_density_config(c, m, dim);
  const PointList grid = make_grid(c, dim);
  const DensityGrid result = density_grid_seeded(grid, data, dc, c.seed(), workers);
  std::vector<std::string> header = coordinate_header(dim);
  for (const char* h : {"estimate", "stderr_numerator", "stderr_denominator", "numerator", "denominator", "stderr_estimate"}) {
    header.emplace_back(h);
  }
  std::vector<std::vector<double>> rows;
  for (const DensityEstimate& e : result.estimates) {
    std::vector<double> r(e.x.data(), e.x.data() + e.x.size());
    r.insert(r.end(), {e.ratio, e.numerator.std_error, e.denominator.std_error, e.numerator.mean, e.denominator.mean,
                       e.ratio_std_error});
    rows.push_back(std::move(r));
  }
  std::filesystem::create_directories(out_dir);
  write_csv(out_dir + "/density_grid.csv", header, rows);
  Json meta = meta_header("predict-density", c);
  meta["grid_points"] = grid.size();
  meta["integral"] = result.integral ? Json(*result.integral) : Json(nullptr);
  meta["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir + "/meta.json", meta);
  return meta;
}

// ---------------------------------------------------------------------------
// geweke

inline GewekeConfig make_geweke_config(const RunConfig& c) {
  GewekeConfig g;
  g.sampler = c.sampler();
  g.n_data = c.count("geweke_n");
  g.samples = c.count("geweke_samples");
  g.chains = c.count("geweke_chains");
  g.thin = c.count("geweke_thin");
  g.sweeps = c.count("geweke_sweeps");
  if (c.count("dimension") != 1) throw ParseError("the joint-distribution test is one-dimensional");
  if (g.n_data < 1 || g.n_data > 5) throw ParseError("geweke_n must lie in 1..5");
  if (g.samples < 2) throw ParseError("insufficient samples for the joint-distribution test");
  g.theta_template.lengthscales = {1.0};
  g.theta_template.mean = c.real("gp_mean");
  g.psi = BoxBase{to_point(c.reals("box_lower", 1)), to_point(c.reals("box_upper", 1))};
  g.priors = HyperPrior{};
  g.priors.log_amplitude = {c.real("geweke_log_amplitude_prior_mean"), c.real("geweke_log_amplitude_prior_sd")};
  g.priors.log_lengthscale = {c.real("geweke_log_lengthscale_prior_mean"), c.real("geweke_log_lengthscale_prior_sd")};
  const double step = c.real("hyper_step");
  const HyperProposalScales scales{step, step, step, step, step};
  g.history.hmc_step_size = c.real("geweke_hmc_step_size");
  g.history.n_leapfrog = static_cast<int>(c.count("hmc_steps"));
  g.history.hyper_scales = scales;
  const double z = c.real("zeta");
  g.history.zeta.insert_probability = [z](std::size_t, std::size_t) { return z; };
  g.history.corrupt_insert_ratio = c.flag("geweke_corrupt_insert");
  g.exchange.step_scale = c.real("crankshaft");
  g.exchange.hyper_scales = scales;
  g.rejection.max_proposals = c.count("geweke_max_proposals");
  g.exchange.rejection = g.rejection;
  return g;
}

inline Json geweke_json(const GewekeReport& r) {
  Json j;
  j["sampler"] = r.sampler == SamplerKind::latent_history ? "latent-history" : "exchange";
  j["forward_samples"] = r.forward_count;
  j["successive_samples"] = r.successive_count;
  j["threshold"] = kGewekeAlpha;
  Json stats = Json::array();
  for (const GewekeStatistic& s : r.statistics) {
    stats.push_back(Json{{"name", s.name}, {"ks_statistic", s.ks_statistic}, {"p_value", s.p_value},
                         {"result", s.pass ? "PASS" : "FAIL"}});
  }
  j["statistics"] = stats;
  j["result"] = r.pass ? "PASS" : "FAIL";
  return j;
}

inline Json run_geweke_command(const RunConfig& c, const std::string& out_dir, std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  const GewekeConfig g = make_geweke_config(c);
  const GewekeReport r = run_geweke(g, c.seed(), workers);
  Json report = meta_header("geweke", c);
  report.update(geweke_json(r));
  report["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::filesystem::create_directories(out_dir);
  write_json(out_dir + "/geweke_report.json", report);
  return report;
}

}  // namespace gpds
