#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gpds/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t chains = 1;
  std::size_t workers = 0;
  std::string name = "f1";
  std::optional<std::size_t> n;
};

gpds::RunConfig load(const Options& o) {
  gpds::RunConfig c = gpds::load_run_config(o.config);
  if (o.seed) c.values["seed"] = std::to_string(*o.seed);
  return c;
}

std::size_t workers(const Options& o) { return o.workers == 0 ? gpds::default_workers() : o.workers; }

void print(const gpds::Json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process density sampler"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool needs_data) {
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed (overrides the config)");
    sub->add_option("--workers", o.workers, "worker threads (0 = hardware concurrency)");
    if (needs_data) sub->add_option("--data", o.data, "data CSV with header x1..xD")->required()->check(CLI::ExistingFile);
  };

  CLI::App* gen = app.add_subcommand("gen-synthetic", "draw a synthetic dataset (f1 or f2)");
  gen->add_option("--name", o.name, "f1 (1-D mixture) or f2 (2-D ring)")->check(CLI::IsMember({"f1", "f2"}));
  gen->add_option("--n", o.n, "number of draws")->required();
  gen->add_option("--out", o.out, "output CSV path")->required();
  gen->add_option("--seed", o.seed, "random seed");

  CLI::App* prior = app.add_subcommand("sample-prior", "draw samples from one prior density");
  common(prior, false);
  prior->add_option("--n", o.n, "number of samples (default prior_samples)");

  CLI::App* fit = app.add_subcommand("fit", "run posterior chains");
  common(fit, true);
  fit->add_option("--chains", o.chains, "independent chains")->check(CLI::PositiveNumber);

  CLI::App* predict = app.add_subcommand("predict-density", "estimate the predictive density on a grid");
  common(predict, true);

  CLI::App* geweke = app.add_subcommand("geweke", "joint-distribution test of a sampler");
  common(geweke, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const gpds::PointList pts = gpds::gen_synthetic(o.name, *o.n, o.seed.value_or(1));
      gpds::write_points_csv(o.out, pts, static_cast<std::size_t>(pts.front().size()));
    } else if (prior->parsed()) {
      const gpds::RunConfig c = load(o);
      print(gpds::run_sample_prior(c, o.n.value_or(c.count("prior_samples")), o.out));
    } else if (fit->parsed()) {
      const gpds::RunConfig c = load(o);
      gpds::Json meta = gpds::run_fit(c, gpds::read_points_csv(o.data), o.out, o.chains, workers(o));
      meta.erase("config");
      print(meta);
    } else if (predict->parsed()) {
      const gpds::RunConfig c = load(o);
      gpds::Json meta = gpds::run_predict_density(c, gpds::read_points_csv(o.data), o.out, workers(o));
      meta.erase("config");
      print(meta);
    } else if (geweke->parsed()) {
      const gpds::RunConfig c = load(o);
      gpds::Json report = gpds::run_geweke_command(c, o.out, workers(o));
      report.erase("config");
      print(report);
      return report["result"] == "PASS" ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
