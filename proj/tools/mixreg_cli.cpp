#include <mixreg/config.hpp>
#include <mixreg/datagen.hpp>
#include <mixreg/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kAssertionFailed = 1, kConfigError = 2, kInfeasible = 3, kRuntimeError = 4 };

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string out;
  std::string csv;
  std::vector<std::string> overrides;
};

mixreg::ExperimentConfig load_config(const GlobalOptions& opts, const mixreg::KeyValues& forced) {
  mixreg::KeyValues kv;
  if (!opts.config.empty()) kv = mixreg::load_key_values(opts.config);
  for (const auto& o : opts.overrides) {
    auto [key, value] = mixreg::parse_assignment(o);
    kv[key] = value;
  }
  if (opts.seed) kv["experiment.seed"] = std::to_string(*opts.seed);
  if (!opts.out.empty()) kv["experiment.output"] = opts.out;
  for (const auto& [key, value] : forced) kv[key] = value;
  return mixreg::experiment_config_from(kv);
}

int finish(const mixreg::ExperimentResult& result, const mixreg::ExperimentConfig& cfg, const GlobalOptions& opts) {
  mixreg::write_results(result, cfg.output, opts.csv);
  for (const auto& f : result.failures) std::cerr << "assertion failed: " << f << '\n';
  return result.passed() ? kOk : kAssertionFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed linear regression toolkit: data generation, solvers and diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  app.add_option("--config", opts.config, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Override experiment.seed");
  app.add_option("--jobs", opts.jobs, "Concurrent repetitions / sweep cells")->check(CLI::PositiveNumber);
  app.add_option("--out", opts.out, "Results file (JSON lines; dataset path for generate)");
  app.add_option("--csv", opts.csv, "Optional CSV projection of the primary record kind");
  app.add_option("--set", opts.overrides, "Override a config key (key=value), repeatable");

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset and its components file");
  auto* fit_am = app.add_subcommand("fit-am", "Run gradient AM");
  auto* fit_em = app.add_subcommand("fit-em", "Run gradient EM");
  auto* geometry = app.add_subcommand("geometry", "Estimate lambda, Delta and pi_min of the generating components");
  auto* diagnose = app.add_subcommand("diagnose", "Run the experiment named by experiment.kind");
  auto* rademacher = app.add_subcommand("rademacher", "Lipschitz and Rademacher-complexity probes");
  auto* sweep = app.add_subcommand("sweep", "Run a sweep experiment (separation, sample, step, restricted spectra)");
  auto* compare = app.add_subcommand("compare", "Run AM and EM side by side");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      if (opts.out.empty()) throw mixreg::ConfigError("--out", "generate needs an output dataset path");
      GlobalOptions o = opts;
      o.out.clear();
      const auto cfg = load_config(o, {{"experiment.data", ""}});
      const mixreg::Dataset data = mixreg::experiment_dataset(cfg, 0);
      mixreg::save_dataset(opts.out, data, cfg.seed);
      mixreg::Record r("generated");
      r.set("path", opts.out).set("n", data.n()).set("d", data.d()).set("k", cfg.generator.k).set("seed", cfg.seed);
      std::cout << mixreg::to_json_line(r) << '\n';
      return kOk;
    }
    if (fit_am->parsed() || fit_em->parsed()) {
      const auto cfg = load_config(opts, {{"experiment.kind", "convergence"},
                                          {"experiment.method", fit_am->parsed() ? "am" : "em"}});
      return finish(mixreg::run_experiment(cfg, opts.jobs), cfg, opts);
    }
    if (geometry->parsed()) {
      const auto cfg = load_config(opts, {});
      return finish(mixreg::geometry_experiment(cfg), cfg, opts);
    }
    if (diagnose->parsed()) {
      const auto cfg = load_config(opts, {});
      return finish(mixreg::run_experiment(cfg, opts.jobs), cfg, opts);
    }
    if (rademacher->parsed()) {
      const auto cfg = load_config(opts, {{"experiment.kind", "rademacher"}});
      return finish(mixreg::run_experiment(cfg, opts.jobs), cfg, opts);
    }
    if (sweep->parsed()) {
      const auto cfg = load_config(opts, {});
      if (cfg.kind == mixreg::ExperimentKind::Convergence || cfg.kind == mixreg::ExperimentKind::Rademacher) {
        throw mixreg::ConfigError("experiment.kind", "sweep needs separation_sweep, sample_sweep, step_sweep or restricted_spectra");
      }
      return finish(mixreg::run_experiment(cfg, opts.jobs), cfg, opts);
    }
    if (compare->parsed()) {
      const auto cfg = load_config(opts, {{"experiment.kind", "convergence"}});
      return finish(mixreg::compare_solvers(cfg, opts.jobs), cfg, opts);
    }
  } catch (const mixreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const mixreg::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
