#include "mixreg/experiment.hpp"

#include "mixreg/datagen.hpp"
#include "mixreg/diagnostics.hpp"
#include "mixreg/generalization.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>

namespace mixreg {

namespace {

std::uint64_t real_key(double v) { return splitmix64(std::bit_cast<std::uint64_t>(v)); }

const char* solver_name(SolverKind s) { return s == SolverKind::AM ? "am" : "em"; }

std::vector<SolverKind> solvers_of(MethodChoice m) {
  switch (m) {
    case MethodChoice::AM: return {SolverKind::AM};
    case MethodChoice::EM: return {SolverKind::EM};
    case MethodChoice::Both: break;
  }
  return {SolverKind::AM, SolverKind::EM};
}

Trajectory run_solver(SolverKind s, const Dataset& data, const ParameterSet& init, const SolverConfig& sc,
                      const ParameterSet& reference) {
  return s == SolverKind::AM ? run_gradient_am(data, init, sc, reference) : run_gradient_em(data, init, sc, reference);
}

struct RepInputs {
  Dataset data;
  ParameterSet truth;
};

std::optional<DatasetFile> load_source(const ExperimentConfig& cfg) {
  if (!cfg.data_path) return std::nullopt;
  DatasetFile file = load_dataset(*cfg.data_path);
  if (!file.data.truth()) throw ConfigError("experiment.data", "dataset has no ground-truth components file");
  return file;
}

RepInputs rep_inputs(const GeneratorSpec& spec, const std::optional<DatasetFile>& source,
                     const Rng& rep_rng) {
  if (source) return RepInputs{source->data, source->data.truth()->components};
  Rng comp_rng = rep_rng.split("components");
  ParameterSet components = draw_components(spec, comp_rng);
  Rng data_rng = rep_rng.split("data");
  Dataset data = generate(spec, components, data_rng).data;
  return RepInputs{std::move(data), std::move(components)};
}

Rng repetition_rng(const ExperimentConfig& cfg, std::size_t rep) { return Rng(cfg.seed).split("repetition", rep); }

void add_fit_fields(Record& r, const ContractionFit& f) {
  r.set("rho_hat", f.rho_hat)
      .set("floor_hat", f.floor_hat)
      .set("per_step_epsilon", f.per_step_epsilon)
      .set("fit_residual", f.fit_residual)
      .set("no_decay", f.no_decay)
      .set("divergent", f.divergent)
      .set("non_monotone", f.non_monotone);
}

struct SolverRun {
  SolverKind solver;
  Trajectory traj;
  std::vector<ContractionFit> fits;
  bool converged = false;
  double ratio = 0.0;
};

SolverRun solve_and_fit(const ExperimentConfig& cfg, SolverKind s, const RepInputs& in, const ParameterSet& init,
                        std::uint64_t shuffle_seed) {
  SolverConfig sc = cfg.solver_for(s);
  sc.shuffle_seed = shuffle_seed;
  SolverRun run{s, run_solver(s, in.data, init, sc, in.truth), {}, false, 0.0};
  if (run.traj.records.size() >= 10) run.fits = fit_contraction(run.traj);
  const double initial = run.traj.initial_max_distance();
  const double final_d = run.traj.final_max_distance();
  run.ratio = initial > 0.0 ? final_d / initial : (final_d == 0.0 ? 0.0 : kInfinity);
  run.converged = run.ratio <= cfg.convergence_tolerance &&
                  std::all_of(run.fits.begin(), run.fits.end(), [](const ContractionFit& f) { return f.rho_hat < 1.0; });
  return run;
}

std::vector<Record> run_records(const ExperimentConfig& cfg, const SolverRun& run, std::size_t rep) {
  std::vector<Record> out = trajectory_records(run.traj, solver_name(run.solver), rep, cfg.timing);
  for (std::size_t j = 0; j < run.fits.size(); ++j) {
    Record r("fit");
    r.set("repetition", rep).set("solver", solver_name(run.solver)).set("component", j + 1);
    add_fit_fields(r, run.fits[j]);
    out.push_back(std::move(r));
  }
  Record r("run");
  r.set("repetition", rep)
      .set("solver", solver_name(run.solver))
      .set("block_size", run.traj.block_size)
      .set("initial_max_distance", run.traj.initial_max_distance())
      .set("final_max_distance", run.traj.final_max_distance())
      .set("distance_ratio", run.ratio)
      .set("converged", run.converged)
      .set("final_loss", run.traj.records.back().loss);
  if (cfg.timing) {
    double total = 0.0;
    for (const auto& rec : run.traj.records) total += rec.millis;
    r.set("millis", total);
  }
  out.push_back(std::move(r));
  return out;
}

bool identical_iterates(const Trajectory& a, const Trajectory& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (!(a.records[i].params == b.records[i].params)) return false;
  }
  return true;
}

ExperimentResult convergence(const ExperimentConfig& cfg, std::size_t jobs, bool compare) {
  const auto source = load_source(cfg);
  const std::vector<SolverKind> solvers = compare ? solvers_of(MethodChoice::Both) : solvers_of(cfg.method);
  std::vector<std::vector<Record>> slots(cfg.repetitions);
  std::vector<std::vector<bool>> converged(cfg.repetitions);

  parallel_for(cfg.repetitions, jobs, [&](std::size_t rep) {
    const Rng rep_rng = repetition_rng(cfg, rep);
    const RepInputs in = rep_inputs(cfg.generator, source, rep_rng);
    Rng init_rng = rep_rng.split("init");
    const ParameterSet init = sample_initialization(in.truth, cfg.init, init_rng);
    const std::uint64_t shuffle_seed = rep_rng.split("shuffle").next_u64();

    auto& out = slots[rep];
    Record geo = geometry_record(geometry_report(in.truth, in.data));
    Record head("repetition");
    head.set("repetition", rep).set("n", in.data.n()).set("d", in.data.d()).set("k", in.truth.k());
    out.push_back(std::move(head));
    geo.set("repetition", rep);
    out.push_back(std::move(geo));

    std::vector<SolverRun> runs;
    for (SolverKind s : solvers) runs.push_back(solve_and_fit(cfg, s, in, init, shuffle_seed));
    for (const auto& run : runs) {
      auto recs = run_records(cfg, run, rep);
      out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
      converged[rep].push_back(run.converged);
    }
    if (compare) {
      const SolverRun& am = runs[0];
      const SolverRun& em = runs[1];
      Record c("compare");
      c.set("repetition", rep).set("identical", identical_iterates(am.traj, em.traj));
      for (std::size_t j = 0; j < am.fits.size(); ++j) c.set("am_rho_" + std::to_string(j + 1), am.fits[j].rho_hat);
      for (std::size_t j = 0; j < em.fits.size(); ++j) c.set("em_rho_" + std::to_string(j + 1), em.fits[j].rho_hat);
      for (std::size_t j = 0; j < am.fits.size(); ++j) c.set("am_floor_" + std::to_string(j + 1), am.fits[j].floor_hat);
      for (std::size_t j = 0; j < em.fits.size(); ++j) c.set("em_floor_" + std::to_string(j + 1), em.fits[j].floor_hat);
      c.set("em_final_margin", em.traj.records.back().mean_margin);
      const EtaReport eta = eta_probe(em.traj.final_params(), cfg.solver.softmin, in.data);
      c.set("em_min_on_cell", eta.min_on_cell).set("em_max_off_cell", eta.max_off_cell);
      if (cfg.timing) {
        double am_ms = 0.0, em_ms = 0.0;
        for (const auto& r : am.traj.records) am_ms += r.millis;
        for (const auto& r : em.traj.records) em_ms += r.millis;
        c.set("am_millis", am_ms).set("em_millis", em_ms);
      }
      out.push_back(std::move(c));
    }
  });

  ExperimentResult result;
  result.csv_kind = "iteration";
  result.records.push_back(config_record(cfg));
  for (auto& s : slots) {
    result.records.insert(result.records.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  for (std::size_t si = 0; si < solvers.size(); ++si) {
    std::size_t ok = 0;
    for (const auto& c : converged) ok += c[si] ? 1 : 0;
    Record summary("summary");
    summary.set("solver", solver_name(solvers[si]))
        .set("repetitions", cfg.repetitions)
        .set("converged", ok)
        .set("success_rate", static_cast<double>(ok) / static_cast<double>(cfg.repetitions));
    result.records.push_back(std::move(summary));
  }
  return result;
}

GeneratorSpec with_parameter(GeneratorSpec spec, const std::string& param, double value) {
  if (param == "separation_margin") {
    spec.separation_margin = value;
  } else if (param == "component_scale") {
    spec.component_scale = value;
  } else if (param == "n") {
    spec.n = static_cast<std::size_t>(value);
  } else {
    throw ConfigError("sweep.parameter", "unsupported parameter '" + param + "'");
  }
  return spec;
}

ExperimentResult separation_sweep(const ExperimentConfig& cfg, std::size_t jobs) {
  std::vector<GeneratorSpec> family;
  for (double v : cfg.sweep_values) family.push_back(with_parameter(cfg.generator, cfg.sweep_parameter, v));
  const Rng root = Rng(cfg.seed).split("separation");
  const SeparationDecay decay = separation_decay_probe(family, cfg.init, root, jobs);

  std::vector<EtaReport> etas(family.size());
  parallel_for(family.size(), jobs, [&](std::size_t i) {
    Rng comp_rng = root.split("components");
    const ParameterSet components = draw_components(family[i], comp_rng);
    Rng data_rng = root.split("data", i);
    const Dataset data = generate(family[i], components, data_rng).data;
    etas[i] = eta_probe(components, cfg.solver.softmin, data);
  });

  ExperimentResult result;
  result.csv_kind = "separation_level";
  result.records.push_back(config_record(cfg));
  for (std::size_t i = 0; i < family.size(); ++i) {
    const SeparationLevel& lv = decay.levels[i];
    Record r("separation_level");
    r.set("level", i)
        .set(cfg.sweep_parameter, cfg.sweep_values[i])
        .set("delta_hat", lv.delta_hat)
        .set("lambda_hat", lv.lambda_hat)
        .set("gap_squared", lv.gap_squared)
        .set("pe", lv.pe)
        .set("pe_zero", lv.zero)
        .set("eta_min_on_cell", etas[i].min_on_cell)
        .set("eta_max_off_cell", etas[i].max_off_cell)
        .set("eta_ordered", etas[i].ordered)
        .set("beta", etas[i].beta);
    result.records.push_back(std::move(r));
    if (!etas[i].ordered) result.failures.push_back("eta_probe: on-cell probability below off-cell at level " + std::to_string(i));
  }
  Record fit("separation_fit");
  fit.set("c_ini", cfg.init.c_ini)
      .set("levels", family.size())
      .set("nonzero_levels", decay.nonzero_levels)
      .set("slope", decay.slope)
      .set("intercept", decay.intercept)
      .set("correlation", decay.correlation)
      .set("monotone", decay.monotone);
  result.records.push_back(std::move(fit));
  if (!decay.monotone) result.failures.push_back("separation_decay_probe: P_e increases with separation");
  return result;
}

ExperimentResult sample_sweep(const ExperimentConfig& cfg, std::size_t jobs) {
  const auto solvers = solvers_of(cfg.method);
  const std::size_t cells = cfg.sweep_values.size();
  const std::size_t reps = cfg.repetitions;
  struct Outcome {
    bool infeasible = false;
    std::vector<SolverRun> runs;
  };
  std::vector<Outcome> outcomes(cells * reps);
  parallel_for(cells * reps, jobs, [&](std::size_t job) {
    const std::size_t c = job / reps;
    const std::size_t rep = job % reps;
    const GeneratorSpec spec = with_parameter(cfg.generator, "n", cfg.sweep_values[c]);
    const Rng rep_rng = Rng(cfg.seed).split("sample", c).split(rep);
    const RepInputs in = rep_inputs(spec, std::nullopt, rep_rng);
    Rng init_rng = rep_rng.split("init");
    const ParameterSet init = sample_initialization(in.truth, cfg.init, init_rng);
    const std::uint64_t shuffle_seed = rep_rng.split("shuffle").next_u64();
    try {
      for (SolverKind s : solvers) outcomes[job].runs.push_back(solve_and_fit(cfg, s, in, init, shuffle_seed));
    } catch (const InfeasibleError&) {
      outcomes[job].infeasible = true;
      outcomes[job].runs.clear();
    }
  });

  ExperimentResult result;
  result.csv_kind = "sample_cell";
  result.records.push_back(config_record(cfg));
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t si = 0; si < solvers.size(); ++si) {
      Record r("sample_cell");
      r.set("n", static_cast<std::size_t>(cfg.sweep_values[c])).set("solver", solver_name(solvers[si]));
      std::size_t ok = 0;
      bool infeasible = false;
      double ratio_sum = 0.0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const Outcome& o = outcomes[c * reps + rep];
        if (o.infeasible) {
          infeasible = true;
          continue;
        }
        ok += o.runs[si].converged ? 1 : 0;
        ratio_sum += o.runs[si].ratio;
      }
      r.set("repetitions", reps)
          .set("infeasible", infeasible)
          .set("converged", ok)
          .set("success_rate", static_cast<double>(ok) / static_cast<double>(reps))
          .set("mean_distance_ratio", infeasible ? std::numeric_limits<double>::quiet_NaN()
                                                 : ratio_sum / static_cast<double>(reps));
      result.records.push_back(std::move(r));
    }
  }
  return result;
}

ExperimentResult step_sweep(const ExperimentConfig& cfg, std::size_t jobs) {
  FloorScalingConfig fc;
  fc.method = cfg.method == MethodChoice::EM ? SolverKind::EM : SolverKind::AM;
  fc.generator = cfg.generator;
  fc.solver = cfg.solver_for(fc.method);
  fc.init = cfg.init;
  fc.gamma_grid = cfg.floor_gamma_grid;
  fc.misspec_grid = cfg.floor_misspec_grid;
  fc.base_gamma = cfg.floor_base_gamma;
  fc.base_misspec = cfg.floor_base_misspec;
  fc.repetitions = cfg.repetitions;
  fc.reference_samples = cfg.floor_reference_samples;
  fc.reference_iterations = cfg.floor_reference_iterations;
  fc.reference_gamma = cfg.floor_reference_gamma;
  const FloorScaling fs = floor_scaling_probe(fc, Rng(cfg.seed).split("floor"), jobs);

  ExperimentResult result;
  result.csv_kind = "floor_cell";
  result.records.push_back(config_record(cfg));
  auto emit = [&](const FloorCell& cell, const char* sweep) {
    Record r("floor_cell");
    r.set("sweep", sweep).set("solver", solver_name(fc.method)).set("gamma", cell.gamma).set("misspec", cell.misspec);
    add_fit_fields(r, cell.fit);
    r.set("excluded", cell.excluded);
    result.records.push_back(std::move(r));
  };
  for (const auto& c : fs.gamma_cells) emit(c, "gamma");
  for (const auto& c : fs.misspec_cells) emit(c, "misspec");
  Record s("floor_summary");
  s.set_series("gamma_ratio", fs.gamma_ratios);
  s.set_series("misspec_ratio", fs.misspec_ratios);
  s.set("monotone_gamma", fs.monotone_gamma).set("monotone_misspec", fs.monotone_misspec);
  result.records.push_back(std::move(s));
  if (!fs.monotone_gamma) result.failures.push_back("floor_scaling_probe: floor decreases as gamma grows");
  if (!fs.monotone_misspec) result.failures.push_back("floor_scaling_probe: floor decreases as misspec_level grows");
  return result;
}

ExperimentResult restricted_spectra(const ExperimentConfig& cfg, std::size_t jobs) {
  const std::size_t cells = cfg.restricted_dims.size();
  std::vector<std::vector<Record>> slots(cells);
  parallel_for(cells, jobs, [&](std::size_t c) {
    const std::size_t d = cfg.restricted_dims[c];
    Rng rng = Rng(cfg.seed).split("restricted", d);
    const Matrix x = gaussian_matrix(rng, cfg.restricted_n, d);
    for (double nu : cfg.restricted_nu) {
      std::vector<std::size_t> members;
      if (nu == 1.0) {
        members.resize(cfg.restricted_n);
        for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
      } else {
        members = halfspace_membership(x, nu);
      }
      const RestrictedMoments m = restricted_moments(x, members);
      const NormProbe p = restricted_norm_probe(x, members, m.volume_hat);
      Record r("restricted");
      r.set("d", d)
          .set("n", cfg.restricted_n)
          .set("nu", nu)
          .set("members", m.sample_count)
          .set("volume_hat", m.volume_hat)
          .set("sigma_min", m.second_moment_min_singular)
          .set("sigma_min_reference", 0.1 * nu * nu)
          .set("mean_norm_sq", m.mean_hat.squaredNorm())
          .set("mean_norm_sq_reference", 4.0 * std::log(1.0 / nu))
          .set("rank_deficient", m.rank_deficient)
          .set("iterative", m.iterative)
          .set("max_norm", p.max_norm)
          .set("norm_rate", p.rate)
          .set("norm_ratio", p.ratio);
      slots[c].push_back(std::move(r));
    }
  });
  ExperimentResult result;
  result.csv_kind = "restricted";
  result.records.push_back(config_record(cfg));
  for (auto& s : slots) result.records.insert(result.records.end(), s.begin(), s.end());
  return result;
}

ExperimentResult rademacher(const ExperimentConfig& cfg, std::size_t jobs) {
  ExperimentResult result;
  result.csv_kind = "rademacher";
  result.records.push_back(config_record(cfg));
  const Rng root(cfg.seed);
  for (double radius : cfg.rademacher_radius) {
    Rng rng = root.split("lipschitz", real_key(radius));
    const LipschitzResult l = lipschitz_probe(radius, cfg.lipschitz_trials, rng, cfg.lipschitz_dim);
    Record r("lipschitz");
    r.set("radius", radius)
        .set("trials", l.trials)
        .set("skipped", l.skipped)
        .set("max_ratio", l.max_ratio)
        .set("bound", l.bound)
        .set("holds", l.max_ratio <= l.bound);
    result.records.push_back(std::move(r));
    if (!(l.max_ratio <= l.bound)) result.failures.push_back("lipschitz_probe: ratio above 2(1+R) at R=" + std::to_string(radius));
  }
  std::vector<Dataset> datasets;
  for (std::size_t n : cfg.rademacher_n) {
    Rng rng = root.split("bounded", n);
    datasets.push_back(bounded_dataset(n, cfg.rademacher_d, rng));
  }
  for (std::size_t k : cfg.rademacher_k) {
    for (double radius : cfg.rademacher_radius) {
      std::vector<double> estimates;
      for (std::size_t ni = 0; ni < cfg.rademacher_n.size(); ++ni) {
        const std::size_t n = cfg.rademacher_n[ni];
        const Rng rng = root.split("rademacher", k).split(real_key(radius)).split(n);
        const RadEstimate e =
            rademacher_estimate(datasets[ni], radius, k, cfg.rademacher_trials, cfg.rademacher_budget, rng, jobs);
        Record r("rademacher");
        r.set("k", k)
            .set("radius", radius)
            .set("n", n)
            .set("estimate", e.estimate)
            .set("bound", e.bound)
            .set("trials", e.trials)
            .set("budget", e.optimizer_budget)
            .set("holds", e.estimate <= e.bound);
        result.records.push_back(std::move(r));
        if (!(e.estimate <= e.bound)) {
          result.failures.push_back("rademacher_estimate: above bound at k=" + std::to_string(k) +
                                    " R=" + std::to_string(radius) + " n=" + std::to_string(n));
        }
        estimates.push_back(e.estimate);
      }
      for (std::size_t ni = 0; ni + 1 < cfg.rademacher_n.size(); ++ni) {
        Record r("rademacher_shrink");
        r.set("k", k)
            .set("radius", radius)
            .set("n_from", cfg.rademacher_n[ni])
            .set("n_to", cfg.rademacher_n[ni + 1])
            .set("ratio", estimates[ni] > 0.0 ? estimates[ni + 1] / estimates[ni] : std::numeric_limits<double>::quiet_NaN());
        result.records.push_back(std::move(r));
      }
    }
  }
  return result;
}

}  // namespace

Record config_record(const ExperimentConfig& cfg) {
  Record r("config");
  for (const auto& [key, value] : to_key_values(cfg)) {
    if (key != "experiment.output") r.set(key, value);
  }
  return r;
}

Record geometry_record(const GeometryReport& g) {
  Record r("geometry");
  r.set("n", g.n)
      .set("lambda_hat", g.lambda_hat)
      .set("delta_hat", g.delta_hat)
      .set("pi_min_hat", g.pi_min_hat)
      .set("degenerate", g.degenerate)
      .set("lambda_witness", g.lambda_witness);
  if (g.delta_witness) r.set("delta_witness", *g.delta_witness).set("delta_witness_component", *g.delta_witness_component);
  r.set_series("count", g.counts);
  if (g.separation_am) {
    r.set("separation_holds", g.separation_am->holds)
        .set("separation", g.separation_am->separation)
        .set("separation_threshold", g.separation_am->threshold);
  }
  return r;
}

std::vector<Record> trajectory_records(const Trajectory& traj, const std::string& solver, std::size_t repetition,
                                       bool timing) {
  std::vector<Record> out;
  out.reserve(traj.records.size());
  for (const auto& rec : traj.records) {
    Record r("iteration");
    r.set("repetition", repetition).set("solver", solver).set("t", rec.t);
    r.set_series("dist", rec.distances);
    r.set("loss", rec.loss);
    if (solver == "am") {
      r.set_series("cell", rec.cell_sizes);
    } else {
      r.set("margin", rec.mean_margin);
    }
    if (timing) r.set("millis", rec.millis);
    out.push_back(std::move(r));
  }
  return out;
}

Dataset experiment_dataset(const ExperimentConfig& cfg, std::size_t repetition) {
  return rep_inputs(cfg.generator, load_source(cfg), repetition_rng(cfg, repetition)).data;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  switch (cfg.kind) {
    case ExperimentKind::Convergence: return convergence(cfg, jobs, cfg.method == MethodChoice::Both);
    case ExperimentKind::SeparationSweep: return separation_sweep(cfg, jobs);
    case ExperimentKind::SampleSweep: return sample_sweep(cfg, jobs);
    case ExperimentKind::StepSweep: return step_sweep(cfg, jobs);
    case ExperimentKind::RestrictedSpectra: return restricted_spectra(cfg, jobs);
    case ExperimentKind::Rademacher: return rademacher(cfg, jobs);
  }
  throw std::logic_error("run_experiment: unknown kind");
}

ExperimentResult compare_solvers(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::Convergence) throw ConfigError("experiment.kind", "compare needs a convergence config");
  ExperimentResult r = convergence(cfg, jobs, true);
  r.csv_kind = "compare";
  return r;
}

ExperimentResult geometry_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto source = load_source(cfg);
  const RepInputs in = rep_inputs(cfg.generator, source, repetition_rng(cfg, 0));
  GeometryReport report = geometry_report(in.truth, in.data);
  if (report.pi_min_hat > 0.0) report.separation_am = check_am_separation(report, in.truth, cfg.init.c_ini);
  ExperimentResult result;
  result.csv_kind = "geometry";
  result.records.push_back(config_record(cfg));
  result.records.push_back(geometry_record(report));
  return result;
}

void write_results(const ExperimentResult& result, const std::string& path, const std::string& csv_path) {
  if (path.empty()) {
    write_jsonl(std::cout, result.records);
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_jsonl(out, result.records);
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
    write_csv(out, result.records, result.csv_kind);
  }
}

}  // namespace mixreg
