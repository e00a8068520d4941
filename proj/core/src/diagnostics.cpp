#include "mixreg/diagnostics.hpp"

#include "mixreg/losses.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace mixreg {

namespace {

constexpr std::size_t kMinFitPoints = 10;
constexpr std::size_t kFloorGrid = 200;
constexpr int kGoldenSteps = 80;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct FloorEval {
  double rho = 1.0;
  double sse = kInfinity;
};

FloorEval evaluate_floor(std::span<const double> t, std::span<const double> dist, double floor) {
  FloorEval e;
  const double z0 = dist[0] - floor;
  if (!(z0 > 0.0)) return e;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    const double z = dist[i] - floor;
    if (!(z > 0.0)) continue;
    const double w = z * z;
    num += w * t[i] * std::log(z / z0);
    den += w * t[i] * t[i];
  }
  e.rho = den > 0.0 ? std::exp(num / den) : 0.0;
  double sse = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double r = dist[i] - (floor + std::pow(e.rho, t[i]) * z0);
    sse += r * r;
  }
  e.sse = sse;
  return e;
}

std::pair<double, FloorEval> golden_section(std::span<const double> t, std::span<const double> dist, double lo,
                                            double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  FloorEval fc = evaluate_floor(t, dist, c);
  FloorEval fd = evaluate_floor(t, dist, d);
  for (int it = 0; it < kGoldenSteps; ++it) {
    if (fc.sse <= fd.sse) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = evaluate_floor(t, dist, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = evaluate_floor(t, dist, d);
    }
  }
  return fc.sse <= fd.sse ? std::pair{c, fc} : std::pair{d, fd};
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double correlation = kNaN;
};

LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  LineFit f;
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return f;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx > 0.0) {
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
  }
  if (sxx > 0.0 && syy > 0.0) f.correlation = sxy / std::sqrt(sxx * syy);
  return f;
}

double smallest_eigenvalue_inverse_iteration(const Matrix& s, bool& failed) {
  const Eigen::MatrixXd a = s;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    failed = true;
    return 0.0;
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows()) / std::sqrt(static_cast<double>(a.rows()));
  double lambda = v.dot(a * v);
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd w = llt.solve(v);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      failed = true;
      return 0.0;
    }
    v = w / norm;
    const double next = v.dot(a * v);
    const bool done = std::abs(next - lambda) <= 1e-8 * std::max(std::abs(next), 1e-300);
    lambda = next;
    if (done) break;
  }
  return std::max(lambda, 0.0);
}

std::uint64_t real_key(double v) { return splitmix64(std::bit_cast<std::uint64_t>(v)); }

}  // namespace

ContractionFit fit_contraction(std::span<const double> times, std::span<const double> distances) {
  if (times.size() != distances.size()) throw std::invalid_argument("fit_contraction: times and distances differ in length");
  if (distances.size() < kMinFitPoints) throw std::invalid_argument("fit_contraction: need at least 10 recorded iterations");
  if (times[0] != 0.0) throw std::invalid_argument("fit_contraction: times must start at 0");
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!std::isfinite(distances[i]) || distances[i] < 0.0) {
      throw std::invalid_argument("fit_contraction: distances must be finite and >= 0");
    }
    if (i > 0 && !(times[i] > times[i - 1])) throw std::invalid_argument("fit_contraction: times must increase");
  }

  ContractionFit fit;
  const auto [lo_it, hi_it] = std::minmax_element(distances.begin(), distances.end());
  const double dmin = *lo_it;
  const double dmax = *hi_it;
  const auto n = static_cast<double>(distances.size());

  if (dmax - dmin <= 1e-12 * std::max(1.0, dmax)) {
    fit.no_decay = true;
    fit.rho_hat = 1.0;
    fit.floor_hat = distances[0];
    double sse = 0.0;
    for (double d : distances) sse += (d - distances[0]) * (d - distances[0]);
    fit.fit_residual = std::sqrt(sse / n);
    return fit;
  }

  double best_floor = 0.0;
  FloorEval best = evaluate_floor(times, distances, 0.0);
  std::size_t best_index = 0;
  for (std::size_t i = 1; i <= kFloorGrid; ++i) {
    const double f = dmin * static_cast<double>(i) / static_cast<double>(kFloorGrid);
    const FloorEval e = evaluate_floor(times, distances, f);
    if (e.sse < best.sse) {
      best = e;
      best_floor = f;
      best_index = i;
    }
  }
  if (dmin > 0.0) {
    const double step = dmin / static_cast<double>(kFloorGrid);
    const double lo = best_index == 0 ? 0.0 : best_floor - step;
    const double hi = std::min(dmin, best_floor + step);
    const auto [f, e] = golden_section(times, distances, lo, hi);
    if (e.sse < best.sse) {
      best = e;
      best_floor = f;
    }
  }

  fit.rho_hat = best.rho;
  fit.floor_hat = best_floor;
  fit.per_step_epsilon = best_floor * std::max(0.0, 1.0 - best.rho);
  fit.fit_residual = std::sqrt(best.sse / n);
  fit.divergent = best.rho > 1.0;
  for (std::size_t i = 1; i < distances.size(); ++i) {
    if (distances[i] > distances[i - 1] + std::max(fit.fit_residual, 1e-12)) fit.non_monotone = true;
  }
  return fit;
}

ContractionFit fit_contraction(std::span<const double> distances) {
  std::vector<double> t(distances.size());
  std::iota(t.begin(), t.end(), 0.0);
  return fit_contraction(t, distances);
}

std::vector<ContractionFit> fit_contraction(const Trajectory& traj) {
  if (!traj.has_reference) throw std::invalid_argument("fit_contraction: trajectory has no reference distances");
  std::vector<double> t;
  t.reserve(traj.records.size());
  for (const auto& r : traj.records) t.push_back(static_cast<double>(r.t));
  std::vector<ContractionFit> fits;
  for (std::size_t j = 0; j < traj.records.front().distances.size(); ++j) {
    fits.push_back(fit_contraction(t, traj.distance_series(j)));
  }
  return fits;
}

PeReport empirical_pe(const ParameterSet& current, const ParameterSet& truth, const Dataset& data) {
  if (current.k() != truth.k() || current.d() != truth.d() || truth.d() != data.d()) {
    throw std::invalid_argument("empirical_pe: dimension mismatch");
  }
  const auto cur = assign_cells(current, data.all());
  const auto ref = assign_cells(truth, data.all());
  const std::size_t k = truth.k();
  PeReport r;
  r.cell_sizes.assign(k, 0);
  std::vector<std::size_t> wrong(k, 0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    ++r.cell_sizes[ref[i]];
    if (cur[i] != ref[i]) ++wrong[ref[i]];
  }
  r.per_cell.assign(k, kNaN);
  std::size_t members = 0;
  std::size_t misassigned = 0;
  double rate_sum = 0.0;
  std::size_t nonempty = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (r.cell_sizes[j] == 0) {
      r.excluded_cells.push_back(j);
      continue;
    }
    r.per_cell[j] = static_cast<double>(wrong[j]) / static_cast<double>(r.cell_sizes[j]);
    rate_sum += r.per_cell[j];
    ++nonempty;
    members += r.cell_sizes[j];
    misassigned += wrong[j];
  }
  r.pooled = static_cast<double>(misassigned) / static_cast<double>(members);
  r.mean_over_cells = rate_sum / static_cast<double>(nonempty);
  return r;
}

SeparationDecay separation_decay_probe(std::span<const GeneratorSpec> family, const InitConfig& init, const Rng& rng,
                                       std::size_t jobs) {
  if (family.size() < 3) throw std::invalid_argument("separation_decay_probe: need at least 3 separation levels");
  SeparationDecay out;
  out.levels.resize(family.size());
  parallel_for(family.size(), jobs, [&](std::size_t i) {
    const GeneratorSpec& spec = family[i];
    Rng comp_rng = rng.split("components");
    const ParameterSet components = draw_components(spec, comp_rng);
    Rng init_rng = rng.split("init");
    const ParameterSet start = sample_initialization(components, init, init_rng);
    Rng data_rng = rng.split("data", i);
    const Dataset data = generate(spec, components, data_rng).data;
    const GeometryReport geo = geometry_report(components, data);
    SeparationLevel& lv = out.levels[i];
    lv.spec = spec;
    lv.delta_hat = geo.delta_hat;
    lv.lambda_hat = geo.lambda_hat;
    lv.gap_squared = (geo.delta_hat - geo.lambda_hat) * (geo.delta_hat - geo.lambda_hat);
    lv.pe = empirical_pe(start, components, data).pooled;
    lv.zero = lv.pe == 0.0;
  });

  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& lv : out.levels) {
    if (lv.zero) continue;
    xs.push_back(lv.gap_squared);
    ys.push_back(std::log(lv.pe));
  }
  out.nonzero_levels = xs.size();
  const LineFit line = least_squares_line(xs, ys);
  out.slope = line.slope;
  out.intercept = line.intercept;
  out.correlation = line.correlation;

  std::vector<std::size_t> order(out.levels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.levels[a].gap_squared < out.levels[b].gap_squared; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (out.levels[order[i]].pe > out.levels[order[i - 1]].pe) out.monotone = false;
  }
  return out;
}

RestrictedMoments restricted_moments(const Eigen::Ref<const Matrix>& covariates, std::span<const std::size_t> membership) {
  if (membership.empty()) throw std::invalid_argument("restricted_moments: membership is empty");
  const auto n = static_cast<std::size_t>(covariates.rows());
  const auto d = static_cast<Eigen::Index>(covariates.cols());
  Matrix tau(static_cast<Eigen::Index>(membership.size()), d);
  for (std::size_t r = 0; r < membership.size(); ++r) {
    if (membership[r] >= n) throw std::invalid_argument("restricted_moments: member index out of range");
    tau.row(static_cast<Eigen::Index>(r)) = covariates.row(static_cast<Eigen::Index>(membership[r]));
  }
  RestrictedMoments out;
  out.sample_count = membership.size();
  out.volume_hat = static_cast<double>(out.sample_count) / static_cast<double>(n);
  const auto m = static_cast<double>(out.sample_count);
  out.mean_hat = tau.colwise().sum().transpose() / m;
  const Matrix second = (tau.transpose() * tau) / m;
  out.iterative = static_cast<std::size_t>(d) > kDenseEigenLimit;
  if (out.sample_count < static_cast<std::size_t>(d)) {
    out.rank_deficient = true;
    out.second_moment_min_singular = 0.0;
    return out;
  }
  if (!out.iterative) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(second), Eigen::EigenvaluesOnly);
    out.second_moment_min_singular = std::max(eig.eigenvalues()(0), 0.0);
  } else {
    bool failed = false;
    out.second_moment_min_singular = smallest_eigenvalue_inverse_iteration(second, failed);
    out.rank_deficient = failed;
  }
  return out;
}

std::vector<std::size_t> halfspace_membership(const Eigen::Ref<const Matrix>& covariates, double nu) {
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("halfspace_membership: nu must be in (0, 1]");
  const auto n = static_cast<std::size_t>(covariates.rows());
  const auto m = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(nu * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return covariates(static_cast<Eigen::Index>(a), 0) > covariates(static_cast<Eigen::Index>(b), 0);
  });
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

NormProbe restricted_norm_probe(const Eigen::Ref<const Matrix>& covariates, std::span<const std::size_t> membership,
                                double pi_min_hat) {
  if (membership.empty()) throw std::invalid_argument("restricted_norm_probe: membership is empty");
  if (!(pi_min_hat > 0.0 && pi_min_hat <= 1.0)) throw std::invalid_argument("restricted_norm_probe: pi_min_hat must be in (0, 1]");
  NormProbe p;
  for (std::size_t i : membership) {
    if (i >= static_cast<std::size_t>(covariates.rows())) throw std::invalid_argument("restricted_norm_probe: index out of range");
    const double norm = covariates.row(static_cast<Eigen::Index>(i)).norm();
    if (norm > p.max_norm) {
      p.max_norm = norm;
      p.witness = i;
    }
  }
  const auto d = static_cast<double>(covariates.cols());
  p.rate = std::sqrt(d * (1.0 + std::log(d)) * (1.0 + std::log(1.0 / pi_min_hat)));
  p.ratio = p.max_norm / p.rate;
  return p;
}

EtaReport eta_probe(const ParameterSet& params, const SoftminConfig& softmin, const Dataset& data) {
  softmin.validate();
  if (params.d() != data.d()) throw std::invalid_argument("eta_probe: dimension mismatch");
  const std::size_t k = params.k();
  EtaReport r;
  r.beta = softmin.beta;
  std::vector<double> on(k, kInfinity);
  std::vector<double> off(k, -kInfinity);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Vector sq = squared_residuals(params, data.x(i), data.y(i));
    const std::size_t cell = argmin_lowest(sq);
    const Vector p = softmin_weights(sq, softmin.beta);
    ++sizes[cell];
    for (std::size_t j = 0; j < k; ++j) {
      const double pj = p(static_cast<Eigen::Index>(j));
      if (j == cell) {
        on[j] = std::min(on[j], pj);
      } else {
        off[j] = std::max(off[j], pj);
      }
    }
  }
  r.per_cell_min_on.assign(k, kNaN);
  r.per_cell_max_off.assign(k, kNaN);
  for (std::size_t j = 0; j < k; ++j) {
    if (sizes[j] == 0) {
      r.excluded_cells.push_back(j);
    } else {
      r.per_cell_min_on[j] = on[j];
      r.min_on_cell = std::min(r.min_on_cell, on[j]);
    }
    if (off[j] > -kInfinity) {
      r.per_cell_max_off[j] = off[j];
      r.max_off_cell = std::max(r.max_off_cell, off[j]);
    }
  }
  const GeometryReport geo = geometry_report(params, data);
  r.delta_hat = geo.delta_hat;
  r.lambda_hat = geo.lambda_hat;
  r.ordered = !(geo.delta_hat > geo.lambda_hat) || r.min_on_cell >= r.max_off_cell;
  return r;
}

FloorScaling floor_scaling_probe(const FloorScalingConfig& cfg, const Rng& rng, std::size_t jobs) {
  if (cfg.repetitions < 1) throw std::invalid_argument("floor_scaling_probe: repetitions must be >= 1");
  if (cfg.gamma_grid.size() < 2 || cfg.misspec_grid.size() < 2) {
    throw std::invalid_argument("floor_scaling_probe: grids need at least 2 points");
  }
  cfg.generator.validate();
  Rng comp_rng = rng.split("components");
  const ParameterSet components = draw_components(cfg.generator, comp_rng);

  std::vector<std::pair<double, double>> cells;
  auto add_cell = [&](double g, double m) {
    if (std::find(cells.begin(), cells.end(), std::pair{g, m}) == cells.end()) cells.emplace_back(g, m);
  };
  for (double g : cfg.gamma_grid) add_cell(g, cfg.base_misspec);
  for (double m : cfg.misspec_grid) add_cell(cfg.base_gamma, m);

  std::vector<double> misspecs;
  for (const auto& c : cells) {
    if (std::find(misspecs.begin(), misspecs.end(), c.second) == misspecs.end()) misspecs.push_back(c.second);
  }

  std::vector<ParameterSet> references(misspecs.size());
  parallel_for(misspecs.size(), jobs, [&](std::size_t i) {
    GeneratorSpec spec = cfg.generator;
    spec.n = cfg.reference_samples;
    spec.misspec_level = misspecs[i];
    Rng data_rng = rng.split("reference", real_key(misspecs[i]));
    const Dataset data = generate(spec, components, data_rng).data;
    SolverConfig sc = cfg.solver;
    sc.split = SplitMode::NoSplit;
    sc.gamma = cfg.reference_gamma;
    sc.iterations = cfg.reference_iterations;
    sc.record_every = cfg.reference_iterations;
    sc.record_diagnostics = false;
    references[i] = (cfg.method == SolverKind::AM ? run_gradient_am(data, components, sc)
                                                  : run_gradient_em(data, components, sc))
                        .final_params();
  });
  auto reference_for = [&](double m) -> const ParameterSet& {
    return references[static_cast<std::size_t>(std::find(misspecs.begin(), misspecs.end(), m) - misspecs.begin())];
  };

  const std::size_t reps = cfg.repetitions;
  std::vector<std::vector<double>> curves(cells.size() * reps);
  std::vector<std::vector<double>> times(cells.size());
  parallel_for(cells.size() * reps, jobs, [&](std::size_t job) {
    const std::size_t c = job / reps;
    const std::size_t r = job % reps;
    const auto [gamma, misspec] = cells[c];
    const Rng cell_rng = rng.split("cell", real_key(gamma) ^ std::bit_cast<std::uint64_t>(misspec)).split(r);
    const ParameterSet& reference = reference_for(misspec);

    GeneratorSpec spec = cfg.generator;
    spec.misspec_level = misspec;
    Rng data_rng = cell_rng.split("data");
    const Dataset data = generate(spec, components, data_rng).data;
    Rng init_rng = cell_rng.split("init");
    const ParameterSet start = sample_initialization(reference, cfg.init, init_rng);
    SolverConfig sc = cfg.solver;
    sc.gamma = gamma;
    sc.record_diagnostics = false;
    sc.shuffle_seed = cell_rng.split("shuffle").next_u64();
    const Trajectory traj = cfg.method == SolverKind::AM ? run_gradient_am(data, start, sc, reference)
                                                         : run_gradient_em(data, start, sc, reference);
    std::vector<double> curve;
    curve.reserve(traj.records.size());
    for (const auto& rec : traj.records) curve.push_back(*std::max_element(rec.distances.begin(), rec.distances.end()));
    curves[job] = std::move(curve);
    if (r == 0) {
      for (const auto& rec : traj.records) times[c].push_back(static_cast<double>(rec.t));
    }
  });

  std::vector<FloorCell> fitted(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    FloorCell& cell = fitted[c];
    cell.gamma = cells[c].first;
    cell.misspec = cells[c].second;
    cell.mean_curve.assign(times[c].size(), 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t t = 0; t < times[c].size(); ++t) cell.mean_curve[t] += curves[c * reps + r][t];
    }
    for (double& v : cell.mean_curve) v /= static_cast<double>(reps);
    bool finite = std::all_of(cell.mean_curve.begin(), cell.mean_curve.end(), [](double v) { return std::isfinite(v); });
    if (finite) {
      cell.fit = fit_contraction(times[c], cell.mean_curve);
      cell.excluded = cell.fit.divergent || cell.fit.no_decay || !(cell.fit.rho_hat < 1.0);
    } else {
      cell.fit.divergent = true;
      cell.excluded = true;
    }
  }
  auto find_cell = [&](double g, double m) -> const FloorCell& {
    for (const auto& c : fitted) {
      if (c.gamma == g && c.misspec == m) return c;
    }
    throw std::logic_error("floor_scaling_probe: missing cell");
  };

  FloorScaling out;
  for (double g : cfg.gamma_grid) out.gamma_cells.push_back(find_cell(g, cfg.base_misspec));
  for (double m : cfg.misspec_grid) out.misspec_cells.push_back(find_cell(cfg.base_gamma, m));

  auto ratio = [](const FloorCell& num, const FloorCell& den) {
    if (num.excluded || den.excluded || !(den.fit.floor_hat > 0.0)) return kNaN;
    return num.fit.floor_hat / den.fit.floor_hat;
  };
  for (std::size_t i = 0; i + 1 < out.gamma_cells.size(); ++i) {
    out.gamma_ratios.push_back(ratio(out.gamma_cells[i], out.gamma_cells[i + 1]));
    if (out.gamma_cells[i + 1].fit.floor_hat < out.gamma_cells[i].fit.floor_hat) out.monotone_gamma = false;
  }
  for (std::size_t i = 0; i + 1 < out.misspec_cells.size(); ++i) {
    out.misspec_ratios.push_back(ratio(out.misspec_cells[i + 1], out.misspec_cells[i]));
    if (out.misspec_cells[i + 1].fit.floor_hat < out.misspec_cells[i].fit.floor_hat) out.monotone_misspec = false;
  }
  return out;
}

}  // namespace mixreg
