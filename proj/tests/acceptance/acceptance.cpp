// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <mixreg/config.hpp>
#include <mixreg/experiment.hpp>
#include <mixreg/losses.hpp>
#include <mixreg/records.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef MIXREG_CONFIG_DIR
#error "MIXREG_CONFIG_DIR must point at the configs/ directory"
#endif

using namespace mixreg;

namespace {

// Tolerances.
constexpr double kHardBeta = 1e6;
constexpr double kHardTol = 1e-6;
constexpr double kUniformTol = 1e-12;
constexpr double kMinResidualGap = 0.1;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-5;
constexpr double kBetaZeroRelTol = 1e-14;
constexpr double kConvergenceRatio = 1e-2;
constexpr std::size_t kConvergenceMinSuccess = 18;
constexpr double kGammaRatioLo = 0.3, kGammaRatioHi = 0.8;
constexpr double kMisspecRatioLo = 1.5, kMisspecRatioHi = 2.5;
constexpr std::size_t kMinNonzeroLevels = 4;
constexpr double kMaxCorrelation = -0.9;
constexpr double kSigmaMinFactor = 0.1;
constexpr double kMeanNormFactor = 4.0;
constexpr double kEtaTopLevel = 0.99;
constexpr double kLipschitzLo = 0.75, kLipschitzHi = 1.0;
constexpr double kShrinkLo = 0.35, kShrinkHi = 0.7;

const std::filesystem::path kConfigDir = MIXREG_CONFIG_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

ExperimentConfig load(const std::string& name, const KeyValues& overrides = {}) {
  KeyValues kv = load_key_values(kConfigDir / name);
  for (const auto& [k, v] : overrides) kv[k] = v;
  return experiment_config_from(kv);
}

std::string jsonl(const ExperimentResult& r) {
  std::ostringstream out;
  write_jsonl(out, r.records);
  return out.str();
}

std::vector<const Record*> of_kind(const ExperimentResult& r, std::string_view kind) {
  std::vector<const Record*> out;
  for (const auto& rec : r.records) {
    if (rec.kind() == kind) out.push_back(&rec);
  }
  return out;
}

double real(const Record& r, std::string_view key) {
  const FieldValue* v = r.find(key);
  if (!v) throw std::runtime_error("record " + r.kind() + " lacks " + std::string(key));
  if (const auto* d = std::get_if<double>(v)) return *d;
  if (const auto* u = std::get_if<std::uint64_t>(v)) return static_cast<double>(*u);
  if (const auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
  throw std::runtime_error("field " + std::string(key) + " is not numeric");
}

bool flag(const Record& r, std::string_view key) {
  const FieldValue* v = r.find(key);
  if (!v || !std::holds_alternative<bool>(*v)) throw std::runtime_error("record " + r.kind() + " lacks flag " + std::string(key));
  return std::get<bool>(*v);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Vector random_vector(Rng& rng, std::size_t d, double scale) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * rng.normal();
  return v;
}

ParameterSet random_params(Rng& rng, std::size_t k, std::size_t d) {
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return ParameterSet(std::move(m));
}

Outcome beta_limits() {
  Rng rng(101);
  double worst_hard = 0.0;
  double worst_uniform = 0.0;
  std::size_t instances = 0;
  while (instances < 1000) {
    const std::size_t k = 2 + rng.index(4);
    const std::size_t d = 1 + rng.index(5);
    const ParameterSet p = random_params(rng, k, d);
    const Vector x = random_vector(rng, d, 1.0);
    const double y = rng.normal();
    Vector sq = squared_residuals(p, x, y);
    std::sort(sq.data(), sq.data() + sq.size());
    if (sq(1) - sq(0) < kMinResidualGap) continue;
    ++instances;
    const double mean = squared_residuals(p, x, y).mean();
    worst_hard = std::max(worst_hard, std::abs(softmin_loss(p, kHardBeta, x, y) - min_loss(p, x, y)));
    worst_uniform = std::max(worst_uniform, std::abs(softmin_loss(p, 0.0, x, y) - mean));
  }
  return {worst_hard <= kHardTol && worst_uniform <= kUniformTol,
          "max |beta=1e6 - min| = " + num(worst_hard) + ", max |beta=0 - mean| = " + num(worst_uniform)};
}

Outcome gradient_oracle() {
  Rng rng(202);
  double worst_fd = 0.0;
  double worst_zero = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t k = 1 + rng.index(3);
    const std::size_t d = 1 + rng.index(5);
    const std::size_t n = 20 + rng.index(40);
    const double beta = rng.uniform(0.0, 5.0);
    const Dataset data(gaussian_matrix(rng, n, d), random_vector(rng, n, 2.0));
    const ParameterSet p = random_params(rng, k, d);
    const LossKind kind = LossKind::soft({beta});
    for (std::size_t j = 0; j < k; ++j) {
      const Vector g = softmin_full_gradient(p, beta, data, j);
      Vector fd(static_cast<Eigen::Index>(d));
      for (std::size_t c = 0; c < d; ++c) {
        Matrix plus = p.matrix();
        Matrix minus = p.matrix();
        plus(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) += kFdStep;
        minus(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) -= kFdStep;
        fd(static_cast<Eigen::Index>(c)) =
            (empirical_loss(ParameterSet(plus), data, kind) - empirical_loss(ParameterSet(minus), data, kind)) /
            (2.0 * kFdStep);
      }
      worst_fd = std::max(worst_fd, (g - fd).norm() / std::max(1.0, fd.norm()));

      const Vector g0 = softmin_full_gradient(p, 0.0, data, j);
      Vector uniform = Vector::Zero(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < n; ++i) uniform += (data.x(i).dot(p.component(j)) - data.y(i)) * data.x(i);
      uniform *= 2.0 / (static_cast<double>(k) * static_cast<double>(n));
      worst_zero = std::max(worst_zero, (g0 - uniform).norm() / std::max(1.0, uniform.norm()));
    }
  }
  return {worst_fd <= kFdRelTol && worst_zero <= kBetaZeroRelTol,
          "max finite-difference rel err = " + num(worst_fd) + ", beta=0 rel err = " + num(worst_zero)};
}

Outcome am_em_equivalence(const ExperimentResult& r) {
  const auto compares = of_kind(r, "compare");
  bool all = !compares.empty();
  for (const Record* c : compares) all = all && flag(*c, "identical");
  return {all && r.passed(), std::to_string(compares.size()) + " repetition(s), identical iterates = " + (all ? "yes" : "no")};
}

Outcome noiseless_convergence(const ExperimentResult& r) {
  std::map<std::uint64_t, bool> ok;
  for (const Record* run : of_kind(r, "run")) {
    const auto rep = static_cast<std::uint64_t>(real(*run, "repetition"));
    ok[rep] = real(*run, "final_max_distance") <= kConvergenceRatio * real(*run, "initial_max_distance");
  }
  double worst_rho = 0.0;
  for (const Record* fit : of_kind(r, "fit")) {
    const auto rep = static_cast<std::uint64_t>(real(*fit, "repetition"));
    const double rho = real(*fit, "rho_hat");
    worst_rho = std::max(worst_rho, rho);
    if (!(rho < 1.0)) ok[rep] = false;
  }
  std::size_t good = 0;
  for (const auto& [rep, v] : ok) good += v ? 1 : 0;
  return {ok.size() == 20 && good >= kConvergenceMinSuccess,
          std::to_string(good) + "/" + std::to_string(ok.size()) + " repetitions converged, max rho_hat = " + num(worst_rho)};
}

Outcome floor_scaling(const ExperimentResult& r) {
  const auto summaries = of_kind(r, "floor_summary");
  if (summaries.size() != 1) return {false, "missing floor_summary"};
  const Record& s = *summaries.front();
  bool pass = flag(s, "monotone_gamma") && flag(s, "monotone_misspec");
  std::string detail = "gamma-halving ratios";
  for (int i = 1; i <= 2; ++i) {
    const double g = real(s, "gamma_ratio_" + std::to_string(i));
    pass = pass && g >= kGammaRatioLo && g <= kGammaRatioHi;
    detail += " " + num(g);
  }
  detail += ", misspec-doubling ratios";
  for (int i = 1; i <= 2; ++i) {
    const double m = real(s, "misspec_ratio_" + std::to_string(i));
    pass = pass && m >= kMisspecRatioLo && m <= kMisspecRatioHi;
    detail += " " + num(m);
  }
  for (const Record* c : of_kind(r, "floor_cell")) pass = pass && !flag(*c, "excluded");
  return {pass && r.passed(), detail};
}

Outcome separation_decay(const ExperimentResult& r, const ExperimentResult& zero_init) {
  const auto fits = of_kind(r, "separation_fit");
  if (fits.size() != 1) return {false, "missing separation_fit"};
  const Record& f = *fits.front();
  const double nonzero = real(f, "nonzero_levels");
  const double corr = real(f, "correlation");
  bool zero_ok = !of_kind(zero_init, "separation_level").empty();
  for (const Record* lvl : of_kind(zero_init, "separation_level")) zero_ok = zero_ok && real(*lvl, "pe") == 0.0;
  return {nonzero >= kMinNonzeroLevels && corr <= kMaxCorrelation && flag(f, "monotone") && zero_ok,
          num(nonzero) + " nonzero levels, correlation = " + num(corr) +
              ", c_ini=0 gives P_e=0 at every level: " + (zero_ok ? "yes" : "no")};
}

Outcome restricted_spectra(const ExperimentResult& r) {
  const auto rows = of_kind(r, "restricted");
  bool pass = rows.size() == 3;
  std::string detail;
  for (const Record* row : rows) {
    const double nu = real(*row, "nu");
    const double smin = real(*row, "sigma_min");
    const double mean_sq = real(*row, "mean_norm_sq");
    pass = pass && smin >= kSigmaMinFactor * nu * nu && mean_sq <= kMeanNormFactor * std::log(1.0 / nu);
    detail += "nu=" + num(nu) + ": sigma_min " + num(smin) + " (>= " + num(kSigmaMinFactor * nu * nu) + "), |mu|^2 " +
              num(mean_sq) + " (<= " + num(kMeanNormFactor * std::log(1.0 / nu)) + "); ";
  }
  return {pass, detail};
}

Outcome eta_concentration(const ExperimentResult& r) {
  const auto levels = of_kind(r, "separation_level");
  bool pass = levels.size() >= 3;
  double prev = -1.0;
  std::string detail = "min on-cell probability by level:";
  for (const Record* lvl : levels) {
    const double v = real(*lvl, "eta_min_on_cell");
    pass = pass && v >= prev && real(*lvl, "beta") == 10.0;
    prev = v;
    detail += " " + num(v);
  }
  pass = pass && prev > kEtaTopLevel;
  return {pass, detail};
}

Outcome lipschitz(const ExperimentResult& r) {
  bool pass = true;
  bool saw_unit = false;
  std::string detail;
  for (const Record* row : of_kind(r, "lipschitz")) {
    const double radius = real(*row, "radius");
    const double ratio = real(*row, "max_ratio");
    const double bound = real(*row, "bound");
    pass = pass && ratio <= bound && real(*row, "trials") >= 1e5;
    if (radius == 1.0) {
      saw_unit = true;
      pass = pass && ratio >= kLipschitzLo * bound && ratio <= kLipschitzHi * bound;
    }
    detail += "R=" + num(radius) + ": " + num(ratio) + "/" + num(bound) + "; ";
  }
  return {pass && saw_unit, detail};
}

Outcome rademacher(const ExperimentResult& r) {
  bool pass = true;
  std::size_t checked = 0;
  double worst = 0.0;
  for (const Record* row : of_kind(r, "rademacher")) {
    const double radius = real(*row, "radius");
    if (radius != 0.5 && radius != 1.0) continue;
    ++checked;
    pass = pass && real(*row, "estimate") <= real(*row, "bound");
    worst = std::max(worst, real(*row, "estimate") / real(*row, "bound"));
  }
  double lo = kInfinity, hi = 0.0;
  std::size_t shrinks = 0;
  for (const Record* row : of_kind(r, "rademacher_shrink")) {
    const double radius = real(*row, "radius");
    if (radius != 0.5 && radius != 1.0) continue;
    ++shrinks;
    const double ratio = real(*row, "ratio");
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    pass = pass && ratio >= kShrinkLo && ratio <= kShrinkHi;
  }
  return {pass && checked == 18 && shrinks == 12,
          std::to_string(checked) + " cells, max estimate/bound = " + num(worst) + ", shrink ratios in [" + num(lo) +
              ", " + num(hi) + "]"};
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
  };

  struct Run {
    std::string config;
    KeyValues overrides;
    bool compare = false;
    ExperimentResult result;
  };
  std::vector<Run> runs{{"equivalence.cfg", {}, true, {}},
                        {"convergence.cfg", {}, false, {}},
                        {"step_sweep.cfg", {}, false, {}},
                        {"separation.cfg", {}, false, {}},
                        {"separation.cfg", {{"init.c_ini", "0"}}, false, {}},
                        {"restricted.cfg", {}, false, {}},
                        {"rademacher.cfg", {}, false, {}}};
  auto execute = [&](const Run& r, std::size_t j) {
    const ExperimentConfig cfg = load(r.config, r.overrides);
    return r.compare ? compare_solvers(cfg, j) : run_experiment(cfg, j);
  };
  std::string load_error;
  try {
    for (auto& r : runs) r.result = execute(r, jobs);
  } catch (const std::exception& e) {
    load_error = e.what();
  }
  auto guarded = [&](const std::function<Outcome()>& fn) {
    return [&, fn]() -> Outcome {
      if (!load_error.empty()) return {false, "experiment error: " + load_error};
      return fn();
    };
  };

  report(1, "beta limits", beta_limits);
  report(2, "gradient oracle", gradient_oracle);
  report(3, "AM/EM equivalence", guarded([&] { return am_em_equivalence(runs[0].result); }));
  report(4, "noiseless convergence", guarded([&] { return noiseless_convergence(runs[1].result); }));
  report(5, "floor scaling", guarded([&] { return floor_scaling(runs[2].result); }));
  report(6, "P_e separation decay", guarded([&] { return separation_decay(runs[3].result, runs[4].result); }));
  report(7, "restricted spectra", guarded([&] { return restricted_spectra(runs[5].result); }));
  report(8, "eta concentration", guarded([&] { return eta_concentration(runs[3].result); }));
  report(9, "Lipschitz bound", guarded([&] { return lipschitz(runs[6].result); }));
  report(10, "Rademacher bound", guarded([&] { return rademacher(runs[6].result); }));
  report(11, "determinism", guarded([&]() -> Outcome {
           const auto dir = std::filesystem::temp_directory_path() / "mixreg_acceptance";
           std::filesystem::create_directories(dir);
           std::size_t same = 0;
           std::string mismatched;
           for (std::size_t i = 0; i < runs.size(); ++i) {
             // Rerun on one thread, so the comparison also covers the job count.
             const ExperimentResult again = execute(runs[i], 1);
             const auto a = dir / ("first_" + std::to_string(i) + ".jsonl");
             const auto b = dir / ("second_" + std::to_string(i) + ".jsonl");
             write_results(runs[i].result, a.string(), a.string() + ".csv");
             write_results(again, b.string(), b.string() + ".csv");
             const bool equal = file_bytes(a) == file_bytes(b) && file_bytes(a.string() + ".csv") == file_bytes(b.string() + ".csv") &&
                                jsonl(runs[i].result) == jsonl(again);
             if (equal) {
               ++same;
             } else {
               mismatched += " " + runs[i].config;
             }
           }
           std::filesystem::remove_all(dir);
           return {same == runs.size(), std::to_string(same) + "/" + std::to_string(runs.size()) +
                                            " configs byte-identical on rerun" +
                                            (mismatched.empty() ? "" : "; differ:" + mismatched)};
         }));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
