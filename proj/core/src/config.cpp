#include "mixreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace mixreg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
  });
}

double to_double(const std::string& key, std::string_view s) {
  s = trim(s);
  if (s == "inf" || s == "+inf") return kInfinity;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw ConfigError(key, "expected a real number, got '" + std::string(s) + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw ConfigError(key, "expected a non-negative integer, got '" + std::string(s) + "'");
  return v;
}

std::size_t to_size(const std::string& key, std::string_view s) { return static_cast<std::size_t>(to_u64(key, s)); }

bool to_bool(const std::string& key, std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, std::string_view s) {
  std::vector<double> out;
  for (auto item : split_list(s)) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, std::string_view s) {
  std::vector<std::size_t> out;
  for (auto item : split_list(s)) out.push_back(to_size(key, item));
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

ExperimentKind to_kind(const std::string& key, std::string_view s) {
  s = trim(s);
  if (s == "convergence") return ExperimentKind::Convergence;
  if (s == "separation_sweep") return ExperimentKind::SeparationSweep;
  if (s == "sample_sweep") return ExperimentKind::SampleSweep;
  if (s == "step_sweep") return ExperimentKind::StepSweep;
  if (s == "restricted_spectra") return ExperimentKind::RestrictedSpectra;
  if (s == "rademacher") return ExperimentKind::Rademacher;
  throw ConfigError(key, "unknown experiment kind '" + std::string(s) + "'");
}

SplitMode to_split(const std::string& key, std::string_view s) {
  s = trim(s);
  if (s == "two_t_blocks") return SplitMode::TwoTBlocks;
  if (s == "per_iteration_pair") return SplitMode::PerIterationPair;
  if (s == "no_split") return SplitMode::NoSplit;
  throw ConfigError(key, "expected two_t_blocks, per_iteration_pair or no_split, got '" + std::string(s) + "'");
}

MethodChoice to_method(const std::string& key, std::string_view s) {
  s = trim(s);
  if (s == "am") return MethodChoice::AM;
  if (s == "em") return MethodChoice::EM;
  if (s == "both") return MethodChoice::Both;
  throw ConfigError(key, "expected am, em or both, got '" + std::string(s) + "'");
}

struct KeySpec {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MIXREG_REAL(name, field)                                                                             \
  KeySpec {                                                                                                  \
    name, [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.field = to_double(k, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.field); }                                               \
  }
#define MIXREG_SIZE(name, field)                                                                           \
  KeySpec {                                                                                                \
    name, [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.field = to_size(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                                  \
  }
#define MIXREG_REALS(name, field)                                                                             \
  KeySpec {                                                                                                   \
    name, [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.field = to_doubles(k, v); }, \
        [](const ExperimentConfig& c) { return fmt_list(c.field); }                                           \
  }
#define MIXREG_SIZES(name, field)                                                                           \
  KeySpec {                                                                                                 \
    name, [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.field = to_sizes(k, v); }, \
        [](const ExperimentConfig& c) { return fmt_list(c.field); }                                         \
  }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"experiment.kind", [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.kind = to_kind(k, v); },
       [](const ExperimentConfig& c) { return to_string(c.kind); }},
      {"experiment.method",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.method = to_method(k, v); },
       [](const ExperimentConfig& c) { return to_string(c.method); }},
      {"experiment.seed", [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.seed = to_u64(k, v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      MIXREG_SIZE("experiment.repetitions", repetitions),
      {"experiment.output", [](ExperimentConfig& c, const std::string&, std::string_view v) { c.output = std::string(trim(v)); },
       [](const ExperimentConfig& c) { return c.output; }},
      {"experiment.timing",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) { c.timing = to_bool(k, v); },
       [](const ExperimentConfig& c) { return std::string(c.timing ? "true" : "false"); }},
      {"experiment.data",
       [](ExperimentConfig& c, const std::string&, std::string_view v) {
         const auto s = trim(v);
         if (s.empty()) {
           c.data_path.reset();
         } else {
           c.data_path = std::string(s);
         }
       },
       [](const ExperimentConfig& c) { return c.data_path.value_or(""); }},

      {"generator.mode",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) {
         v = trim(v);
         if (v == "realizable") {
           c.generator.mode = GenerationMode::Realizable;
         } else if (v == "agnostic") {
           c.generator.mode = GenerationMode::Agnostic;
         } else {
           throw ConfigError(k, "expected realizable or agnostic, got '" + std::string(v) + "'");
         }
       },
       [](const ExperimentConfig& c) {
         return std::string(c.generator.mode == GenerationMode::Realizable ? "realizable" : "agnostic");
       }},
      MIXREG_SIZE("generator.n", generator.n),
      MIXREG_SIZE("generator.d", generator.d),
      MIXREG_SIZE("generator.k", generator.k),
      MIXREG_REAL("generator.sigma", generator.sigma),
      MIXREG_REALS("generator.mixing_weights", generator.mixing_weights),
      MIXREG_REAL("generator.component_scale", generator.component_scale),
      MIXREG_REAL("generator.misspec_level", generator.misspec_level),
      {"generator.label_bound",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) {
         v = trim(v);
         if (v == "none" || v.empty()) {
           c.generator.label_bound.reset();
         } else {
           c.generator.label_bound = to_double(k, v);
         }
       },
       [](const ExperimentConfig& c) {
         return c.generator.label_bound ? fmt(*c.generator.label_bound) : std::string("none");
       }},
      MIXREG_REAL("generator.separation_margin", generator.separation_margin),

      MIXREG_REAL("solver.gamma", solver.gamma),
      MIXREG_SIZE("solver.iterations", solver.iterations),
      {"solver.split",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) {
         v = trim(v);
         if (v == "default") {
           c.split.reset();
         } else {
           c.split = to_split(k, v);
         }
       },
       [](const ExperimentConfig& c) { return c.split ? to_string(*c.split) : std::string("default"); }},
      {"solver.beta",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) {
         v = trim(v);
         c.solver.softmin.beta = v == "hard" ? kInfinity : to_double(k, v);
       },
       [](const ExperimentConfig& c) { return c.solver.softmin.is_hard_min() ? std::string("hard") : fmt(c.solver.softmin.beta); }},
      MIXREG_SIZE("solver.record_every", solver.record_every),

      MIXREG_REAL("init.c_ini", init.c_ini),
      {"init.mode",
       [](ExperimentConfig& c, const std::string& k, std::string_view v) {
         v = trim(v);
         if (v == "sphere") {
           c.init.mode = InitMode::SphereSurface;
         } else if (v == "ball") {
           c.init.mode = InitMode::Ball;
         } else {
           throw ConfigError(k, "expected sphere or ball, got '" + std::string(v) + "'");
         }
       },
       [](const ExperimentConfig& c) { return std::string(c.init.mode == InitMode::Ball ? "ball" : "sphere"); }},

      MIXREG_REAL("convergence.tolerance", convergence_tolerance),

      {"sweep.parameter",
       [](ExperimentConfig& c, const std::string&, std::string_view v) { c.sweep_parameter = std::string(trim(v)); },
       [](const ExperimentConfig& c) { return c.sweep_parameter; }},
      MIXREG_REALS("sweep.values", sweep_values),

      MIXREG_REALS("floor.gamma_grid", floor_gamma_grid),
      MIXREG_REALS("floor.misspec_grid", floor_misspec_grid),
      MIXREG_REAL("floor.base_gamma", floor_base_gamma),
      MIXREG_REAL("floor.base_misspec", floor_base_misspec),
      MIXREG_SIZE("floor.reference_samples", floor_reference_samples),
      MIXREG_SIZE("floor.reference_iterations", floor_reference_iterations),
      MIXREG_REAL("floor.reference_gamma", floor_reference_gamma),

      MIXREG_SIZE("restricted.n", restricted_n),
      MIXREG_SIZES("restricted.dims", restricted_dims),
      MIXREG_REALS("restricted.nu", restricted_nu),

      MIXREG_SIZES("rademacher.k", rademacher_k),
      MIXREG_REALS("rademacher.radius", rademacher_radius),
      MIXREG_SIZES("rademacher.n", rademacher_n),
      MIXREG_SIZE("rademacher.d", rademacher_d),
      MIXREG_SIZE("rademacher.trials", rademacher_trials),
      MIXREG_SIZE("rademacher.budget", rademacher_budget),
      MIXREG_SIZE("lipschitz.trials", lipschitz_trials),
      MIXREG_SIZE("lipschitz.dim", lipschitz_dim),
  };
  return table;
}

#undef MIXREG_REAL
#undef MIXREG_SIZE
#undef MIXREG_REALS
#undef MIXREG_SIZES

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    ++line_no;
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!valid_key(key)) throw ConfigError(key, "line " + std::to_string(line_no) + ": malformed key");
    kv[key] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::pair<std::string, std::string> parse_assignment(std::string_view text) {
  const auto kv = parse_key_values(text);
  if (kv.size() != 1) throw ConfigError("", "expected a single key=value assignment");
  return *kv.begin();
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Convergence: return "convergence";
    case ExperimentKind::SeparationSweep: return "separation_sweep";
    case ExperimentKind::SampleSweep: return "sample_sweep";
    case ExperimentKind::StepSweep: return "step_sweep";
    case ExperimentKind::RestrictedSpectra: return "restricted_spectra";
    case ExperimentKind::Rademacher: return "rademacher";
  }
  return "unknown";
}

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::TwoTBlocks: return "two_t_blocks";
    case SplitMode::PerIterationPair: return "per_iteration_pair";
    case SplitMode::NoSplit: return "no_split";
  }
  return "unknown";
}

std::string to_string(MethodChoice method) {
  switch (method) {
    case MethodChoice::AM: return "am";
    case MethodChoice::EM: return "em";
    case MethodChoice::Both: return "both";
  }
  return "unknown";
}

SplitMode ExperimentConfig::split_for(SolverKind s) const {
  if (split) return *split;
  return s == SolverKind::AM ? SplitMode::TwoTBlocks : SplitMode::NoSplit;
}

SolverConfig ExperimentConfig::solver_for(SolverKind s) const {
  SolverConfig c = solver;
  c.split = split_for(s);
  return c;
}

void ExperimentConfig::validate() const {
  auto guard = [](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  if (repetitions < 1) throw ConfigError("experiment.repetitions", "must be >= 1");
  if (!data_path) {
    try {
      generator.validate();
    } catch (const std::invalid_argument& e) {
      // Messages look like "GeneratorSpec.<field>: ...".
      std::string msg = e.what();
      const std::string prefix = "GeneratorSpec.";
      std::string key = "generator";
      if (msg.rfind(prefix, 0) == 0) key += "." + msg.substr(prefix.size(), msg.find(':') - prefix.size());
      throw ConfigError(key, msg);
    }
  }
  if (!(solver.gamma >= 0.0) || !std::isfinite(solver.gamma)) throw ConfigError("solver.gamma", "must be finite and >= 0");
  if (solver.iterations < 1) throw ConfigError("solver.iterations", "must be >= 1");
  if (solver.record_every < 1) throw ConfigError("solver.record_every", "must be >= 1");
  guard("solver.beta", [&] { solver.softmin.validate(); });
  if (!(init.c_ini >= 0.0)) throw ConfigError("init.c_ini", "must be >= 0");
  if (!(convergence_tolerance > 0.0)) throw ConfigError("convergence.tolerance", "must be > 0");

  switch (kind) {
    case ExperimentKind::SeparationSweep:
      if (sweep_parameter != "separation_margin" && sweep_parameter != "component_scale") {
        throw ConfigError("sweep.parameter", "separation_sweep needs separation_margin or component_scale");
      }
      if (sweep_values.size() < 3) throw ConfigError("sweep.values", "separation_sweep needs at least 3 values");
      break;
    case ExperimentKind::SampleSweep:
      if (sweep_parameter != "n") throw ConfigError("sweep.parameter", "sample_sweep needs n");
      if (sweep_values.empty()) throw ConfigError("sweep.values", "sample_sweep needs at least one value");
      for (double v : sweep_values) {
        if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("sweep.values", "sample sizes must be positive integers");
      }
      break;
    case ExperimentKind::StepSweep:
      if (floor_gamma_grid.size() < 2) throw ConfigError("floor.gamma_grid", "needs at least 2 values");
      if (floor_misspec_grid.size() < 2) throw ConfigError("floor.misspec_grid", "needs at least 2 values");
      if (!std::is_sorted(floor_gamma_grid.begin(), floor_gamma_grid.end())) throw ConfigError("floor.gamma_grid", "must be ascending");
      if (!std::is_sorted(floor_misspec_grid.begin(), floor_misspec_grid.end())) throw ConfigError("floor.misspec_grid", "must be ascending");
      if (generator.mode != GenerationMode::Agnostic) throw ConfigError("generator.mode", "step_sweep varies misspec_level and needs agnostic");
      if (floor_reference_samples < 1) throw ConfigError("floor.reference_samples", "must be >= 1");
      if (floor_reference_iterations < 1) throw ConfigError("floor.reference_iterations", "must be >= 1");
      break;
    case ExperimentKind::RestrictedSpectra:
      if (restricted_n < 1) throw ConfigError("restricted.n", "must be >= 1");
      if (restricted_dims.empty()) throw ConfigError("restricted.dims", "needs at least one value");
      for (auto d : restricted_dims) {
        if (d < 1) throw ConfigError("restricted.dims", "must be >= 1");
      }
      for (double nu : restricted_nu) {
        if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("restricted.nu", "values must lie in (0, 1]");
      }
      if (restricted_nu.empty()) throw ConfigError("restricted.nu", "needs at least one value");
      break;
    case ExperimentKind::Rademacher:
      if (rademacher_k.empty()) throw ConfigError("rademacher.k", "needs at least one value");
      for (auto k : rademacher_k) {
        if (k < 1) throw ConfigError("rademacher.k", "must be >= 1");
      }
      for (double r : rademacher_radius) {
        if (!(r >= 0.0)) throw ConfigError("rademacher.radius", "must be >= 0");
      }
      for (auto n : rademacher_n) {
        if (n < 1) throw ConfigError("rademacher.n", "must be >= 1");
      }
      if (rademacher_d < 1) throw ConfigError("rademacher.d", "must be >= 1");
      if (rademacher_trials < 1) throw ConfigError("rademacher.trials", "must be >= 1");
      if (lipschitz_dim < 1) throw ConfigError("lipschitz.dim", "must be >= 1");
      break;
    case ExperimentKind::Convergence:
      break;
  }
}

ExperimentConfig experiment_config_from(const KeyValues& kv) {
  ExperimentConfig cfg;
  const auto& table = key_table();
  for (const auto& [key, value] : kv) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const KeySpec& s) { return s.key == key; });
    if (it == table.end()) throw ConfigError(key, "unknown key");
    it->set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

KeyValues to_key_values(const ExperimentConfig& cfg) {
  KeyValues kv;
  for (const auto& spec : key_table()) kv[spec.key] = spec.get(cfg);
  return kv;
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys;
  for (const auto& spec : key_table()) keys.push_back(spec.key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace mixreg
