#pragma once

#include "mixreg/datagen.hpp"
#include "mixreg/diagnostics.hpp"
#include "mixreg/geometry.hpp"
#include "mixreg/solvers.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mixreg {

/// Invalid configuration. key() names the offending key (empty for syntax
/// errors that precede a key).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Ordered key=value pairs. Later assignments of a key replace earlier ones.
using KeyValues = std::map<std::string, std::string>;

/// Lines are `key = value`; blank lines and lines starting with '#' are
/// ignored. Keys are dotted identifiers.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);
/// Parses a single `key=value` override.
std::pair<std::string, std::string> parse_assignment(std::string_view text);

enum class ExperimentKind { Convergence, SeparationSweep, SampleSweep, StepSweep, RestrictedSpectra, Rademacher };
enum class MethodChoice { AM, EM, Both };

std::string to_string(ExperimentKind kind);
std::string to_string(SplitMode mode);
std::string to_string(MethodChoice method);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Convergence;
  MethodChoice method = MethodChoice::AM;
  GeneratorSpec generator;
  SolverConfig solver;
  /// Unset: TwoTBlocks for AM and NoSplit for EM.
  std::optional<SplitMode> split;
  InitConfig init;
  std::uint64_t seed = 0;
  std::size_t repetitions = 1;
  std::string output;
  bool timing = false;
  std::optional<std::string> data_path;

  /// Success criterion for convergence runs: final <= tolerance * initial.
  double convergence_tolerance = 1e-2;

  std::string sweep_parameter;  ///< separation_sweep: separation_margin | component_scale; sample_sweep: n
  std::vector<double> sweep_values;

  std::vector<double> floor_gamma_grid{0.125, 0.25, 0.5};
  std::vector<double> floor_misspec_grid{0.5, 1.0, 2.0};
  double floor_base_gamma = 0.25;
  double floor_base_misspec = 1.0;
  std::size_t floor_reference_samples = 200000;
  std::size_t floor_reference_iterations = 200;
  double floor_reference_gamma = 0.5;

  std::size_t restricted_n = 10000;
  std::vector<std::size_t> restricted_dims{10};
  std::vector<double> restricted_nu{0.5, 0.25, 0.1};

  std::vector<std::size_t> rademacher_k{1, 2, 4};
  std::vector<double> rademacher_radius{0.5, 1.0};
  std::vector<std::size_t> rademacher_n{256, 1024, 4096};
  std::size_t rademacher_d = 5;
  std::size_t rademacher_trials = 20;
  std::size_t rademacher_budget = 320;
  std::size_t lipschitz_trials = 100000;
  std::size_t lipschitz_dim = 2;

  SplitMode split_for(SolverKind solver) const;
  SolverConfig solver_for(SolverKind solver) const;
  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

/// Unknown keys and malformed values raise ConfigError naming the key.
ExperimentConfig experiment_config_from(const KeyValues& kv);
/// Every key with its effective value, for echoing into results.
KeyValues to_key_values(const ExperimentConfig& cfg);

/// All recognised keys, sorted.
std::vector<std::string> known_config_keys();

}  // namespace mixreg
