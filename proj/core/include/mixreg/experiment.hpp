#pragma once

#include "mixreg/config.hpp"
#include "mixreg/records.hpp"

namespace mixreg {

struct ExperimentResult {
  std::vector<Record> records;
  /// Hard assertions that failed; empty on success.
  std::vector<std::string> failures;
  /// Record kind used for the CSV projection.
  std::string csv_kind;

  bool passed() const { return failures.empty(); }
};

/// Runs the pipeline selected by cfg.kind. Repetitions and sweep cells run
/// on up to `jobs` threads; records are ordered by (cell, repetition).
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1);

/// Both solvers on identical data, initialization and blocks.
ExperimentResult compare_solvers(const ExperimentConfig& cfg, std::size_t jobs = 1);

/// Geometry of the generating components on the configured data.
ExperimentResult geometry_experiment(const ExperimentConfig& cfg);

/// The dataset a convergence run would use for `repetition`.
Dataset experiment_dataset(const ExperimentConfig& cfg, std::size_t repetition);

Record config_record(const ExperimentConfig& cfg);
Record geometry_record(const GeometryReport& report);
std::vector<Record> trajectory_records(const Trajectory& traj, const std::string& solver, std::size_t repetition,
                                       bool timing);

/// JSON-lines to `path` (stdout when empty), plus the CSV projection when
/// csv_path is non-empty.
void write_results(const ExperimentResult& result, const std::string& path, const std::string& csv_path = "");

}  // namespace mixreg
