#pragma once

#include "mixreg/core.hpp"
#include "mixreg/geometry.hpp"
#include "mixreg/losses.hpp"

namespace mixreg {

/// How samples are consumed across iterations.
///   TwoTBlocks       one seeded shuffle, then 2T contiguous blocks of
///                    n' = floor(n / 2T); iteration t steps on block 2t+1
///                    with cells taken from the current iterate. Block 2t
///                    is reserved and not read.
///   PerIterationPair every iteration draws a fresh seeded shuffle and steps
///                    on its second half (n' = floor(n / 2)).
///   NoSplit          every iteration uses all n samples for both stages.
enum class SplitMode { TwoTBlocks, PerIterationPair, NoSplit };

struct SolverConfig {
  double gamma = 0.5;
  std::size_t iterations = 100;
  SplitMode split = SplitMode::TwoTBlocks;
  SoftminConfig softmin{};  ///< EM only
  std::size_t record_every = 1;
  std::uint64_t shuffle_seed = 0;
  /// Evaluate loss, cell sizes and margins over the full dataset per record.
  bool record_diagnostics = true;

  /// Throws std::invalid_argument for bad values and InfeasibleError when
  /// n is too small for the split mode.
  void validate(std::size_t n) const;
  std::size_t block_size(std::size_t n) const;
};

struct IterationRecord {
  std::size_t t = 0;
  ParameterSet params;
  std::vector<double> distances;  ///< to the reference under the t = 0 matching
  double loss = 0.0;              ///< empirical loss over the full dataset
  std::vector<std::size_t> cell_sizes;  ///< full-dataset partition under params
  double mean_margin = 0.0;       ///< mean gap between the two largest soft-min weights (EM)
  double millis = 0.0;            ///< wall-clock of the iteration that produced params
};

struct Trajectory {
  std::vector<IterationRecord> records;
  std::vector<std::size_t> matching;  ///< init component j tracks reference component matching[j]
  bool has_reference = false;
  std::size_t block_size = 0;

  const ParameterSet& final_params() const { return records.back().params; }
  /// Distance series of one component across records.
  std::vector<double> distance_series(std::size_t component) const;
  /// max_j distance at the first and last record.
  double initial_max_distance() const;
  double final_max_distance() const;
};

/// Same cell rule as optimal_partition.
Partition am_partition_step(const ParameterSet& params, const Batch& batch);

/// theta_j - (2 gamma / n') sum_{i in I_j} (x_i x_i^T theta_j - y_i x_i),
/// n' = batch size. Empty cells leave theta_j unchanged.
ParameterSet am_gradient_step(const ParameterSet& params, const Batch& batch, const Partition& sets, double gamma);

/// Row i holds the soft-min weights of sample i.
Matrix em_probability_step(const ParameterSet& params, const SoftminConfig& softmin, const Batch& batch);

/// theta_j - (2 gamma / n') sum_i p_ij (x_i x_i^T theta_j - y_i x_i).
ParameterSet em_gradient_step(const ParameterSet& params, const Eigen::Ref<const Matrix>& probs, const Batch& batch,
                              double gamma);

Trajectory run_gradient_am(const Dataset& data, const ParameterSet& init, const SolverConfig& cfg,
                           const std::optional<ParameterSet>& reference = std::nullopt);
Trajectory run_gradient_em(const Dataset& data, const ParameterSet& init, const SolverConfig& cfg,
                           const std::optional<ParameterSet>& reference = std::nullopt);

}  // namespace mixreg
