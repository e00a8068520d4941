#pragma once

#include "mixreg/core.hpp"

namespace mixreg {

/// k index sets, one per component; together they partition the samples.
using Partition = std::vector<std::vector<std::size_t>>;

/// Best component per sample: the strictly smallest squared residual, with
/// ties going to the lowest index.
std::vector<std::size_t> assign_cells(const ParameterSet& params, const Batch& batch);
Partition partition_from_cells(std::span<const std::size_t> cells, std::size_t k);

Partition optimal_partition(const ParameterSet& params, const Batch& batch);
Partition optimal_partition(const ParameterSet& params, const Dataset& data);

/// Largest best-component residual |y_i - <x_i, theta_cell(i)>|.
double estimate_lambda(const ParameterSet& params, const Dataset& data);
/// Smallest residual against any non-best component; +inf when k = 1.
double estimate_delta(const ParameterSet& params, const Dataset& data);
/// Smallest cell size over n.
double estimate_pi_min(const ParameterSet& params, const Dataset& data);

struct SeparationCheck {
  bool holds = false;
  double separation = 0.0;  ///< left-hand side (delta_hat)
  double threshold = 0.0;   ///< right-hand side
};

struct GeometryReport {
  double lambda_hat = 0.0;
  double delta_hat = kInfinity;
  double pi_min_hat = 1.0;
  std::vector<std::size_t> counts;
  std::size_t n = 0;
  /// Sample attaining lambda_hat (n when the data has no samples).
  std::size_t lambda_witness = 0;
  /// Sample and competing component attaining delta_hat (unset for k = 1).
  std::optional<std::size_t> delta_witness;
  std::optional<std::size_t> delta_witness_component;
  bool degenerate = false;  ///< some cell is empty
  std::optional<SeparationCheck> separation_am;
};

GeometryReport geometry_report(const ParameterSet& params, const Dataset& data);

/// Evaluates
///   delta > lambda + C1 [c_ini sqrt(log(1/pi_min)) max_j |theta*_j| + sqrt(1 + log(1/pi_min))]
/// with C1 = fitted_constant. Throws std::invalid_argument when pi_min_hat = 0.
SeparationCheck check_am_separation(const GeometryReport& report, const ParameterSet& theta_star, double c_ini,
                                    double fitted_constant = 1.0);

enum class InitMode { SphereSurface, Ball };

struct InitConfig {
  double c_ini = 0.1;
  InitMode mode = InitMode::SphereSurface;
};

/// theta*_j + u_j with u_j uniform on the sphere (or ball) of radius
/// c_ini |theta*_j|.
ParameterSet sample_initialization(const ParameterSet& theta_star, const InitConfig& cfg, Rng& rng);

}  // namespace mixreg
