#pragma once

#include "mixreg/core.hpp"
#include "mixreg/datagen.hpp"
#include "mixreg/geometry.hpp"
#include "mixreg/solvers.hpp"

namespace mixreg {

// ---------------------------------------------------------------------------
// Contraction fitting
// ---------------------------------------------------------------------------

/// Fit of dist_t = rho^t (dist_0 - floor) + floor.
struct ContractionFit {
  double rho_hat = 1.0;
  double floor_hat = 0.0;
  double per_step_epsilon = 0.0;  ///< floor_hat * (1 - rho_hat)
  double fit_residual = 0.0;      ///< root-mean-square residual of the fitted curve
  bool no_decay = false;          ///< constant sequence
  bool divergent = false;         ///< rho_hat > 1
  bool non_monotone = false;      ///< some step increases by more than the fit residual
};

/// Requires at least 10 points, finite and nonnegative distances, and
/// strictly increasing times starting at 0.
ContractionFit fit_contraction(std::span<const double> times, std::span<const double> distances);
/// Times 0, 1, 2, ...
ContractionFit fit_contraction(std::span<const double> distances);
/// One fit per component of a trajectory recorded against a reference.
std::vector<ContractionFit> fit_contraction(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Misassignment probability
// ---------------------------------------------------------------------------

struct PeReport {
  double pooled = 0.0;          ///< misassigned / members over the nonempty truth cells
  double mean_over_cells = 0.0; ///< average of the per-cell rates over nonempty cells
  std::vector<double> per_cell; ///< NaN for an empty truth cell
  std::vector<std::size_t> cell_sizes;
  std::vector<std::size_t> excluded_cells;
};

/// Compares the partition induced by `truth` with the one induced by
/// `current` (component j against component j).
PeReport empirical_pe(const ParameterSet& current, const ParameterSet& truth, const Dataset& data);

struct SeparationLevel {
  double delta_hat = 0.0;
  double lambda_hat = 0.0;
  double gap_squared = 0.0;  ///< (delta_hat - lambda_hat)^2
  double pe = 0.0;           ///< pooled
  bool zero = false;
  GeneratorSpec spec;
};

struct SeparationDecay {
  std::vector<SeparationLevel> levels;
  std::size_t nonzero_levels = 0;
  double slope = 0.0;        ///< of log pe on gap_squared over nonzero levels
  double intercept = 0.0;
  double correlation = 0.0;  ///< NaN with fewer than 2 nonzero levels
  bool monotone = true;      ///< pe non-increasing in gap_squared
};

/// Per level: draw data from the level's spec, measure (delta, lambda)
/// against the generating components and P_e of an initialization sampled
/// around them. Components and initialization come from fixed child streams
/// of `rng`, so levels that share k, d and scale share both.
SeparationDecay separation_decay_probe(std::span<const GeneratorSpec> family, const InitConfig& init, const Rng& rng,
                                       std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Restricted Gaussian moments
// ---------------------------------------------------------------------------

struct RestrictedMoments {
  Vector mean_hat;
  double second_moment_min_singular = 0.0;
  std::size_t sample_count = 0;
  double volume_hat = 0.0;
  bool rank_deficient = false;
  bool iterative = false;  ///< inverse iteration instead of a dense eigensolve
};

inline constexpr std::size_t kDenseEigenLimit = 64;

/// Mean and smallest eigenvalue of (1/m) sum tau tau^T over the member rows.
RestrictedMoments restricted_moments(const Eigen::Ref<const Matrix>& covariates, std::span<const std::size_t> membership);

/// The round(nu n) rows with the largest first coordinate, ascending.
std::vector<std::size_t> halfspace_membership(const Eigen::Ref<const Matrix>& covariates, double nu);

struct NormProbe {
  double max_norm = 0.0;
  double rate = 0.0;  ///< sqrt(d (1 + log d) (1 + log(1/pi)))
  double ratio = 0.0;
  std::size_t witness = 0;
};

NormProbe restricted_norm_probe(const Eigen::Ref<const Matrix>& covariates, std::span<const std::size_t> membership,
                                double pi_min_hat);

// ---------------------------------------------------------------------------
// Soft-min concentration
// ---------------------------------------------------------------------------

struct EtaReport {
  double min_on_cell = 1.0;   ///< 1 - eta_hat
  double max_off_cell = 0.0;  ///< eta_hat'
  std::vector<double> per_cell_min_on;  ///< NaN for empty cells
  std::vector<double> per_cell_max_off;
  std::vector<std::size_t> excluded_cells;
  double delta_hat = kInfinity;
  double lambda_hat = 0.0;
  bool ordered = true;  ///< min_on_cell >= max_off_cell whenever delta_hat > lambda_hat
  double beta = 1.0;
};

EtaReport eta_probe(const ParameterSet& params, const SoftminConfig& softmin, const Dataset& data);

// ---------------------------------------------------------------------------
// Floor scaling
// ---------------------------------------------------------------------------

enum class SolverKind { AM, EM };

struct FloorScalingConfig {
  GeneratorSpec generator;  ///< misspec_level is overridden per cell
  SolverConfig solver;      ///< gamma is overridden per cell
  InitConfig init;
  SolverKind method = SolverKind::AM;
  std::vector<double> gamma_grid{0.125, 0.25, 0.5};
  std::vector<double> misspec_grid{0.5, 1.0, 2.0};
  double base_gamma = 0.25;    ///< used along the misspec sweep
  double base_misspec = 1.0;   ///< used along the gamma sweep
  std::size_t repetitions = 8;
  /// Reference minimizer: full-batch run on a large fresh sample.
  std::size_t reference_samples = 200000;
  std::size_t reference_iterations = 200;
  double reference_gamma = 0.5;
};

struct FloorCell {
  double gamma = 0.0;
  double misspec = 0.0;
  ContractionFit fit;
  std::vector<double> mean_curve;  ///< mean over repetitions of max_j distance
  bool excluded = false;           ///< divergent or not contracting
};

struct FloorScaling {
  std::vector<FloorCell> gamma_cells;
  std::vector<FloorCell> misspec_cells;
  std::vector<double> gamma_ratios;    ///< floor(gamma_i) / floor(gamma_{i+1})
  std::vector<double> misspec_ratios;  ///< floor(m_{i+1}) / floor(m_i)
  bool monotone_gamma = true;
  bool monotone_misspec = true;
};

FloorScaling floor_scaling_probe(const FloorScalingConfig& cfg, const Rng& rng, std::size_t jobs = 1);

}  // namespace mixreg
