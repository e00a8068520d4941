#pragma once

#include "mixreg/core.hpp"

#include <filesystem>
#include <iosfwd>

namespace mixreg {

enum class GenerationMode { Realizable, Agnostic };

/// Declarative description of a synthetic dataset.
///
/// Realizable: x ~ N(0, I_d), a ~ mixing_weights, y = <x, theta_a> + sigma z.
/// Agnostic: as realizable with the noise truncated to [-3 sigma, 3 sigma]
/// plus misspec_level * cos(<w, x>) for one unit vector w per dataset, so the
/// residual against the assigned component never exceeds 3 sigma + misspec_level.
///
/// separation_margin > 0 rejects samples whose residual against any other
/// component is below the margin, which lower-bounds the empirical
/// separation by construction. label_bound rejects samples with |y| > b.
struct GeneratorSpec {
  GenerationMode mode = GenerationMode::Realizable;
  std::size_t n = 1000;
  std::size_t d = 10;
  std::size_t k = 2;
  double sigma = 0.0;
  std::vector<double> mixing_weights;  ///< empty means uniform
  double component_scale = 1.0;
  double misspec_level = 0.0;
  std::optional<double> label_bound;
  double separation_margin = 0.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::vector<double> weights() const;
};

struct GeneratedData {
  Dataset data;
  std::size_t rejections = 0;
  Vector perturbation_direction;  ///< w (agnostic mode only)
};

/// Components drawn uniformly on the sphere of radius component_scale.
ParameterSet draw_components(const GeneratorSpec& spec, Rng& rng);

GeneratedData generate_realizable(const GeneratorSpec& spec, Rng& rng);
GeneratedData generate_realizable(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng);
GeneratedData generate_agnostic(const GeneratorSpec& spec, Rng& rng);
GeneratedData generate_agnostic(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng);
/// Dispatches on spec.mode.
GeneratedData generate(const GeneratorSpec& spec, Rng& rng);
GeneratedData generate(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng);

struct ClipResult {
  Dataset data;
  std::size_t clamped = 0;
};

/// Clamps labels to [-b, b].
ClipResult clip_labels(const Dataset& data, double b);

// Flat text format:
//   header     "n d k sigma misspec seed"
//   one line per sample: "y x_1 ... x_d assignment"
// and a companion file "<path>.components" holding "k d" then k rows of d
// values. Without ground truth, k is 0, assignments are -1 and no companion
// is written. Reals are written with 17 significant digits.
struct DatasetFile {
  Dataset data;
  std::uint64_t seed = 0;
};

void write_dataset(std::ostream& samples, std::ostream* components, const Dataset& data, std::uint64_t seed);
DatasetFile read_dataset(std::istream& samples, std::istream* components);

void save_dataset(const std::filesystem::path& path, const Dataset& data, std::uint64_t seed);
DatasetFile load_dataset(const std::filesystem::path& path);
std::filesystem::path components_path(const std::filesystem::path& path);

void write_parameters(std::ostream& out, const ParameterSet& params);
ParameterSet read_parameters(std::istream& in);

}  // namespace mixreg
