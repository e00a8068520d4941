#pragma once

// Shared domain types for mixed linear regression: datasets, parameter
// lists, a reproducible stream-splittable generator and the
// permutation-aware distance between two parameter lists.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mixreg {

using Vector = Eigen::VectorXd;
// Row-major so that a sample (one row) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a computation cannot proceed for the given sizes, e.g. a
/// split mode that needs more samples than the dataset holds, or a label
/// bound that rejects nearly every draw.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered list of k regression vectors sharing a dimension d.
class ParameterSet {
 public:
  ParameterSet() = default;
  /// Rows are components. Throws std::invalid_argument on k = 0, d = 0 or
  /// non-finite entries.
  explicit ParameterSet(Matrix components);
  ParameterSet(std::initializer_list<std::initializer_list<double>> rows);

  static ParameterSet zeros(std::size_t k, std::size_t d);

  std::size_t k() const { return static_cast<std::size_t>(components_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(components_.cols()); }

  auto component(std::size_t j) const { return components_.row(static_cast<Eigen::Index>(j)).transpose(); }
  const Matrix& matrix() const { return components_; }

  /// Component j of the result is component perm[j] of *this.
  ParameterSet permuted(std::span<const std::size_t> perm) const;
  double max_norm() const;

  bool operator==(const ParameterSet& other) const;

 private:
  Matrix components_;
};

/// Generator-side metadata recorded alongside synthetic samples.
struct GroundTruth {
  ParameterSet components;
  std::vector<std::size_t> assignments;
  double noise_sigma = 0.0;
  double misspec_level = 0.0;
};

/// Non-owning view of a contiguous block of samples.
struct Batch {
  Eigen::Ref<const Matrix> covariates;
  Eigen::Ref<const Vector> labels;

  std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(covariates.cols()); }
  auto x(std::size_t i) const { return covariates.row(static_cast<Eigen::Index>(i)).transpose(); }
  double y(std::size_t i) const { return labels(static_cast<Eigen::Index>(i)); }
};

/// n covariate rows in d dimensions with n labels.
class Dataset {
 public:
  /// Throws std::invalid_argument unless n, d >= 1, sizes agree, every entry
  /// is finite, and truth (if any) has matching d and valid assignments.
  Dataset(Matrix covariates, Vector labels, std::optional<GroundTruth> truth = std::nullopt);

  std::size_t n() const { return static_cast<std::size_t>(labels_.size()); }
  std::size_t d() const { return static_cast<std::size_t>(covariates_.cols()); }

  const Matrix& covariates() const { return covariates_; }
  const Vector& labels() const { return labels_; }
  const std::optional<GroundTruth>& truth() const { return truth_; }

  auto x(std::size_t i) const { return covariates_.row(static_cast<Eigen::Index>(i)).transpose(); }
  double y(std::size_t i) const { return labels_(static_cast<Eigen::Index>(i)); }

  Batch all() const;
  Batch rows(std::size_t begin, std::size_t count) const;

  /// Copy of the selected samples, in the given order. Truth assignments
  /// follow their samples.
  Dataset select(std::span<const std::size_t> indices) const;
  Dataset with_labels(Vector labels) const;

 private:
  Matrix covariates_;
  Vector labels_;
  std::optional<GroundTruth> truth_;
};

/// mt19937_64 stream keyed by (seed, stream). The integer output of a given
/// key is fixed by the C++ standard, so runs reproduce across platforms.
/// All real-valued draws here are computed from that integer output rather
/// than through std:: distributions, whose algorithms are unspecified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Uniform on {0, ..., bound - 1}, unbiased.
  std::size_t index(std::size_t bound);
  /// +1 or -1 with equal probability.
  int sign() { return (next_u64() >> 63) != 0 ? 1 : -1; }

  /// Independent child stream. Children depend only on (seed, stream, key).
  Rng split(std::uint64_t key) const;
  Rng split(std::string_view tag, std::uint64_t key = 0) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_tag(std::string_view tag);

Matrix gaussian_matrix(Rng& rng, std::size_t n, std::size_t d);
Vector gaussian_vector(Rng& rng, std::size_t d);
/// Uniform direction on the unit sphere in d dimensions.
Vector unit_vector(Rng& rng, std::size_t d);
/// Fisher-Yates shuffle of 0..n-1 driven by rng.
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);

/// Neumaier-compensated running sum; order of add() calls fixes the result.
class CompensatedSum {
 public:
  void add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

struct Matching {
  std::vector<double> distances;        ///< distances[j] = ||a_j - b_{permutation[j]}||
  std::vector<std::size_t> permutation;
  double max_distance() const;
};

/// Largest k accepted by param_distance (exhaustive search over k!).
inline constexpr std::size_t kMaxMatchingComponents = 8;

/// Permutation of b's components minimizing the largest per-component
/// Euclidean distance to a. Ties go to the lexicographically smallest
/// permutation.
Matching param_distance(const ParameterSet& a, const ParameterSet& b);

/// Distances under a fixed matching.
std::vector<double> matched_distances(const ParameterSet& a, const ParameterSet& b,
                                      std::span<const std::size_t> permutation);

/// Runs fn(0..count-1) on up to `jobs` threads. Each index runs exactly once;
/// callers write results into preallocated slots so ordering stays fixed.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace mixreg
