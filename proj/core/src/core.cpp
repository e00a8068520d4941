#include "mixreg/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace mixreg {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

ParameterSet::ParameterSet(Matrix components) : components_(std::move(components)) {
  if (components_.rows() < 1 || components_.cols() < 1) {
    throw std::invalid_argument("ParameterSet: need k >= 1 and d >= 1");
  }
  if (!all_finite(components_)) {
    throw std::invalid_argument("ParameterSet: non-finite entry");
  }
}

ParameterSet::ParameterSet(std::initializer_list<std::initializer_list<double>> rows) {
  const auto k = rows.size();
  const auto d = k == 0 ? 0 : rows.begin()->size();
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    if (row.size() != d) throw std::invalid_argument("ParameterSet: ragged rows");
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  *this = ParameterSet(std::move(m));
}

ParameterSet ParameterSet::zeros(std::size_t k, std::size_t d) {
  return ParameterSet(Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)));
}

ParameterSet ParameterSet::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != k()) throw std::invalid_argument("permuted: permutation size != k");
  Matrix out(components_.rows(), components_.cols());
  for (std::size_t j = 0; j < k(); ++j) {
    if (perm[j] >= k()) throw std::invalid_argument("permuted: index out of range");
    out.row(static_cast<Eigen::Index>(j)) = components_.row(static_cast<Eigen::Index>(perm[j]));
  }
  return ParameterSet(std::move(out));
}

double ParameterSet::max_norm() const { return components_.rowwise().norm().maxCoeff(); }

bool ParameterSet::operator==(const ParameterSet& other) const {
  return components_.rows() == other.components_.rows() && components_.cols() == other.components_.cols() &&
         components_ == other.components_;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Matrix covariates, Vector labels, std::optional<GroundTruth> truth)
    : covariates_(std::move(covariates)), labels_(std::move(labels)), truth_(std::move(truth)) {
  if (covariates_.rows() < 1 || covariates_.cols() < 1) {
    throw std::invalid_argument("Dataset: need n >= 1 and d >= 1");
  }
  if (covariates_.rows() != labels_.size()) {
    throw std::invalid_argument("Dataset: covariate rows != label count");
  }
  if (!covariates_.allFinite() || !labels_.allFinite()) {
    throw std::invalid_argument("Dataset: non-finite entry");
  }
  if (truth_) {
    if (truth_->components.d() != d()) throw std::invalid_argument("Dataset: truth dimension mismatch");
    if (truth_->assignments.size() != n()) throw std::invalid_argument("Dataset: truth assignment count != n");
    for (auto a : truth_->assignments) {
      if (a >= truth_->components.k()) throw std::invalid_argument("Dataset: truth assignment out of range");
    }
  }
}

Batch Dataset::all() const { return Batch{covariates_, labels_}; }

Batch Dataset::rows(std::size_t begin, std::size_t count) const {
  if (begin + count > n()) throw std::out_of_range("Dataset::rows: range exceeds n");
  const auto b = static_cast<Eigen::Index>(begin);
  const auto c = static_cast<Eigen::Index>(count);
  return Batch{covariates_.middleRows(b, c), labels_.segment(b, c)};
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Matrix x(static_cast<Eigen::Index>(indices.size()), covariates_.cols());
  Vector y(static_cast<Eigen::Index>(indices.size()));
  std::optional<GroundTruth> truth;
  if (truth_) {
    truth = GroundTruth{truth_->components, {}, truth_->noise_sigma, truth_->misspec_level};
    truth->assignments.reserve(indices.size());
  }
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto i = indices[r];
    if (i >= n()) throw std::out_of_range("Dataset::select: index out of range");
    x.row(static_cast<Eigen::Index>(r)) = covariates_.row(static_cast<Eigen::Index>(i));
    y(static_cast<Eigen::Index>(r)) = labels_(static_cast<Eigen::Index>(i));
    if (truth) truth->assignments.push_back(truth_->assignments[i]);
  }
  return Dataset(std::move(x), std::move(y), std::move(truth));
}

Dataset Dataset::with_labels(Vector labels) const { return Dataset(covariates_, std::move(labels), truth_); }

// ---------------------------------------------------------------------------
// Rng

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a, then mixed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream ^ 0x5851f42d4c957f2dULL))) {}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  return u * f;
}

std::size_t Rng::index(std::size_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::index: bound must be positive");
  const std::uint64_t b = bound;
  // Rejection on the largest multiple of b below 2^64.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % b);
  std::uint64_t r = 0;
  do {
    r = next_u64();
  } while (r >= limit);
  return static_cast<std::size_t>(r % b);
}

Rng Rng::split(std::uint64_t key) const { return Rng(seed_, splitmix64(stream_ ^ splitmix64(key + 0x632be59bd9b4e019ULL))); }

Rng Rng::split(std::string_view tag, std::uint64_t key) const { return split(hash_tag(tag) ^ splitmix64(key)); }

Matrix gaussian_matrix(Rng& rng, std::size_t n, std::size_t d) {
  if (n < 1 || d < 1) throw std::invalid_argument("gaussian_matrix: need n, d >= 1");
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  return m;
}

Vector gaussian_vector(Rng& rng, std::size_t d) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = rng.normal();
  return v;
}

Vector unit_vector(Rng& rng, std::size_t d) {
  if (d < 1) throw std::invalid_argument("unit_vector: need d >= 1");
  for (;;) {
    Vector v = gaussian_vector(rng, d);
    const double norm = v.norm();
    if (norm > 1e-300) return v / norm;
  }
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

// ---------------------------------------------------------------------------
// CompensatedSum

void CompensatedSum::add(double value) {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

// ---------------------------------------------------------------------------
// Matching

double Matching::max_distance() const {
  return distances.empty() ? 0.0 : *std::max_element(distances.begin(), distances.end());
}

std::vector<double> matched_distances(const ParameterSet& a, const ParameterSet& b,
                                      std::span<const std::size_t> permutation) {
  if (a.k() != b.k() || a.d() != b.d()) throw std::invalid_argument("matched_distances: dimension mismatch");
  if (permutation.size() != a.k()) throw std::invalid_argument("matched_distances: permutation size != k");
  std::vector<double> out(a.k());
  for (std::size_t j = 0; j < a.k(); ++j) out[j] = (a.component(j) - b.component(permutation[j])).norm();
  return out;
}

Matching param_distance(const ParameterSet& a, const ParameterSet& b) {
  if (a.k() != b.k() || a.d() != b.d()) throw std::invalid_argument("param_distance: dimension mismatch");
  const std::size_t k = a.k();
  if (k > kMaxMatchingComponents) {
    throw std::invalid_argument("param_distance: k > 8 is not supported (exhaustive matching)");
  }
  // Pairwise distance table, then exhaustive search in lexicographic order;
  // strict improvement keeps the first (smallest) permutation on ties.
  std::vector<double> table(k * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) table[i * k + j] = (a.component(i) - b.component(j)).norm();

  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_cost = kInfinity;
  do {
    double cost = 0.0;
    for (std::size_t j = 0; j < k && cost < best_cost; ++j) cost = std::max(cost, table[j * k + perm[j]]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  Matching m;
  m.permutation = best;
  m.distances.resize(k);
  for (std::size_t j = 0; j < k; ++j) m.distances[j] = table[j * k + best[j]];
  return m;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mixreg
