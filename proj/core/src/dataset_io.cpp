#include "mixreg/datagen.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace mixreg {

namespace {

void put_real(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

template <typename T>
T expect(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw std::runtime_error(std::string("dataset file: cannot read ") + what);
  return v;
}

}  // namespace

std::filesystem::path components_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".components";
  return p;
}

void write_parameters(std::ostream& out, const ParameterSet& params) {
  out << params.k() << ' ' << params.d() << '\n';
  for (std::size_t j = 0; j < params.k(); ++j) {
    for (std::size_t c = 0; c < params.d(); ++c) {
      if (c) out << ' ';
      put_real(out, params.matrix()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)));
    }
    out << '\n';
  }
}

ParameterSet read_parameters(std::istream& in) {
  const auto k = expect<std::size_t>(in, "component count");
  const auto d = expect<std::size_t>(in, "component dimension");
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < m.rows(); ++j)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(j, c) = expect<double>(in, "component entry");
  return ParameterSet(std::move(m));
}

void write_dataset(std::ostream& samples, std::ostream* components, const Dataset& data, std::uint64_t seed) {
  const auto& truth = data.truth();
  const std::size_t k = truth ? truth->components.k() : 0;
  samples << data.n() << ' ' << data.d() << ' ' << k << ' ';
  put_real(samples, truth ? truth->noise_sigma : 0.0);
  samples << ' ';
  put_real(samples, truth ? truth->misspec_level : 0.0);
  samples << ' ' << seed << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    put_real(samples, data.y(i));
    for (std::size_t c = 0; c < data.d(); ++c) {
      samples << ' ';
      put_real(samples, data.covariates()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    samples << ' ';
    if (truth) {
      samples << truth->assignments[i];
    } else {
      samples << -1;
    }
    samples << '\n';
  }
  if (truth && components) write_parameters(*components, truth->components);
}

DatasetFile read_dataset(std::istream& samples, std::istream* components) {
  const auto n = expect<std::size_t>(samples, "n");
  const auto d = expect<std::size_t>(samples, "d");
  const auto k = expect<std::size_t>(samples, "k");
  const auto sigma = expect<double>(samples, "sigma");
  const auto misspec = expect<double>(samples, "misspec");
  const auto seed = expect<std::uint64_t>(samples, "seed");
  if (n < 1 || d < 1) throw std::runtime_error("dataset file: n and d must be >= 1");

  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(n));
  std::vector<std::size_t> assignments(n);
  for (std::size_t i = 0; i < n; ++i) {
    y(static_cast<Eigen::Index>(i)) = expect<double>(samples, "label");
    for (std::size_t c = 0; c < d; ++c) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = expect<double>(samples, "covariate");
    }
    const auto a = expect<long long>(samples, "assignment");
    if (k > 0) {
      if (a < 0 || static_cast<std::size_t>(a) >= k) throw std::runtime_error("dataset file: assignment out of range");
      assignments[i] = static_cast<std::size_t>(a);
    }
  }

  std::optional<GroundTruth> truth;
  if (k > 0) {
    if (!components) throw std::runtime_error("dataset file: ground truth needs the components file");
    ParameterSet params = read_parameters(*components);
    if (params.k() != k || params.d() != d) throw std::runtime_error("dataset file: components file does not match header");
    truth = GroundTruth{std::move(params), std::move(assignments), sigma, misspec};
  }
  return DatasetFile{Dataset(std::move(x), std::move(y), std::move(truth)), seed};
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, std::uint64_t seed) {
  std::ofstream samples(path);
  if (!samples) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (data.truth()) {
    std::ofstream comps(components_path(path));
    if (!comps) throw std::runtime_error("cannot open " + components_path(path).string() + " for writing");
    write_dataset(samples, &comps, data, seed);
  } else {
    write_dataset(samples, nullptr, data, seed);
  }
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  std::ifstream samples(path);
  if (!samples) throw std::runtime_error("cannot open " + path.string());
  std::ifstream comps(components_path(path));
  return read_dataset(samples, comps ? &comps : nullptr);
}

}  // namespace mixreg
