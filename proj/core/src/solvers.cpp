#include "mixreg/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace mixreg {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5eed5;

enum class Method { AM, EM };

void fill_diagnostics(IterationRecord& rec, const Dataset& data, Method method, const SoftminConfig& softmin) {
  const ParameterSet& params = rec.params;
  const std::size_t k = params.k();
  rec.cell_sizes.assign(k, 0);
  CompensatedSum loss;
  CompensatedSum margin;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Vector sq = squared_residuals(params, data.x(i), data.y(i));
    const std::size_t cell = argmin_lowest(sq);
    ++rec.cell_sizes[cell];
    if (method == Method::AM || softmin.is_hard_min()) {
      loss.add(sq(static_cast<Eigen::Index>(cell)));
    } else {
      const Vector p = softmin_weights(sq, softmin.beta);
      loss.add(p.dot(sq));
    }
    if (method == Method::EM) {
      const Vector p = softmin_weights(sq, softmin.beta);
      double top = -1.0;
      double second = 0.0;
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (p(j) > top) {
          second = std::max(second, top);
          top = p(j);
        } else {
          second = std::max(second, p(j));
        }
      }
      margin.add(k == 1 ? 1.0 : top - second);
    }
  }
  const auto n = static_cast<double>(data.n());
  rec.loss = loss.value() / n;
  rec.mean_margin = method == Method::EM ? margin.value() / n : 0.0;
}

Trajectory run_impl(const Dataset& data, const ParameterSet& init, const SolverConfig& cfg,
                    const std::optional<ParameterSet>& reference, Method method) {
  cfg.validate(data.n());
  if (init.d() != data.d()) throw std::invalid_argument("solver: init dimension does not match data");
  if (reference && (reference->k() != init.k() || reference->d() != init.d())) {
    throw std::invalid_argument("solver: reference shape does not match init");
  }
  if (method == Method::EM) cfg.softmin.validate();

  Trajectory traj;
  traj.block_size = cfg.block_size(data.n());
  traj.has_reference = reference.has_value();
  if (reference) traj.matching = param_distance(init, *reference).permutation;

  const std::size_t n_prime = traj.block_size;
  const Rng base(cfg.shuffle_seed, kShuffleStream);

  std::optional<Dataset> shuffled;
  if (cfg.split == SplitMode::TwoTBlocks) {
    Rng rng = base.split("two-t-blocks");
    const auto perm = random_permutation(rng, data.n());
    shuffled.emplace(data.select(perm));
  }

  auto record = [&](std::size_t t, const ParameterSet& params, double millis) {
    IterationRecord rec;
    rec.t = t;
    rec.params = params;
    rec.millis = millis;
    if (reference) rec.distances = matched_distances(params, *reference, traj.matching);
    if (cfg.record_diagnostics) fill_diagnostics(rec, data, method, cfg.softmin);
    traj.records.push_back(std::move(rec));
  };

  ParameterSet params = init;
  record(0, params, 0.0);

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const auto start = std::chrono::steady_clock::now();

    // Gradient-block samples are assigned by the regions of the current iterate.
    auto step = [&](const Batch& grad) {
      if (method == Method::AM) return am_gradient_step(params, grad, am_partition_step(params, grad), cfg.gamma);
      return em_gradient_step(params, em_probability_step(params, cfg.softmin, grad), grad, cfg.gamma);
    };
    switch (cfg.split) {
      case SplitMode::TwoTBlocks:
        params = step(shuffled->rows((2 * t + 1) * n_prime, n_prime));
        break;
      case SplitMode::PerIterationPair: {
        Rng rng = base.split("per-iteration-pair", t);
        const Dataset pair = data.select(random_permutation(rng, data.n()));
        params = step(pair.rows(n_prime, n_prime));
        break;
      }
      case SplitMode::NoSplit:
        params = step(data.all());
        break;
    }

    const double millis =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    const std::size_t done = t + 1;
    if (done % cfg.record_every == 0 || done == cfg.iterations) record(done, params, millis);
  }
  return traj;
}

}  // namespace

void SolverConfig::validate(std::size_t n) const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("SolverConfig.gamma: must be finite and >= 0");
  if (iterations < 1) throw std::invalid_argument("SolverConfig.iterations: must be >= 1");
  if (record_every < 1) throw std::invalid_argument("SolverConfig.record_every: must be >= 1");
  switch (split) {
    case SplitMode::TwoTBlocks:
      if (n < 2 * iterations) {
        throw InfeasibleError("TwoTBlocks needs n >= 2T (n = " + std::to_string(n) +
                              ", T = " + std::to_string(iterations) + ")");
      }
      break;
    case SplitMode::PerIterationPair:
      if (n < 2) throw InfeasibleError("PerIterationPair needs n >= 2");
      break;
    case SplitMode::NoSplit:
      break;
  }
}

std::size_t SolverConfig::block_size(std::size_t n) const {
  switch (split) {
    case SplitMode::TwoTBlocks:
      return n / (2 * iterations);
    case SplitMode::PerIterationPair:
      return n / 2;
    case SplitMode::NoSplit:
      break;
  }
  return n;
}

std::vector<double> Trajectory::distance_series(std::size_t component) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.distances.at(component));
  return out;
}

double Trajectory::initial_max_distance() const {
  const auto& d = records.front().distances;
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

double Trajectory::final_max_distance() const {
  const auto& d = records.back().distances;
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

Partition am_partition_step(const ParameterSet& params, const Batch& batch) { return optimal_partition(params, batch); }

ParameterSet am_gradient_step(const ParameterSet& params, const Batch& batch, const Partition& sets, double gamma) {
  if (params.d() != batch.dim()) throw std::invalid_argument("am_gradient_step: dimension mismatch");
  if (sets.size() != params.k()) throw std::invalid_argument("am_gradient_step: need one index set per component");
  Matrix next = params.matrix();
  if (batch.size() == 0) return ParameterSet(std::move(next));
  const double scale = 2.0 * gamma / static_cast<double>(batch.size());
  Vector g(static_cast<Eigen::Index>(params.d()));
  for (std::size_t j = 0; j < params.k(); ++j) {
    if (sets[j].empty()) continue;
    const Vector theta = params.component(j);
    g.setZero();
    for (std::size_t i : sets[j]) {
      const auto x = batch.x(i);
      const double coef = x.dot(theta) - batch.y(i);
      g += coef * x;
    }
    next.row(static_cast<Eigen::Index>(j)) = (theta - scale * g).transpose();
  }
  return ParameterSet(std::move(next));
}

Matrix em_probability_step(const ParameterSet& params, const SoftminConfig& softmin, const Batch& batch) {
  if (params.d() != batch.dim()) throw std::invalid_argument("em_probability_step: dimension mismatch");
  Matrix probs(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(params.k()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    probs.row(static_cast<Eigen::Index>(i)) =
        softmin_weights(squared_residuals(params, batch.x(i), batch.y(i)), softmin.beta).transpose();
  }
  return probs;
}

ParameterSet em_gradient_step(const ParameterSet& params, const Eigen::Ref<const Matrix>& probs, const Batch& batch,
                              double gamma) {
  if (params.d() != batch.dim()) throw std::invalid_argument("em_gradient_step: dimension mismatch");
  if (static_cast<std::size_t>(probs.rows()) != batch.size() || static_cast<std::size_t>(probs.cols()) != params.k()) {
    throw std::invalid_argument("em_gradient_step: probability matrix must be n' x k");
  }
  Matrix next = params.matrix();
  if (batch.size() == 0) return ParameterSet(std::move(next));
  const double scale = 2.0 * gamma / static_cast<double>(batch.size());
  Vector g(static_cast<Eigen::Index>(params.d()));
  for (std::size_t j = 0; j < params.k(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const Vector theta = params.component(j);
    g.setZero();
    bool any = false;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double p = probs(static_cast<Eigen::Index>(i), jj);
      if (p == 0.0) continue;
      any = true;
      const auto x = batch.x(i);
      const double coef = p * (x.dot(theta) - batch.y(i));
      g += coef * x;
    }
    if (any) next.row(jj) = (theta - scale * g).transpose();
  }
  return ParameterSet(std::move(next));
}

Trajectory run_gradient_am(const Dataset& data, const ParameterSet& init, const SolverConfig& cfg,
                           const std::optional<ParameterSet>& reference) {
  return run_impl(data, init, cfg, reference, Method::AM);
}

Trajectory run_gradient_em(const Dataset& data, const ParameterSet& init, const SolverConfig& cfg,
                           const std::optional<ParameterSet>& reference) {
  return run_impl(data, init, cfg, reference, Method::EM);
}

}  // namespace mixreg
