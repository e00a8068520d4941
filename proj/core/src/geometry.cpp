#include "mixreg/geometry.hpp"

#include "mixreg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mixreg {

std::vector<std::size_t> assign_cells(const ParameterSet& params, const Batch& batch) {
  if (params.d() != batch.dim()) throw std::invalid_argument("assign_cells: dimension mismatch");
  std::vector<std::size_t> cells(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    cells[i] = argmin_lowest(squared_residuals(params, batch.x(i), batch.y(i)));
  }
  return cells;
}

Partition partition_from_cells(std::span<const std::size_t> cells, std::size_t k) {
  Partition p(k);
  for (std::size_t i = 0; i < cells.size(); ++i) p[cells[i]].push_back(i);
  return p;
}

Partition optimal_partition(const ParameterSet& params, const Batch& batch) {
  return partition_from_cells(assign_cells(params, batch), params.k());
}

Partition optimal_partition(const ParameterSet& params, const Dataset& data) {
  return optimal_partition(params, data.all());
}

GeometryReport geometry_report(const ParameterSet& params, const Dataset& data) {
  if (params.d() != data.d()) throw std::invalid_argument("geometry_report: dimension mismatch");
  const std::size_t k = params.k();
  GeometryReport r;
  r.n = data.n();
  r.counts.assign(k, 0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Vector pred = params.matrix() * data.x(i);
    const Vector abs_resid = (data.y(i) - pred.array()).abs().matrix();
    const std::size_t cell = argmin_lowest(abs_resid.array().square().matrix());
    ++r.counts[cell];
    const double own = abs_resid(static_cast<Eigen::Index>(cell));
    if (i == 0 || own > r.lambda_hat) {
      r.lambda_hat = own;
      r.lambda_witness = i;
    }
    for (std::size_t l = 0; l < k; ++l) {
      if (l == cell) continue;
      const double other = abs_resid(static_cast<Eigen::Index>(l));
      if (other < r.delta_hat) {
        r.delta_hat = other;
        r.delta_witness = i;
        r.delta_witness_component = l;
      }
    }
  }
  const auto smallest = *std::min_element(r.counts.begin(), r.counts.end());
  r.pi_min_hat = static_cast<double>(smallest) / static_cast<double>(data.n());
  r.degenerate = smallest == 0;
  return r;
}

double estimate_lambda(const ParameterSet& params, const Dataset& data) { return geometry_report(params, data).lambda_hat; }
double estimate_delta(const ParameterSet& params, const Dataset& data) { return geometry_report(params, data).delta_hat; }
double estimate_pi_min(const ParameterSet& params, const Dataset& data) { return geometry_report(params, data).pi_min_hat; }

SeparationCheck check_am_separation(const GeometryReport& report, const ParameterSet& theta_star, double c_ini,
                                    double fitted_constant) {
  if (report.pi_min_hat <= 0.0) throw std::invalid_argument("check_am_separation: pi_min_hat = 0 (degenerate partition)");
  if (c_ini < 0.0 || fitted_constant < 0.0) throw std::invalid_argument("check_am_separation: constants must be >= 0");
  const double log_inv_pi = std::log(1.0 / report.pi_min_hat);
  SeparationCheck c;
  c.separation = report.delta_hat;
  c.threshold = report.lambda_hat +
                fitted_constant * (c_ini * std::sqrt(log_inv_pi) * theta_star.max_norm() + std::sqrt(1.0 + log_inv_pi));
  c.holds = c.separation > c.threshold;
  return c;
}

ParameterSet sample_initialization(const ParameterSet& theta_star, const InitConfig& cfg, Rng& rng) {
  if (!(cfg.c_ini >= 0.0)) throw std::invalid_argument("sample_initialization: c_ini must be >= 0");
  Matrix out = theta_star.matrix();
  const auto d = theta_star.d();
  for (std::size_t j = 0; j < theta_star.k(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    // Draw every direction even when c_ini = 0 so the stream position is
    // independent of c_ini.
    const Vector dir = unit_vector(rng, d);
    double radius = cfg.c_ini * theta_star.component(j).norm();
    if (cfg.mode == InitMode::Ball) radius *= std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    if (radius > 0.0) out.row(jj) += radius * dir.transpose();
  }
  return ParameterSet(std::move(out));
}

}  // namespace mixreg
