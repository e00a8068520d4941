#include "mixreg/generalization.hpp"

#include "mixreg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mixreg {

namespace {

constexpr double kBeta = 1.0;
constexpr double kInitialStep = 0.5;

void project_rows(Matrix& theta, double radius) {
  for (Eigen::Index j = 0; j < theta.rows(); ++j) {
    const double norm = theta.row(j).norm();
    if (norm > radius) theta.row(j) *= radius / norm;
  }
}

struct Objective {
  double value = 0.0;
  Matrix grad;
};

// sum_i w_i l_softmin(theta; x_i, y_i) and its gradient, one row per component.
Objective evaluate(const Matrix& theta, const Matrix& x, const Vector& y, const Vector& w) {
  const Eigen::MatrixXd resid = (x * theta.transpose()).colwise() - y;  // <x_i, theta_j> - y_i
  const Eigen::ArrayXXd sq = resid.array().square();
  const Eigen::VectorXd shift = sq.rowwise().minCoeff();
  Eigen::ArrayXXd p = (-kBeta * (sq.colwise() - shift.array())).exp();
  p.colwise() /= p.rowwise().sum();
  const Eigen::ArrayXd loss = (p * sq).rowwise().sum();
  Objective out;
  out.value = (w.array() * loss).sum();
  const Eigen::MatrixXd coef =
      ((2.0 * p * (1.0 - kBeta * (sq.colwise() - loss))) * resid.array()).colwise() * w.array();
  out.grad = coef.transpose() * x;
  return out;
}

}  // namespace

Vector uniform_in_ball(Rng& rng, std::size_t d, double radius) {
  const Vector dir = unit_vector(rng, d);
  return radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) * dir;
}

Dataset bounded_dataset(std::size_t n, std::size_t d, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("bounded_dataset: n and d must be >= 1");
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x.row(static_cast<Eigen::Index>(i)) = uniform_in_ball(rng, d, 1.0).transpose();
    y(static_cast<Eigen::Index>(i)) = rng.uniform(-1.0, 1.0);
  }
  return Dataset(std::move(x), std::move(y));
}

LipschitzResult lipschitz_probe(double radius, std::size_t trials, Rng& rng, std::size_t dim) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw std::invalid_argument("lipschitz_probe: R must be finite and >= 0");
  if (dim < 1) throw std::invalid_argument("lipschitz_probe: dim must be >= 1");
  LipschitzResult r;
  r.bound = 2.0 * (1.0 + radius);
  r.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vector x = uniform_in_ball(rng, dim, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    const Vector t1 = uniform_in_ball(rng, dim, radius);
    const Vector t2 = uniform_in_ball(rng, dim, radius);
    const double h1 = x.dot(t1);
    const double h2 = x.dot(t2);
    if (h1 == h2) {
      ++r.skipped;
      continue;
    }
    const double ratio = std::abs((y - h1) * (y - h1) - (y - h2) * (y - h2)) / std::abs(h1 - h2);
    r.max_ratio = std::max(r.max_ratio, ratio);
  }
  return r;
}

RadEstimate rademacher_estimate(const Dataset& data, double radius, std::size_t k, std::size_t trials,
                                std::size_t budget, const Rng& rng, std::size_t jobs) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw std::invalid_argument("rademacher_estimate: R must be finite and >= 0");
  if (k < 1) throw std::invalid_argument("rademacher_estimate: k must be >= 1");
  if (trials < 1) throw std::invalid_argument("rademacher_estimate: trials must be >= 1");
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.x(i).norm() > 1.0 + 1e-12 || std::abs(data.y(i)) > 1.0) {
      throw std::invalid_argument("rademacher_estimate: data must satisfy |x| <= 1 and |y| <= 1");
    }
  }

  const std::size_t n = data.n();
  const std::size_t d = data.d();
  const std::size_t steps_per_start = budget / kRademacherStarts;

  RadEstimate out;
  out.trials = trials;
  out.optimizer_budget = budget;
  out.bound = 4.0 * static_cast<double>(k) * radius * (1.0 + radius) / std::sqrt(static_cast<double>(n));
  out.per_trial.assign(trials, 0.0);

  parallel_for(trials, jobs, [&](std::size_t trial) {
    const Rng trial_rng = rng.split(trial);
    Rng sign_rng = trial_rng.split("signs");
    Vector weights(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      weights(static_cast<Eigen::Index>(i)) = sign_rng.sign() / static_cast<double>(n);
    }
    Rng start_rng = trial_rng.split("starts");
    double best = 0.0;
    for (std::size_t s = 0; s < kRademacherStarts; ++s) {
      Matrix theta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < k; ++j) {
        theta.row(static_cast<Eigen::Index>(j)) = uniform_in_ball(start_rng, d, radius).transpose();
      }
      Objective obj = evaluate(theta, data.covariates(), data.labels(), weights);
      best = std::max(best, std::abs(obj.value));
      if (radius == 0.0) continue;
      for (std::size_t step = 0; step < steps_per_start; ++step) {
        const double norm = obj.grad.norm();
        if (!(norm > 0.0)) break;
        const double ascent = obj.value < 0.0 ? -1.0 : 1.0;
        theta += (ascent * kInitialStep * radius / std::sqrt(static_cast<double>(step + 1)) / norm) * obj.grad;
        project_rows(theta, radius);
        obj = evaluate(theta, data.covariates(), data.labels(), weights);
        best = std::max(best, std::abs(obj.value));
      }
    }
    out.per_trial[trial] = best;
  });

  CompensatedSum sum;
  for (double v : out.per_trial) sum.add(v);
  out.estimate = sum.value() / static_cast<double>(trials);
  return out;
}

}  // namespace mixreg
