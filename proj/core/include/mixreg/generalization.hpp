#pragma once

#include "mixreg/core.hpp"

namespace mixreg {

struct LipschitzResult {
  double max_ratio = 0.0;
  double bound = 0.0;  ///< 2 (1 + R)
  std::size_t trials = 0;
  std::size_t skipped = 0;  ///< pairs with equal predictions
};

/// Max over sampled (x, y, theta1, theta2) of
/// |(y - h1)^2 - (y - h2)^2| / |h1 - h2| with h = <x, theta>, x uniform in the
/// unit ball of R^dim, y uniform on [-1, 1], theta uniform in the R-ball.
LipschitzResult lipschitz_probe(double radius, std::size_t trials, Rng& rng, std::size_t dim = 2);

struct RadEstimate {
  double estimate = 0.0;
  double bound = 0.0;  ///< 4 k R (1 + R) / sqrt(n)
  std::size_t trials = 0;
  std::size_t optimizer_budget = 0;
  std::vector<double> per_trial;
};

inline constexpr std::size_t kRademacherStarts = 8;

/// Lower estimate of the empirical Rademacher complexity of the k-component
/// soft-min loss class at beta = 1 with every |theta_j| <= R. For each trial
/// the inner supremum is approximated by projected normalized gradient ascent
/// from 8 random starts sharing `budget` gradient evaluations; the best value
/// seen is kept. Trial t uses child stream t of rng.
RadEstimate rademacher_estimate(const Dataset& data, double radius, std::size_t k, std::size_t trials,
                                std::size_t budget, const Rng& rng, std::size_t jobs = 1);

/// Uniform points in the unit ball: x uniform in the ball, y uniform on [-1, 1].
Dataset bounded_dataset(std::size_t n, std::size_t d, Rng& rng);

/// Uniform point in the ball of the given radius.
Vector uniform_in_ball(Rng& rng, std::size_t d, double radius);

}  // namespace mixreg
