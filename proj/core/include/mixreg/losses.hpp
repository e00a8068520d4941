#pragma once

#include "mixreg/core.hpp"

namespace mixreg {

/// Inverse temperature of the soft-min weights. beta = +inf selects the
/// hard minimum (one-hot weights on the best component).
struct SoftminConfig {
  double beta = 1.0;

  static SoftminConfig hard_min() { return SoftminConfig{kInfinity}; }
  bool is_hard_min() const { return beta == kInfinity; }
  /// Throws std::invalid_argument for negative or NaN beta.
  void validate() const;
};

struct LossKind {
  enum class Tag { Min, Softmin };
  Tag tag = Tag::Min;
  SoftminConfig softmin{};

  static LossKind min() { return LossKind{Tag::Min, {}}; }
  static LossKind soft(SoftminConfig cfg) { return LossKind{Tag::Softmin, cfg}; }
};

/// (y - <x, theta_j>)^2 for every component j.
Vector squared_residuals(const ParameterSet& params, const Eigen::Ref<const Vector>& x, double y);

/// Lowest index attaining the smallest entry.
std::size_t argmin_lowest(const Eigen::Ref<const Vector>& values);

double min_loss(const ParameterSet& params, const Eigen::Ref<const Vector>& x, double y);

/// Soft-min weights exp(-beta r_j^2) / sum_l exp(-beta r_l^2), evaluated
/// after subtracting the smallest beta r_j^2. Hard-min returns the one-hot
/// vector of the lowest-index minimizer.
Vector softmin_probabilities(const ParameterSet& params, double beta, const Eigen::Ref<const Vector>& x, double y);
Vector softmin_weights(const Eigen::Ref<const Vector>& squared_residuals, double beta);

double softmin_loss(const ParameterSet& params, double beta, const Eigen::Ref<const Vector>& x, double y);

double sample_loss(const ParameterSet& params, const LossKind& kind, const Eigen::Ref<const Vector>& x, double y);

/// Mean per-sample loss, accumulated in index order with compensation.
double empirical_loss(const ParameterSet& params, const Batch& batch, const LossKind& kind);
double empirical_loss(const ParameterSet& params, const Dataset& data, const LossKind& kind);

/// Exact gradient of the empirical soft-min loss with respect to theta_j,
/// including the dependence of the weights on theta_j:
///   (2/n) sum_i p_ij (1 - beta (r_ij^2 - l_i)) (<x_i, theta_j> - y_i) x_i
/// where l_i is the per-sample soft-min loss. Rejects the hard-min sentinel.
Vector softmin_full_gradient(const ParameterSet& params, double beta, const Dataset& data, std::size_t j);

/// sum_i w_i * grad_theta l_softmin(theta; x_i, y_i), one row per component.
Matrix softmin_weighted_gradients(const ParameterSet& params, double beta, const Batch& batch,
                                  const Eigen::Ref<const Vector>& weights);

}  // namespace mixreg
