#include "mixreg/losses.hpp"

#include <cmath>

namespace mixreg {

namespace {

void check_dims(const ParameterSet& params, Eigen::Index d) {
  if (params.k() == 0) throw std::invalid_argument("loss: empty parameter set");
  if (static_cast<Eigen::Index>(params.d()) != d) throw std::invalid_argument("loss: dimension mismatch");
}

}  // namespace

void SoftminConfig::validate() const {
  if (std::isnan(beta) || beta < 0.0) throw std::invalid_argument("SoftminConfig: beta must be >= 0");
}

Vector squared_residuals(const ParameterSet& params, const Eigen::Ref<const Vector>& x, double y) {
  check_dims(params, x.size());
  Vector r = (y - (params.matrix() * x).array()).matrix();
  return r.array().square().matrix();
}

std::size_t argmin_lowest(const Eigen::Ref<const Vector>& values) {
  std::size_t best = 0;
  for (Eigen::Index j = 1; j < values.size(); ++j) {
    if (values(j) < values(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(j);
  }
  return best;
}

double min_loss(const ParameterSet& params, const Eigen::Ref<const Vector>& x, double y) {
  return squared_residuals(params, x, y).minCoeff();
}

Vector softmin_weights(const Eigen::Ref<const Vector>& sq, double beta) {
  SoftminConfig{beta}.validate();
  const Eigen::Index k = sq.size();
  Vector p = Vector::Zero(k);
  if (beta == kInfinity) {
    p(static_cast<Eigen::Index>(argmin_lowest(sq))) = 1.0;
    return p;
  }
  if (beta == 0.0) {
    p.setConstant(1.0 / static_cast<double>(k));
    return p;
  }
  const double shift = beta * sq.minCoeff();
  double total = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    p(j) = std::exp(-(beta * sq(j) - shift));
    total += p(j);
  }
  return p / total;
}

Vector softmin_probabilities(const ParameterSet& params, double beta, const Eigen::Ref<const Vector>& x, double y) {
  return softmin_weights(squared_residuals(params, x, y), beta);
}

double softmin_loss(const ParameterSet& params, double beta, const Eigen::Ref<const Vector>& x, double y) {
  const Vector sq = squared_residuals(params, x, y);
  const Vector p = softmin_weights(sq, beta);
  if (beta == kInfinity) return sq.minCoeff();
  return p.dot(sq);
}

double sample_loss(const ParameterSet& params, const LossKind& kind, const Eigen::Ref<const Vector>& x, double y) {
  return kind.tag == LossKind::Tag::Min ? min_loss(params, x, y) : softmin_loss(params, kind.softmin.beta, x, y);
}

double empirical_loss(const ParameterSet& params, const Batch& batch, const LossKind& kind) {
  if (batch.size() == 0) throw std::invalid_argument("empirical_loss: empty dataset");
  check_dims(params, static_cast<Eigen::Index>(batch.dim()));
  CompensatedSum sum;
  for (std::size_t i = 0; i < batch.size(); ++i) sum.add(sample_loss(params, kind, batch.x(i), batch.y(i)));
  return sum.value() / static_cast<double>(batch.size());
}

double empirical_loss(const ParameterSet& params, const Dataset& data, const LossKind& kind) {
  return empirical_loss(params, data.all(), kind);
}

Matrix softmin_weighted_gradients(const ParameterSet& params, double beta, const Batch& batch,
                                  const Eigen::Ref<const Vector>& weights) {
  if (beta == kInfinity) throw std::invalid_argument("softmin gradient: hard-min is not differentiable");
  SoftminConfig{beta}.validate();
  check_dims(params, static_cast<Eigen::Index>(batch.dim()));
  if (static_cast<std::size_t>(weights.size()) != batch.size()) {
    throw std::invalid_argument("softmin gradient: weight count != batch size");
  }
  const std::size_t k = params.k();
  Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(params.d()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto x = batch.x(i);
    const Vector pred = params.matrix() * x;
    const Vector resid = (pred.array() - batch.y(i)).matrix();  // <x, theta_j> - y
    const Vector sq = resid.array().square().matrix();
    const Vector p = softmin_weights(sq, beta);
    const double loss = p.dot(sq);
    for (std::size_t j = 0; j < k; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double coef = weights(static_cast<Eigen::Index>(i)) * 2.0 * p(jj) * (1.0 - beta * (sq(jj) - loss)) * resid(jj);
      grad.row(jj) += coef * x.transpose();
    }
  }
  return grad;
}

Vector softmin_full_gradient(const ParameterSet& params, double beta, const Dataset& data, std::size_t j) {
  if (j >= params.k()) throw std::invalid_argument("softmin_full_gradient: component index out of range");
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(data.n()), 1.0 / static_cast<double>(data.n()));
  return softmin_weighted_gradients(params, beta, data.all(), w).row(static_cast<Eigen::Index>(j)).transpose();
}

}  // namespace mixreg
