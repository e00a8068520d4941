#include <mixreg/datagen.hpp>
#include <mixreg/diagnostics.hpp>

#include <gtest/gtest.h>

#include "mixreg_testing.hpp"

using namespace mixreg;

namespace {

std::vector<double> geometric(double rho, double floor, double d0, std::size_t n) {
  std::vector<double> out;
  for (std::size_t t = 0; t < n; ++t) out.push_back(std::pow(rho, static_cast<double>(t)) * (d0 - floor) + floor);
  return out;
}

}  // namespace

TEST(Contraction, PureGeometric) {
  const auto fit = fit_contraction(geometric(0.5, 0.0, 1.0, 30));
  EXPECT_NEAR(fit.rho_hat, 0.5, 1e-6);
  EXPECT_NEAR(fit.floor_hat, 0.0, 1e-6);
  EXPECT_FALSE(fit.no_decay);
  EXPECT_FALSE(fit.divergent);
  EXPECT_FALSE(fit.non_monotone);
}

TEST(Contraction, GeometricWithFloor) {
  const auto fit = fit_contraction(geometric(0.8, 0.01, 1.01, 60));
  EXPECT_NEAR(fit.rho_hat, 0.8, 1e-4);
  EXPECT_NEAR(fit.floor_hat, 0.01, 1e-4);
  EXPECT_NEAR(fit.per_step_epsilon, fit.floor_hat * (1.0 - fit.rho_hat), 1e-15);
  EXPECT_LT(fit.fit_residual, 1e-5);
}

TEST(Contraction, UnevenTimes) {
  std::vector<double> times, dist;
  for (std::size_t i = 0; i < 15; ++i) {
    const double t = 3.0 * static_cast<double>(i);
    times.push_back(t);
    dist.push_back(0.05 + 2.0 * std::pow(0.9, t));
  }
  const auto fit = fit_contraction(times, dist);
  EXPECT_NEAR(fit.rho_hat, 0.9, 1e-3);
  EXPECT_NEAR(fit.floor_hat, 0.05, 1e-3);
}

TEST(Contraction, ConstantSequenceFlagged) {
  const auto fit = fit_contraction(std::vector<double>(12, 0.3));
  EXPECT_TRUE(fit.no_decay);
  EXPECT_DOUBLE_EQ(fit.floor_hat, 0.3);
}

TEST(Contraction, GrowingSequenceDivergent) {
  std::vector<double> d;
  for (int t = 0; t < 12; ++t) d.push_back(std::pow(1.2, t));
  EXPECT_TRUE(fit_contraction(d).divergent);
}

TEST(Contraction, NonMonotoneFlagged) {
  auto d = geometric(0.5, 0.0, 1.0, 20);
  d[10] = 0.4;
  EXPECT_TRUE(fit_contraction(d).non_monotone);
}

TEST(Contraction, InputValidation) {
  EXPECT_THROW(fit_contraction(std::vector<double>(9, 1.0)), std::invalid_argument);
  auto d = geometric(0.5, 0.0, 1.0, 12);
  d[3] = -1.0;
  EXPECT_THROW(fit_contraction(d), std::invalid_argument);
  std::vector<double> t(12, 0.0);
  EXPECT_THROW(fit_contraction(t, geometric(0.5, 0.0, 1.0, 12)), std::invalid_argument);
}

TEST(Pe, IdenticalIsZeroAndSwappedIsOne) {
  Rng r(1);
  GeneratorSpec s;
  s.n = 1000;
  s.d = 3;
  s.k = 2;
  s.component_scale = 3.0;
  const auto out = generate(s, r);
  const ParameterSet& truth = out.data.truth()->components;
  const auto same = empirical_pe(truth, truth, out.data);
  EXPECT_EQ(same.pooled, 0.0);
  EXPECT_EQ(same.mean_over_cells, 0.0);
  const std::vector<std::size_t> swap{1, 0};
  const auto swapped = empirical_pe(truth.permuted(swap), truth, out.data);
  EXPECT_EQ(swapped.pooled, 1.0);
  EXPECT_EQ(swapped.cell_sizes[0] + swapped.cell_sizes[1], 1000u);
}

TEST(Pe, ByHandWithEmptyCell) {
  Matrix x(3, 1);
  x << 1.0, 1.0, 1.0;
  Vector y(3);
  y << 0.0, 0.1, 0.9;
  const Dataset data(x, y);
  const ParameterSet truth{{0.0}, {1.0}, {50.0}};
  const ParameterSet current{{0.0}, {0.05}, {50.0}};
  // truth cells {0,1}, {2}, {}; current cells {0}, {1,2}, {}
  const auto pe = empirical_pe(current, truth, data);
  EXPECT_NEAR(pe.pooled, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(pe.per_cell[0], 0.5, 1e-15);
  EXPECT_NEAR(pe.per_cell[1], 0.0, 1e-15);
  EXPECT_TRUE(std::isnan(pe.per_cell[2]));
  EXPECT_EQ(pe.excluded_cells, (std::vector<std::size_t>{2}));
  EXPECT_NEAR(pe.mean_over_cells, 0.25, 1e-15);
}

TEST(Pe, RotationInvariant) {
  Rng r(2);
  const Dataset data = testkit::random_dataset(r, 500, 4);
  const ParameterSet truth = testkit::random_params(r, 3, 4);
  const ParameterSet current = testkit::random_params(r, 3, 4);
  const Eigen::MatrixXd q = testkit::random_orthogonal(r, 4);
  const Dataset rotated(Matrix(data.covariates() * q.transpose()), data.labels());
  const auto a = empirical_pe(current, truth, data);
  const auto b = empirical_pe(ParameterSet(Matrix(current.matrix() * q.transpose())),
                              ParameterSet(Matrix(truth.matrix() * q.transpose())), rotated);
  EXPECT_EQ(a.pooled, b.pooled);
}

TEST(Pe, GrowsWithInitializationRadius) {
  Rng r(3);
  GeneratorSpec s;
  s.n = 20000;
  s.d = 5;
  s.k = 3;
  s.component_scale = 2.0;
  const auto out = generate(s, r);
  const ParameterSet& truth = out.data.truth()->components;
  double prev = -1.0;
  for (double c : {0.0, 0.05, 0.2, 0.5}) {
    Rng init_rng(77);
    const ParameterSet init = sample_initialization(truth, {c, InitMode::SphereSurface}, init_rng);
    const double pe = empirical_pe(init, truth, out.data).pooled;
    EXPECT_GE(pe, prev);
    prev = pe;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(SeparationDecay, MonotoneOnMarginFamily) {
  std::vector<GeneratorSpec> family;
  for (double m : {0.2, 0.5, 1.0}) {
    GeneratorSpec s;
    s.n = 20000;
    s.d = 5;
    s.k = 2;
    s.separation_margin = m;
    family.push_back(s);
  }
  const auto decay = separation_decay_probe(family, {0.3, InitMode::SphereSurface}, Rng(4), 2);
  ASSERT_EQ(decay.levels.size(), 3u);
  EXPECT_TRUE(decay.monotone);
  for (const auto& lvl : decay.levels) {
    EXPECT_GE(lvl.delta_hat, lvl.spec.separation_margin);
    EXPECT_NEAR(lvl.lambda_hat, 0.0, 1e-12);
  }
  EXPECT_THROW(separation_decay_probe(std::span(family).first(2), {0.3, InitMode::SphereSurface}, Rng(4)),
               std::invalid_argument);
}

TEST(RestrictedMoments, FullSampleMatchesDenseMoments) {
  Rng r(5);
  const Matrix x = gaussian_matrix(r, 400, 3);
  std::vector<std::size_t> all(400);
  std::iota(all.begin(), all.end(), 0);
  const auto m = restricted_moments(x, all);
  const Vector mean = x.colwise().mean().transpose();
  EXPECT_LE((m.mean_hat - mean).norm(), 1e-14);
  const Eigen::MatrixXd second = (x.transpose() * x) / 400.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second);
  EXPECT_NEAR(m.second_moment_min_singular, es.eigenvalues()(0), 1e-12);
  EXPECT_EQ(m.sample_count, 400u);
  EXPECT_DOUBLE_EQ(m.volume_hat, 1.0);
  EXPECT_FALSE(m.iterative);
}

TEST(RestrictedMoments, IterativeAgreesWithDense) {
  Rng r(6);
  const std::size_t d = kDenseEigenLimit + 6;
  const Matrix x = gaussian_matrix(r, 2000, d);
  std::vector<std::size_t> all(2000);
  std::iota(all.begin(), all.end(), 0);
  const auto m = restricted_moments(x, all);
  EXPECT_TRUE(m.iterative);
  const Eigen::MatrixXd second = (x.transpose() * x) / 2000.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second);
  EXPECT_NEAR(m.second_moment_min_singular, es.eigenvalues()(0), 1e-6);
}

TEST(RestrictedMoments, HalfspaceShiftsMeanAndFlagsRank) {
  Rng r(7);
  const Matrix x = gaussian_matrix(r, 100000, 4);
  const auto members = halfspace_membership(x, 0.5);
  EXPECT_EQ(members.size(), 50000u);
  EXPECT_TRUE(std::is_sorted(members.begin(), members.end()));
  const auto m = restricted_moments(x, members);
  EXPECT_NEAR(m.mean_hat(0), std::sqrt(2.0 / M_PI), 0.02);
  EXPECT_NEAR(m.mean_hat(1), 0.0, 0.02);
  EXPECT_NEAR(m.volume_hat, 0.5, 1e-12);
  EXPECT_GT(m.second_moment_min_singular, 0.3);
  const std::vector<std::size_t> few{0, 1};
  EXPECT_TRUE(restricted_moments(x, few).rank_deficient);
}

TEST(NormProbe, RateAndWitness) {
  Matrix x = Matrix::Zero(4, 2);
  x(2, 0) = 3.0;
  x(2, 1) = 4.0;
  x(1, 0) = 1.0;
  const std::vector<std::size_t> members{1, 2};
  const auto p = restricted_norm_probe(x, members, 0.5);
  EXPECT_DOUBLE_EQ(p.max_norm, 5.0);
  EXPECT_EQ(p.witness, 2u);
  const double rate = std::sqrt(2.0 * (1.0 + std::log(2.0)) * (1.0 + std::log(2.0)));
  EXPECT_NEAR(p.rate, rate, 1e-14);
  EXPECT_NEAR(p.ratio, 5.0 / rate, 1e-14);
}

TEST(Eta, BetaZeroGivesUniformWeights) {
  Rng r(8);
  const Dataset data = testkit::random_dataset(r, 200, 3);
  const ParameterSet p = testkit::random_params(r, 4, 3);
  const auto e = eta_probe(p, SoftminConfig{0.0}, data);
  EXPECT_DOUBLE_EQ(e.min_on_cell, 0.25);
  EXPECT_DOUBLE_EQ(e.max_off_cell, 0.25);
  EXPECT_TRUE(e.ordered);
}

TEST(Eta, LargeBetaConcentratesOnSeparatedData) {
  Rng r(9);
  GeneratorSpec s;
  s.n = 5000;
  s.d = 4;
  s.k = 2;
  s.separation_margin = 1.0;
  const auto out = generate(s, r);
  const ParameterSet& truth = out.data.truth()->components;
  const auto e = eta_probe(truth, SoftminConfig{20.0}, out.data);
  EXPECT_GT(e.min_on_cell, 1.0 - 1e-8);
  EXPECT_LT(e.max_off_cell, 1e-8);
  EXPECT_TRUE(e.ordered);
  const auto slack = eta_probe(truth, SoftminConfig{1.0}, out.data);
  EXPECT_LT(slack.min_on_cell, e.min_on_cell);
}

TEST(FloorScaling, SmallAgnosticProblem) {
  FloorScalingConfig cfg;
  cfg.generator.mode = GenerationMode::Agnostic;
  cfg.generator.n = 8000;
  cfg.generator.d = 3;
  cfg.generator.k = 2;
  cfg.generator.sigma = 0.1;
  cfg.generator.component_scale = 4.0;
  cfg.solver.iterations = 30;
  cfg.solver.split = SplitMode::NoSplit;
  cfg.init = {0.1, InitMode::SphereSurface};
  cfg.gamma_grid = {0.2, 0.4};
  cfg.misspec_grid = {0.2, 0.4};
  cfg.base_gamma = 0.4;
  cfg.base_misspec = 0.2;
  cfg.repetitions = 2;
  cfg.reference_samples = 20000;
  cfg.reference_iterations = 100;
  const auto out = floor_scaling_probe(cfg, Rng(10), 2);
  ASSERT_EQ(out.gamma_cells.size(), 2u);
  ASSERT_EQ(out.misspec_cells.size(), 2u);
  EXPECT_EQ(out.gamma_ratios.size(), 1u);
  EXPECT_EQ(out.misspec_ratios.size(), 1u);
  for (const auto& c : out.gamma_cells) {
    EXPECT_EQ(c.mean_curve.size(), 31u);
    EXPECT_TRUE(std::isfinite(c.fit.floor_hat));
    EXPECT_LT(c.mean_curve.back(), c.mean_curve.front());
  }
  EXPECT_DOUBLE_EQ(out.misspec_cells[0].misspec, 0.2);
  EXPECT_DOUBLE_EQ(out.gamma_cells[1].gamma, 0.4);
}
