#include <mixreg/datagen.hpp>
#include <mixreg/geometry.hpp>

#include <gtest/gtest.h>

#include "mixreg_testing.hpp"

using namespace mixreg;

namespace {

// Independent cell rule: scan components in order, replace only on a strict decrease.
std::size_t ref_cell(const ParameterSet& p, const Vector& x, double y) {
  std::size_t best = 0;
  double best_sq = kInfinity;
  for (std::size_t j = 0; j < p.k(); ++j) {
    double dot = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) dot += p.matrix()(static_cast<Eigen::Index>(j), c) * x(c);
    const double r = (y - dot) * (y - dot);
    if (r < best_sq) {
      best_sq = r;
      best = j;
    }
  }
  return best;
}

}  // namespace

TEST(Geometry, PartitionMatchesReferenceAndCoversSamples) {
  Rng r(1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = 1 + r.index(5);
    const Dataset data = testkit::random_dataset(r, 200, 3);
    const ParameterSet p = testkit::random_params(r, k, 3);
    const auto cells = assign_cells(p, data.all());
    const Partition part = optimal_partition(p, data);
    ASSERT_EQ(part.size(), k);
    std::size_t total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      total += part[j].size();
      for (std::size_t i : part[j]) EXPECT_EQ(cells[i], j);
    }
    EXPECT_EQ(total, data.n());
    for (std::size_t i = 0; i < data.n(); ++i) EXPECT_EQ(cells[i], ref_cell(p, data.x(i), data.y(i)));
  }
}

TEST(Geometry, TieGoesToLowestIndex) {
  Matrix x(1, 1);
  x << 1.0;
  Vector y(1);
  y << 0.0;
  const Dataset data(x, y);
  const ParameterSet p{{1.0}, {-1.0}};
  EXPECT_EQ(assign_cells(p, data.all()), (std::vector<std::size_t>{0}));
}

TEST(Geometry, NoiselessTruthHasZeroLambda) {
  Rng r(2);
  GeneratorSpec s;
  s.n = 2000;
  s.d = 5;
  s.k = 3;
  s.component_scale = 3.0;
  const auto out = generate(s, r);
  const auto report = geometry_report(out.data.truth()->components, out.data);
  EXPECT_LT(report.lambda_hat, 1e-12);
  EXPECT_GT(report.delta_hat, 0.0);
  EXPECT_EQ(report.n, 2000u);
  std::size_t total = 0;
  for (auto c : report.counts) total += c;
  EXPECT_EQ(total, 2000u);
  EXPECT_FALSE(report.degenerate);
  ASSERT_TRUE(report.delta_witness);
  const std::size_t i = *report.delta_witness;
  const std::size_t l = *report.delta_witness_component;
  EXPECT_NEAR(std::abs(out.data.y(i) - out.data.x(i).dot(out.data.truth()->components.component(l))),
              report.delta_hat, 1e-12);
}

TEST(Geometry, MisspecifiedLambdaMeasuredAgainstReference) {
  Rng r(6);
  GeneratorSpec s;
  s.mode = GenerationMode::Agnostic;
  s.n = 5000;
  s.d = 4;
  s.k = 2;
  s.misspec_level = 0.5;
  const auto out = generate(s, r);
  const double lambda = estimate_lambda(out.data.truth()->components, out.data);
  EXPECT_GE(lambda, 0.4);
  EXPECT_LE(lambda, 0.5);
}

TEST(Geometry, SingleComponentHasInfiniteDelta) {
  Rng r(3);
  const Dataset data = testkit::random_dataset(r, 50, 2);
  const ParameterSet p = testkit::random_params(r, 1, 2);
  EXPECT_EQ(estimate_delta(p, data), kInfinity);
  EXPECT_DOUBLE_EQ(estimate_pi_min(p, data), 1.0);
  const auto report = geometry_report(p, data);
  EXPECT_FALSE(report.delta_witness);
}

TEST(Geometry, LambdaAndDeltaByHand) {
  Matrix x(3, 1);
  x << 1.0, 1.0, 1.0;
  Vector y(3);
  y << 0.1, 1.2, 2.0;
  const Dataset data(x, y);
  const ParameterSet p{{0.0}, {2.0}};
  // residuals: sample 0 -> (0.1, 1.9), sample 1 -> (1.2, 0.8), sample 2 -> (2.0, 0.0)
  EXPECT_NEAR(estimate_lambda(p, data), 0.8, 1e-15);
  EXPECT_NEAR(estimate_delta(p, data), 1.2, 1e-15);
  EXPECT_NEAR(estimate_pi_min(p, data), 1.0 / 3.0, 1e-15);
}

TEST(Geometry, DegenerateCellFlagged) {
  Matrix x(2, 1);
  x << 1.0, 1.0;
  Vector y(2);
  y << 0.0, 0.1;
  const Dataset data(x, y);
  const ParameterSet p{{0.0}, {100.0}};
  const auto report = geometry_report(p, data);
  EXPECT_TRUE(report.degenerate);
  EXPECT_EQ(report.pi_min_hat, 0.0);
  EXPECT_THROW(check_am_separation(report, p, 0.1), std::invalid_argument);
}

TEST(Geometry, SeparationThresholdFormula) {
  GeometryReport rep;
  rep.lambda_hat = 0.5;
  rep.delta_hat = 4.0;
  rep.pi_min_hat = 0.25;
  const ParameterSet star{{3.0, 4.0}, {0.0, 1.0}};
  const double L = std::log(4.0);
  const double expected = 0.5 + 2.0 * (0.2 * std::sqrt(L) * 5.0 + std::sqrt(1.0 + L));
  const auto c = check_am_separation(rep, star, 0.2, 2.0);
  EXPECT_NEAR(c.threshold, expected, 1e-14);
  EXPECT_EQ(c.holds, 4.0 > expected);
  EXPECT_DOUBLE_EQ(c.separation, 4.0);
}

TEST(Geometry, InitializationRadius) {
  Rng r(4);
  const ParameterSet star = testkit::random_params(r, 4, 6, 2.0);
  const ParameterSet sphere = sample_initialization(star, {0.3, InitMode::SphereSurface}, r);
  const ParameterSet ball = sample_initialization(star, {0.3, InitMode::Ball}, r);
  for (std::size_t j = 0; j < 4; ++j) {
    const double rad = 0.3 * star.component(j).norm();
    EXPECT_NEAR((sphere.component(j) - star.component(j)).norm(), rad, 1e-12);
    EXPECT_LE((ball.component(j) - star.component(j)).norm(), rad + 1e-12);
  }
  EXPECT_TRUE(sample_initialization(star, {0.0, InitMode::SphereSurface}, r) == star);
  EXPECT_THROW(sample_initialization(star, {-1.0, InitMode::Ball}, r), std::invalid_argument);
}

TEST(Geometry, InitializationStreamIndependentOfRadius) {
  const ParameterSet star{{1.0, 0.0}, {0.0, 1.0}};
  Rng a(5), b(5);
  const ParameterSet small = sample_initialization(star, {0.1, InitMode::SphereSurface}, a);
  const ParameterSet large = sample_initialization(star, {0.2, InitMode::SphereSurface}, b);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_LE(((large.component(j) - star.component(j)) - 2.0 * (small.component(j) - star.component(j))).norm(), 1e-14);
  }
}
