#include <mixreg/datagen.hpp>
#include <mixreg/diagnostics.hpp>
#include <mixreg/generalization.hpp>
#include <mixreg/losses.hpp>
#include <mixreg/solvers.hpp>

#include <benchmark/benchmark.h>

using namespace mixreg;

namespace {

struct Fixture {
  Dataset data;
  ParameterSet truth;
  ParameterSet init;
};

Fixture make_fixture(std::size_t n, std::size_t d, std::size_t k) {
  Rng rng(1);
  GeneratorSpec spec;
  spec.n = n;
  spec.d = d;
  spec.k = k;
  spec.sigma = 0.1;
  spec.component_scale = 5.0;
  auto out = generate(spec, rng);
  ParameterSet truth = out.data.truth()->components;
  ParameterSet init = sample_initialization(truth, {0.1, InitMode::SphereSurface}, rng);
  return {std::move(out.data), std::move(truth), std::move(init)};
}

void BM_AmStep(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), 10, 2);
  for (auto _ : state) {
    const Partition sets = am_partition_step(f.init, f.data.all());
    benchmark::DoNotOptimize(am_gradient_step(f.init, f.data.all(), sets, 0.5));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AmStep)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_EmStep(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), 10, 2);
  const SoftminConfig softmin{10.0};
  for (auto _ : state) {
    const Matrix probs = em_probability_step(f.init, softmin, f.data.all());
    benchmark::DoNotOptimize(em_gradient_step(f.init, probs, f.data.all(), 0.5));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmStep)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_RunAm(benchmark::State& state) {
  const auto f = make_fixture(4000, 10, 2);
  SolverConfig cfg;
  cfg.iterations = 100;
  cfg.record_diagnostics = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_gradient_am(f.data, f.init, cfg, f.truth));
}
BENCHMARK(BM_RunAm)->Arg(0)->Arg(1);

void BM_SoftminGradient(benchmark::State& state) {
  const auto f = make_fixture(10000, 10, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(softmin_full_gradient(f.init, 1.0, f.data, 0));
}
BENCHMARK(BM_SoftminGradient)->Arg(2)->Arg(4)->Arg(8);

void BM_ParamDistance(benchmark::State& state) {
  Rng rng(2);
  const auto k = static_cast<std::size_t>(state.range(0));
  const ParameterSet a(gaussian_matrix(rng, k, 10));
  const ParameterSet b(gaussian_matrix(rng, k, 10));
  for (auto _ : state) benchmark::DoNotOptimize(param_distance(a, b));
}
BENCHMARK(BM_ParamDistance)->Arg(2)->Arg(4)->Arg(6)->Arg(8);

void BM_RestrictedMoments(benchmark::State& state) {
  Rng rng(3);
  const Matrix x = gaussian_matrix(rng, 10000, static_cast<std::size_t>(state.range(0)));
  const auto members = halfspace_membership(x, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(restricted_moments(x, members));
}
BENCHMARK(BM_RestrictedMoments)->Arg(10)->Arg(64)->Arg(128);

void BM_Rademacher(benchmark::State& state) {
  Rng rng(4);
  const Dataset data = bounded_dataset(static_cast<std::size_t>(state.range(0)), 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rademacher_estimate(data, 1.0, 2, 2, 80, Rng(5)));
}
BENCHMARK(BM_Rademacher)->Arg(256)->Arg(4096);

}  // namespace
BENCHMARK_MAIN();
