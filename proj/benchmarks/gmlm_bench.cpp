#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gmlm/effects.hpp"
#include "gmlm/estimator.hpp"
#include "gmlm/quantile_core.hpp"
#include "gmlm/tuning.hpp"
#include "gmlm/weighting.hpp"

using namespace gmlm;

namespace {

Sample lognormal_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return Sample(std::move(v));
}

void BM_LMoments(benchmark::State& state) {
  const Sample s = lognormal_sample(static_cast<std::size_t>(state.range(0)), 1);
  const auto R = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(lmoments(s, R));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LMoments)->Args({1000, 8})->Args({10000, 8})->Args({10000, 16});

void BM_DiscrepancyCovariance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Sample t = lognormal_sample(n, 2);
  const Sample c = lognormal_sample(n, 3);
  const BootstrapConfig cfg{static_cast<std::size_t>(state.range(1)), 4, 0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(discrepancy_covariance(t, c, 1.0, 8, {}, cfg));
  }
}
BENCHMARK(BM_DiscrepancyCovariance)->Args({500, 200})->Args({2000, 500})
    ->Unit(benchmark::kMillisecond);

void BM_FitLocationScale(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  GmlmProblem p{lognormal_sample(n, 5), lognormal_sample(n, 6), 8, {}, {}};
  p.weight = optimal_weight_matrix(p.treated, p.control, 1.0, 8, {}, {200, 7, 0});
  for (auto _ : state) benchmark::DoNotOptimize(fit_location_scale(p));
}
BENCHMARK(BM_FitLocationScale)->Arg(500)->Arg(5000);

void BM_FitGaussNewton(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  GmlmProblem p{lognormal_sample(n, 5), lognormal_sample(n, 6), 8, {}, {}};
  p.weight = WeightMatrix::identity(8);
  const ModelSpec m = ModelSpec::location_scale();
  for (auto _ : state) benchmark::DoNotOptimize(fit_generic(p, m));
}
BENCHMARK(BM_FitGaussNewton)->Arg(500)->Arg(5000);

void BM_EstimateEffect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Sample t = lognormal_sample(n, 8);
  const Sample c = lognormal_sample(n, 9);
  EffectConfig cfg;
  cfg.bootstrap = {200, 10, 0};
  for (auto _ : state) benchmark::DoNotOptimize(estimate_effect(t, c, cfg));
}
BENCHMARK(BM_EstimateEffect)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_SelectHyperparams(benchmark::State& state) {
  std::vector<PlaceboPeriod> ps;
  for (std::uint64_t t = 0; t < 4; ++t) {
    ps.push_back(make_placebo_period("p" + std::to_string(t),
                                     lognormal_sample(500, 20 + 2 * t),
                                     lognormal_sample(500, 21 + 2 * t)));
  }
  TuningConfig cfg;
  cfg.bootstrap = {200, 11, 0};
  const HyperGrid grid;
  for (auto _ : state) benchmark::DoNotOptimize(select_hyperparams(ps, grid, cfg));
}
BENCHMARK(BM_SelectHyperparams)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
