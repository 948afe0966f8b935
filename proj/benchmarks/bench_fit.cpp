#include <benchmark/benchmark.h>

#include "sbgam/ll_fit.hpp"
#include "sbgam/nw_fit.hpp"
#include "sbgam/sim.hpp"

using namespace sbgam;

namespace {

SmoothingContext context(std::size_t n, std::size_t extra, std::size_t grid) {
  const SimModel m = SimModel::table(1, 1, n, 1, extra);
  const Dataset data = to_unit_dataset(simulate(m));
  return SmoothingContext(data, {BaseKernel::epanechnikov, fixture_rule(n).bandwidths(data)}, Grid(grid));
}

void BM_NwMarginals(benchmark::State& state) {
  const auto ctx = context(static_cast<std::size_t>(state.range(0)), 0, 41);
  const auto eta = AdditivePredictor::constant(0.0, 2, 41);
  const Family fam = Family::bernoulli_logit();
  for (auto _ : state) benchmark::DoNotOptimize(nw_marginals(eta, ctx, fam));
}
BENCHMARK(BM_NwMarginals)->Arg(100)->Arg(500)->Arg(2000);

void BM_LlMarginals(benchmark::State& state) {
  const auto ctx = context(static_cast<std::size_t>(state.range(0)), 0, 41);
  const auto eta = LlPredictor::constant(0.0, 2, 41);
  const Family fam = Family::bernoulli_logit();
  for (auto _ : state) benchmark::DoNotOptimize(ll_marginals(eta, ctx, fam));
}
BENCHMARK(BM_LlMarginals)->Arg(100)->Arg(500)->Arg(2000);

void BM_FitNw(benchmark::State& state) {
  const auto ctx = context(static_cast<std::size_t>(state.range(0)), 0, 41);
  for (auto _ : state) benchmark::DoNotOptimize(fit_nw(ctx, Family::bernoulli_logit()));
}
BENCHMARK(BM_FitNw)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FitLl(benchmark::State& state) {
  const auto ctx = context(static_cast<std::size_t>(state.range(0)), 0, 41);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ll(ctx, Family::bernoulli_logit()));
}
BENCHMARK(BM_FitLl)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FitNwFiveDims(benchmark::State& state) {
  const auto ctx = context(200, 3, 11);
  for (auto _ : state) benchmark::DoNotOptimize(fit_nw(ctx, Family::bernoulli_logit()));
}
BENCHMARK(BM_FitNwFiveDims)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
