// Serial reference against the OpenMP kernels.
#include <benchmark/benchmark.h>

#include "rankcop/fgm_exact.hpp"
#include "rankcop/montecarlo.hpp"

using namespace rankcop;

namespace {

void BM_DTableSerial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(DCoefficientTable::build_serial(n));
}

void BM_DTableParallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(DCoefficientTable(n));
}

IncompleteRanking toy() { return IncompleteRanking(Permutation::parse("2,1,3"), {1, 3, 4}, 7); }

void predictive(benchmark::State& state, bool parallel) {
  const auto inc = toy();
  const auto prior = Prior::jeffreys();
  ExactOptions opts;
  opts.parallel = parallel;
  for (auto _ : state) benchmark::DoNotOptimize(exact_predictive(inc, prior, opts));
}
void BM_PredictiveSerial(benchmark::State& state) { predictive(state, false); }
void BM_PredictiveParallel(benchmark::State& state) { predictive(state, true); }

void BM_McSerial(benchmark::State& state) {
  const CopulaModel model(CopulaFamily::gaussian);
  const auto s = Permutation::parse("3,1,4,2,5,7,6");
  McOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(mc_rank_likelihood_serial(s, 0.6, model, state.range(0), o));
}

void BM_McParallel(benchmark::State& state) {
  const CopulaModel model(CopulaFamily::gaussian);
  const auto s = Permutation::parse("3,1,4,2,5,7,6");
  McOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(mc_rank_likelihood(s, 0.6, model, state.range(0), o));
}

}  // namespace

BENCHMARK(BM_DTableSerial)->DenseRange(6, 9)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DTableParallel)->DenseRange(6, 9)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictiveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictiveParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_McSerial)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_McParallel)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
