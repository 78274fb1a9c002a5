#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "iglu/taxonomy.hpp"

using namespace iglu;

static void BM_Classify(benchmark::State& state) {
  std::mt19937 rng(5);
  const auto g = bench::random_grid(rng, 5, static_cast<int>(state.range(0)), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(taxonomy::classify(g));
}
BENCHMARK(BM_Classify)->Arg(1)->Arg(9);
