#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "iglu/metrics.hpp"

using namespace iglu;

// Args: region half-width, height. The shift search dominates, so the cost
// grows with the number of changed cells in both deltas.
static void BM_GridF1(benchmark::State& state) {
  std::mt19937 rng(11);
  const int half = static_cast<int>(state.range(0));
  const int height = static_cast<int>(state.range(1));
  const auto g0 = bench::random_grid(rng, half, 1, 0.2);
  const auto target = diff(g0, bench::random_grid(rng, half, height, 0.3));
  const auto built = bench::random_grid(rng, half, height, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::grid_f1(built, g0, target));
  state.counters["changes"] = static_cast<double>(target.size());
}
BENCHMARK(BM_GridF1)->Args({2, 3})->Args({5, 9});

static void BM_GridF1NoShift(benchmark::State& state) {
  std::mt19937 rng(11);
  const auto g0 = bench::random_grid(rng, 5, 1, 0.2);
  const auto target = diff(g0, bench::random_grid(rng, 5, 9, 0.3));
  const auto built = bench::random_grid(rng, 5, 9, 0.3);
  metrics::ScoreOptions options;
  options.shift_window = 0;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::grid_f1(built, g0, target, options));
}
BENCHMARK(BM_GridF1NoShift);
