#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "iglu/agent.hpp"
#include "iglu/tape.hpp"

using namespace iglu;

namespace {

// A legal build of a random three-layer structure, planned by the reference
// builder so that every action passes the reach and occupancy rules.
tape::Tape build_tape() {
  std::mt19937 rng(3);
  const auto target = bench::random_grid(rng, 4, 3, 0.25);
  WorldState world = spawn_state({});
  std::vector<BuildAction> actions;
  for (const auto& line : agent::script_instructions({}, target)) {
    const auto planned = agent::plan_commands(world, *agent::parse_command(line));
    for (const auto& a : *planned) {
      world = apply_action(world, a);
      actions.push_back(a);
    }
  }
  return tape::record_tape(spawn_state({}), actions);
}

const tape::Tape& sample() {
  static const tape::Tape t = build_tape();
  return t;
}

}  // namespace

static void BM_TapeSerialize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tape::serialize_tape(sample()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sample().events.size()));
}
BENCHMARK(BM_TapeSerialize);

static void BM_TapeParse(benchmark::State& state) {
  const auto lines = tape::serialize_tape(sample());
  for (auto _ : state) benchmark::DoNotOptimize(tape::parse_tape(lines));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lines.size()));
}
BENCHMARK(BM_TapeParse);

static void BM_TapeReplay(benchmark::State& state) {
  const auto initial = spawn_state({});
  for (auto _ : state) benchmark::DoNotOptimize(tape::replay(sample(), initial));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sample().events.size()));
}
BENCHMARK(BM_TapeReplay);
