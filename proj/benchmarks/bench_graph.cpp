#include <benchmark/benchmark.h>

#include "tokenwalk/graph.hpp"

namespace {

using namespace tokenwalk;

void BM_GenerateTopology(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_topology(n, 0.3, seed++, true));
  }
}
BENCHMARK(BM_GenerateTopology)->Arg(50)->Arg(200)->Arg(1000);

void BM_BuildTransitionMatrix(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Topology topo = generate_topology(n, 0.3, 7, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_transition_matrix(topo, TransitionPolicy::MetropolisHastings));
  }
}
BENCHMARK(BM_BuildTransitionMatrix)->Arg(50)->Arg(200);

void BM_NextAgent(benchmark::State& state) {
  const Topology topo = generate_topology(200, 0.3, 7, false);
  const TransitionMatrix p = build_transition_matrix(topo, TransitionPolicy::UniformNeighbors);
  RngStream rng(1);
  int agent = 0;
  for (auto _ : state) {
    agent = next_agent(p, agent, rng);
    benchmark::DoNotOptimize(agent);
  }
}
BENCHMARK(BM_NextAgent);

}  // namespace
