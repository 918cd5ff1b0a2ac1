#include <benchmark/benchmark.h>

#include "tokenwalk/simulator.hpp"

namespace {

using namespace tokenwalk;

std::vector<LossModelPtr> bench_models(int n, int rows, int p) {
  RngStream rng(11);
  std::vector<LossModelPtr> models;
  for (int i = 0; i < n; ++i) {
    DataShard shard;
    shard.n_features = p;
    for (int r = 0; r < rows; ++r) {
      SparseRow row;
      row.idx.resize(p);
      row.val.resize(p);
      for (int j = 0; j < p; ++j) {
        row.idx[j] = j;
        row.val[j] = rng.normal();
      }
      shard.rows.push_back(std::move(row));
      shard.labels.push_back(rng.normal());
    }
    models.push_back(make_loss_model(LossKind::LeastSquares, std::move(shard)));
  }
  return models;
}

void BM_SimulationEvents(benchmark::State& state) {
  const int walks = static_cast<int>(state.range(0));
  const Topology topo = generate_topology(20, 0.7, 5, false);
  const auto models = bench_models(20, 24, 8);
  RunConfig config;
  config.algorithm = walks == 1 ? AlgorithmKind::IBcd : AlgorithmKind::ApiBcd;
  config.n_walks = walks;
  config.selection = SelectionRule::Markov;
  config.max_events = 2000;
  SimulationOptions options;
  options.compute = {ComputeModelKind::Zero, 0.0};
  options.probe_interval = 2000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_simulation(config, topo, models, options));
  }
  state.SetItemsProcessed(state.iterations() * config.max_events);
}
BENCHMARK(BM_SimulationEvents)->Arg(1)->Arg(5);

}  // namespace
