#include <benchmark/benchmark.h>

#include "tokenwalk/losses.hpp"
#include "tokenwalk/rng.hpp"

namespace {

using namespace tokenwalk;

DataShard dense_shard(int rows, int p, Task task, std::uint64_t seed) {
  RngStream rng(seed);
  DataShard shard;
  shard.n_features = p;
  shard.task = task;
  for (int r = 0; r < rows; ++r) {
    SparseRow row;
    row.idx.resize(p);
    row.val.resize(p);
    for (int j = 0; j < p; ++j) {
      row.idx[j] = j;
      row.val[j] = rng.normal();
    }
    shard.rows.push_back(std::move(row));
    shard.labels.push_back(task == Task::Regression ? rng.normal()
                                                    : (rng.uniform01() < 0.5 ? 1.0 : -1.0));
  }
  return shard;
}

void BM_ProxLeastSquares(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const LossModel model(LossKind::LeastSquares, dense_shard(2 * p, p, Task::Regression, 1));
  RngStream rng(2);
  Eigen::VectorXd anchor(p);
  for (int j = 0; j < p; ++j) anchor[j] = rng.normal();
  const Eigen::VectorXd anchors[] = {anchor};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.prox_solve(anchors, 1.0, 1e-10));
  }
}
BENCHMARK(BM_ProxLeastSquares)->Arg(8)->Arg(64)->Arg(256);

void BM_ProxLogisticNewton(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const LossModel model(LossKind::Logistic, dense_shard(2 * p, p, Task::Classification, 3));
  RngStream rng(4);
  Eigen::VectorXd anchor(p);
  for (int j = 0; j < p; ++j) anchor[j] = 0.1 * rng.normal();
  const Eigen::VectorXd anchors[] = {anchor};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.prox_solve(anchors, 1.0, 1e-10));
  }
}
BENCHMARK(BM_ProxLogisticNewton)->Arg(8)->Arg(64);

void BM_GradProxStep(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const LossModel model(LossKind::LeastSquares, dense_shard(2 * p, p, Task::Regression, 5));
  RngStream rng(6);
  Eigen::VectorXd x(p), anchor(p);
  for (int j = 0; j < p; ++j) {
    x[j] = rng.normal();
    anchor[j] = rng.normal();
  }
  const Eigen::VectorXd anchors[] = {anchor};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.grad_prox_step(x, anchors, 1.0, 0.5));
  }
}
BENCHMARK(BM_GradProxStep)->Arg(8)->Arg(64)->Arg(256);

}  // namespace
