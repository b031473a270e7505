// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "specquant/pipeline.hpp"
#include "specquant/synthetic.hpp"

namespace {

using namespace specquant;

void BM_CompressLayer(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const Matrix x = synthetic::outlier_activations(128, dim, 1);
  const Matrix w = synthetic::smooth_decay_layer(dim, dim, 2.0, 1).weights;
  CompressConfig config;
  config.residual_quant = state.range(1) ? ResidualQuant::compensated : ResidualQuant::rtn;
  for (auto _ : state) benchmark::DoNotOptimize(compress_layer(x, w, config));
}
BENCHMARK(BM_CompressLayer)->Args({128, 0})->Args({256, 0})->Args({512, 0})->Args({256, 1})->Unit(benchmark::kMillisecond);

void BM_MigrationSearch(benchmark::State& state) {
  const Matrix x = synthetic::outlier_activations(128, 128, 2);
  const Matrix w = synthetic::smooth_decay_layer(128, 128, 2.0, 2).weights;
  CompressConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(select_migration_strength(x, w, config));
}
BENCHMARK(BM_MigrationSearch)->Unit(benchmark::kMillisecond);

void BM_SvdBaseline(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const Matrix w = synthetic::smooth_decay_layer(dim, dim, 2.0, 3).weights;
  for (auto _ : state) benchmark::DoNotOptimize(svd_rank(w, dim / 10));
}
BENCHMARK(BM_SvdBaseline)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_CompareBudgets(benchmark::State& state) {
  const Matrix w = synthetic::smooth_decay_layer(256, 256, 2.0, 4).weights;
  for (auto _ : state) benchmark::DoNotOptimize(compare_budgets(w, nullptr, 0.2));
}
BENCHMARK(BM_CompareBudgets)->Unit(benchmark::kMillisecond);

}  // namespace
