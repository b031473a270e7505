// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "specquant/spectral.hpp"
#include "specquant/synthetic.hpp"

namespace {

std::vector<double> signal(std::size_t n) {
  specquant::synthetic::Rng rng(n);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

void BM_FftHalfSpectrum(benchmark::State& state) {
  const auto x = signal(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(specquant::fft(x));
  state.SetComplexityN(state.range(0));
}
// Powers of two take the radix-2 path, the rest go through Bluestein.
BENCHMARK(BM_FftHalfSpectrum)->Arg(64)->Arg(100)->Arg(256)->Arg(257)->Arg(1024)->Arg(1000)->Arg(4096)->Arg(4095);

void BM_NaiveDft(benchmark::State& state) {
  const auto x = signal(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(specquant::dft_naive(x));
}
BENCHMARK(BM_NaiveDft)->Arg(64)->Arg(256);

void BM_TruncateReconstruct(benchmark::State& state) {
  const std::size_t n = 4096;
  const auto half = specquant::fft(signal(n));
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(specquant::reconstruct(specquant::truncate_low_freq(half, n, k)));
}
BENCHMARK(BM_TruncateReconstruct)->Arg(16)->Arg(410)->Arg(2049);

}  // namespace
