// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "hbvla/binarizer.hpp"
#include "hbvla/haar.hpp"
#include "hbvla/permute.hpp"
#include "hbvla/pipeline.hpp"
#include "hbvla/rng.hpp"
#include "hbvla/serialize.hpp"

namespace {

using namespace hbvla;

QuantConfig standard_cfg() {
  QuantConfig c;
  c.hessian_mode = HessianSource::standard;
  return c;
}

void BM_HaarForwardRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix w = Rng(1).normal_matrix(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(haar_forward_rows(w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_HaarForwardRows)->Arg(256)->Arg(1024);

void BM_GreedyPairing(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Matrix w = Rng(2).normal_matrix(64, m);
  const auto norms = column_norms(w, SeedNorm::l2);
  const auto k = default_neighbors(m);
  for (auto _ : state) {
    const auto d = pairwise_distances(w, k);
    benchmark::DoNotOptimize(greedy_pair_and_chain(d, norms));
  }
}
BENCHMARK(BM_GreedyPairing)->Arg(128)->Arg(512)->Arg(1024);

void BM_SplitBand(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> u(128);
  for (double& v : u) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(split_band(u, 2, 0.0));
}
BENCHMARK(BM_SplitBand);

void BM_QuantizeLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const Matrix w = Rng(4).normal_matrix(n, m);
  const QuantConfig cfg = standard_cfg();
  for (auto _ : state) benchmark::DoNotOptimize(quantize_layer(w, {}, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * m));
}
BENCHMARK(BM_QuantizeLayer)->Args({64, 128})->Args({256, 512})->Unit(benchmark::kMillisecond);

void BM_SerializeRoundTrip(benchmark::State& state) {
  const Matrix w = Rng(5).normal_matrix(256, 512);
  const auto q = quantize_layer(w, {}, standard_cfg());
  for (auto _ : state) {
    const auto bytes = serialize_layer(q.layer);
    benchmark::DoNotOptimize(deserialize_layer(bytes));
  }
}
BENCHMARK(BM_SerializeRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
