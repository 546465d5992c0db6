#include <benchmark/benchmark.h>

#include "snorm/model.hpp"

using namespace snorm;

namespace {

Tensor random_batch(long n, long y, long x, long c, std::uint64_t seed) {
  Rng rng(seed);
  return rng_normal(rng, {n, y, x, c}, 1.0);
}

void BM_LpStats(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  Tensor x = random_batch(32, 8, 8, 16, 1);
  LpConfig cfg{p, LpSetting::A, 1e-5};
  for (auto _ : state) {
    NormStats s = compute_stats(x, preset("BN"), cfg);
    benchmark::DoNotOptimize(s.sigma.data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_LpStats)->Arg(1)->Arg(2);

void BM_GbnForwardBackward(benchmark::State& state) {
  Tensor x = random_batch(32, 8, 8, 16, 2);
  Tensor dy = random_batch(32, 8, 8, 16, 3);
  NormLayer layer(NormKind::batch, preset("BN"), {2, LpSetting::A, 1e-5});
  for (auto _ : state) {
    Tensor y = layer.forward(x);
    Tensor dx = layer.backward(dy);
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_GbnForwardBackward);

void BM_StreamingForwardBackward(benchmark::State& state) {
  Tensor x = random_batch(32, 8, 8, 16, 4);
  Tensor dy = random_batch(32, 8, 8, 16, 5);
  NormLayer layer(NormKind::streaming, preset("BN"), {2, LpSetting::B, 1e-5});
  long k = 0;
  for (auto _ : state) {
    Tensor y = layer.forward(x);
    Tensor dx = layer.backward(dy);
    if (++k % 2 == 0) layer.commit();
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_StreamingForwardBackward);

void BM_Conv3x3(benchmark::State& state) {
  Rng rng(6);
  Conv2dLayer conv(16, 16, 3, 1, 1, false, rng);
  conv.set_mode(Mode::eval);
  Tensor x = random_batch(8, 16, 16, 16, 7);
  for (auto _ : state) {
    Tensor y = conv.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Conv3x3);

void BM_RnnStep(benchmark::State& state) {
  Rng rng(8);
  NormSpec norm;
  norm.kind = NormKind::streaming;
  norm.lp = {1, LpSetting::B, 1e-5};
  RnnCell cell(64, 100, norm, rng);
  cell.set_mode(Mode::eval);
  Tensor x = random_batch(32, 1, 1, 64, 9);
  Tensor h = random_batch(32, 1, 1, 100, 10);
  // Eval-mode steps need a trained store; warm one batch in train mode.
  cell.set_mode(Mode::train);
  cell.step(x, h, 0);
  cell.clear_cache();
  cell.set_mode(Mode::eval);
  for (auto _ : state) {
    Tensor hn = cell.step(x, h, 0);
    benchmark::DoNotOptimize(hn.data());
  }
  state.SetItemsProcessed(state.iterations() * x.shape().n);
}
BENCHMARK(BM_RnnStep);

}  // namespace

BENCHMARK_MAIN();
