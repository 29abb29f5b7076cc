#include <benchmark/benchmark.h>

#include "imghop/training.hpp"

using namespace imghop;

namespace {

GeneratorSpec tiny_gen() { return {16, 2, 32}; }
DiscriminatorSpec tiny_disc() { return {16, 3}; }

Tensor<float> random_batch(int n, int size, Rng& rng) {
  Tensor<float> t(n, 3, size, size);
  float* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

}  // namespace

static void BM_GeneratorForwardTiny(benchmark::State& state) {
  Rng rng(1);
  Generator<float> gen(tiny_gen(), rng);
  Tensor<float> x = random_batch(static_cast<int>(state.range(0)), 32, rng);
  for (auto _ : state) {
    Tensor<float> y = gen.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_GeneratorForwardTiny)->Arg(1)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_GeneratorBackwardTiny(benchmark::State& state) {
  Rng rng(1);
  Generator<float> gen(tiny_gen(), rng);
  GradStore<float> grads;
  grads.init_like(gen.params());
  Tensor<float> x = random_batch(static_cast<int>(state.range(0)), 32, rng);
  for (auto _ : state) {
    Generator<float>::Trace trace;
    Tensor<float> y = gen.forward(x, &trace);
    Tensor<float> g = Tensor<float>::zeros_like(y);
    g.fill(1e-3f);
    gen.backward(g, trace, &grads, false);
    benchmark::DoNotOptimize(grads.grad(0).data());
  }
}
BENCHMARK(BM_GeneratorBackwardTiny)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_DiscriminatorForwardTiny(benchmark::State& state) {
  Rng rng(1);
  PatchDiscriminator<float> disc(tiny_disc(), rng);
  Tensor<float> x = random_batch(6, 32, rng);
  for (auto _ : state) {
    Tensor<float> y = disc.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DiscriminatorForwardTiny)->Unit(benchmark::kMillisecond);

static void BM_TrainStepTiny(benchmark::State& state) {
  TrainingConfig cfg;
  cfg.h = static_cast<int>(state.range(0));
  cfg.batch_size = 6;
  cfg.epochs = 1;
  cfg.steps_per_epoch = 1;
  Rng rng(1);
  ModelBundle<float> bundle(tiny_gen(), tiny_disc(), cfg.h, rng);
  BundleOptimizers<float> opt(bundle);
  Tensor<float> xb = random_batch(6, 32, rng);
  Tensor<float> yb = random_batch(6, 32, rng);
  std::int64_t step = 0;
  for (auto _ : state) {
    auto records = train_step_impl(bundle, opt, cfg, xb, yb, step++);
    benchmark::DoNotOptimize(records.data());
  }
}
BENCHMARK(BM_TrainStepTiny)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_GeneratorForwardFull(benchmark::State& state) {
  Rng rng(1);
  Generator<float> gen({64, 12, 128}, rng);
  Tensor<float> x = random_batch(1, 128, rng);
  for (auto _ : state) {
    Tensor<float> y = gen.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_GeneratorForwardFull)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
