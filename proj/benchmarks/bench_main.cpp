#include <benchmark/benchmark.h>

#include "l2g/data.hpp"
#include "l2g/harness.hpp"
#include "l2g/ops.hpp"

namespace {

l2g::Tensor random_tensor(l2g::Shape shape, std::uint64_t seed, bool grad = false) {
  l2g::Rng rng(seed);
  std::vector<double> v(l2g::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return l2g::Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({1, 16, size, size}, 1);
  const auto k = random_tensor({32, 16, 3, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(l2g::ops::conv2d(x, k, 1, 1));
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({1, 16, size, size}, 1, true);
  const auto k = random_tensor({32, 16, 3, 3}, 2, true);
  for (auto _ : state) {
    auto loss = l2g::ops::sum(l2g::ops::conv2d(x, k, 1, 1));
    loss.backward();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);

void BM_BilinearResize(benchmark::State& state) {
  const auto x = random_tensor({1, 6, 16, 16}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(l2g::ops::bilinear_resize(x, 64, 64));
}
BENCHMARK(BM_BilinearResize);

void BM_TrainStep(benchmark::State& state) {
  l2g::RunConfig cfg;
  cfg.mode = static_cast<l2g::Mode>(state.range(0));
  const auto sample = l2g::gen_indexed_sample(0, cfg.gen);
  l2g::Rng init(1);
  l2g::Network local(cfg.local_net, cfg.gen.num_classes, init);
  l2g::Network global(cfg.global_net, cfg.gen.num_classes + 1, init);
  l2g::Rng rng(2);
  for (auto _ : state) {
    const auto in = l2g::make_step_inputs(sample, cfg.geometry, rng);
    auto t = l2g::step_loss(cfg, in, local, &global);
    t.loss.backward();
  }
  state.SetLabel(l2g::to_string(cfg.mode));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(l2g::Mode::kBaselineCam))
    ->Arg(static_cast<int>(l2g::Mode::kLocalOnly))
    ->Arg(static_cast<int>(l2g::Mode::kL2G))
    ->Unit(benchmark::kMillisecond);

void BM_PredictMultiScale(benchmark::State& state) {
  l2g::RunConfig cfg;
  const auto sample = l2g::gen_indexed_sample(0, cfg.gen);
  l2g::Rng init(1);
  l2g::Network global(cfg.global_net, cfg.gen.num_classes + 1, init);
  for (auto _ : state)
    benchmark::DoNotOptimize(l2g::predict(cfg, l2g::Mode::kL2G, global, sample));
}
BENCHMARK(BM_PredictMultiScale)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
