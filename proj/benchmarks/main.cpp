#include <benchmark/benchmark.h>

#include "gridreg/coordtrans.hpp"
#include "gridreg/model.hpp"
#include "gridreg/ops.hpp"
#include "gridreg/trainer.hpp"

using namespace gridreg;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, float lo, float hi) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<float> data(static_cast<size_t>(n));
  for (auto& v : data) v = rng.next_uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data));
}

void BM_conv2d(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor in = random_tensor(rng, {8, d, d}, -1, 1);
  Tensor k = random_tensor(rng, {16, 8, 3, 3}, -0.1f, 0.1f);
  Tensor b = random_tensor(rng, {16}, -0.1f, 0.1f);
  for (auto _ : state) benchmark::DoNotOptimize(conv(in, k, b));
  state.SetItemsProcessed(state.iterations() * d * d);
}
BENCHMARK(BM_conv2d)->Arg(32)->Arg(64)->Arg(128);

void BM_grid_sample2d(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor in = random_tensor(rng, {4, d, d}, 0, 1);
  Tensor g = identity_grid({d, d}).values;
  for (std::int64_t i = 0; i < g.size(); ++i)
    g.data()[i] += rng.next_uniform(-0.05f, 0.05f);
  for (auto _ : state) benchmark::DoNotOptimize(grid_sample(in, g));
  state.SetItemsProcessed(state.iterations() * d * d);
}
BENCHMARK(BM_grid_sample2d)->Arg(64)->Arg(128)->Arg(256);

void BM_translator_windowed(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(3);
  Tensor f = random_tensor(rng, {8, d, d}, -1, 1);
  Tensor m = random_tensor(rng, {8, d, d}, -1, 1);
  SearchWindow win{{2, 2}};
  for (auto _ : state)
    benchmark::DoNotOptimize(coordinate_translator_windowed(f, m, win));
  state.SetItemsProcessed(state.iterations() * d * d);
}
BENCHMARK(BM_translator_windowed)->Arg(32)->Arg(64);

void BM_model_forward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  ModelConfig cfg;
  cfg.levels = 3;
  cfg.nspatial = 2;
  cfg.channels = {8, 16, 32};
  Model model = init_model(4, cfg);
  Rng rng(5);
  Tensor fixed = random_tensor(rng, {1, d, d}, 0, 1);
  Tensor moving = random_tensor(rng, {1, d, d}, 0, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(forward(fixed, moving, model));
}
BENCHMARK(BM_model_forward)->Arg(32)->Arg(64);

void BM_train_step(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  ModelConfig cfg;
  cfg.levels = 3;
  cfg.nspatial = 2;
  cfg.channels = {8, 16, 32};
  Model model = init_model(6, cfg);
  auto params = model.named_params();
  AdamState adam = init_adam(params, {});
  Rng rng(7);
  Tensor fixed = random_tensor(rng, {1, d, d}, 0, 1);
  Tensor moving = random_tensor(rng, {1, d, d}, 0, 1);
  for (auto _ : state) {
    for (auto& [name, p] : params) p.zero_grad();
    DecodeTrace trace = forward(fixed, moving, model);
    LossTerms lt = loss(trace, fixed, 0.03f);
    backward(lt.total);
    adam_step(params, adam);
  }
}
BENCHMARK(BM_train_step)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
