#include <benchmark/benchmark.h>

#include "nilm/mhnet.hpp"
#include "nilm/ops.hpp"
#include "nilm/random.hpp"
#include "nilm/simulator.hpp"
#include "nilm/training.hpp"

namespace {

nilm::Tensor random_tensor(nilm::Shape shape, std::uint64_t seed, bool grad = false) {
  nilm::Rng rng(seed);
  std::vector<double> v(nilm::shape_size(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return nilm::Tensor(std::move(shape), std::move(v), grad);
}

void BM_Conv1d(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto length = static_cast<std::size_t>(state.range(1));
  const auto x = random_tensor({channels, length}, 1);
  const auto w = random_tensor({channels, channels, 5}, 2);
  const auto b = random_tensor({channels}, 3);
  nilm::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nilm::ops::conv1d(x, w, b, 2, nilm::ops::Padding::kSame));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(channels * channels * 5 * length));
}
BENCHMARK(BM_Conv1d)->Args({8, 128})->Args({16, 256})->Args({32, 512});

nilm::MhNetConfig bench_config(std::size_t scale) {
  nilm::MhNetConfig c;
  if (scale == 0) {
    c.input_len = 128;
    c.output_len = 32;
    c.layers_per_head = 2;
    c.channels_per_layer = 8;
    c.attention_hidden = 8;
    c.fc_hidden = 16;
  }
  return c;
}

void BM_MhNetForward(benchmark::State& state) {
  const auto model = nilm::MhNetModel::build(bench_config(state.range(0)), 7);
  const auto x = random_tensor({2, model.config().input_len}, 4);
  nilm::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x).gated);
}
BENCHMARK(BM_MhNetForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MhNetForwardBackward(benchmark::State& state) {
  auto model = nilm::MhNetModel::build(bench_config(state.range(0)), 7);
  const auto x = random_tensor({2, model.config().input_len}, 4);
  const std::size_t L = model.config().output_len;
  const std::vector<double> target(L, 0.5);
  const std::vector<std::uint8_t> onoff(L, 1);
  for (auto _ : state) {
    model.zero_grad();
    const auto out = model.forward(x);
    nilm::train::loss(out.gated, out.onoff_prob, target, onoff, 1.0).backward();
  }
}
BENCHMARK(BM_MhNetForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Synthesize(benchmark::State& state) {
  const auto catalog = nilm::sim::default_catalog();
  const auto duration = static_cast<std::size_t>(state.range(0));
  const auto schedule = nilm::sim::generate_schedule(catalog, duration, 11, 1.0);
  const auto scenario = nilm::sim::VoltageScenario::random_steps(duration, 12);
  for (auto _ : state)
    benchmark::DoNotOptimize(nilm::sim::synthesize(catalog, schedule, scenario, 5.0, 13));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(duration));
}
BENCHMARK(BM_Synthesize)->Arg(3600)->Arg(86400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
