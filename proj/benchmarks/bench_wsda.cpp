#include <benchmark/benchmark.h>

#include <random>

#include "wsda/data/dataset.hpp"
#include "wsda/net/model.hpp"
#include "wsda/num/ops.hpp"
#include "wsda/train/trainer.hpp"

using namespace wsda;

namespace {

num::Tensor random_tensor(const num::Shape& shape, std::uint64_t seed) {
  num::Tensor t(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// First block of the default model on one default window: [1,8,8,8] -> [6,4,4,4].
void BM_Conv3dForward(benchmark::State& state) {
  const auto x = random_tensor({1, 8, 8, 8}, 1);
  const auto k = random_tensor({6, 1, 3, 3, 3}, 2);
  const auto b = random_tensor({6}, 3);
  for (auto _ : state) {
    num::Tape tape;
    auto y = num::conv3d(tape.constant(x), tape.constant(k), tape.constant(b), {2, 2, 2}, {1, 1, 1});
    benchmark::DoNotOptimize(y.value().data().data());
  }
}
BENCHMARK(BM_Conv3dForward);

void BM_Conv3dBackward(benchmark::State& state) {
  const auto x = random_tensor({1, 8, 8, 8}, 1);
  const auto k = random_tensor({6, 1, 3, 3, 3}, 2);
  const auto b = random_tensor({6}, 3);
  for (auto _ : state) {
    num::Tape tape;
    auto kv = tape.leaf(k);
    auto y = num::conv3d(tape.leaf(x), kv, tape.leaf(b), {2, 2, 2}, {1, 1, 1});
    auto loss = num::mse(y, tape.constant(num::Tensor(y.shape(), 0.0)));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(kv).data().data());
  }
}
BENCHMARK(BM_Conv3dBackward);

// Features plus all three heads for one window of the default model.
void BM_WindowForward(benchmark::State& state) {
  const net::ModelConfig config;
  const auto params = net::init_params(config);
  const auto window = random_tensor(config.window_shape(), 4);
  for (auto _ : state) {
    num::Tape tape;
    const auto p = net::bind(tape, params);
    auto f = net::features(config, p.f, tape.constant(window));
    benchmark::DoNotOptimize(net::label_head(p.l, f).value().data().data());
    benchmark::DoNotOptimize(net::weak_head(p.wl, f).value().data().data());
    benchmark::DoNotOptimize(net::domain_head(p.d, f, 0.5).value().data().data());
  }
}
BENCHMARK(BM_WindowForward);

// One wsda epoch on a scaled-down default benchmark (subjects per domain as the argument).
void BM_WsdaEpoch(benchmark::State& state) {
  data::GenSpec g;
  g.subjects = static_cast<std::size_t>(state.range(0));
  const auto pair = data::synth_generate(g);
  const net::ModelConfig model;
  objective::TrainingConfig training;
  training.max_epochs = 1;
  std::size_t windows = 0;
  for (auto _ : state) {
    auto result = train::train_wsda(pair.source, pair.target, model, training);
    benchmark::DoNotOptimize(result.params.theta_f.data());
    windows += pair.source.window_count() + pair.target.window_count();
  }
  state.counters["windows/s"] = benchmark::Counter(static_cast<double>(windows), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_WsdaEpoch)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
  data::GenSpec g;
  for (auto _ : state) benchmark::DoNotOptimize(data::synth_generate(g).target.bags.data());
}
BENCHMARK(BM_Generate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
