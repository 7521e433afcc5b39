#include <benchmark/benchmark.h>

#include <random>

#include "hoic/train.hpp"

using namespace hoic;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

void BM_Hungarian(benchmark::State& state) {
  const int nq = static_cast<int>(state.range(0)), ng = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(nq), std::vector<double>(static_cast<std::size_t>(ng)));
  for (auto& row : cost)
    for (auto& v : row) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
}
BENCHMARK(BM_Hungarian)->Args({16, 2})->Args({16, 8})->Args({64, 32});

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor({4, c, hw, hw}, 2);
  const Tensor w = random_tensor({c, c, 3, 3}, 3);
  const Tensor b = random_tensor({c}, 4);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2d)->Args({16, 64})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const Dataset d = generate_dataset(0, 4, SceneConfig{});
  std::vector<const SceneSample*> ptrs;
  for (const auto& s : d.samples) ptrs.push_back(&s);
  const Tensor images = images_to_tensor(ptrs);
  Model model(ModelConfig{}, 0);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(images, nn::Mode{}));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  RunConfig c;
  c.data.train_count = 4;
  const Dataset d = load_split(c.data, false);
  Trainer t(c, d);
  for (auto _ : state) benchmark::DoNotOptimize(t.train_step({0, 1, 2, 3}, 0));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
