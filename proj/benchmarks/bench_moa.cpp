#include <benchmark/benchmark.h>

#include "adaptermix/adapters.hpp"
#include "adaptermix/model.hpp"
#include "adaptermix/rng.hpp"

namespace {

using namespace adaptermix;

Tensor random_input(std::size_t n, std::size_t d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_data({n, d}, std::move(v));
}

void BM_route(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto N = static_cast<std::size_t>(state.range(1));
  SplitMix64 rng(7);
  const MixtureOfAdapters moa = MixtureOfAdapters::init(64, 16, N, 1.0, rng);
  const Tensor h = random_input(n, 64, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(route(moa, h));
  }
}
BENCHMARK(BM_route)->Args({64, 4})->Args({256, 4})->Args({256, 8});

void BM_moa_forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto N = static_cast<std::size_t>(state.range(1));
  SplitMix64 rng(7);
  MixtureOfAdapters moa = MixtureOfAdapters::init(64, 16, N, 1.0, rng);
  // Nonzero up-projections so the adapter branch does real work.
  for (auto& adapter : moa.adapters)
    for (double& v : adapter.w_up.values()) v = rng.uniform(-0.1, 0.1);
  const Tensor h = random_input(n, 64, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(moa_forward(moa, h));
  }
}
BENCHMARK(BM_moa_forward)->Args({64, 4})->Args({256, 4})->Args({256, 8});

void BM_model_forward(benchmark::State& state) {
  const BackboneModel model(ModelConfig::desk_default(), 3);
  const std::vector<std::size_t> tokens{4, 9, 1, 17, 22, 8, 30, 12};
  const std::vector<std::size_t> durations{2, 1, 3, 2, 1, 2, 3, 2};
  const std::vector<double> pitch(8, 0.25);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(tokens, 0, &durations, &pitch));
  }
}
BENCHMARK(BM_model_forward);

}  // namespace
