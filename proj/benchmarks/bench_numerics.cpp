#include <benchmark/benchmark.h>

#include "adaptermix/rng.hpp"
#include "adaptermix/tensor.hpp"

namespace {

using namespace adaptermix;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_data({rows, cols}, std::move(v));
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1);
  const Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_matmul_backward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor a = random_matrix(n, n, 1);
  Tensor b = random_matrix(n, n, 2);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    Graph graph;
    GraphScope scope(graph);
    graph.backward(sum_all(matmul(a, b)));
    a.clear_grad();
    b.clear_grad();
  }
}
BENCHMARK(BM_matmul_backward)->Arg(32)->Arg(64);

void BM_softmax_rows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_matrix(n, n, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_rows(x));
  }
}
BENCHMARK(BM_softmax_rows)->Arg(64)->Arg(256);

void BM_layer_norm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_matrix(n, 64, 4);
  const Tensor gain = Tensor::full({64}, 1.0);
  const Tensor bias = Tensor::zeros({64});
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer_norm(x, gain, bias));
  }
}
BENCHMARK(BM_layer_norm)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
