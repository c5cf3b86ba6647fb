// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>

#include "mobility/kmeans.hpp"
#include "mobility/nn/kernels.hpp"

using namespace mobility;

namespace {

nn::Matrix random_matrix(int r, int c, std::uint64_t seed) {
  nn::Matrix m(r, c);
  std::mt19937_64 rng(seed);
  nn::init_normal(m, rng, 1.0);
  return m;
}

template <void (*Kernel)(const nn::Matrix&, const nn::Matrix&, nn::Matrix&)>
void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_matrix(n, 64, 1), b = random_matrix(64, n, 2);
  nn::Matrix c(n, n);
  for (auto _ : state) {
    Kernel(a, b, c);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n) * n * 64);
}

template <void (*Kernel)(nn::Matrix&)>
void BM_softmax(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto base = random_matrix(n, 1024, 3);
  for (auto _ : state) {
    nn::Matrix m = base;
    Kernel(m);
    benchmark::DoNotOptimize(m.data.data());
  }
}

template <double (*Score)(const nn::Matrix&, std::span<const int>)>
void BM_silhouette(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto pts = random_matrix(n, 2, 4);
  std::vector<int> assign(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) assign[static_cast<std::size_t>(i)] = i % 5;
  for (auto _ : state) benchmark::DoNotOptimize(Score(pts, assign));
}

}  // namespace

BENCHMARK(BM_matmul<nn::kernels::reference::matmul_acc>)->Name("matmul/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_matmul<nn::kernels::matmul_acc>)->Name("matmul/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_softmax<nn::kernels::reference::softmax_rows>)->Name("softmax/serial")->Arg(256);
BENCHMARK(BM_softmax<nn::kernels::softmax_rows>)->Name("softmax/omp")->Arg(256);
BENCHMARK(BM_silhouette<reference::silhouette>)->Name("silhouette/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_silhouette<silhouette>)->Name("silhouette/omp")->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
