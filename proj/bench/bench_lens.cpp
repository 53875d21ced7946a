#include "ceval/lens_kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace ceval::lens::kernels;

struct Clusters {
  std::vector<double> data;
  std::vector<int> cluster;
  std::vector<std::size_t> sizes;
  std::size_t n = 0;
  std::size_t dim = 0;
};

Clusters make_clusters(std::size_t n, std::size_t dim, int k) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 1.0);
  Clusters c;
  c.n = n;
  c.dim = dim;
  c.sizes.assign(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(k));
    c.cluster.push_back(label);
    ++c.sizes[static_cast<std::size_t>(label)];
    for (std::size_t d = 0; d < dim; ++d) c.data.push_back(noise(rng) + 4.0 * label);
  }
  return c;
}

template <auto Kernel>
void BM_Silhouette(benchmark::State& state) {
  const auto c = make_clusters(static_cast<std::size_t>(state.range(0)), 64, 4);
  std::vector<double> s(c.n);
  std::vector<unsigned char> degenerate(c.n);
  SilhouetteInput in{c.data, c.n, c.dim, c.cluster, c.sizes};
  for (auto _ : state) {
    Kernel(in, s, degenerate);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <auto Kernel>
void BM_Kde(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = noise(rng);
    ys[i] = noise(rng);
  }
  const std::size_t res = 64;
  std::vector<double> grid(res);
  for (std::size_t i = 0; i < res; ++i) grid[i] = -4.0 + 8.0 * (static_cast<double>(i) + 0.5) / res;
  std::vector<double> out(res * res);
  KdeInput in{xs, ys, 0.4, 0.4, grid, grid};
  for (auto _ : state) {
    Kernel(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(res * res));
}

}  // namespace

BENCHMARK(BM_Silhouette<silhouette_serial>)->Arg(500)->Arg(2000);
BENCHMARK(BM_Silhouette<silhouette_omp>)->Arg(500)->Arg(2000);
BENCHMARK(BM_Kde<kde_serial>)->Arg(500)->Arg(5000);
BENCHMARK(BM_Kde<kde_omp>)->Arg(500)->Arg(5000);

BENCHMARK_MAIN();
