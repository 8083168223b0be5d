#include <benchmark/benchmark.h>

#include "sgan/metrics.hpp"
#include "sgan/rng.hpp"
#include "sgan/sampler.hpp"
#include "sgan/shapes.hpp"

static sgan::PointCloud random_cloud(int n, std::uint64_t seed) {
  sgan::Rng rng(seed);
  sgan::PointCloud cloud;
  cloud.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i)
    cloud.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  return cloud;
}

static void BM_ChamferTree(benchmark::State& state) {
  int n = int(state.range(0));
  sgan::PointCloud a = random_cloud(n, 1), b = random_cloud(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sgan::chamfer(a, b));
}
BENCHMARK(BM_ChamferTree)->Arg(256)->Arg(1024)->Arg(4096);

static void BM_ChamferBrute(benchmark::State& state) {
  int n = int(state.range(0));
  sgan::PointCloud a = random_cloud(n, 1), b = random_cloud(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sgan::chamfer_brute(a, b));
}
BENCHMARK(BM_ChamferBrute)->Arg(256)->Arg(1024);

static void BM_EmdAuction(benchmark::State& state) {
  int n = int(state.range(0));
  sgan::PointCloud a = random_cloud(n, 3), b = random_cloud(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sgan::emd_auction(a, b));
}
BENCHMARK(BM_EmdAuction)->Arg(64)->Arg(256);

static void BM_EmdHungarian(benchmark::State& state) {
  int n = int(state.range(0));
  sgan::PointCloud a = random_cloud(n, 3), b = random_cloud(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sgan::emd_hungarian(a, b));
}
BENCHMARK(BM_EmdHungarian)->Arg(16)->Arg(48);

static void BM_GridResample(benchmark::State& state) {
  int M = int(state.range(0));
  sgan::Rng rng(5);
  sgan::PointCloud cloud = sgan::ellipsoid_cloud(0.8, 0.6, 0.7, 4 * M * M, rng);
  for (auto _ : state) {
    sgan::SphericalGrid g = sgan::pointcloud_to_grid(cloud, M);
    benchmark::DoNotOptimize(g.radii.data());
  }
}
BENCHMARK(BM_GridResample)->Arg(8)->Arg(16);

BENCHMARK_MAIN();
