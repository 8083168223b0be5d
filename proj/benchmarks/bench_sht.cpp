#include <benchmark/benchmark.h>

#include "sgan/rng.hpp"
#include "sgan/sh.hpp"

static void BM_ForwardSht(benchmark::State& state) {
  int M = int(state.range(0));
  sgan::Rng rng(1);
  sgan::SphericalGrid g = sgan::dh_grid(M);
  for (double& r : g.radii) r = rng.uniform(0.1, 1.0);
  for (auto _ : state) {
    sgan::Smv c = sgan::forward_sht(g);
    benchmark::DoNotOptimize(c.coeffs.data());
  }
}
BENCHMARK(BM_ForwardSht)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

static void BM_InverseSht(benchmark::State& state) {
  int M = int(state.range(0));
  sgan::Rng rng(1);
  sgan::Smv smv(M);
  for (double& c : smv.coeffs) c = rng.uniform(-1.0, 1.0);
  sgan::SphericalGrid angles = sgan::dh_grid(M);
  for (auto _ : state) {
    sgan::SphericalGrid g = sgan::inverse_sht(smv, angles);
    benchmark::DoNotOptimize(g.radii.data());
  }
}
BENCHMARK(BM_InverseSht)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
