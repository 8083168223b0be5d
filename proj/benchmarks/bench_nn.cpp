#include <benchmark/benchmark.h>

#include <array>
#include <vector>

#include "sgan/gan.hpp"
#include "sgan/nn.hpp"
#include "sgan/rng.hpp"

using namespace sgan;

static Network generator_net(int in, int out, Rng& rng) {
  const std::array<int, 4> dims{in, 512, 512, out};
  const std::array<Activation, 3> acts{Activation::relu, Activation::relu, Activation::tanh};
  return make_mlp(dims, acts, rng);
}

static void BM_Forward(benchmark::State& state) {
  const int batch = int(state.range(0));
  Rng rng(1);
  Network net = generator_net(300, 1326, rng);
  std::vector<double> x(std::size_t(batch) * 300, 0.0);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) {
    std::vector<double> y = forward(net, x, batch);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(16)->Arg(64);

static void BM_ForwardBackward(benchmark::State& state) {
  const int batch = int(state.range(0));
  Rng rng(1);
  Network net = generator_net(300, 1326, rng);
  std::vector<double> x(std::size_t(batch) * 300, 0.0);
  for (double& v : x) v = rng.normal();
  std::vector<double> g(std::size_t(batch) * 1326, 1e-3);
  for (auto _ : state) {
    ForwardCache cache;
    forward(net, x, batch, &cache);
    Gradients grads = backward(net, cache, g);
    benchmark::DoNotOptimize(grads.dw.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(16);

static void BM_RmspropStep(benchmark::State& state) {
  Rng rng(1);
  Network net = generator_net(300, 1326, rng);
  RmspropState opt = make_rmsprop(net, 1e-3);
  std::vector<double> x(300, 0.0);
  for (double& v : x) v = rng.normal();
  ForwardCache cache;
  forward(net, x, 1, &cache);
  Gradients grads = backward(net, cache, std::vector<double>(1326, 1e-3));
  for (auto _ : state) {
    rmsprop_step(opt, net, grads);
    benchmark::DoNotOptimize(net.layers[0].w.data());
  }
}
BENCHMARK(BM_RmspropStep);

static void BM_Synthesize(benchmark::State& state) {
  const int M = int(state.range(0));
  TrainConfig cfg;
  cfg.bandlimit = M;
  cfg.t_prime = 4;
  Rng init(2);
  GeneratorStack stack(cfg, init);
  transfer_weights(stack);
  const std::vector<double> scale(std::size_t(coeff_count(M)), 1.0);
  Rng rng(3);
  for (auto _ : state) {
    Smv smv = synthesize_smv(stack, scale, rng);
    benchmark::DoNotOptimize(smv.coeffs.data());
  }
}
BENCHMARK(BM_Synthesize)->Arg(15)->Arg(31);

BENCHMARK_MAIN();
