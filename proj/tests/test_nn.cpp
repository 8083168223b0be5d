#include "sgan/nn.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sgan/errors.hpp"

using namespace sgan;
namespace fs = std::filesystem;

namespace {

Network tiny_frozen_net() {
  Network net;
  net.layers.resize(2);
  net.layers[0] = {3, 2, Activation::relu, {0.5, -0.25, 0.125, -0.75, 0.3, 0.6}, {0.1, -0.2}};
  net.layers[1] = {2, 2, Activation::tanh, {1.5, -0.5, 0.25, 0.75}, {0.05, -0.05}};
  return net;
}

double half_sq_err(std::span<const double> y, std::span<const double> t) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += 0.5 * (y[i] - t[i]) * (y[i] - t[i]);
  return s;
}

}  // namespace

TEST_CASE("identity layer with unit weights passes input through") {
  Network net;
  net.layers.resize(1);
  net.layers[0] = {3, 3, Activation::identity,
                   {1, 0, 0, 0, 1, 0, 0, 0, 1},
                   {0, 0, 0}};
  std::vector<double> x = {0.3, -1.2, 4.5, 0.0, 2.0, -7.0};
  std::vector<double> y = forward(net, x, 2);
  REQUIRE(y.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("zero-weight tanh layer outputs tanh of the bias") {
  Network net;
  net.layers.resize(1);
  net.layers[0] = {4, 2, Activation::tanh, std::vector<double>(8, 0.0), {0.7, -1.1}};
  std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<double> y = forward(net, x, 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(y[std::size_t(r) * 2] == doctest::Approx(std::tanh(0.7)).epsilon(1e-15));
    CHECK(y[std::size_t(r) * 2 + 1] == doctest::Approx(std::tanh(-1.1)).epsilon(1e-15));
  }
}

TEST_CASE("two-layer net matches an independent evaluation") {
  Network net = tiny_frozen_net();
  std::vector<double> x = {0.2, -0.4, 0.8};
  std::vector<double> y = forward(net, x, 1);
  REQUIRE(y.size() == 2);
  CHECK(y[0] == doctest::Approx(0.56829437835497087).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(0.057436713902879223).epsilon(1e-12));
}

TEST_CASE("backward gradients match central differences") {
  Rng rng(101);
  std::vector<int> dims = {4, 5, 3};
  std::vector<Activation> acts = {Activation::tanh, Activation::identity};
  Network net = make_mlp(dims, acts, rng);
  int batch = 3;
  std::vector<double> x(std::size_t(batch) * 4), t(std::size_t(batch) * 3);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  for (double& v : t) v = rng.uniform(-1.0, 1.0);

  ForwardCache cache;
  std::vector<double> y = forward(net, x, batch, &cache);
  std::vector<double> gy(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) gy[i] = y[i] - t[i];
  Gradients g = backward(net, cache, gy);

  auto loss_now = [&]() { return half_sq_err(forward(net, x, batch), t); };
  double h = 1e-6;
  for (std::size_t li = 0; li < net.layers.size(); ++li)
    for (std::size_t j = 0; j < net.layers[li].w.size(); j += 5) {
      double save = net.layers[li].w[j];
      net.layers[li].w[j] = save + h;
      double lp = loss_now();
      net.layers[li].w[j] = save - h;
      double lm = loss_now();
      net.layers[li].w[j] = save;
      CHECK(g.dw[li][j] == doctest::Approx((lp - lm) / (2 * h)).epsilon(2e-6));
    }
  for (std::size_t j = 0; j < x.size(); ++j) {
    double save = x[j];
    x[j] = save + h;
    double lp = loss_now();
    x[j] = save - h;
    double lm = loss_now();
    x[j] = save;
    CHECK(g.dx[j] == doctest::Approx((lp - lm) / (2 * h)).epsilon(2e-6));
  }
}

TEST_CASE("rectifier gradients match central differences away from kinks") {
  Rng rng(7);
  std::vector<int> dims = {3, 6, 2};
  std::vector<Activation> acts = {Activation::relu, Activation::leaky_relu};
  Network net = make_mlp(dims, acts, rng);
  int batch = 2;
  std::vector<double> x = {0.9, -0.4, 0.7, -0.8, 0.6, -0.3};
  std::vector<double> t = {0.1, -0.2, 0.4, 0.3};

  ForwardCache cache;
  std::vector<double> y = forward(net, x, batch, &cache);
  for (const auto& z : cache.preacts)
    for (double v : z) REQUIRE(std::abs(v) > 1e-4);  // seed keeps us off the kink

  std::vector<double> gy(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) gy[i] = y[i] - t[i];
  Gradients g = backward(net, cache, gy);

  auto loss_now = [&]() { return half_sq_err(forward(net, x, batch), t); };
  double h = 1e-7;
  for (std::size_t j = 0; j < net.layers[0].w.size(); j += 2) {
    double save = net.layers[0].w[j];
    net.layers[0].w[j] = save + h;
    double lp = loss_now();
    net.layers[0].w[j] = save - h;
    double lm = loss_now();
    net.layers[0].w[j] = save;
    CHECK(g.dw[0][j] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("logit losses take the batch mean") {
  std::vector<double> one = {0.3};
  CHECK(bce_with_logits(one, 1.0) == doctest::Approx(0.55435524446852702).epsilon(1e-12));
  std::vector<double> two = {0.3, 0.3};
  CHECK(bce_with_logits(two, 1.0) == doctest::Approx(0.55435524446852702).epsilon(1e-12));
  std::vector<double> g = bce_with_logits_grad(two, 1.0);
  double sig = 1.0 / (1.0 + std::exp(-0.3));
  CHECK(g[0] == doctest::Approx((sig - 1.0) / 2.0).epsilon(1e-12));

  // the stable form survives extreme logits
  std::vector<double> extreme = {1e4, -1e4};
  CHECK(std::isfinite(bce_with_logits(extreme, 0.0)));
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  std::vector<double> z = {0.2, -0.7, 1.3, -0.1, 0.4, 0.05};
  std::vector<int> labels = {2, 0};
  std::vector<double> g = softmax_xent_grad(z, 3, labels);
  double h = 1e-6;
  for (std::size_t i = 0; i < z.size(); ++i) {
    std::vector<double> zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    double fd = (softmax_xent(zp, 3, labels) - softmax_xent(zm, 3, labels)) / (2 * h);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("rmsprop single step against the hand-computed value") {
  Network net;
  net.layers.resize(1);
  net.layers[0] = {1, 1, Activation::identity, {1.0}, {0.0}};
  RmspropState opt = make_rmsprop(net, 1e-3);
  Gradients g;
  g.dw = {{1.0}};
  g.db = {{0.0}};
  REQUIRE(rmsprop_step(opt, net, g));
  CHECK(opt.acc_w[0][0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(net.layers[0].w[0] == doctest::Approx(0.99683772392096925).epsilon(1e-12));
}

TEST_CASE("non-finite gradients skip the step and leave state untouched") {
  Network net;
  net.layers.resize(1);
  net.layers[0] = {2, 1, Activation::identity, {0.5, -0.5}, {0.25}};
  RmspropState opt = make_rmsprop(net, 1e-2);
  Gradients g;
  g.dw = {{std::nan(""), 1.0}};
  g.db = {{1.0}};
  CHECK_FALSE(rmsprop_step(opt, net, g));
  CHECK(opt.skipped == 1);
  CHECK(net.layers[0].w[0] == 0.5);
  CHECK(opt.acc_w[0][1] == 0.0);
}

TEST_CASE("initialization respects the activation-dependent bounds") {
  Rng rng(55);
  std::vector<int> dims = {10, 20, 5};
  std::vector<Activation> acts = {Activation::relu, Activation::tanh};
  Network net = make_mlp(dims, acts, rng);
  double he = std::sqrt(6.0 / 10.0), glorot = std::sqrt(6.0 / 25.0);
  for (double w : net.layers[0].w) CHECK(std::abs(w) < he);
  for (double w : net.layers[1].w) CHECK(std::abs(w) < glorot);
  for (double b : net.layers[0].b) CHECK(b == 0.0);

  Rng rng2(55);
  Network net2 = make_mlp(dims, acts, rng2);
  CHECK(net2.layers[0].w == net.layers[0].w);
  CHECK(net.parameter_count() == 10 * 20 + 20 + 20 * 5 + 5);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  Rng rng(77);
  std::vector<int> dims = {4, 8, 3};
  std::vector<Activation> acts = {Activation::leaky_relu, Activation::identity};
  Network net = make_mlp(dims, acts, rng);
  net.layers[0].b[2] = -1.5e-7;

  fs::path p = fs::temp_directory_path() / "sgan_nn_roundtrip.nnw";
  save_network(net, p);
  Network back = load_network(p);
  REQUIRE(back.layers.size() == 2);
  CHECK(back.layers[0].act == Activation::leaky_relu);
  CHECK(back.layers[0].w == net.layers[0].w);
  CHECK(back.layers[0].b == net.layers[0].b);
  CHECK(back.layers[1].w == net.layers[1].w);

  std::ofstream bad(p, std::ios::binary);
  bad << "WNN1";
  bad.close();
  CHECK_THROWS_AS(load_network(p), DataError);
  fs::remove(p);
}

TEST_CASE("stale caches are rejected") {
  Network net = tiny_frozen_net();
  std::vector<double> x = {0.2, -0.4, 0.8};
  ForwardCache cache;
  forward(net, x, 1, &cache);
  Network other;
  other.layers.resize(1);
  other.layers[0] = {3, 1, Activation::identity, {1, 1, 1}, {0}};
  std::vector<double> gy = {1.0, 1.0};
  CHECK_THROWS_AS(backward(other, cache, std::span<const double>(gy).subspan(0, 1)),
                  std::logic_error);
}

TEST_CASE("matrix kernels agree with hand results") {
  // a is 2x3, b rows are the columns of the product's right factor
  std::vector<double> a = {1, 2, 3, 4, 5, 6};
  std::vector<double> bt = {1, 0, 1, 2, 1, 0};  // 2x3
  std::vector<double> c(4);
  matmul_abt(a.data(), bt.data(), c.data(), 2, 2, 3);
  CHECK(c == std::vector<double>{4, 4, 10, 13});

  std::vector<double> b = {1, 2, 0, 1, 1, 0};  // 3x2
  matmul_ab(a.data(), b.data(), c.data(), 2, 2, 3);
  CHECK(c == std::vector<double>{4, 4, 10, 13});

  std::vector<double> acc(6, 1.0);  // 2x3, preseeded to check accumulation
  matmul_atb_acc(a.data(), a.data(), acc.data(), 3, 3, 2);
  CHECK(acc[0] == doctest::Approx(1 + 1 + 16).epsilon(1e-15));
  CHECK(acc[4] == doctest::Approx(1 + 4 + 25).epsilon(1e-15));
}
