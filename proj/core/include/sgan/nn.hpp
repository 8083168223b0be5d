#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sgan/rng.hpp"

namespace sgan {

enum class Activation : std::uint32_t { identity = 0, relu = 1, leaky_relu = 2, tanh = 3 };

// slope of the leaky rectifier's negative side
inline constexpr double kLeakySlope = 0.2;

struct DenseLayer {
  int in = 0, out = 0;
  Activation act = Activation::identity;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct Network {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

// Uniform init: Glorot bounds for tanh/identity layers, He bounds for the
// rectifiers; biases start at zero. dims has one more entry than acts.
Network make_mlp(std::span<const int> dims, std::span<const Activation> acts, Rng& rng);

// Per-layer records of one forward pass; required by backward. Batches are
// row-major (batch x dim) throughout.
struct ForwardCache {
  int batch = 0;
  std::vector<std::vector<double>> inputs;   // input to each layer
  std::vector<std::vector<double>> preacts;  // affine output before activation
  std::vector<double> output;                // activated output of the last layer
};

std::vector<double> forward(const Network& net, std::span<const double> x, int batch,
                            ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<std::vector<double>> dw, db;
  std::vector<double> dx;  // gradient at the network input
};

// grad_out is d(loss)/d(output), batch x output_dim
Gradients backward(const Network& net, const ForwardCache& cache, std::span<const double> grad_out);

void add_gradients(Gradients& into, const Gradients& from);
bool gradients_finite(const Gradients& g);

struct RmspropState {
  double lr = 1e-3;
  double rho = 0.9;
  double eps = 1e-7;
  std::vector<std::vector<double>> acc_w, acc_b;
  long long skipped = 0;  // steps rejected because a gradient was non-finite
};

RmspropState make_rmsprop(const Network& net, double lr);

// applies one update; returns false (and counts it) when any gradient entry
// is non-finite, leaving parameters and accumulators untouched
bool rmsprop_step(RmspropState& state, Network& net, const Gradients& grads);

// batch-mean binary cross-entropy on logits, stable for large magnitudes
double bce_with_logits(std::span<const double> logits, double label);
std::vector<double> bce_with_logits_grad(std::span<const double> logits, double label);

// batch-mean softmax cross-entropy over `classes` logits per row
double softmax_xent(std::span<const double> logits, int classes, std::span<const int> labels);
std::vector<double> softmax_xent_grad(std::span<const double> logits, int classes,
                                      std::span<const int> labels);

// "NNW1" container: layer count, then per layer the dims, activation tag,
// weights, and biases, all little-endian
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

// row-major matrix product kernels
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_abt(const double* a, const double* b, double* c, int m, int n, int k);
// c[m x n] = a[m x k] * b[k x n]
void matmul_ab(const double* a, const double* b, double* c, int m, int n, int k);
// c[m x n] += a[k x m]^T * b[k x n]
void matmul_atb_acc(const double* a, const double* b, double* c, int m, int n, int k);

}  // namespace sgan
