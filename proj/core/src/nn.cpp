#include "sgan/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sgan/errors.hpp"

namespace sgan {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace {

double activate(Activation act, double z) {
  switch (act) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? z : kLeakySlope * z;
    case Activation::tanh: return std::tanh(z);
  }
  throw std::logic_error("unknown activation");
}

// derivative from the pre-activation and, for tanh, the activated value
double activate_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::tanh: return 1.0 - a * a;
  }
  throw std::logic_error("unknown activation");
}

void check_cache(const Network& net, const ForwardCache& cache) {
  if (cache.inputs.size() != net.layers.size() || cache.preacts.size() != net.layers.size())
    throw std::logic_error("backward: cache does not belong to this network");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& l = net.layers[i];
    if (cache.inputs[i].size() != std::size_t(cache.batch) * std::size_t(l.in) ||
        cache.preacts[i].size() != std::size_t(cache.batch) * std::size_t(l.out))
      throw std::logic_error("backward: cache shape is stale for this network");
  }
}

}  // namespace

void matmul_abt(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + std::size_t(i) * k;
    double* ci = c + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + std::size_t(j) * k;
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += ai[t] * bj[t];
      ci[j] = s;
    }
  }
}

void matmul_ab(const double* a, const double* b, double* c, int m, int n, int k) {
  std::fill(c, c + std::size_t(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* ai = a + std::size_t(i) * k;
    double* ci = c + std::size_t(i) * n;
    for (int t = 0; t < k; ++t) {
      double av = ai[t];
      const double* bt = b + std::size_t(t) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

void matmul_atb_acc(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int t = 0; t < k; ++t) {
    const double* at = a + std::size_t(t) * m;
    const double* bt = b + std::size_t(t) * n;
    for (int i = 0; i < m; ++i) {
      double av = at[i];
      double* ci = c + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

Network make_mlp(std::span<const int> dims, std::span<const Activation> acts, Rng& rng) {
  if (dims.size() < 2 || acts.size() + 1 != dims.size())
    throw std::invalid_argument("make_mlp: need one activation per layer");
  Network net;
  net.layers.resize(acts.size());
  for (std::size_t i = 0; i < acts.size(); ++i) {
    DenseLayer& l = net.layers[i];
    l.in = dims[i];
    l.out = dims[i + 1];
    l.act = acts[i];
    if (l.in < 1 || l.out < 1) throw std::invalid_argument("make_mlp: bad layer size");
    bool rectifier = acts[i] == Activation::relu || acts[i] == Activation::leaky_relu;
    double limit = rectifier ? std::sqrt(6.0 / l.in) : std::sqrt(6.0 / (l.in + l.out));
    l.w.resize(std::size_t(l.out) * l.in);
    for (double& w : l.w) w = rng.uniform(-limit, limit);
    l.b.assign(std::size_t(l.out), 0.0);
  }
  return net;
}

std::vector<double> forward(const Network& net, std::span<const double> x, int batch,
                            ForwardCache* cache) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (batch < 1 || x.size() != std::size_t(batch) * std::size_t(net.input_dim()))
    throw std::invalid_argument("forward: input size does not match batch * input_dim");
  if (cache) {
    cache->batch = batch;
    cache->inputs.assign(net.layers.size(), {});
    cache->preacts.assign(net.layers.size(), {});
  }
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& l = net.layers[i];
    if (cache) cache->inputs[i] = cur;
    std::vector<double> z(std::size_t(batch) * l.out);
    matmul_abt(cur.data(), l.w.data(), z.data(), batch, l.out, l.in);
    for (int r = 0; r < batch; ++r) {
      double* zr = &z[std::size_t(r) * l.out];
      for (int o = 0; o < l.out; ++o) zr[o] += l.b[std::size_t(o)];
    }
    if (cache) cache->preacts[i] = z;
    for (double& v : z) v = activate(l.act, v);
    cur = std::move(z);
  }
  if (cache) cache->output = cur;
  return cur;
}

Gradients backward(const Network& net, const ForwardCache& cache,
                   std::span<const double> grad_out) {
  check_cache(net, cache);
  int batch = cache.batch;
  if (grad_out.size() != std::size_t(batch) * std::size_t(net.output_dim()))
    throw std::invalid_argument("backward: grad size does not match batch * output_dim");

  Gradients g;
  g.dw.resize(net.layers.size());
  g.db.resize(net.layers.size());
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const DenseLayer& l = net.layers[li];
    const std::vector<double>& z = cache.preacts[li];
    const std::vector<double>& act_out =
        li + 1 < net.layers.size() ? cache.inputs[li + 1] : cache.output;
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] *= activate_grad(l.act, z[i], act_out[i]);

    g.dw[li].assign(std::size_t(l.out) * l.in, 0.0);
    g.db[li].assign(std::size_t(l.out), 0.0);
    matmul_atb_acc(delta.data(), cache.inputs[li].data(), g.dw[li].data(), l.out, l.in, batch);
    for (int r = 0; r < batch; ++r)
      for (int o = 0; o < l.out; ++o) g.db[li][std::size_t(o)] += delta[std::size_t(r) * l.out + o];

    std::vector<double> prev(std::size_t(batch) * l.in);
    matmul_ab(delta.data(), l.w.data(), prev.data(), batch, l.in, l.out);
    delta = std::move(prev);
  }
  g.dx = std::move(delta);
  return g;
}

void add_gradients(Gradients& into, const Gradients& from) {
  if (into.dw.size() != from.dw.size()) throw std::logic_error("add_gradients: shape mismatch");
  for (std::size_t i = 0; i < into.dw.size(); ++i) {
    if (into.dw[i].size() != from.dw[i].size() || into.db[i].size() != from.db[i].size())
      throw std::logic_error("add_gradients: shape mismatch");
    for (std::size_t j = 0; j < into.dw[i].size(); ++j) into.dw[i][j] += from.dw[i][j];
    for (std::size_t j = 0; j < into.db[i].size(); ++j) into.db[i][j] += from.db[i][j];
  }
}

bool gradients_finite(const Gradients& g) {
  for (const auto& v : g.dw)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  for (const auto& v : g.db)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

RmspropState make_rmsprop(const Network& net, double lr) {
  RmspropState s;
  s.lr = lr;
  s.acc_w.resize(net.layers.size());
  s.acc_b.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    s.acc_w[i].assign(net.layers[i].w.size(), 0.0);
    s.acc_b[i].assign(net.layers[i].b.size(), 0.0);
  }
  return s;
}

bool rmsprop_step(RmspropState& state, Network& net, const Gradients& grads) {
  if (state.acc_w.size() != net.layers.size() || grads.dw.size() != net.layers.size())
    throw std::logic_error("rmsprop_step: shape mismatch");
  if (!gradients_finite(grads)) {
    ++state.skipped;
    return false;
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    DenseLayer& l = net.layers[i];
    for (std::size_t j = 0; j < l.w.size(); ++j) {
      double g = grads.dw[i][j];
      double a = state.acc_w[i][j] = state.rho * state.acc_w[i][j] + (1.0 - state.rho) * g * g;
      l.w[j] -= state.lr * g / std::sqrt(a + state.eps);
    }
    for (std::size_t j = 0; j < l.b.size(); ++j) {
      double g = grads.db[i][j];
      double a = state.acc_b[i][j] = state.rho * state.acc_b[i][j] + (1.0 - state.rho) * g * g;
      l.b[j] -= state.lr * g / std::sqrt(a + state.eps);
    }
  }
  return true;
}

double bce_with_logits(std::span<const double> logits, double label) {
  double sum = 0.0;
  for (double z : logits)
    sum += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  return sum / double(logits.size());
}

std::vector<double> bce_with_logits_grad(std::span<const double> logits, double label) {
  std::vector<double> g(logits.size());
  double inv = 1.0 / double(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(-logits[i]));
    g[i] = (s - label) * inv;
  }
  return g;
}

double softmax_xent(std::span<const double> logits, int classes, std::span<const int> labels) {
  int batch = int(labels.size());
  if (logits.size() != std::size_t(batch) * std::size_t(classes))
    throw std::invalid_argument("softmax_xent: size mismatch");
  double sum = 0.0;
  for (int r = 0; r < batch; ++r) {
    const double* z = &logits[std::size_t(r) * classes];
    double zmax = *std::max_element(z, z + classes);
    double lse = 0.0;
    for (int c = 0; c < classes; ++c) lse += std::exp(z[c] - zmax);
    sum += std::log(lse) + zmax - z[labels[std::size_t(r)]];
  }
  return sum / double(batch);
}

std::vector<double> softmax_xent_grad(std::span<const double> logits, int classes,
                                      std::span<const int> labels) {
  int batch = int(labels.size());
  if (logits.size() != std::size_t(batch) * std::size_t(classes))
    throw std::invalid_argument("softmax_xent_grad: size mismatch");
  std::vector<double> g(logits.size());
  double inv = 1.0 / double(batch);
  for (int r = 0; r < batch; ++r) {
    const double* z = &logits[std::size_t(r) * classes];
    double* gr = &g[std::size_t(r) * classes];
    double zmax = *std::max_element(z, z + classes);
    double lse = 0.0;
    for (int c = 0; c < classes; ++c) lse += std::exp(z[c] - zmax);
    for (int c = 0; c < classes; ++c) gr[c] = std::exp(z[c] - zmax) / lse * inv;
    gr[labels[std::size_t(r)]] -= inv;
  }
  return g;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("NNW1", 4);
  std::uint32_t nl = std::uint32_t(net.layers.size());
  out.write(reinterpret_cast<const char*>(&nl), 4);
  for (const DenseLayer& l : net.layers) {
    std::uint32_t in = std::uint32_t(l.in), outd = std::uint32_t(l.out),
                  act = std::uint32_t(l.act);
    out.write(reinterpret_cast<const char*>(&in), 4);
    out.write(reinterpret_cast<const char*>(&outd), 4);
    out.write(reinterpret_cast<const char*>(&act), 4);
    out.write(reinterpret_cast<const char*>(l.w.data()), std::streamsize(l.w.size() * 8));
    out.write(reinterpret_cast<const char*>(l.b.data()), std::streamsize(l.b.size() * 8));
  }
  if (!out) throw DataError("short write to " + path.string());
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "NNW1", 4) != 0)
    throw DataError("not a network checkpoint: " + path.string());
  std::uint32_t nl = 0;
  in.read(reinterpret_cast<char*>(&nl), 4);
  if (!in || nl == 0 || nl > 1024) throw DataError("corrupt layer count in " + path.string());
  Network net;
  net.layers.resize(nl);
  for (DenseLayer& l : net.layers) {
    std::uint32_t in_d = 0, out_d = 0, act = 0;
    in.read(reinterpret_cast<char*>(&in_d), 4);
    in.read(reinterpret_cast<char*>(&out_d), 4);
    in.read(reinterpret_cast<char*>(&act), 4);
    if (!in || in_d == 0 || out_d == 0 || in_d > (1u << 24) || out_d > (1u << 24) || act > 3)
      throw DataError("corrupt layer header in " + path.string());
    l.in = int(in_d);
    l.out = int(out_d);
    l.act = Activation(act);
    l.w.resize(std::size_t(l.out) * l.in);
    l.b.resize(std::size_t(l.out));
    in.read(reinterpret_cast<char*>(l.w.data()), std::streamsize(l.w.size() * 8));
    in.read(reinterpret_cast<char*>(l.b.data()), std::streamsize(l.b.size() * 8));
    if (!in) throw DataError("truncated checkpoint: " + path.string());
  }
  return net;
}

}  // namespace sgan
