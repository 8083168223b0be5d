#include "sgan/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgan/errors.hpp"

namespace sgan {

namespace {

std::vector<double> flatten(const PointCloud& cloud) {
  std::vector<double> x(cloud.size() * 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    x[i * 3] = cloud[i].x;
    x[i * 3 + 1] = cloud[i].y;
    x[i * 3 + 2] = cloud[i].z;
  }
  return x;
}

}  // namespace

FeatureExtractor::FeatureExtractor(int feature_dim, Rng& rng) {
  if (feature_dim < 1) throw std::invalid_argument("FeatureExtractor: feature_dim must be >= 1");
  std::vector<int> dims = {3, 64, 128, feature_dim};
  std::vector<Activation> acts = {Activation::relu, Activation::relu, Activation::identity};
  net_ = make_mlp(dims, acts, rng);
}

FeatureExtractor::FeatureExtractor(Network net) : net_(std::move(net)) {
  if (net_.input_dim() != 3)
    throw DataError("FeatureExtractor: network does not take 3-coordinate points");
}

Network& FeatureExtractor::mutable_net() {
  if (frozen_) throw std::logic_error("FeatureExtractor: frozen extractors reject updates");
  return net_;
}

std::vector<double> FeatureExtractor::extract(const PointCloud& cloud, Trace& trace) const {
  if (cloud.empty()) throw std::invalid_argument("FeatureExtractor: empty cloud");
  int n = int(cloud.size());
  int f = feature_dim();
  std::vector<double> per_point = forward(net_, flatten(cloud), n, &trace.cache);
  trace.points = cloud.size();
  trace.argmax.assign(std::size_t(f), 0);
  std::vector<double> pooled(std::size_t(f), 0.0);
  for (int c = 0; c < f; ++c) pooled[std::size_t(c)] = per_point[std::size_t(c)];
  for (int i = 1; i < n; ++i) {
    const double* row = &per_point[std::size_t(i) * f];
    for (int c = 0; c < f; ++c) {
      // strictly greater keeps the first point on ties
      if (row[c] > pooled[std::size_t(c)]) {
        pooled[std::size_t(c)] = row[c];
        trace.argmax[std::size_t(c)] = i;
      }
    }
  }
  return pooled;
}

std::vector<double> FeatureExtractor::extract(const PointCloud& cloud) const {
  Trace trace;
  return extract(cloud, trace);
}

std::vector<Vec3> FeatureExtractor::backprop_points(const Trace& trace,
                                                    std::span<const double> grad_feature) const {
  int f = feature_dim();
  if (int(grad_feature.size()) != f)
    throw std::invalid_argument("backprop_points: feature gradient size mismatch");
  std::vector<double> grad_rows(trace.points * std::size_t(f), 0.0);
  for (int c = 0; c < f; ++c)
    grad_rows[std::size_t(trace.argmax[std::size_t(c)]) * f + std::size_t(c)] +=
        grad_feature[std::size_t(c)];
  Gradients g = backward(net_, trace.cache, grad_rows);
  std::vector<Vec3> out(trace.points);
  for (std::size_t i = 0; i < trace.points; ++i)
    out[i] = {g.dx[i * 3], g.dx[i * 3 + 1], g.dx[i * 3 + 2]};
  return out;
}

void FeatureExtractor::save(const std::filesystem::path& path) const { save_network(net_, path); }

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& path) {
  FeatureExtractor fx(load_network(path));
  fx.freeze();
  return fx;
}

double pretrain_classifier(FeatureExtractor& fx, const std::vector<PointCloud>& clouds,
                           std::span<const int> labels, const PretrainConfig& cfg, Rng& rng) {
  if (clouds.size() != labels.size() || clouds.empty())
    throw std::invalid_argument("pretrain_classifier: need one label per cloud");
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("pretrain_classifier: negative label");
    classes = std::max(classes, l + 1);
  }
  if (classes < 2) throw std::invalid_argument("pretrain_classifier: need at least two classes");

  int f = fx.feature_dim();
  std::vector<int> head_dims = {f, classes};
  std::vector<Activation> head_acts = {Activation::identity};
  Network head = make_mlp(head_dims, head_acts, rng);
  RmspropState opt_fx = make_rmsprop(fx.mutable_net(), cfg.lr);
  RmspropState opt_head = make_rmsprop(head, cfg.head_lr);

  std::vector<std::size_t> order(clouds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto accuracy = [&]() {
    int hits = 0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      std::vector<double> feat = fx.extract(clouds[i]);
      std::vector<double> logits = forward(head, feat, 1);
      int arg = int(std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (arg == labels[i]) ++hits;
    }
    return double(hits) / double(clouds.size());
  };

  double acc = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t oi : order) {
      FeatureExtractor::Trace trace;
      std::vector<double> feat = fx.extract(clouds[oi], trace);
      ForwardCache head_cache;
      std::vector<double> logits = forward(head, feat, 1, &head_cache);
      std::vector<int> lbl = {labels[oi]};
      std::vector<double> glogits = softmax_xent_grad(logits, classes, lbl);
      Gradients ghead = backward(head, head_cache, glogits);

      // route the pooled-feature gradient back through the winning points
      std::vector<double> grad_rows(trace.points * std::size_t(f), 0.0);
      for (int c = 0; c < f; ++c)
        grad_rows[std::size_t(trace.argmax[std::size_t(c)]) * f + std::size_t(c)] +=
            ghead.dx[std::size_t(c)];
      Gradients gfx = backward(fx.net(), trace.cache, grad_rows);

      rmsprop_step(opt_head, head, ghead);
      rmsprop_step(opt_fx, fx.mutable_net(), gfx);
    }
    acc = accuracy();
    if (acc >= cfg.target_accuracy) break;
  }

  if (acc < cfg.abort_accuracy)
    throw NumericalError("pretrain_classifier: features stayed degenerate (accuracy " +
                         std::to_string(acc) + ")");
  if (acc >= cfg.target_accuracy) fx.freeze();
  return acc;
}

}  // namespace sgan
