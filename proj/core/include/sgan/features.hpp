#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sgan/geom.hpp"
#include "sgan/nn.hpp"

namespace sgan {

// Shared per-point MLP (3 -> 64 -> 128 -> feature_dim) with a max pool over
// the point axis. The pooled feature is exactly permutation invariant; its
// subgradient routes each coordinate to the first point attaining the max.
class FeatureExtractor {
 public:
  FeatureExtractor(int feature_dim, Rng& rng);
  explicit FeatureExtractor(Network net);  // adopts weights, e.g. from a checkpoint

  int feature_dim() const { return net_.output_dim(); }
  const Network& net() const { return net_; }

  std::vector<double> extract(const PointCloud& cloud) const;

  struct Trace {
    ForwardCache cache;
    std::vector<int> argmax;  // winning point per feature coordinate
    std::size_t points = 0;
  };
  std::vector<double> extract(const PointCloud& cloud, Trace& trace) const;

  // d(loss)/d(points) for a fixed extractor, given d(loss)/d(feature)
  std::vector<Vec3> backprop_points(const Trace& trace,
                                    std::span<const double> grad_feature) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  // training handle; refuses to hand out weights once frozen
  Network& mutable_net();

  void save(const std::filesystem::path& path) const;
  static FeatureExtractor load(const std::filesystem::path& path);  // arrives frozen

 private:
  Network net_;
  bool frozen_ = false;
};

struct PretrainConfig {
  int epochs = 120;
  double lr = 1e-3;
  double head_lr = 1e-2;
  double target_accuracy = 0.90;
  double abort_accuracy = 0.60;
};

// Trains the extractor plus a throwaway linear head to separate the labeled
// cloud families, freezing the extractor once the target accuracy is reached.
// Returns the final training accuracy; throws NumericalError when the
// features stay degenerate (accuracy below the abort threshold).
double pretrain_classifier(FeatureExtractor& fx, const std::vector<PointCloud>& clouds,
                           std::span<const int> labels, const PretrainConfig& cfg, Rng& rng);

}  // namespace sgan
