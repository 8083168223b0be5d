#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sgan/features.hpp"
#include "sgan/nn.hpp"
#include "sgan/smv.hpp"

namespace sgan {

// Contiguous degree blocks, each split by the sign of the order. Block b of
// K = t_prime/2 covers degrees [ceil(b(M+1)/K), ceil((b+1)(M+1)/K)-1]; it
// contributes one band with m <= 0 and one with m > 0. Band entries are flat
// lm_index positions sorted by (l, m).
struct BandPartition {
  int bandlimit = 0;
  int t_prime = 0;
  std::vector<std::vector<int>> bands;

  static BandPartition make(int bandlimit, int t_prime);
  int band_count() const { return int(bands.size()); }
};

// index into a band of `band_size` for conditioning slot k: equally spaced
// when the band is wide enough, cyclic repetition otherwise
int condition_index(int k, int band_size, int cond_dim);
// cond_dim entries read from the previous band output at those indices
std::vector<double> condition_vector(std::span<const double> prev, int cond_dim = 100);

struct TrainConfig {
  int bandlimit = 8;
  int t_prime = 2;
  int noise_dim = 200;
  int cond_dim = 100;
  double lr_forward = 1e-3;
  double lr_backward = 1e-4;
  double lr_disc = 1e-5;
  int d_steps = 3;
  int batch = 32;
  std::uint64_t seed = 0;
  int outer_iters = 3;
  int adv_iters = 2000;
  int reg_iters = 500;
  int disc_hidden = 256;
  bool condition_on_real = false;
};

// "key value" or "key=value" lines, '#' starts a comment
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);
// consumes recognized keys; leftovers or out-of-range values raise ConfigError
TrainConfig config_from_kv(std::map<std::string, std::string> kv);
TrainConfig parse_config(const std::filesystem::path& path);

// ground-truth coefficient rows scaled per coefficient into the tanh range
struct SmvDataset {
  int bandlimit = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> scale;  // strictly positive, 1.1 * max |c| per slot

  static SmvDataset build(const std::vector<Smv>& smvs);
  std::size_t size() const { return rows.size(); }
  Smv denormalize(std::span<const double> g) const;
};

struct TrainCounters {
  long long gen_steps = 0;
  long long disc_steps = 0;
  long long reg_steps = 0;
  long long reg_clipped = 0;
};

class TrainLogger {
 public:
  TrainLogger(const std::filesystem::path& csv_path, bool append = false);
  void log(const char* phase, long long iter, const std::string& net, double loss);

 private:
  std::ofstream out_;
};

// One generator + discriminator pair per band slot. Slots 0..t_prime-1 run
// low to high frequency; slots t_prime..total-1 revisit bands 0..t_prime-2
// in the refinement sweep. Every generator except slot 0 takes
// [noise ; condition_vector(previous slot output)] as input.
class GeneratorStack {
 public:
  GeneratorStack(const TrainConfig& cfg, Rng& rng);

  int total() const { return int(gens_.size()); }
  int forward_count() const { return cfg_.t_prime; }
  const TrainConfig& config() const { return cfg_; }
  const BandPartition& partition() const { return part_; }

  int band_of(int i) const;
  const std::vector<int>& band_indices(int i) const;

  Network& gen(int i) { return gens_[check(i)]; }
  const Network& gen(int i) const { return gens_[check(i)]; }
  Network& disc(int i) { return discs_[check(i)]; }
  const Network& disc(int i) const { return discs_[check(i)]; }
  RmspropState& gen_opt(int i) { return gen_opt_[check(i)]; }
  RmspropState& disc_opt(int i) { return disc_opt_[check(i)]; }

  std::size_t generator_parameter_count() const;
  bool transferred() const { return transferred_; }

  // slots whose outputs form the assembled coefficient vector: the last
  // forward slot plus every refinement slot, in chain order
  std::vector<int> assembly_sources() const;

  void apply_rates(const TrainConfig& cfg);

  // gen_<i>.nnw, disc_<i>.nnw (1-based) plus partition.txt
  void save(const std::filesystem::path& dir) const;
  static GeneratorStack load(const std::filesystem::path& dir,
                             const TrainConfig* adopt = nullptr);

  TrainCounters counters;

 private:
  GeneratorStack() = default;
  std::size_t check(int i) const;

  TrainConfig cfg_;
  BandPartition part_;
  std::vector<Network> gens_, discs_;
  std::vector<RmspropState> gen_opt_, disc_opt_;
  bool transferred_ = false;

  friend void transfer_weights(GeneratorStack&);
};

// `steps` discriminator-only updates for slot gi; returns the mean loss
double discriminator_steps(GeneratorStack& stack, int gi, const SmvDataset& data, int steps,
                           Rng& rng, TrainLogger* log = nullptr, const char* phase = "dsteps",
                           long long iter_tag = 0);
// adversarial loop for one slot: d_steps discriminator updates then one
// non-saturating generator update, `iters` times
void train_generator(GeneratorStack& stack, int gi, const SmvDataset& data, int iters,
                     const char* phase, Rng& rng, TrainLogger* log = nullptr,
                     long long iter_base = 0);
void train_forward_pass(GeneratorStack& stack, const SmvDataset& data, int iters, Rng& rng,
                        TrainLogger* log = nullptr, long long iter_base = 0);
// refinement slots take their source slot's weights; the slot-0 pair widens
// its input layer, keeping noise columns and re-drawing condition columns
// from a seed-derived stream so repeating the transfer is a no-op
void transfer_weights(GeneratorStack& stack);
void train_backward_pass(GeneratorStack& stack, const SmvDataset& data, int iters, Rng& rng,
                         TrainLogger* log = nullptr, long long iter_base = 0);

// full chain with fresh per-slot noise; result in tanh units
std::vector<double> synthesize_normalized(const GeneratorStack& stack, Rng& rng);
Smv synthesize_smv(const GeneratorStack& stack, std::span<const double> scale, Rng& rng);
// forward slots only, for ablations
std::vector<double> synthesize_forward_normalized(const GeneratorStack& stack, Rng& rng);
Smv synthesize_forward_smv(const GeneratorStack& stack, std::span<const double> scale, Rng& rng);

// radial grid samples turned into points r * direction, all nodes kept
PointCloud cloud_from_radii(std::span<const double> radii, int bandlimit);

// one spatial-feedback evaluation at fixed noise (total x noise_dim values):
// synthesize, reconstruct radii, pool features, L2 against the real cloud's
// feature, then chain the gradient back through every generator. Gradients
// come back empty at zero loss; otherwise they are jointly norm-clipped.
struct RegEval {
  double loss = 0.0;
  std::vector<Gradients> grads;
  double grad_norm = 0.0;
  bool clipped = false;
};
RegEval regularizer_eval(const GeneratorStack& stack, const SmvDataset& data,
                         const PointCloud& real, const FeatureExtractor& fx,
                         std::span<const double> noise);

void regularizer_finetune(GeneratorStack& stack, const SmvDataset& data,
                          const std::vector<PointCloud>& real_clouds,
                          const FeatureExtractor& fx, int iters, Rng& rng,
                          TrainLogger* log = nullptr, long long iter_base = 0);

void save_norm(std::span<const double> scale, const std::filesystem::path& path);
std::vector<double> load_norm(const std::filesystem::path& path);

// the full schedule: outer_iters sweeps of forward / transfer / backward /
// regularize, each phase on its own rng stream. With a checkpoint directory
// the stack, scale, and a progress marker land there after every phase, and
// resume=true skips phases the marker says are done.
void train_cascade(GeneratorStack& stack, const SmvDataset& data,
                   const std::vector<PointCloud>& real_clouds, const FeatureExtractor& fx,
                   TrainLogger* log, const std::filesystem::path& ckpt_dir, bool resume);

}  // namespace sgan
