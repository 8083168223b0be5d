#include "sgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "sgan/basis.hpp"
#include "sgan/errors.hpp"
#include "sgan/sh.hpp"

namespace sgan {

BandPartition BandPartition::make(int bandlimit, int t_prime) {
  if (bandlimit < 1) throw ConfigError("bandlimit must be >= 1");
  if (t_prime < 2 || t_prime % 2 != 0)
    throw ConfigError("t_prime must be an even count of band slots, got " +
                      std::to_string(t_prime));
  const int k = t_prime / 2;
  if (k > bandlimit + 1)
    throw ConfigError("t_prime " + std::to_string(t_prime) + " needs " + std::to_string(k) +
                      " degree blocks but only " + std::to_string(bandlimit + 1) +
                      " degrees exist");
  BandPartition p;
  p.bandlimit = bandlimit;
  p.t_prime = t_prime;
  p.bands.assign(std::size_t(t_prime), {});
  auto edge = [&](int b) {
    return int((std::int64_t(b) * (bandlimit + 1) + k - 1) / k);
  };
  for (int b = 0; b < k; ++b) {
    auto& neg = p.bands[std::size_t(2 * b)];
    auto& pos = p.bands[std::size_t(2 * b + 1)];
    for (int l = edge(b); l < edge(b + 1); ++l) {
      for (int m = -l; m <= 0; ++m) neg.push_back(lm_index(l, m));
      for (int m = 1; m <= l; ++m) pos.push_back(lm_index(l, m));
    }
  }
  return p;
}

int condition_index(int k, int band_size, int cond_dim) {
  if (band_size >= cond_dim) return int(std::int64_t(k) * band_size / cond_dim);
  return k % band_size;
}

std::vector<double> condition_vector(std::span<const double> prev, int cond_dim) {
  if (prev.empty()) throw std::invalid_argument("condition source is empty");
  if (cond_dim < 1) throw std::invalid_argument("cond_dim must be positive");
  std::vector<double> out(std::size_t(cond_dim), 0.0);
  for (int k = 0; k < cond_dim; ++k)
    out[std::size_t(k)] = prev[std::size_t(condition_index(k, int(prev.size()), cond_dim))];
  return out;
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key)) continue;
    if (!(ls >> value))
      throw ConfigError("config line has no value: '" + key + "' in " + path.string());
    std::string extra;
    if (ls >> extra)
      throw ConfigError("config line has trailing tokens after '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

namespace {

template <class T, class Parse>
void take(std::map<std::string, std::string>& kv, const char* key, T& slot, Parse parse) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  try {
    std::size_t used = 0;
    slot = parse(it->second, used);
    if (used != it->second.size()) throw std::invalid_argument("trailing junk");
  } catch (const std::exception&) {
    throw ConfigError(std::string("bad value for config key '") + key + "': " + it->second);
  }
  kv.erase(it);
}

void take_int(std::map<std::string, std::string>& kv, const char* key, int& slot) {
  take(kv, key, slot, [](const std::string& s, std::size_t& used) {
    return std::stoi(s, &used);
  });
}

void take_double(std::map<std::string, std::string>& kv, const char* key, double& slot) {
  take(kv, key, slot, [](const std::string& s, std::size_t& used) {
    return std::stod(s, &used);
  });
}

void take_u64(std::map<std::string, std::string>& kv, const char* key, std::uint64_t& slot) {
  take(kv, key, slot, [](const std::string& s, std::size_t& used) {
    return std::stoull(s, &used);
  });
}

void take_flag(std::map<std::string, std::string>& kv, const char* key, bool& slot) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  if (it->second == "1" || it->second == "true")
    slot = true;
  else if (it->second == "0" || it->second == "false")
    slot = false;
  else
    throw ConfigError(std::string("bad value for config key '") + key + "': " + it->second);
  kv.erase(it);
}

void validate_config(const TrainConfig& c) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config out of range: ") + what);
  };
  need(c.bandlimit >= 1, "bandlimit must be >= 1");
  need(c.t_prime >= 2 && c.t_prime % 2 == 0, "t_prime must be even and >= 2");
  need(c.noise_dim >= 1, "noise_dim must be >= 1");
  need(c.cond_dim >= 1, "cond_dim must be >= 1");
  need(c.lr_forward >= 0.0, "lr_forward must be >= 0");
  need(c.lr_backward >= 0.0, "lr_backward must be >= 0");
  need(c.lr_disc >= 0.0, "lr_disc must be >= 0");
  need(c.d_steps >= 1, "d_steps must be >= 1");
  need(c.batch >= 1, "batch must be >= 1");
  need(c.outer_iters >= 0, "outer_iters must be >= 0");
  need(c.adv_iters >= 0, "adv_iters must be >= 0");
  need(c.reg_iters >= 0, "reg_iters must be >= 0");
  need(c.disc_hidden >= 1, "disc_hidden must be >= 1");
}

}  // namespace

TrainConfig config_from_kv(std::map<std::string, std::string> kv) {
  TrainConfig c;
  take_int(kv, "bandlimit", c.bandlimit);
  take_int(kv, "t_prime", c.t_prime);
  take_int(kv, "noise_dim", c.noise_dim);
  take_int(kv, "cond_dim", c.cond_dim);
  take_double(kv, "lr_forward", c.lr_forward);
  take_double(kv, "lr_backward", c.lr_backward);
  take_double(kv, "lr_disc", c.lr_disc);
  take_int(kv, "d_steps", c.d_steps);
  take_int(kv, "batch", c.batch);
  take_u64(kv, "seed", c.seed);
  take_int(kv, "outer_iters", c.outer_iters);
  take_int(kv, "adv_iters", c.adv_iters);
  take_int(kv, "reg_iters", c.reg_iters);
  take_int(kv, "disc_hidden", c.disc_hidden);
  take_flag(kv, "condition_on_real", c.condition_on_real);
  if (!kv.empty()) throw ConfigError("unknown config key: " + kv.begin()->first);
  validate_config(c);
  return c;
}

TrainConfig parse_config(const std::filesystem::path& path) {
  return config_from_kv(read_kv_file(path));
}

SmvDataset SmvDataset::build(const std::vector<Smv>& smvs) {
  if (smvs.empty()) throw DataError("dataset is empty");
  SmvDataset d;
  d.bandlimit = smvs.front().max_degree;
  const std::size_t nc = coeff_count(d.bandlimit);
  d.scale.assign(nc, 0.0);
  for (const auto& s : smvs) {
    if (s.max_degree != d.bandlimit)
      throw DataError("dataset mixes bandlimits " + std::to_string(d.bandlimit) + " and " +
                      std::to_string(s.max_degree));
    for (std::size_t j = 0; j < nc; ++j)
      d.scale[j] = std::max(d.scale[j], std::abs(s.coeffs[j]));
  }
  for (auto& s : d.scale) s = s > 0.0 ? 1.1 * s : 1.0;
  d.rows.reserve(smvs.size());
  for (const auto& s : smvs) {
    std::vector<double> row(nc, 0.0);
    for (std::size_t j = 0; j < nc; ++j) row[j] = s.coeffs[j] / d.scale[j];
    d.rows.push_back(std::move(row));
  }
  return d;
}

Smv SmvDataset::denormalize(std::span<const double> g) const {
  if (g.size() != scale.size()) throw std::invalid_argument("coefficient count mismatch");
  Smv s{bandlimit};
  for (std::size_t j = 0; j < scale.size(); ++j) s.coeffs[j] = g[j] * scale[j];
  return s;
}

TrainLogger::TrainLogger(const std::filesystem::path& csv_path, bool append) {
  out_.open(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw DataError("cannot open log file: " + csv_path.string());
  if (!append || out_.tellp() == 0) out_ << "phase,iter,net,loss\n";
}

void TrainLogger::log(const char* phase, long long iter, const std::string& net, double loss) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", loss);
  out_ << phase << ',' << iter << ',' << net << ',' << buf << '\n';
}

GeneratorStack::GeneratorStack(const TrainConfig& cfg, Rng& rng) : cfg_(cfg) {
  validate_config(cfg);
  part_ = BandPartition::make(cfg.bandlimit, cfg.t_prime);
  const int t = 2 * cfg.t_prime - 1;
  for (int i = 0; i < t; ++i) {
    const int b = i < cfg.t_prime ? i : i - cfg.t_prime;
    const int bsz = int(part_.bands[std::size_t(b)].size());
    const int in = i == 0 ? cfg.noise_dim : cfg.noise_dim + cfg.cond_dim;
    const int gdims[4] = {in, 512, 512, bsz};
    const Activation gacts[3] = {Activation::relu, Activation::relu, Activation::tanh};
    gens_.push_back(make_mlp(gdims, gacts, rng));
    gen_opt_.push_back(
        make_rmsprop(gens_.back(), i < cfg.t_prime ? cfg.lr_forward : cfg.lr_backward));
    const int ddims[4] = {bsz, cfg.disc_hidden, cfg.disc_hidden, 1};
    const Activation dacts[3] = {Activation::leaky_relu, Activation::leaky_relu,
                                 Activation::identity};
    discs_.push_back(make_mlp(ddims, dacts, rng));
    disc_opt_.push_back(make_rmsprop(discs_.back(), cfg.lr_disc));
  }
}

int GeneratorStack::band_of(int i) const {
  check(i);
  return i < cfg_.t_prime ? i : i - cfg_.t_prime;
}

const std::vector<int>& GeneratorStack::band_indices(int i) const {
  return part_.bands[std::size_t(band_of(i))];
}

std::size_t GeneratorStack::check(int i) const {
  if (i < 0 || i >= int(gens_.size()))
    throw std::out_of_range("generator slot " + std::to_string(i));
  return std::size_t(i);
}

std::size_t GeneratorStack::generator_parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : gens_) n += g.parameter_count();
  return n;
}

std::vector<int> GeneratorStack::assembly_sources() const {
  std::vector<int> src;
  for (int i = cfg_.t_prime - 1; i < total(); ++i) src.push_back(i);
  return src;
}

void GeneratorStack::apply_rates(const TrainConfig& cfg) {
  for (int i = 0; i < total(); ++i) {
    gen_opt_[std::size_t(i)].lr = i < cfg.t_prime ? cfg.lr_forward : cfg.lr_backward;
    disc_opt_[std::size_t(i)].lr = cfg.lr_disc;
  }
}

namespace {

std::vector<double> draw_normals(Rng& rng, std::size_t n) {
  std::vector<double> v(n, 0.0);
  for (auto& x : v) x = rng.normal();
  return v;
}

std::vector<double> real_band_batch(const SmvDataset& data, const std::vector<int>& band,
                                    int batch, Rng& rng) {
  const std::size_t bsz = band.size();
  std::vector<double> out(std::size_t(batch) * bsz, 0.0);
  for (int b = 0; b < batch; ++b) {
    const auto& row = data.rows[rng.index(data.size())];
    for (std::size_t j = 0; j < bsz; ++j)
      out[std::size_t(b) * bsz + j] = row[std::size_t(band[j])];
  }
  return out;
}

// rows of [noise ; condition] given the previous slot's batch output
std::vector<double> conditioned_input(std::span<const double> z, std::span<const double> prev,
                                      int batch, int noise_dim, int cond_dim) {
  const std::size_t pb = prev.size() / std::size_t(batch);
  const std::size_t in = std::size_t(noise_dim) + std::size_t(cond_dim);
  std::vector<double> x(std::size_t(batch) * in, 0.0);
  for (int b = 0; b < batch; ++b) {
    double* row = x.data() + std::size_t(b) * in;
    std::copy_n(z.data() + std::size_t(b) * noise_dim, noise_dim, row);
    auto cond = condition_vector(prev.subspan(std::size_t(b) * pb, pb), cond_dim);
    std::copy_n(cond.data(), cond_dim, row + noise_dim);
  }
  return x;
}

// runs slots 0..upto with fresh noise per slot, returning slot upto's output
std::vector<double> chain_outputs(const GeneratorStack& st, int upto, int batch, Rng& rng) {
  const auto& cfg = st.config();
  std::vector<double> prev;
  for (int i = 0; i <= upto; ++i) {
    auto z = draw_normals(rng, std::size_t(batch) * cfg.noise_dim);
    std::vector<double> in =
        i == 0 ? std::move(z)
               : conditioned_input(z, prev, batch, cfg.noise_dim, cfg.cond_dim);
    prev = forward(st.gen(i), in, batch);
  }
  return prev;
}

// generator input batch for slot gi, conditioning per config
std::vector<double> fake_input(const GeneratorStack& st, int gi, int batch,
                               const SmvDataset& data, Rng& rng) {
  const auto& cfg = st.config();
  if (gi == 0) return draw_normals(rng, std::size_t(batch) * cfg.noise_dim);
  std::vector<double> prev =
      cfg.condition_on_real
          ? real_band_batch(data, st.band_indices(gi - 1), batch, rng)
          : chain_outputs(st, gi - 1, batch, rng);
  auto z = draw_normals(rng, std::size_t(batch) * cfg.noise_dim);
  return conditioned_input(z, prev, batch, cfg.noise_dim, cfg.cond_dim);
}

[[noreturn]] void diverged(const char* which, const char* phase, int gi, long long iter) {
  throw NumericalError(std::string(which) + " loss became non-finite (phase=" + phase +
                       ", slot=" + std::to_string(gi + 1) + ", iter=" + std::to_string(iter) +
                       ")");
}

void check_training_args(const GeneratorStack& st, int gi, const SmvDataset& data) {
  if (gi < 0 || gi >= st.total())
    throw std::out_of_range("generator slot " + std::to_string(gi));
  if (data.size() == 0) throw DataError("cannot train on an empty dataset");
  if (data.bandlimit != st.config().bandlimit)
    throw std::invalid_argument("dataset bandlimit " + std::to_string(data.bandlimit) +
                                " does not match stack bandlimit " +
                                std::to_string(st.config().bandlimit));
}

}  // namespace

double discriminator_steps(GeneratorStack& st, int gi, const SmvDataset& data, int steps,
                           Rng& rng, TrainLogger* log, const char* phase, long long iter_tag) {
  check_training_args(st, gi, data);
  const auto& cfg = st.config();
  const auto& band = st.band_indices(gi);
  Network& d = st.disc(gi);
  double total = 0.0;
  for (int s = 0; s < steps; ++s) {
    auto real = real_band_batch(data, band, cfg.batch, rng);
    auto in = fake_input(st, gi, cfg.batch, data, rng);
    auto fake = forward(st.gen(gi), in, cfg.batch);
    ForwardCache cr, cf;
    auto lr = forward(d, real, cfg.batch, &cr);
    auto lf = forward(d, fake, cfg.batch, &cf);
    const double loss = bce_with_logits(lr, 1.0) + bce_with_logits(lf, 0.0);
    if (!std::isfinite(loss)) diverged("discriminator", phase, gi, iter_tag);
    auto gr = backward(d, cr, bce_with_logits_grad(lr, 1.0));
    auto gf = backward(d, cf, bce_with_logits_grad(lf, 0.0));
    add_gradients(gr, gf);
    rmsprop_step(st.disc_opt(gi), d, gr);
    ++st.counters.disc_steps;
    total += loss;
    if (log) log->log(phase, iter_tag, "D" + std::to_string(gi + 1), loss);
  }
  return steps > 0 ? total / steps : 0.0;
}

void train_generator(GeneratorStack& st, int gi, const SmvDataset& data, int iters,
                     const char* phase, Rng& rng, TrainLogger* log, long long iter_base) {
  check_training_args(st, gi, data);
  const auto& cfg = st.config();
  for (int it = 0; it < iters; ++it) {
    const long long tag = iter_base + it;
    discriminator_steps(st, gi, data, cfg.d_steps, rng, log, phase, tag);
    auto in = fake_input(st, gi, cfg.batch, data, rng);
    ForwardCache gc;
    auto fake = forward(st.gen(gi), in, cfg.batch, &gc);
    ForwardCache dc;
    auto logits = forward(st.disc(gi), fake, cfg.batch, &dc);
    const double loss = bce_with_logits(logits, 1.0);
    if (!std::isfinite(loss)) diverged("generator", phase, gi, tag);
    auto gd = backward(st.disc(gi), dc, bce_with_logits_grad(logits, 1.0));
    auto gg = backward(st.gen(gi), gc, gd.dx);
    rmsprop_step(st.gen_opt(gi), st.gen(gi), gg);
    ++st.counters.gen_steps;
    if (log) log->log(phase, tag, "G" + std::to_string(gi + 1), loss);
  }
}

void train_forward_pass(GeneratorStack& st, const SmvDataset& data, int iters, Rng& rng,
                        TrainLogger* log, long long iter_base) {
  for (int gi = 0; gi < st.forward_count(); ++gi)
    train_generator(st, gi, data, iters, "forward", rng, log, iter_base);
}

void transfer_weights(GeneratorStack& st) {
  const auto& cfg = st.cfg_;
  const int tp = cfg.t_prime;
  for (int k = 0; k + 1 < tp; ++k) {
    const int src = k, dst = tp + k;
    if (st.band_of(src) != st.band_of(dst))
      throw std::logic_error("transfer pairs generators of different bands");
    const Network& s = st.gens_[std::size_t(src)];
    Network& d = st.gens_[std::size_t(dst)];
    if (s.input_dim() == d.input_dim()) {
      d = s;
    } else {
      d.layers = s.layers;
      auto& l0 = d.layers[0];
      const int in_new = cfg.noise_dim + cfg.cond_dim;
      std::vector<double> w(std::size_t(l0.out) * in_new, 0.0);
      // noise columns carry over; condition columns restart from a stream
      // derived from the run seed so a repeated transfer lands identically
      Rng re(cfg.seed ^ (0x9e3779b97f4a7c15ull + std::uint64_t(k)));
      const double bound = std::sqrt(6.0 / in_new);
      for (int r = 0; r < l0.out; ++r) {
        for (int c = 0; c < l0.in; ++c)
          w[std::size_t(r) * in_new + c] = l0.w[std::size_t(r) * l0.in + c];
        for (int c = l0.in; c < in_new; ++c)
          w[std::size_t(r) * in_new + c] = re.uniform(-bound, bound);
      }
      l0.in = in_new;
      l0.w = std::move(w);
    }
    st.gen_opt_[std::size_t(dst)] = make_rmsprop(d, cfg.lr_backward);
    st.discs_[std::size_t(dst)] = st.discs_[std::size_t(src)];
    st.disc_opt_[std::size_t(dst)] = make_rmsprop(st.discs_[std::size_t(dst)], cfg.lr_disc);
  }
  st.transferred_ = true;
}

void train_backward_pass(GeneratorStack& st, const SmvDataset& data, int iters, Rng& rng,
                         TrainLogger* log, long long iter_base) {
  if (!st.transferred())
    throw std::logic_error("backward pass requires transferred weights");
  for (int gi = st.forward_count(); gi < st.total(); ++gi)
    train_generator(st, gi, data, iters, "backward", rng, log, iter_base);
}

namespace {

std::vector<std::vector<double>> run_chain(const GeneratorStack& st, int upto, Rng& rng,
                                           std::vector<ForwardCache>* caches,
                                           std::span<const double> fixed_noise = {}) {
  const auto& cfg = st.config();
  std::vector<std::vector<double>> outs(std::size_t(upto) + 1);
  for (int i = 0; i <= upto; ++i) {
    std::vector<double> z;
    if (fixed_noise.empty())
      z = draw_normals(rng, std::size_t(cfg.noise_dim));
    else
      z.assign(fixed_noise.begin() + std::size_t(i) * cfg.noise_dim,
               fixed_noise.begin() + std::size_t(i + 1) * cfg.noise_dim);
    std::vector<double> in =
        i == 0 ? std::move(z)
               : conditioned_input(z, outs[std::size_t(i - 1)], 1, cfg.noise_dim, cfg.cond_dim);
    outs[std::size_t(i)] =
        forward(st.gen(i), in, 1, caches ? &(*caches)[std::size_t(i)] : nullptr);
  }
  return outs;
}

std::vector<double> assemble(const GeneratorStack& st, const std::vector<int>& sources,
                             const std::vector<std::vector<double>>& outs) {
  std::vector<double> g(coeff_count(st.config().bandlimit), 0.0);
  for (int src : sources) {
    const auto& band = st.band_indices(src);
    const auto& out = outs[std::size_t(src)];
    for (std::size_t j = 0; j < band.size(); ++j) g[std::size_t(band[j])] = out[j];
  }
  return g;
}

}  // namespace

std::vector<double> synthesize_normalized(const GeneratorStack& st, Rng& rng) {
  auto outs = run_chain(st, st.total() - 1, rng, nullptr);
  return assemble(st, st.assembly_sources(), outs);
}

std::vector<double> synthesize_forward_normalized(const GeneratorStack& st, Rng& rng) {
  auto outs = run_chain(st, st.forward_count() - 1, rng, nullptr);
  std::vector<int> sources(std::size_t(st.forward_count()), 0);
  for (int i = 0; i < st.forward_count(); ++i) sources[std::size_t(i)] = i;
  return assemble(st, sources, outs);
}

namespace {

Smv denorm(const GeneratorStack& st, std::span<const double> scale, std::vector<double> g) {
  if (scale.size() != g.size())
    throw std::invalid_argument("scale length does not match coefficient count");
  Smv s{st.config().bandlimit};
  for (std::size_t j = 0; j < g.size(); ++j) s.coeffs[j] = g[j] * scale[j];
  return s;
}

}  // namespace

Smv synthesize_smv(const GeneratorStack& st, std::span<const double> scale, Rng& rng) {
  return denorm(st, scale, synthesize_normalized(st, rng));
}

Smv synthesize_forward_smv(const GeneratorStack& st, std::span<const double> scale, Rng& rng) {
  return denorm(st, scale, synthesize_forward_normalized(st, rng));
}

PointCloud cloud_from_radii(std::span<const double> radii, int bandlimit) {
  const SphericalGrid grid = dh_grid(bandlimit);
  if (radii.size() != grid.size())
    throw std::invalid_argument("radius count does not match the grid");
  PointCloud cloud;
  cloud.reserve(radii.size());
  for (int j = 0; j < grid.rows(); ++j)
    for (int k = 0; k < grid.cols(); ++k)
      cloud.push_back(direction(grid.thetas[std::size_t(j)], grid.phis[std::size_t(k)]) *
                      radii[std::size_t(j) * grid.cols() + std::size_t(k)]);
  return cloud;
}

RegEval regularizer_eval(const GeneratorStack& st, const SmvDataset& data,
                         const PointCloud& real, const FeatureExtractor& fx,
                         std::span<const double> noise) {
  const auto& cfg = st.config();
  const int t = st.total();
  if (!fx.frozen()) throw std::logic_error("feature extractor must be frozen");
  if (noise.size() != std::size_t(t) * cfg.noise_dim)
    throw std::invalid_argument("noise must hold one draw per generator slot");
  if (data.bandlimit != cfg.bandlimit)
    throw std::invalid_argument("dataset bandlimit does not match stack");

  std::vector<ForwardCache> caches(std::size_t(t), ForwardCache{});
  Rng unused(0);
  auto outs = run_chain(st, t - 1, unused, &caches, noise);
  auto ghat = assemble(st, st.assembly_sources(), outs);
  const std::size_t nc = ghat.size();
  std::vector<double> g(nc, 0.0);
  for (std::size_t j = 0; j < nc; ++j) g[j] = ghat[j] * data.scale[j];

  auto basis = BasisMatrix::get(cfg.bandlimit);
  auto radii = basis->reconstruct(g);
  const SphericalGrid grid = dh_grid(cfg.bandlimit);
  PointCloud cloud;
  cloud.reserve(radii.size());
  std::vector<Vec3> dirs;
  dirs.reserve(radii.size());
  for (int j = 0; j < grid.rows(); ++j)
    for (int k = 0; k < grid.cols(); ++k) {
      dirs.push_back(direction(grid.thetas[std::size_t(j)], grid.phis[std::size_t(k)]));
      cloud.push_back(dirs.back() * radii[std::size_t(j) * grid.cols() + std::size_t(k)]);
    }

  FeatureExtractor::Trace trace;
  auto fg = fx.extract(cloud, trace);
  auto fo = fx.extract(real);
  double ss = 0.0;
  std::vector<double> diff(fg.size(), 0.0);
  for (std::size_t j = 0; j < fg.size(); ++j) {
    diff[j] = fg[j] - fo[j];
    ss += diff[j] * diff[j];
  }
  RegEval ev;
  ev.loss = std::sqrt(ss);
  if (!(ev.loss > 0.0)) return ev;

  for (auto& x : diff) x /= ev.loss;
  auto gpts = fx.backprop_points(trace, diff);
  std::vector<double> grad_radii(radii.size(), 0.0);
  for (std::size_t n = 0; n < radii.size(); ++n) grad_radii[n] = dot(gpts[n], dirs[n]);
  auto grad_g = basis->backprop_to_smv(grad_radii);
  for (std::size_t j = 0; j < nc; ++j) grad_g[j] *= data.scale[j];

  std::vector<std::vector<double>> og(std::size_t(t), std::vector<double>{});
  for (int i = 0; i < t; ++i) og[std::size_t(i)].assign(st.band_indices(i).size(), 0.0);
  for (int src : st.assembly_sources()) {
    const auto& band = st.band_indices(src);
    for (std::size_t j = 0; j < band.size(); ++j)
      og[std::size_t(src)][j] = grad_g[std::size_t(band[j])];
  }

  ev.grads.resize(std::size_t(t));
  for (int i = t - 1; i >= 0; --i) {
    ev.grads[std::size_t(i)] = backward(st.gen(i), caches[std::size_t(i)], og[std::size_t(i)]);
    if (i > 0) {
      auto& prev = og[std::size_t(i - 1)];
      const auto& dx = ev.grads[std::size_t(i)].dx;
      for (int k = 0; k < cfg.cond_dim; ++k)
        prev[std::size_t(condition_index(k, int(prev.size()), cfg.cond_dim))] +=
            dx[std::size_t(cfg.noise_dim + k)];
    }
  }

  double norm2 = 0.0;
  for (const auto& gr : ev.grads) {
    for (const auto& m : gr.dw)
      for (double x : m) norm2 += x * x;
    for (const auto& v : gr.db)
      for (double x : v) norm2 += x * x;
  }
  ev.grad_norm = std::sqrt(norm2);
  if (ev.grad_norm > 1e3) {
    const double f = 1e3 / ev.grad_norm;
    for (auto& gr : ev.grads) {
      for (auto& m : gr.dw)
        for (double& x : m) x *= f;
      for (auto& v : gr.db)
        for (double& x : v) x *= f;
    }
    ev.clipped = true;
  }
  return ev;
}

void regularizer_finetune(GeneratorStack& st, const SmvDataset& data,
                          const std::vector<PointCloud>& real_clouds,
                          const FeatureExtractor& fx, int iters, Rng& rng, TrainLogger* log,
                          long long iter_base) {
  if (iters <= 0) return;
  if (!fx.frozen()) throw std::logic_error("feature extractor must be frozen");
  if (real_clouds.empty()) throw DataError("no reference clouds for spatial feedback");
  const auto& cfg = st.config();
  for (int it = 0; it < iters; ++it) {
    auto noise = draw_normals(rng, std::size_t(st.total()) * cfg.noise_dim);
    const auto& real = real_clouds[rng.index(real_clouds.size())];
    auto ev = regularizer_eval(st, data, real, fx, noise);
    if (!std::isfinite(ev.loss)) diverged("regularizer", "regularize", 0, iter_base + it);
    if (ev.loss > 0.0) {
      for (int i = 0; i < st.total(); ++i)
        rmsprop_step(st.gen_opt(i), st.gen(i), ev.grads[std::size_t(i)]);
      if (ev.clipped) ++st.counters.reg_clipped;
    }
    ++st.counters.reg_steps;
    if (log) log->log("regularize", iter_base + it, "G_all", ev.loss);
  }
}

void save_norm(std::span<const double> scale, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[40];
  for (double s : scale) {
    std::snprintf(buf, sizeof buf, "%.17g\n", s);
    out << buf;
  }
}

std::vector<double> load_norm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> scale;
  double v = 0.0;
  while (in >> v) scale.push_back(v);
  if (!in.eof()) throw DataError("malformed scale file: " + path.string());
  if (scale.empty()) throw DataError("scale file is empty: " + path.string());
  return scale;
}

void GeneratorStack::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < total(); ++i) {
    save_network(gens_[std::size_t(i)], dir / ("gen_" + std::to_string(i + 1) + ".nnw"));
    save_network(discs_[std::size_t(i)], dir / ("disc_" + std::to_string(i + 1) + ".nnw"));
  }
  std::ofstream out(dir / "partition.txt");
  if (!out) throw DataError("cannot write " + (dir / "partition.txt").string());
  out << "bandlimit " << cfg_.bandlimit << "\n";
  out << "t_prime " << cfg_.t_prime << "\n";
  out << "noise_dim " << cfg_.noise_dim << "\n";
  out << "cond_dim " << cfg_.cond_dim << "\n";
  out << "disc_hidden " << cfg_.disc_hidden << "\n";
  out << "transferred " << (transferred_ ? 1 : 0) << "\n";
  for (int b = 0; b < part_.band_count(); ++b) {
    const auto& band = part_.bands[std::size_t(b)];
    out << "band " << (b + 1) << " " << band.size() << "\n";
    for (int idx : band) {
      const int l = int(std::sqrt(double(idx)));
      out << l << " " << (idx - l * l - l) << "\n";
    }
  }
}

GeneratorStack GeneratorStack::load(const std::filesystem::path& dir, const TrainConfig* adopt) {
  std::ifstream in(dir / "partition.txt");
  if (!in) throw DataError("cannot open " + (dir / "partition.txt").string());
  TrainConfig cfg;
  int transferred = 0;
  std::string key;
  auto read_field = [&](const char* name, auto& slot) {
    long long v = 0;
    if (!(in >> key >> v) || key != name)
      throw DataError("malformed partition file: expected '" + std::string(name) + "'");
    slot = int(v);
  };
  read_field("bandlimit", cfg.bandlimit);
  read_field("t_prime", cfg.t_prime);
  read_field("noise_dim", cfg.noise_dim);
  read_field("cond_dim", cfg.cond_dim);
  read_field("disc_hidden", cfg.disc_hidden);
  read_field("transferred", transferred);
  if (adopt) {
    if (adopt->bandlimit != cfg.bandlimit || adopt->t_prime != cfg.t_prime ||
        adopt->noise_dim != cfg.noise_dim || adopt->cond_dim != cfg.cond_dim ||
        adopt->disc_hidden != cfg.disc_hidden)
      throw ConfigError("checkpoint architecture does not match the requested config");
    cfg = *adopt;
  }

  GeneratorStack st;
  st.cfg_ = cfg;
  st.part_ = BandPartition::make(cfg.bandlimit, cfg.t_prime);
  st.transferred_ = transferred != 0;
  for (int b = 0; b < st.part_.band_count(); ++b) {
    const auto& band = st.part_.bands[std::size_t(b)];
    long long bi = 0, bn = 0;
    if (!(in >> key >> bi >> bn) || key != "band" || bi != b + 1 ||
        bn != (long long)(band.size()))
      throw DataError("partition file does not match the configured band layout");
    for (int idx : band) {
      int l = 0, m = 0;
      if (!(in >> l >> m) || lm_index(l, m) != idx)
        throw DataError("partition file lists an unexpected (l, m) entry");
    }
  }

  const int t = 2 * cfg.t_prime - 1;
  for (int i = 0; i < t; ++i) {
    auto g = load_network(dir / ("gen_" + std::to_string(i + 1) + ".nnw"));
    auto d = load_network(dir / ("disc_" + std::to_string(i + 1) + ".nnw"));
    const int bsz = int(st.part_.bands[std::size_t(i < cfg.t_prime ? i : i - cfg.t_prime)].size());
    const int in_dim = i == 0 ? cfg.noise_dim : cfg.noise_dim + cfg.cond_dim;
    if (g.layers.size() != 3 || g.input_dim() != in_dim || g.output_dim() != bsz)
      throw DataError("generator checkpoint " + std::to_string(i + 1) +
                      " has the wrong shape");
    if (d.input_dim() != bsz || d.output_dim() != 1)
      throw DataError("discriminator checkpoint " + std::to_string(i + 1) +
                      " has the wrong shape");
    st.gen_opt_.push_back(make_rmsprop(g, i < cfg.t_prime ? cfg.lr_forward : cfg.lr_backward));
    st.disc_opt_.push_back(make_rmsprop(d, cfg.lr_disc));
    st.gens_.push_back(std::move(g));
    st.discs_.push_back(std::move(d));
  }
  return st;
}

void train_cascade(GeneratorStack& st, const SmvDataset& data,
                   const std::vector<PointCloud>& real_clouds, const FeatureExtractor& fx,
                   TrainLogger* log, const std::filesystem::path& ckpt_dir, bool resume) {
  const TrainConfig cfg = st.config();
  const bool ckpt = !ckpt_dir.empty();
  int progress = 0;
  if (ckpt) std::filesystem::create_directories(ckpt_dir);
  const auto state_path = ckpt_dir / "train_state.txt";
  if (ckpt && resume && std::filesystem::exists(state_path)) {
    std::ifstream in(state_path);
    if (!(in >> progress) || progress < 0)
      throw DataError("malformed progress marker: " + state_path.string());
    if (progress > 0) st = GeneratorStack::load(ckpt_dir, &cfg);
  }
  auto save_all = [&](int done) {
    if (!ckpt) return;
    st.save(ckpt_dir);
    save_norm(data.scale, ckpt_dir / "norm.txt");
    std::ofstream out(state_path);
    if (!out) throw DataError("cannot write " + state_path.string());
    out << done << "\n";
  };

  Rng master(cfg.seed);
  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    const int u = outer * 4;
    const long long adv_base = (long long)(outer)*cfg.adv_iters;
    if (u >= progress) {
      Rng r = master.fork(std::uint64_t(u));
      train_forward_pass(st, data, cfg.adv_iters, r, log, adv_base);
      save_all(u + 1);
    }
    if (u + 1 >= progress) {
      transfer_weights(st);
      save_all(u + 2);
    }
    if (u + 2 >= progress) {
      Rng r = master.fork(std::uint64_t(u) + 2);
      train_backward_pass(st, data, cfg.adv_iters, r, log, adv_base);
      save_all(u + 3);
    }
    if (u + 3 >= progress) {
      Rng r = master.fork(std::uint64_t(u) + 3);
      regularizer_finetune(st, data, real_clouds, fx, cfg.reg_iters, r, log,
                           (long long)(outer)*cfg.reg_iters);
      save_all(u + 4);
    }
  }
}

}  // namespace sgan
