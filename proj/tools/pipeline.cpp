#include "pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sgan/basis.hpp"
#include "sgan/errors.hpp"
#include "sgan/io.hpp"
#include "sgan/sampler.hpp"
#include "sgan/sh.hpp"
#include "sgan/shapes.hpp"

namespace sgan {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return e;
}

std::vector<fs::path> list_dir(const fs::path& dir, std::initializer_list<const char*> exts) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string e = lower_ext(entry.path());
    for (const char* want : exts)
      if (e == want) {
        out.push_back(entry.path());
        break;
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_format(const std::string& format) {
  if (format != "ply" && format != "xyz")
    throw ConfigError("format must be ply or xyz, got '" + format + "'");
}

void save_cloud(const PointCloud& cloud, const fs::path& path, const std::string& format) {
  if (format == "ply")
    save_ply(cloud, path);
  else
    save_xyz(cloud, path);
}

}  // namespace

PointCloud decode_smv(const Smv& smv) {
  SphericalGrid grid = inverse_sht(smv, dh_grid(smv.max_degree));
  return cloud_from_radii(grid.radii, smv.max_degree);
}

EncodeReport cmd_encode(const fs::path& mesh_dir, int bandlimit, const fs::path& out_dir,
                        std::ostream& diag) {
  if (bandlimit < 1) throw ConfigError("bandlimit must be positive");
  const auto meshes = list_dir(mesh_dir, {".obj", ".off"});
  if (meshes.empty()) throw DataError("no .obj or .off meshes in " + mesh_dir.string());
  fs::create_directories(out_dir);

  EncodeReport rep;
  for (const auto& path : meshes) {
    TriangleMesh mesh;
    try {
      mesh = load_mesh(path);
    } catch (const std::exception& e) {
      diag << "skip " << path.filename().string() << ": " << e.what() << "\n";
      ++rep.skipped;
      continue;
    }
    RaycastStats stats;
    SphericalGrid grid = raycast_sample(normalize_mesh(mesh), bandlimit, &stats);
    const int nodes = int(grid.size());
    if (stats.flagged) {
      diag << "skip " << path.filename().string() << ": " << stats.misses << "/" << nodes
           << " rays missed\n";
      ++rep.skipped;
      continue;
    }
    save_smv(forward_sht(grid), out_dir / (path.stem().string() + ".smv"));
    diag << path.filename().string() << ": misses " << stats.misses << "/" << nodes << "\n";
    ++rep.written;
  }
  if (rep.written == 0) throw DataError("no usable meshes in " + mesh_dir.string());
  diag << "encoded " << rep.written << " meshes, skipped " << rep.skipped << "\n";
  return rep;
}

int cmd_decode(const fs::path& smv_path, const fs::path& out_dir, const std::string& format,
               std::ostream& diag) {
  check_format(format);
  std::vector<fs::path> files;
  if (fs::is_directory(smv_path)) {
    files = list_dir(smv_path, {".smv"});
    if (files.empty()) throw DataError("no .smv files in " + smv_path.string());
  } else if (fs::exists(smv_path)) {
    files.push_back(smv_path);
  } else {
    throw DataError("no such input: " + smv_path.string());
  }
  fs::create_directories(out_dir);
  for (const auto& path : files) {
    const PointCloud cloud = decode_smv(load_smv(path));
    save_cloud(cloud, out_dir / (path.stem().string() + "." + format), format);
  }
  diag << "decoded " << files.size() << " file" << (files.size() == 1 ? "" : "s") << " to "
       << out_dir.string() << "\n";
  return int(files.size());
}

namespace {

// quick ellipsoid-against-box classifier; the extractor freezes once it
// separates the families
FeatureExtractor prepare_features(const fs::path& out_dir, const TrainConfig& cfg, bool resume,
                                  std::ostream& diag) {
  const fs::path fpath = out_dir / "feature.nnw";
  if (resume && fs::exists(fpath)) {
    diag << "feature net: reusing " << fpath.string() << "\n";
    return FeatureExtractor::load(fpath);
  }
  Rng rng = Rng(cfg.seed).fork(1u << 30);
  FeatureExtractor fx(128, rng);
  std::vector<PointCloud> clouds;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    clouds.push_back(ellipsoid_cloud(rng.uniform(0.4, 0.9), rng.uniform(0.4, 0.9),
                                     rng.uniform(0.4, 0.9), 128, rng));
    labels.push_back(0);
    clouds.push_back(
        box_cloud(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 128, rng));
    labels.push_back(1);
  }
  const double acc = pretrain_classifier(fx, clouds, labels, PretrainConfig{}, rng);
  diag << "feature net: pretrain accuracy " << acc << "\n";
  fx.save(fpath);
  return fx;
}

}  // namespace

void cmd_train(const TrainOptions& opt, std::ostream& diag) {
  std::map<std::string, std::string> kv;
  if (!opt.config_path.empty()) kv = read_kv_file(opt.config_path);
  fs::path data_dir = opt.data_dir;
  fs::path out_dir = opt.out_dir;
  if (auto it = kv.find("data"); it != kv.end()) {
    if (data_dir.empty()) data_dir = it->second;
    kv.erase(it);
  }
  if (auto it = kv.find("out"); it != kv.end()) {
    if (out_dir.empty()) out_dir = it->second;
    kv.erase(it);
  }
  TrainConfig cfg = config_from_kv(std::move(kv));
  if (opt.has_seed) cfg.seed = opt.seed;
  if (opt.has_bandlimit) cfg.bandlimit = opt.bandlimit;
  if (data_dir.empty()) throw ConfigError("no dataset directory: pass --data or a `data` entry");
  if (out_dir.empty()) throw ConfigError("no output directory: pass --out or an `out` entry");

  const auto files = list_dir(data_dir, {".smv"});
  if (files.empty()) throw DataError("no .smv files in " + data_dir.string());
  std::vector<Smv> smvs;
  smvs.reserve(files.size());
  for (const auto& path : files) smvs.push_back(load_smv(path));
  const SmvDataset data = SmvDataset::build(smvs);
  if (data.bandlimit != cfg.bandlimit)
    throw ConfigError("config bandlimit " + std::to_string(cfg.bandlimit) +
                      " but the dataset holds degree " + std::to_string(data.bandlimit));
  diag << "dataset: " << data.size() << " shapes, " << data.scale.size()
       << " coefficients each\n";

  fs::create_directories(out_dir);
  const FeatureExtractor fx = prepare_features(out_dir, cfg, opt.resume, diag);

  const auto basis = BasisMatrix::get(cfg.bandlimit);
  std::vector<PointCloud> real;
  real.reserve(smvs.size());
  for (const auto& smv : smvs) real.push_back(cloud_from_radii(basis->reconstruct(smv), cfg.bandlimit));

  Rng init(cfg.seed);
  GeneratorStack stack(cfg, init);
  TrainLogger log(out_dir / "train_log.csv", opt.resume);
  train_cascade(stack, data, real, fx, &log, out_dir, opt.resume);

  diag << "trained " << stack.total() << " band slots: " << stack.counters.gen_steps
       << " generator steps, " << stack.counters.disc_steps << " discriminator steps, "
       << stack.counters.reg_steps << " feedback steps (" << stack.counters.reg_clipped
       << " clipped)\n";
  diag << "checkpoints in " << out_dir.string() << "\n";
}

int cmd_generate(const fs::path& checkpoint_dir, int count, std::uint64_t seed,
                 const fs::path& out_dir, const std::string& format, std::ostream& diag) {
  if (count < 0) throw ConfigError("count must be >= 0");
  check_format(format);
  const GeneratorStack stack = GeneratorStack::load(checkpoint_dir);
  const std::vector<double> scale = load_norm(checkpoint_dir / "norm.txt");
  const int want = coeff_count(stack.config().bandlimit);
  if (int(scale.size()) != want)
    throw DataError("scale file holds " + std::to_string(scale.size()) + " entries, expected " +
                    std::to_string(want));
  if (count == 0) {
    diag << "nothing to generate\n";
    return 0;
  }
  fs::create_directories(out_dir);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const Smv smv = synthesize_smv(stack, scale, rng);
    char name[16];
    std::snprintf(name, sizeof name, "gen_%04d", i);
    save_smv(smv, out_dir / (std::string(name) + ".smv"));
    const PointCloud cloud = decode_smv(smv);
    for (const Vec3& p : cloud)
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        throw NumericalError("non-finite point in sample " + std::to_string(i));
    save_cloud(cloud, out_dir / (std::string(name) + "." + format), format);
  }
  diag << "wrote " << count << " sample" << (count == 1 ? "" : "s") << " to " << out_dir.string()
       << "\n";
  return count;
}

std::vector<PointCloud> load_cloud_dir(const fs::path& dir) {
  const auto files = list_dir(dir, {".smv", ".xyz", ".ply"});
  if (files.empty()) throw DataError("no .smv, .xyz, or .ply files in " + dir.string());
  std::vector<PointCloud> clouds;
  clouds.reserve(files.size());
  for (const auto& path : files) {
    const std::string e = lower_ext(path);
    if (e == ".smv")
      clouds.push_back(decode_smv(load_smv(path)));
    else if (e == ".xyz")
      clouds.push_back(load_xyz(path));
    else
      clouds.push_back(load_ply(path));
  }
  return clouds;
}

MetricReport cmd_eval(const fs::path& generated_dir, const fs::path& reference_dir,
                      const fs::path& report_path, std::ostream& diag) {
  const auto generated = load_cloud_dir(generated_dir);
  const auto reference = load_cloud_dir(reference_dir);
  MetricReport report;
  report.generated = generated.size();
  report.reference = reference.size();
  report.mmd_chamfer = mmd(generated, reference, MetricKind::chamfer);
  report.mmd_emd = mmd(generated, reference, MetricKind::emd);
  write_report(report, diag);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw DataError("cannot write " + report_path.string());
    write_report(report, out);
  }
  return report;
}

void cmd_info(const fs::path& path, std::ostream& diag) {
  if (fs::is_directory(path)) {
    if (fs::exists(path / "partition.txt")) {
      const GeneratorStack stack = GeneratorStack::load(path);
      const TrainConfig& cfg = stack.config();
      diag << "checkpoint " << path.string() << "\n";
      diag << "  bandlimit " << cfg.bandlimit << ", refinement width " << cfg.t_prime << ", "
           << stack.total() << " band slots\n";
      diag << "  generator parameters " << stack.generator_parameter_count() << "\n";
      diag << "  refinement slots " << (stack.transferred() ? "seeded" : "untrained") << "\n";
      int progress = 0;
      if (std::ifstream in(path / "train_state.txt"); in >> progress)
        diag << "  schedule progress " << progress << "\n";
      return;
    }
    const auto smvs = list_dir(path, {".smv"});
    if (!smvs.empty()) {
      diag << "dataset " << path.string() << ": " << smvs.size() << " moment files, degree "
           << load_smv(smvs.front()).max_degree << "\n";
      return;
    }
    throw DataError("nothing recognizable in " + path.string());
  }
  if (!fs::exists(path)) throw DataError("no such file: " + path.string());

  const std::string e = lower_ext(path);
  if (e == ".smv") {
    const Smv smv = load_smv(path);
    double peak = 0.0;
    for (double c : smv.coeffs) peak = std::max(peak, std::abs(c));
    diag << path.filename().string() << ": degree " << smv.max_degree << ", "
         << smv.coeffs.size() << " coefficients\n";
    diag << "  mean radius " << smv.at(0, 0) / (2.0 * std::sqrt(kPi)) << ", peak |c| " << peak
         << "\n";
  } else if (e == ".obj" || e == ".off") {
    const TriangleMesh mesh = load_mesh(path);
    diag << path.filename().string() << ": " << mesh.vertices.size() << " vertices, "
         << mesh.faces.size() << " faces\n";
  } else if (e == ".xyz" || e == ".ply") {
    const PointCloud cloud = e == ".xyz" ? load_xyz(path) : load_ply(path);
    double far = 0.0;
    for (const Vec3& p : cloud) far = std::max(far, norm(p));
    diag << path.filename().string() << ": " << cloud.size() << " points, max radius " << far
         << "\n";
  } else {
    throw DataError("cannot describe " + path.string());
  }
}

}  // namespace sgan
