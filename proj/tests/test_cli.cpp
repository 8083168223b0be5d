#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "pipeline.hpp"
#include "sgan/errors.hpp"
#include "sgan/io.hpp"
#include "sgan/metrics.hpp"
#include "sgan/sampler.hpp"
#include "sgan/sh.hpp"
#include "sgan/shapes.hpp"

using namespace sgan;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir(const char* tag) {
    path = std::filesystem::temp_directory_path() /
           (std::string("sgan_cli_") + tag + "_" + std::to_string(std::rand()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path sub(const char* name) const {
    auto p = path / name;
    std::filesystem::create_directories(p);
    return p;
  }
};

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

TriangleMesh ellipsoid_mesh(double a, double b, double c) {
  TriangleMesh m = make_uv_sphere_mesh(1.0, 12, 16);
  for (Vec3& v : m.vertices) {
    v.x *= a;
    v.y *= b;
    v.z *= c;
  }
  return m;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_toy_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    Smv s{1};
    s.coeffs[0] = rng.uniform(2.8, 3.6);
    s.coeffs[1] = rng.uniform(-0.1, 0.1);
    s.coeffs[2] = 0.5 * (s.coeffs[0] - 3.2) + rng.uniform(-0.05, 0.05);
    s.coeffs[3] = rng.uniform(-0.3, 0.3);
    char name[16];
    std::snprintf(name, sizeof name, "shape_%03d", i);
    save_smv(s, dir / (std::string(name) + ".smv"));
  }
}

void write_toy_config(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& extra = {}) {
  std::ofstream out(path);
  out << "# miniature schedule\n"
      << "bandlimit 1\n"
      << "t_prime 2\n"
      << "noise_dim 16\n"
      << "cond_dim 2\n"
      << "batch 4\n"
      << "d_steps 1\n"
      << "adv_iters 2\n"
      << "reg_iters 1\n"
      << "outer_iters 1\n"
      << "disc_hidden 8\n"
      << "seed 7\n";
  for (const auto& [k, v] : extra) out << k << " " << v << "\n";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SGAN_CLI_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("encode builds moment files from a mesh directory") {
  TempDir tmp("encode");
  auto meshes = tmp.sub("meshes");
  for (int i = 0; i < 5; ++i)
    write_obj(make_uv_sphere_mesh(0.5 + 0.1 * i, 12, 16),
              meshes / ("sphere_" + std::to_string(i) + ".obj"));
  auto out = tmp.sub("smv");
  std::ostringstream diag;
  EncodeReport rep = cmd_encode(meshes, 8, out, diag);
  CHECK(rep.written == 5);
  CHECK(rep.skipped == 0);
  CHECK(diag.str().find("misses") != std::string::npos);

  int found = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out)) {
    Smv smv = load_smv(entry.path());
    ++found;
    CHECK(smv.max_degree == 8);
    // every normalized sphere lands on radius 0.95, so the constant term
    // carries nearly everything
    CHECK(smv.at(0, 0) == doctest::Approx(0.95 * 2.0 * std::sqrt(kPi)).epsilon(0.05));
    for (int l = 1; l <= 8; ++l)
      for (int m = -l; m <= l; ++m) CHECK(std::abs(smv.at(l, m)) < 0.15);
  }
  CHECK(found == 5);
}

TEST_CASE("encode skips what it cannot use and reports why") {
  TempDir tmp("skips");
  auto meshes = tmp.sub("meshes");
  write_obj(make_uv_sphere_mesh(1.0, 10, 12), meshes / "good.obj");
  { std::ofstream(meshes / "broken.obj") << "this is not a mesh\n"; }
  // a lone triangle leaves most rays from its own plane unanswered
  TriangleMesh tri;
  tri.vertices = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
  tri.faces = {{0, 1, 2}};
  write_obj(tri, meshes / "sliver.obj");

  auto out = tmp.sub("smv");
  std::ostringstream diag;
  EncodeReport rep = cmd_encode(meshes, 4, out, diag);
  CHECK(rep.written == 1);
  CHECK(rep.skipped == 2);
  CHECK(diag.str().find("skip broken.obj") != std::string::npos);
  CHECK(diag.str().find("skip sliver.obj") != std::string::npos);
  CHECK(std::filesystem::exists(out / "good.smv"));
  CHECK(!std::filesystem::exists(out / "sliver.smv"));
}

TEST_CASE("encode rejects empty and missing directories") {
  TempDir tmp("empty");
  auto empty = tmp.sub("none");
  std::ostringstream diag;
  CHECK_THROWS_AS(cmd_encode(empty, 8, tmp.path / "out", diag), DataError);
  CHECK_THROWS_AS(cmd_encode(tmp.path / "missing", 8, tmp.path / "out", diag), DataError);
  CHECK_THROWS_AS(cmd_encode(empty, 0, tmp.path / "out", diag), ConfigError);
}

TEST_CASE("decode recovers the sampled surface") {
  TempDir tmp("decode");
  auto smv_dir = tmp.sub("smv");

  // constant moment vector: every decoded point sits on the unit sphere
  Smv ball{4};
  ball.coeffs[0] = 2.0 * std::sqrt(kPi);
  save_smv(ball, smv_dir / "ball.smv");

  Smv egg = forward_sht(ellipsoid_grid(0.9, 0.6, 0.75, 4));
  save_smv(egg, smv_dir / "egg.smv");

  auto out = tmp.sub("clouds");
  std::ostringstream diag;
  CHECK(cmd_decode(smv_dir, out, "xyz", diag) == 2);

  PointCloud sphere = load_xyz(out / "ball.xyz");
  CHECK(sphere.size() == 64);
  for (const Vec3& p : sphere) CHECK(norm(p) == doctest::Approx(1.0).epsilon(1e-9));

  PointCloud decoded = load_xyz(out / "egg.xyz");
  SphericalGrid exact = ellipsoid_grid(0.9, 0.6, 0.75, 4);
  CHECK(chamfer_normalized(decoded, grid_to_pointcloud(exact)) < 0.01);
}

TEST_CASE("decode handles single files, ply output, and batches with stable names") {
  TempDir tmp("batch");
  auto smv_dir = tmp.sub("smv");
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Smv s{2};
    s.coeffs[0] = 3.0;
    for (std::size_t j = 1; j < s.coeffs.size(); ++j) s.coeffs[j] = rng.uniform(-0.2, 0.2);
    char name[16];
    std::snprintf(name, sizeof name, "s_%03d", i);
    save_smv(s, smv_dir / (std::string(name) + ".smv"));
  }
  auto out = tmp.sub("clouds");
  std::ostringstream diag;
  CHECK(cmd_decode(smv_dir, out, "xyz", diag) == 100);
  for (int i = 0; i < 100; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "s_%03d", i);
    CHECK(std::filesystem::exists(out / (std::string(name) + ".xyz")));
  }

  auto single = tmp.sub("single");
  CHECK(cmd_decode(smv_dir / "s_000.smv", single, "ply", diag) == 1);
  CHECK(load_ply(single / "s_000.ply").size() == 16);

  CHECK_THROWS_AS(cmd_decode(smv_dir, out, "gif", diag), ConfigError);
  CHECK_THROWS_AS(cmd_decode(tmp.path / "absent.smv", out, "xyz", diag), DataError);
  CHECK_THROWS_AS(cmd_decode(tmp.sub("vacant"), out, "xyz", diag), DataError);
}

TEST_CASE("encode then decode round-trips ellipsoid meshes") {
  TempDir tmp("roundtrip");
  auto meshes = tmp.sub("meshes");
  const double axes[3][3] = {{0.9, 0.7, 0.5}, {0.6, 0.8, 0.7}, {0.85, 0.55, 0.75}};
  for (int i = 0; i < 3; ++i)
    write_obj(ellipsoid_mesh(axes[i][0], axes[i][1], axes[i][2]),
              meshes / ("ell_" + std::to_string(i) + ".obj"));

  auto smv_dir = tmp.sub("smv");
  auto cloud_dir = tmp.sub("clouds");
  std::ostringstream diag;
  CHECK(cmd_encode(meshes, 8, smv_dir, diag).written == 3);
  CHECK(cmd_decode(smv_dir, cloud_dir, "xyz", diag) == 3);

  for (int i = 0; i < 3; ++i) {
    PointCloud decoded = load_xyz(cloud_dir / ("ell_" + std::to_string(i) + ".xyz"));
    TriangleMesh mesh =
        normalize_mesh(ellipsoid_mesh(axes[i][0], axes[i][1], axes[i][2]));
    PointCloud sampled = grid_to_pointcloud(raycast_sample(mesh, 8));
    CHECK(chamfer_normalized(decoded, sampled) < 0.01);
  }
}

TEST_CASE("train runs the miniature schedule end to end") {
  TempDir tmp("train");
  auto data = tmp.sub("data");
  write_toy_dataset(data, 6, 21);
  auto cfg_path = tmp.path / "run.cfg";
  write_toy_config(cfg_path,
                   {{"data", data.string()}, {"out", (tmp.path / "ckpt").string()}});

  std::ostringstream diag;
  TrainOptions opt;
  opt.config_path = cfg_path;
  cmd_train(opt, diag);

  auto ckpt = tmp.path / "ckpt";
  for (int i = 1; i <= 3; ++i) {
    CHECK(std::filesystem::exists(ckpt / ("gen_" + std::to_string(i) + ".nnw")));
    CHECK(std::filesystem::exists(ckpt / ("disc_" + std::to_string(i) + ".nnw")));
  }
  CHECK(std::filesystem::exists(ckpt / "partition.txt"));
  CHECK(std::filesystem::exists(ckpt / "norm.txt"));
  CHECK(std::filesystem::exists(ckpt / "feature.nnw"));
  CHECK(slurp(ckpt / "train_state.txt").find("4") != std::string::npos);
  CHECK(diag.str().find("generator steps") != std::string::npos);

  std::string log = slurp(ckpt / "train_log.csv");
  CHECK(log.rfind("phase,iter,net,loss", 0) == 0);
  CHECK(log.find("forward") != std::string::npos);
  CHECK(log.find("backward") != std::string::npos);
  CHECK(log.find("regularize") != std::string::npos);

  // the same config in a fresh directory reproduces every checkpoint byte
  auto cfg2 = tmp.path / "run2.cfg";
  write_toy_config(cfg2, {{"data", data.string()}, {"out", (tmp.path / "ckpt2").string()}});
  TrainOptions opt2;
  opt2.config_path = cfg2;
  std::ostringstream diag2;
  cmd_train(opt2, diag2);
  for (int i = 1; i <= 3; ++i) {
    const std::string name = "gen_" + std::to_string(i) + ".nnw";
    CHECK(slurp(ckpt / name) == slurp(tmp.path / "ckpt2" / name));
  }

  // resuming a finished run changes nothing
  const std::string before = slurp(ckpt / "gen_1.nnw");
  TrainOptions again = opt;
  again.resume = true;
  std::ostringstream diag3;
  cmd_train(again, diag3);
  CHECK(slurp(ckpt / "gen_1.nnw") == before);
  CHECK(diag3.str().find("reusing") != std::string::npos);
}

TEST_CASE("train flags override the config file") {
  TempDir tmp("override");
  auto data = tmp.sub("data");
  write_toy_dataset(data, 5, 33);
  auto cfg_path = tmp.path / "run.cfg";
  write_toy_config(cfg_path,
                   {{"data", (tmp.path / "wrong").string()}, {"out", (tmp.path / "also_wrong").string()}});

  TrainOptions opt;
  opt.config_path = cfg_path;
  opt.data_dir = data;
  opt.out_dir = tmp.path / "ckpt";
  opt.has_seed = true;
  opt.seed = 99;
  std::ostringstream diag;
  cmd_train(opt, diag);
  CHECK(std::filesystem::exists(tmp.path / "ckpt" / "gen_1.nnw"));
  CHECK(!std::filesystem::exists(tmp.path / "also_wrong"));
}

TEST_CASE("train validates its inputs up front") {
  TempDir tmp("badtrain");
  auto data = tmp.sub("data");
  write_toy_dataset(data, 4, 5);
  auto cfg_path = tmp.path / "run.cfg";
  write_toy_config(cfg_path);

  std::ostringstream diag;
  TrainOptions opt;
  opt.config_path = cfg_path;
  opt.out_dir = tmp.path / "ckpt";
  CHECK_THROWS_AS(cmd_train(opt, diag), ConfigError);  // no dataset anywhere

  opt.data_dir = tmp.path / "nowhere";
  CHECK_THROWS_AS(cmd_train(opt, diag), DataError);

  opt.data_dir = data;
  opt.has_bandlimit = true;
  opt.bandlimit = 2;
  CHECK_THROWS_AS(cmd_train(opt, diag), ConfigError);  // dataset is degree 1

  auto bad_cfg = tmp.path / "bad.cfg";
  { std::ofstream(bad_cfg) << "bandlimit 1\nwarp_drive on\n"; }
  TrainOptions bad;
  bad.config_path = bad_cfg;
  bad.data_dir = data;
  bad.out_dir = tmp.path / "ckpt";
  CHECK_THROWS_AS(cmd_train(bad, diag), ConfigError);
}

TEST_CASE("generate samples a checkpoint reproducibly") {
  TempDir tmp("gen");
  auto data = tmp.sub("data");
  write_toy_dataset(data, 6, 77);
  auto cfg_path = tmp.path / "run.cfg";
  write_toy_config(cfg_path,
                   {{"data", data.string()}, {"out", (tmp.path / "ckpt").string()}});
  TrainOptions opt;
  opt.config_path = cfg_path;
  std::ostringstream diag;
  cmd_train(opt, diag);
  auto ckpt = tmp.path / "ckpt";

  auto out_a = tmp.path / "a";
  auto out_b = tmp.path / "b";
  CHECK(cmd_generate(ckpt, 5, 3, out_a, "xyz", diag) == 5);
  CHECK(cmd_generate(ckpt, 5, 3, out_b, "xyz", diag) == 5);
  for (int i = 0; i < 5; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "gen_%04d", i);
    CHECK(slurp(out_a / (std::string(name) + ".smv")) ==
          slurp(out_b / (std::string(name) + ".smv")));
    CHECK(slurp(out_a / (std::string(name) + ".xyz")) ==
          slurp(out_b / (std::string(name) + ".xyz")));
    for (const Vec3& p : load_xyz(out_a / (std::string(name) + ".xyz"))) {
      CHECK(std::isfinite(p.x));
      CHECK(std::isfinite(p.y));
      CHECK(std::isfinite(p.z));
    }
  }
  // a different stream gives different shapes
  auto out_c = tmp.path / "c";
  CHECK(cmd_generate(ckpt, 1, 4, out_c, "xyz", diag) == 1);
  CHECK(slurp(out_c / "gen_0000.smv") != slurp(out_a / "gen_0000.smv"));

  auto out_d = tmp.path / "d";
  CHECK(cmd_generate(ckpt, 0, 3, out_d, "xyz", diag) == 0);
  CHECK(!std::filesystem::exists(out_d));
  CHECK_THROWS_AS(cmd_generate(ckpt, -1, 3, out_d, "xyz", diag), ConfigError);
  CHECK_THROWS_AS(cmd_generate(tmp.path / "no_ckpt", 1, 3, out_d, "xyz", diag), DataError);
}

TEST_CASE("eval scores cloud directories and writes a parseable report") {
  TempDir tmp("eval");
  auto ref = tmp.sub("ref");
  const double axes[6][3] = {{0.9, 0.7, 0.5}, {0.8, 0.8, 0.6}, {0.5, 0.9, 0.7},
                             {0.7, 0.6, 0.9}, {0.9, 0.9, 0.8}, {0.6, 0.7, 0.7}};
  for (int i = 0; i < 6; ++i)
    save_smv(forward_sht(ellipsoid_grid(axes[i][0], axes[i][1], axes[i][2], 2)),
             ref / ("ref_" + std::to_string(i) + ".smv"));

  auto noise = tmp.sub("noise");
  Rng rng(13);
  for (int i = 0; i < 6; ++i) {
    Smv s{2};
    for (double& c : s.coeffs) c = rng.uniform(-1.0, 1.0);
    save_smv(s, noise / ("n_" + std::to_string(i) + ".smv"));
  }

  std::ostringstream diag;
  MetricReport self = cmd_eval(ref, ref, {}, diag);
  CHECK(self.mmd_chamfer == 0.0);
  CHECK(self.mmd_emd == 0.0);
  CHECK(self.generated == 6);
  CHECK(self.reference == 6);

  auto report_path = tmp.path / "report.txt";
  MetricReport rep = cmd_eval(noise, ref, report_path, diag);
  CHECK(rep.mmd_chamfer > self.mmd_chamfer);
  CHECK(rep.mmd_emd > 0.0);

  std::ifstream in(report_path);
  std::map<std::string, double> parsed;
  std::string key;
  double value = 0.0;
  while (in >> key >> value) parsed[key] = value;
  REQUIRE(parsed.size() == 4);
  CHECK(parsed.at("mmd_chamfer") == doctest::Approx(rep.mmd_chamfer));
  CHECK(parsed.at("mmd_emd") == doctest::Approx(rep.mmd_emd));
  CHECK(parsed.at("generated") == 6);
  CHECK(parsed.at("reference") == 6);

  CHECK_THROWS_AS(cmd_eval(tmp.sub("hollow"), ref, {}, diag), DataError);
}

TEST_CASE("info describes files and checkpoints") {
  TempDir tmp("info");
  Smv s{3};
  s.coeffs[0] = 2.0 * std::sqrt(kPi) * 0.8;
  save_smv(s, tmp.path / "probe.smv");
  std::ostringstream a;
  cmd_info(tmp.path / "probe.smv", a);
  CHECK(a.str().find("degree 3") != std::string::npos);
  CHECK(a.str().find("mean radius 0.8") != std::string::npos);

  write_obj(make_uv_sphere_mesh(1.0, 6, 8), tmp.path / "probe.obj");
  std::ostringstream b;
  cmd_info(tmp.path / "probe.obj", b);
  CHECK(b.str().find("faces") != std::string::npos);

  std::ostringstream c;
  CHECK_THROWS_AS(cmd_info(tmp.path / "probe.docx", c), DataError);
  CHECK_THROWS_AS(cmd_info(tmp.sub("blank"), c), DataError);
}

TEST_CASE("executable maps error categories to exit codes") {
  TempDir tmp("exit");
  auto smv_dir = tmp.sub("smv");
  Smv s{2};
  s.coeffs[0] = 3.0;
  save_smv(s, smv_dir / "one.smv");
  auto empty = tmp.sub("empty");
  auto out = (tmp.path / "out").string();

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("decode") == 2);
  CHECK(run_cli("decode " + smv_dir.string() + " --out " + out + " --format gif") == 2);
  CHECK(run_cli("decode " + (tmp.path / "absent.smv").string() + " --out " + out) == 3);
  CHECK(run_cli("encode " + empty.string() + " --out " + out) == 3);
  CHECK(run_cli("train --config " + (tmp.path / "ghost.cfg").string() + " --data " +
                smv_dir.string() + " --out " + out) == 2);
  CHECK(run_cli("generate " + (tmp.path / "no_ckpt").string() + " --count 1 --out " + out) == 3);

  CHECK(run_cli("decode " + smv_dir.string() + " --out " + out) == 0);
  CHECK(std::filesystem::exists(tmp.path / "out" / "one.xyz"));
  CHECK(run_cli("info " + smv_dir.string()) == 0);
}
