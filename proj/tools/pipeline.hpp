#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sgan/gan.hpp"
#include "sgan/metrics.hpp"

namespace sgan {

struct EncodeReport {
  int written = 0;
  int skipped = 0;
};

// normalize -> raycast -> harmonic moments for every OBJ/OFF mesh in the
// directory, one .smv per usable mesh. Unreadable files and shapes whose
// miss rate trips the sampler flag are skipped with a note on `diag`.
EncodeReport cmd_encode(const std::filesystem::path& mesh_dir, int bandlimit,
                        const std::filesystem::path& out_dir, std::ostream& diag);

// moment file or directory back to point clouds, format "ply" or "xyz";
// returns the number of files written
int cmd_decode(const std::filesystem::path& smv_path, const std::filesystem::path& out_dir,
               const std::string& format, std::ostream& diag);

struct TrainOptions {
  std::filesystem::path config_path;  // empty: built-in defaults
  std::filesystem::path data_dir;     // falls back to the `data` config entry
  std::filesystem::path out_dir;      // falls back to the `out` config entry
  bool resume = false;
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool has_bandlimit = false;
  int bandlimit = 0;
};

// full training schedule; checkpoints, feature net, and the loss CSV land in
// the output directory
void cmd_train(const TrainOptions& opt, std::ostream& diag);

// sample `count` moment vectors from a trained checkpoint and decode each one
int cmd_generate(const std::filesystem::path& checkpoint_dir, int count, std::uint64_t seed,
                 const std::filesystem::path& out_dir, const std::string& format,
                 std::ostream& diag);

// distance scores between two cloud directories (.smv, .xyz, or .ply files);
// the report goes to `diag` and, when non-empty, to `report_path`
MetricReport cmd_eval(const std::filesystem::path& generated_dir,
                      const std::filesystem::path& reference_dir,
                      const std::filesystem::path& report_path, std::ostream& diag);

// one-paragraph description of a moment file, mesh, cloud, or checkpoint dir
void cmd_info(const std::filesystem::path& path, std::ostream& diag);

// decoded surface samples on the dh_grid angles, every node kept
PointCloud decode_smv(const Smv& smv);

// every .smv / .xyz / .ply in a directory as point clouds, sorted by name
std::vector<PointCloud> load_cloud_dir(const std::filesystem::path& dir);

}  // namespace sgan
