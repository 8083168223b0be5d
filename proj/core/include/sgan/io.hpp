#pragma once

#include <filesystem>

#include "sgan/geom.hpp"
#include "sgan/smv.hpp"

namespace sgan {

// Binary moment-vector container: magic "SMV1", little-endian u32 max degree,
// then the coefficients as little-endian f64 in lm_index order.
void save_smv(const Smv& smv, const std::filesystem::path& path);

// Text form: first line "M=<degree>", then one coefficient per line.
void save_smv_text(const Smv& smv, const std::filesystem::path& path);

// Reads either form, sniffed from the leading bytes.
Smv load_smv(const std::filesystem::path& path);

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_xyz(const std::filesystem::path& path);
PointCloud load_ply(const std::filesystem::path& path);

TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh load_off(const std::filesystem::path& path);
// dispatches on the lowercased extension (.obj / .off)
TriangleMesh load_mesh(const std::filesystem::path& path);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace sgan
