#include "sgan/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sgan/errors.hpp"
#include "sgan/sh.hpp"

namespace sgan {

namespace {

// Moller-Trumbore; hits behind the origin or closer than the epsilon are
// rejected
bool ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                  const Vec3& v2, double& t_out) {
  constexpr double eps = 1e-9;
  Vec3 e1 = v1 - v0, e2 = v2 - v0;
  Vec3 p = cross(dir, e2);
  double det = dot(e1, p);
  if (std::abs(det) < 1e-12) return false;
  double inv = 1.0 / det;
  Vec3 s = orig - v0;
  double u = dot(s, p) * inv;
  if (u < -eps || u > 1.0 + eps) return false;
  Vec3 q = cross(s, e1);
  double v = dot(dir, q) * inv;
  if (v < -eps || u + v > 1.0 + eps) return false;
  double t = dot(e2, q) * inv;
  if (t <= eps) return false;
  t_out = t;
  return true;
}

Vec3 vertex_centroid(const TriangleMesh& mesh) {
  Vec3 c;
  for (const Vec3& v : mesh.vertices) c += v;
  return c * (1.0 / double(mesh.vertices.size()));
}

}  // namespace

TriangleMesh normalize_mesh(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw DataError("normalize_mesh: mesh has no vertices");
  Vec3 c = vertex_centroid(mesh);
  double far = 0.0;
  for (const Vec3& v : mesh.vertices) far = std::max(far, norm(v - c));
  if (far <= 0.0) throw DataError("normalize_mesh: all vertices coincide");
  double s = 0.95 / far;
  TriangleMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.vertices.push_back((v - c) * s);
  out.faces = mesh.faces;
  return out;
}

SphericalGrid raycast_sample(const TriangleMesh& mesh, int bandlimit, RaycastStats* stats) {
  if (mesh.vertices.empty() || mesh.faces.empty())
    throw DataError("raycast_sample: empty mesh");
  SphericalGrid g = dh_grid(bandlimit);
  const Vec3 origin = vertex_centroid(mesh);
  int misses = 0;
  for (int j = 0; j < g.rows(); ++j) {
    for (int k = 0; k < g.cols(); ++k) {
      Vec3 dir = direction(g.thetas[std::size_t(j)], g.phis[std::size_t(k)]);
      bool want_first = (k % 2 == 0);
      double best = want_first ? std::numeric_limits<double>::infinity() : 0.0;
      bool hit = false;
      for (const auto& f : mesh.faces) {
        double t;
        if (ray_triangle(origin, dir, mesh.vertices[std::size_t(f[0])],
                         mesh.vertices[std::size_t(f[1])], mesh.vertices[std::size_t(f[2])], t)) {
          // coincident hits on shared edges land within 1e-9 of each other
          // and collapse into the same min/max
          best = want_first ? std::min(best, t) : std::max(best, t);
          hit = true;
        }
      }
      if (hit) {
        g.r(j, k) = best;
      } else {
        g.r(j, k) = 0.0;
        ++misses;
      }
    }
  }
  if (stats) {
    stats->misses = misses;
    stats->flagged = misses * 10 > 3 * g.rows() * g.cols();
  }
  return g;
}

PointCloud grid_to_pointcloud(const SphericalGrid& grid) {
  PointCloud cloud;
  cloud.reserve(grid.size());
  for (int j = 0; j < grid.rows(); ++j)
    for (int k = 0; k < grid.cols(); ++k) {
      double r = grid.r(j, k);
      if (r == 0.0) continue;
      cloud.push_back(direction(grid.thetas[std::size_t(j)], grid.phis[std::size_t(k)]) * r);
    }
  return cloud;
}

SphericalGrid pointcloud_to_grid(const PointCloud& cloud, int bandlimit) {
  SphericalGrid g = dh_grid(bandlimit);
  const int rows = g.rows(), cols = g.cols();

  struct Entry {
    Vec3 dir;
    double r;
    Vec3 p;
  };
  std::vector<Entry> entries;
  entries.reserve(cloud.size());
  for (const Vec3& p : cloud) {
    double r = norm(p);
    if (r < 1e-12) continue;
    entries.push_back({p * (1.0 / r), r, p});
  }
  if (entries.empty()) throw DataError("pointcloud_to_grid: no usable points");

  const double cos_limit = std::cos(kPi / bandlimit);
  std::vector<char> filled(std::size_t(rows) * cols, 0);
  int unfilled = 0;
  for (int j = 0; j < rows; ++j) {
    for (int k = 0; k < cols; ++k) {
      Vec3 dir = direction(g.thetas[std::size_t(j)], g.phis[std::size_t(k)]);
      // exhaustive nearest-direction search with a total-order tie break so
      // the winner never depends on input order
      const Entry* best = nullptr;
      double best_cos = -2.0;
      for (const Entry& e : entries) {
        double c = dot(dir, e.dir);
        if (c < best_cos) continue;
        if (c > best_cos) {
          best_cos = c;
          best = &e;
          continue;
        }
        const Entry& b = *best;
        bool take = e.r < b.r ||
                    (e.r == b.r && (e.p.x < b.p.x || (e.p.x == b.p.x &&
                     (e.p.y < b.p.y || (e.p.y == b.p.y && e.p.z < b.p.z)))));
        if (take) best = &e;
      }
      if (best_cos >= cos_limit) {
        g.r(j, k) = best->r;
        filled[std::size_t(j) * cols + k] = 1;
      } else {
        ++unfilled;
      }
    }
  }

  int total = rows * cols;
  if (unfilled * 5 > total)
    throw DataError("pointcloud_to_grid: cloud leaves more than 20% of the grid uncovered");

  // fill gaps by averaging already-settled neighbors, one synchronous pass at
  // a time; the azimuth wraps, the polar direction clamps
  int guard = 0;
  while (unfilled > 0) {
    if (++guard > total) throw DataError("pointcloud_to_grid: gap filling did not converge");
    std::vector<std::pair<int, double>> updates;
    for (int j = 0; j < rows; ++j) {
      for (int k = 0; k < cols; ++k) {
        int idx = j * cols + k;
        if (filled[std::size_t(idx)]) continue;
        double sum = 0.0;
        int cnt = 0;
        auto probe = [&](int jj, int kk) {
          int nidx = jj * cols + ((kk % cols) + cols) % cols;
          if (filled[std::size_t(nidx)]) {
            sum += g.radii[std::size_t(nidx)];
            ++cnt;
          }
        };
        if (j > 0) probe(j - 1, k);
        if (j + 1 < rows) probe(j + 1, k);
        probe(j, k - 1);
        probe(j, k + 1);
        if (cnt > 0) updates.emplace_back(idx, sum / cnt);
      }
    }
    for (const auto& [idx, val] : updates) {
      g.radii[std::size_t(idx)] = val;
      filled[std::size_t(idx)] = 1;
    }
    unfilled -= int(updates.size());
  }
  return g;
}

}  // namespace sgan
