#include "sgan/shapes.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgan/sh.hpp"

namespace sgan {

TriangleMesh make_box_mesh(double hx, double hy, double hz) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({(i & 1) ? hx : -hx, (i & 2) ? hy : -hy, (i & 4) ? hz : -hz});
  const int quads[6][4] = {
      {0, 2, 3, 1},  // z-
      {4, 5, 7, 6},  // z+
      {0, 1, 5, 4},  // y-
      {2, 6, 7, 3},  // y+
      {0, 4, 6, 2},  // x-
      {1, 3, 7, 5},  // x+
  };
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriangleMesh make_uv_sphere_mesh(double radius, int rings, int segments) {
  if (rings < 2 || segments < 3)
    throw std::invalid_argument("make_uv_sphere_mesh: need rings >= 2, segments >= 3");
  TriangleMesh m;
  m.vertices.push_back({0, 0, radius});
  for (int i = 1; i < rings; ++i) {
    double th = kPi * i / rings;
    for (int k = 0; k < segments; ++k) {
      double ph = 2.0 * kPi * k / segments;
      m.vertices.push_back(direction(th, ph) * radius);
    }
  }
  m.vertices.push_back({0, 0, -radius});
  int bottom = int(m.vertices.size()) - 1;
  auto ring_vertex = [&](int ring, int k) { return 1 + (ring - 1) * segments + (k % segments); };
  for (int k = 0; k < segments; ++k) m.faces.push_back({0, ring_vertex(1, k), ring_vertex(1, k + 1)});
  for (int i = 1; i + 1 < rings; ++i)
    for (int k = 0; k < segments; ++k) {
      int a = ring_vertex(i, k), b = ring_vertex(i, k + 1);
      int c = ring_vertex(i + 1, k), d = ring_vertex(i + 1, k + 1);
      m.faces.push_back({a, c, d});
      m.faces.push_back({a, d, b});
    }
  for (int k = 0; k < segments; ++k)
    m.faces.push_back({ring_vertex(rings - 1, k + 1), ring_vertex(rings - 1, k), bottom});
  return m;
}

double ellipsoid_radius(double a, double b, double c, const Vec3& dir) {
  double q = (dir.x / a) * (dir.x / a) + (dir.y / b) * (dir.y / b) + (dir.z / c) * (dir.z / c);
  return 1.0 / std::sqrt(q);
}

double box_radius(double hx, double hy, double hz, const Vec3& dir) {
  double r = std::numeric_limits<double>::infinity();
  if (dir.x != 0.0) r = std::min(r, hx / std::abs(dir.x));
  if (dir.y != 0.0) r = std::min(r, hy / std::abs(dir.y));
  if (dir.z != 0.0) r = std::min(r, hz / std::abs(dir.z));
  return r;
}

SphericalGrid ellipsoid_grid(double a, double b, double c, int bandlimit) {
  SphericalGrid g = dh_grid(bandlimit);
  for (int j = 0; j < g.rows(); ++j)
    for (int k = 0; k < g.cols(); ++k)
      g.r(j, k) = ellipsoid_radius(a, b, c, direction(g.thetas[std::size_t(j)], g.phis[std::size_t(k)]));
  return g;
}

SphericalGrid box_grid(double hx, double hy, double hz, int bandlimit) {
  SphericalGrid g = dh_grid(bandlimit);
  for (int j = 0; j < g.rows(); ++j)
    for (int k = 0; k < g.cols(); ++k)
      g.r(j, k) = box_radius(hx, hy, hz, direction(g.thetas[std::size_t(j)], g.phis[std::size_t(k)]));
  return g;
}

PointCloud ellipsoid_cloud(double a, double b, double c, int count, Rng& rng) {
  PointCloud cloud;
  cloud.reserve(std::size_t(count));
  while (int(cloud.size()) < count) {
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    double n = norm(d);
    if (n < 1e-9) continue;
    d = d * (1.0 / n);
    cloud.push_back(d * ellipsoid_radius(a, b, c, d));
  }
  return cloud;
}

PointCloud box_cloud(double hx, double hy, double hz, int count, Rng& rng) {
  // pick a face proportionally to its area, then a uniform point on it
  double ax = hy * hz, ay = hx * hz, az = hx * hy;
  double total = 2.0 * (ax + ay + az);
  PointCloud cloud;
  cloud.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    double pick = rng.uniform(0.0, total);
    double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
    if (pick < 2 * ax) {
      double sx = pick < ax ? hx : -hx;
      cloud.push_back({sx, u * hy, v * hz});
    } else if (pick < 2 * (ax + ay)) {
      double sy = pick < 2 * ax + ay ? hy : -hy;
      cloud.push_back({u * hx, sy, v * hz});
    } else {
      double sz = pick < 2 * (ax + ay) + az ? hz : -hz;
      cloud.push_back({u * hx, v * hy, sz});
    }
  }
  return cloud;
}

}  // namespace sgan
