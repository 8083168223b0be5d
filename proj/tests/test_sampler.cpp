#include "sgan/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sgan/errors.hpp"
#include "sgan/rng.hpp"
#include "sgan/sh.hpp"
#include "sgan/shapes.hpp"

using namespace sgan;

TEST_CASE("normalize centers the centroid and caps the radius at 0.95") {
  TriangleMesh m = make_box_mesh(1.0, 2.0, 0.5);
  for (Vec3& v : m.vertices) v += {3.0, -1.0, 7.5};
  TriangleMesh n = normalize_mesh(m);

  Vec3 c;
  double far = 0.0;
  for (const Vec3& v : n.vertices) {
    c += v;
    far = std::max(far, norm(v));
  }
  c = c * (1.0 / double(n.vertices.size()));
  CHECK(norm(c) < 1e-12);
  CHECK(far == doctest::Approx(0.95).epsilon(1e-12));

  TriangleMesh again = normalize_mesh(n);
  for (std::size_t i = 0; i < n.vertices.size(); ++i)
    CHECK(norm(again.vertices[i] - n.vertices[i]) < 1e-12);
}

TEST_CASE("box raycast matches the analytic radial profile") {
  int M = 8;
  TriangleMesh box = normalize_mesh(make_box_mesh(1.0, 1.0, 1.0));
  double a = 0.95 / std::sqrt(3.0);  // half extent after normalization
  RaycastStats stats;
  SphericalGrid g = raycast_sample(box, M, &stats);
  CHECK(stats.misses == 0);
  CHECK_FALSE(stats.flagged);
  for (int j = 0; j < g.rows(); ++j)
    for (int k = 0; k < g.cols(); ++k) {
      Vec3 d = direction(g.thetas[std::size_t(j)], g.phis[std::size_t(k)]);
      CHECK(g.r(j, k) == doctest::Approx(box_radius(a, a, a, d)).epsilon(1e-9));
    }
}

TEST_CASE("sphere raycast recovers the radius everywhere") {
  TriangleMesh sph = make_uv_sphere_mesh(0.8, 24, 48);
  RaycastStats stats;
  SphericalGrid g = raycast_sample(sph, 8, &stats);
  CHECK(stats.misses == 0);
  for (double r : g.radii) {
    CHECK(r > 0.78);
    CHECK(r < 0.801);
  }
}

TEST_CASE("even columns keep the near side, odd columns the far side") {
  // two parallel plates above the centroid plus a mirrored pair below it
  TriangleMesh m;
  auto plate = [&](double z) {
    int b = int(m.vertices.size());
    m.vertices.push_back({-1, -1, z});
    m.vertices.push_back({1, -1, z});
    m.vertices.push_back({1, 1, z});
    m.vertices.push_back({-1, 1, z});
    m.faces.push_back({b, b + 1, b + 2});
    m.faces.push_back({b, b + 2, b + 3});
  };
  plate(0.2);
  plate(0.6);
  plate(-0.2);
  plate(-0.6);
  SphericalGrid g = raycast_sample(m, 4, nullptr);
  // row 0 looks straight up from the centroid at the origin
  CHECK(g.thetas[0] == 0.0);
  CHECK(g.r(0, 0) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(g.r(0, 1) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(g.r(0, 2) == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("rays that miss are zeroed, counted, and flagged past 30%") {
  // a single plate overhead leaves most directions empty
  TriangleMesh m;
  m.vertices = {{-2, -2, 0.4}, {2, -2, 0.4}, {2, 2, 0.4}, {-2, 2, 0.4}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  RaycastStats stats;
  SphericalGrid g = raycast_sample(m, 6, &stats);
  CHECK(stats.misses > 0);
  CHECK(stats.flagged);
  int zeros = 0;
  for (double r : g.radii)
    if (r == 0.0) ++zeros;
  CHECK(zeros == stats.misses);
}

TEST_CASE("grid to cloud keeps only struck nodes") {
  SphericalGrid g = dh_grid(2);
  g.r(1, 1) = 0.7;
  g.r(2, 3) = 1.2;
  PointCloud c = grid_to_pointcloud(g);
  REQUIRE(c.size() == 2);
  CHECK(norm(c[0]) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(norm(c[1]) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("gridding a grid-derived cloud restores the radii") {
  int M = 8;
  TriangleMesh box = normalize_mesh(make_box_mesh(1.0, 1.0, 1.0));
  SphericalGrid g = raycast_sample(box, M, nullptr);
  PointCloud cloud = grid_to_pointcloud(g);
  SphericalGrid back = pointcloud_to_grid(cloud, M);
  for (std::size_t i = 0; i < g.radii.size(); ++i)
    CHECK(back.radii[i] == doctest::Approx(g.radii[i]).epsilon(1e-10));
}

TEST_CASE("gridding is invariant to point order") {
  Rng rng(31);
  PointCloud cloud = ellipsoid_cloud(0.9, 0.6, 0.75, 4000, rng);
  SphericalGrid a = pointcloud_to_grid(cloud, 8);

  // deterministic shuffle
  for (std::size_t i = cloud.size(); i > 1; --i)
    std::swap(cloud[i - 1], cloud[rng.index(i)]);
  SphericalGrid b = pointcloud_to_grid(cloud, 8);
  for (std::size_t i = 0; i < a.radii.size(); ++i) CHECK(a.radii[i] == b.radii[i]);
}

TEST_CASE("small gaps are filled from their neighbors") {
  int M = 8;
  TriangleMesh box = normalize_mesh(make_box_mesh(1.0, 1.0, 1.0));
  SphericalGrid g = raycast_sample(box, M, nullptr);
  PointCloud cloud = grid_to_pointcloud(g);
  double a = 0.95 / std::sqrt(3.0);

  // carve out a cone around +x
  PointCloud cut;
  for (const Vec3& p : cloud)
    if (p.x / norm(p) < std::cos(0.5)) cut.push_back(p);
  REQUIRE(cut.size() < cloud.size());

  SphericalGrid back = pointcloud_to_grid(cut, M);
  for (double r : back.radii) {
    CHECK(r > 0.5 * a);
    CHECK(r < 2.0 * a);
  }
}

TEST_CASE("sparse clouds are rejected") {
  PointCloud tiny = {{0.5, 0, 0}, {0, 0.5, 0}, {0, 0, 0.5}};
  CHECK_THROWS_AS(pointcloud_to_grid(tiny, 8), DataError);
  PointCloud zeros(10, Vec3{0, 0, 0});
  CHECK_THROWS_AS(pointcloud_to_grid(zeros, 4), DataError);
}
