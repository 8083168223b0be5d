#pragma once

#include "sgan/geom.hpp"
#include "sgan/rng.hpp"
#include "sgan/smv.hpp"

namespace sgan {

// axis-aligned box with half extents hx, hy, hz, centered at the origin
TriangleMesh make_box_mesh(double hx, double hy, double hz);

// latitude-longitude sphere triangulation
TriangleMesh make_uv_sphere_mesh(double radius, int rings, int segments);

// exact radial profiles sampled on the dh_grid angles
SphericalGrid ellipsoid_grid(double a, double b, double c, int bandlimit);
SphericalGrid box_grid(double hx, double hy, double hz, int bandlimit);

// surface point samples, uniform over direction for the ellipsoid and uniform
// over area for the box
PointCloud ellipsoid_cloud(double a, double b, double c, int count, Rng& rng);
PointCloud box_cloud(double hx, double hy, double hz, int count, Rng& rng);

double ellipsoid_radius(double a, double b, double c, const Vec3& dir);
double box_radius(double hx, double hy, double hz, const Vec3& dir);

}  // namespace sgan
