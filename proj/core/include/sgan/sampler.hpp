#pragma once

#include "sgan/geom.hpp"
#include "sgan/smv.hpp"

namespace sgan {

// Translates the vertex centroid to the origin and scales the farthest vertex
// onto radius 0.95. Applying it twice gives the same mesh.
TriangleMesh normalize_mesh(const TriangleMesh& mesh);

struct RaycastStats {
  int misses = 0;
  bool flagged = false;  // set when more than 30% of the rays miss
};

// Radial surface samples on the dh_grid(bandlimit) angles, cast from the
// vertex centroid. Even azimuth columns keep the nearest intersection, odd
// columns the farthest, so thin structure on the near and far side both
// survive. Missed rays store radius 0.
SphericalGrid raycast_sample(const TriangleMesh& mesh, int bandlimit,
                             RaycastStats* stats = nullptr);

// Cartesian points r * direction for every node with a nonzero radius.
PointCloud grid_to_pointcloud(const SphericalGrid& grid);

// Nearest-direction resampling of a cloud onto the dh_grid(bandlimit) angles.
// Nodes with no point within an angular radius of pi/bandlimit are filled by
// repeated neighbor averaging; more than 20% such nodes is an error. The
// result does not depend on the order of the input points.
SphericalGrid pointcloud_to_grid(const PointCloud& cloud, int bandlimit);

}  // namespace sgan
