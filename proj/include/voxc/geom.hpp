#pragma once

#include <limits>
#include <utility>

#include "voxc/grid.hpp"

namespace voxc::geom {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3i> triangles;

  bool empty() const { return triangles.empty(); }
  // Throws on out-of-range indices, repeated vertices in a triangle, or
  // non-finite coordinates.
  void validate() const;
  std::pair<Vec3, Vec3> bounds() const;
  double surface_area() const;
  // Area-weighted surface centroid.
  Vec3 centroid() const;
  // Radius of the bounding sphere centered at the bounding-box center.
  double bounding_radius() const;
  TriMesh transformed(const Eigen::Matrix3d& rot, const Vec3& translation) const;
};

// Orientation is roll about x, then pitch about y, then yaw about z,
// so the world rotation is Rz(yaw) * Ry(pitch) * Rx(roll). Camera axes:
// x right, y down, z forward (the viewing direction).
struct CameraPose {
  Vec3 position = Vec3::Zero();
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Eigen::Matrix3d rotation() const;
  Vec3 forward() const { return rotation().col(2); }
};

// Per-pixel depth along camera z (not euclidean ray length); kNoHit marks
// pixels whose ray misses every triangle.
struct DepthImage {
  static constexpr double kNoHit = std::numeric_limits<double>::infinity();

  int width = 0;
  int height = 0;
  std::vector<double> depths;  // row-major, depths[y * width + x]
  double fov_y = 0.0;

  double at(int x, int y) const { return depths[static_cast<std::size_t>(y) * width + x]; }
  std::size_t hit_count() const;
};

// Result of back-projecting one depth image: the camera-frame cloud, its
// embedding, and the pose it was rendered from.
struct PartialView {
  grid::OccupancyGrid grid;
  grid::EmbedTransform transform;
  PointCloud cloud;  // camera frame, +z = viewing direction
  CameraPose pose;
};

// Parametric ray-triangle test. Direction need not be unit length; on a hit
// t is in units of |dir| and strictly positive. Hits on triangle boundaries
// count as hits; rays within determinant 1e-9 of parallel miss.
bool ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                  double& t, double& u, double& v);

// Bounding-volume hierarchy over one mesh for ray casts and closest-point
// queries. Read-only after construction; safe for concurrent queries.
class MeshBvh {
 public:
  explicit MeshBvh(const TriMesh& m);

  // Nearest hit along the ray, t in units of |dir|. Returns false on miss.
  bool raycast(const Vec3& orig, const Vec3& dir, double& t, int& tri_index) const;
  // Exact distance from p to the mesh surface. Queries that can prove the
  // distance exceeds cap return early with some value > cap.
  double nearest_distance(const Vec3& p, double cap = std::numeric_limits<double>::infinity()) const;

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal nodes
    int start = 0, count = 0;   // leaves
  };
  int build(int begin, int end, std::vector<Vec3>& centroids);
  double box_distance_sq(const Node& n, const Vec3& p) const;

  const TriMesh& mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

// True iff every edge is shared by exactly two triangles.
bool is_closed(const TriMesh& m);

// Signed enclosed volume by the divergence theorem; positive for closed
// meshes with outward-facing triangles.
double signed_volume(const TriMesh& m);

// Perspective projection with square pixels, camera x right / y down /
// z forward. Each pixel stores camera-z depth of the nearest hit.
DepthImage render_depth(const TriMesh& m, const CameraPose& pose, int w, int h, double fov_y);

// Back-projects hit pixels to camera-frame points and embeds them. Throws
// when the image contains no hit ("object not visible").
PartialView depth_to_partial_grid(const DepthImage& d, const CameraPose& pose, int side);

// Marks voxels whose center is inside the mesh or within half a voxel
// diagonal of its surface. The cubic grid covers the bounding box with a one
// voxel margin. Open meshes voxelize surface-only with a warning on stderr.
grid::OccupancyGrid solid_voxelize(const TriMesh& m, int side);

// Same marking rule on a caller-fixed frame: voxel centers are taken from
// the world-to-grid transform t over a side^3 grid.
grid::OccupancyGrid solid_voxelize_into(const TriMesh& m, int side, const grid::EmbedTransform& t);

// Isosurface extraction; vertices are in grid coordinates (value (x,y,z)
// sampled at (x+0.5, y+0.5, z+0.5)). Values above isolevel are inside;
// triangles face outward. A grid with no crossing yields an empty mesh.
TriMesh marching_cubes(const grid::WeightedGrid& f, double isolevel);

// n area-uniform surface samples, deterministic per seed.
PointCloud sample_surface(const TriMesh& m, int n, std::uint64_t seed);

// Uniform vertex averaging: each iteration moves every vertex to the mean of
// its edge neighbors. Connectivity is unchanged.
TriMesh laplacian_smooth(const TriMesh& m, int iterations);

}  // namespace voxc::geom
