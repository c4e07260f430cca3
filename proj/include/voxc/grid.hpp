#pragma once

#include "voxc/common.hpp"

namespace voxc::grid {

// Maps world points into grid coordinates: g = p * scale + offset.
// Voxel (i,j,k) covers the half-open cube [i,i+1)x[j,j+1)x[k,k+1) in grid
// coordinates; its center sits at (i+0.5, j+0.5, k+0.5).
struct EmbedTransform {
  double scale = 1.0;
  Vec3 offset = Vec3::Zero();

  Vec3 to_grid(const Vec3& p) const { return p * scale + offset; }
  Vec3 to_world(const Vec3& g) const { return (g - offset) / scale; }
};

// Dense binary voxel grid, x fastest then y then z.
struct OccupancyGrid {
  Vec3i dims = Vec3i::Zero();
  std::vector<std::uint8_t> data;
  double voxel_size = 1.0;     // meters per voxel edge
  Vec3 origin = Vec3::Zero();  // world position of the corner of voxel (0,0,0)

  static OccupancyGrid empty(int side, double voxel_size = 1.0, const Vec3& origin = Vec3::Zero());

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims.x()) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims.y()) * static_cast<std::size_t>(z));
  }
  bool at(int x, int y, int z) const { return data[index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool v) { data[index(x, y, z)] = v ? 1 : 0; }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims.x() && y < dims.y() && z < dims.z();
  }
  std::size_t total() const {
    return static_cast<std::size_t>(dims.x()) * static_cast<std::size_t>(dims.y()) *
           static_cast<std::size_t>(dims.z());
  }
  std::size_t occupied_count() const;
  void validate() const;
};

// Dense real-valued voxel grid in the same memory order as OccupancyGrid.
struct WeightedGrid {
  Vec3i dims = Vec3i::Zero();
  std::vector<double> data;

  static WeightedGrid zeros(const Vec3i& dims);
  static WeightedGrid from_occupancy(const OccupancyGrid& g, double occupied = 1.0, double empty = 0.0);

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims.x()) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims.y()) * static_cast<std::size_t>(z));
  }
  double at(int x, int y, int z) const { return data[index(x, y, z)]; }
  std::size_t total() const {
    return static_cast<std::size_t>(dims.x()) * static_cast<std::size_t>(dims.y()) *
           static_cast<std::size_t>(dims.z());
  }
};

// Scales the cloud uniformly so its bounding box spans 0.8 * grid_side voxels
// on the longest axis and centers it at (0.5, 0.5, 0.45) * grid_side, leaving
// extra room behind the object. Degenerate boxes use the largest nonzero
// extent; an all-zero extent (single point) embeds with scale 1. Points on
// the half-open upper voxel boundary clamp into the last voxel.
std::pair<OccupancyGrid, EmbedTransform> embed_pointcloud(const PointCloud& pc, int grid_side);

// Marks voxels of a fixed, caller-chosen frame. Points mapping outside the
// grid are clamped onto the nearest boundary voxel; the return value counts
// how many were clamped.
std::size_t occupy_from_points(OccupancyGrid& g, const PointCloud& pc, const EmbedTransform& t);

// Max-pooling downsample to an out_side^3 cube: an output voxel is occupied
// iff any source voxel mapping to it via floor(index * out / in) per axis is.
// voxel_size/origin metadata is carried over from the x axis and is only
// physically meaningful for cubic inputs.
OccupancyGrid downsample(const OccupancyGrid& g, int out_side);

// One world-frame point per occupied voxel, at the voxel center.
PointCloud grid_to_pointcloud(const OccupancyGrid& g, const EmbedTransform& t);

}  // namespace voxc::grid
