#include "voxc/grid.hpp"

#include <cmath>
#include <limits>

namespace voxc::grid {

namespace {

// Quantizes one grid coordinate to a voxel index. Coordinates within rounding
// error of an integer snap to it first, so points constructed to lie exactly
// on voxel boundaries do not fall one cell short when transform arithmetic
// leaves them at 19.999999999999996.
int quantize(double g, int side) {
  const double r = std::round(g);
  if (std::abs(g - r) <= 1e-9 * std::max(1.0, std::abs(g))) g = r;
  int i = static_cast<int>(std::floor(g));
  if (i < 0) i = 0;
  if (i >= side) i = side - 1;
  return i;
}

bool outside(const Vec3& g, int side) {
  for (int a = 0; a < 3; ++a) {
    if (g[a] < 0.0 || g[a] >= static_cast<double>(side)) return true;
  }
  return false;
}

}  // namespace

OccupancyGrid OccupancyGrid::empty(int side, double voxel_size, const Vec3& origin) {
  if (side < 1) throw std::invalid_argument("grid side must be positive");
  OccupancyGrid g;
  g.dims = Vec3i(side, side, side);
  g.data.assign(g.total(), 0);
  g.voxel_size = voxel_size;
  g.origin = origin;
  return g;
}

std::size_t OccupancyGrid::occupied_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : data) n += v != 0;
  return n;
}

void OccupancyGrid::validate() const {
  if (dims.minCoeff() < 1) throw std::invalid_argument("grid dims must be positive");
  if (data.size() != total()) throw std::invalid_argument("grid data size does not match dims");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel size must be positive");
}

WeightedGrid WeightedGrid::zeros(const Vec3i& dims) {
  if (dims.minCoeff() < 1) throw std::invalid_argument("grid dims must be positive");
  WeightedGrid g;
  g.dims = dims;
  g.data.assign(g.total(), 0.0);
  return g;
}

WeightedGrid WeightedGrid::from_occupancy(const OccupancyGrid& g, double occupied, double empty) {
  WeightedGrid w = zeros(g.dims);
  for (std::size_t i = 0; i < g.data.size(); ++i) w.data[i] = g.data[i] ? occupied : empty;
  return w;
}

std::pair<OccupancyGrid, EmbedTransform> embed_pointcloud(const PointCloud& pc, int grid_side) {
  if (pc.empty()) throw std::invalid_argument("empty input cloud");
  if (grid_side < 8) throw std::invalid_argument("grid side must be at least 8");

  Vec3 lo = pc.front();
  Vec3 hi = pc.front();
  for (const Vec3& p : pc) {
    if (!p.allFinite()) throw std::invalid_argument("non-finite point coordinates");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();

  EmbedTransform t;
  t.scale = extent > 0.0 ? 0.8 * grid_side / extent : 1.0;
  const Vec3 target(0.5 * grid_side, 0.5 * grid_side, 0.45 * grid_side);
  t.offset = target - 0.5 * (lo + hi) * t.scale;

  OccupancyGrid grid = OccupancyGrid::empty(grid_side, 1.0 / t.scale, -t.offset / t.scale);
  for (const Vec3& p : pc) {
    const Vec3 g = t.to_grid(p);
    grid.set(quantize(g.x(), grid_side), quantize(g.y(), grid_side), quantize(g.z(), grid_side), true);
  }
  return {grid, t};
}

std::size_t occupy_from_points(OccupancyGrid& g, const PointCloud& pc, const EmbedTransform& t) {
  g.validate();
  if (g.dims.x() != g.dims.y() || g.dims.x() != g.dims.z())
    throw std::invalid_argument("occupy_from_points requires a cubic grid");
  const int side = g.dims.x();
  std::size_t clamped = 0;
  for (const Vec3& p : pc) {
    const Vec3 gc = t.to_grid(p);
    clamped += outside(gc, side);
    g.set(quantize(gc.x(), side), quantize(gc.y(), side), quantize(gc.z(), side), true);
  }
  return clamped;
}

OccupancyGrid downsample(const OccupancyGrid& g, int out_side) {
  g.validate();
  if (out_side < 1 || out_side > g.dims.minCoeff())
    throw std::invalid_argument("downsample output side must be in [1, smallest input side]");

  OccupancyGrid out = OccupancyGrid::empty(out_side, g.voxel_size * g.dims.x() / out_side, g.origin);
  for (int z = 0; z < g.dims.z(); ++z) {
    const int oz = static_cast<int>(static_cast<std::int64_t>(z) * out_side / g.dims.z());
    for (int y = 0; y < g.dims.y(); ++y) {
      const int oy = static_cast<int>(static_cast<std::int64_t>(y) * out_side / g.dims.y());
      for (int x = 0; x < g.dims.x(); ++x) {
        if (!g.at(x, y, z)) continue;
        const int ox = static_cast<int>(static_cast<std::int64_t>(x) * out_side / g.dims.x());
        out.set(ox, oy, oz, true);
      }
    }
  }
  return out;
}

PointCloud grid_to_pointcloud(const OccupancyGrid& g, const EmbedTransform& t) {
  g.validate();
  PointCloud pc;
  pc.reserve(g.occupied_count());
  for (int z = 0; z < g.dims.z(); ++z)
    for (int y = 0; y < g.dims.y(); ++y)
      for (int x = 0; x < g.dims.x(); ++x)
        if (g.at(x, y, z)) pc.push_back(t.to_world(Vec3(x + 0.5, y + 0.5, z + 0.5)));
  return pc;
}

}  // namespace voxc::grid
