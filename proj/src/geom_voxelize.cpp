#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "voxc/geom.hpp"

namespace voxc::geom {

namespace {

// One parity ray along +x for a row of voxel centers. Returns false when a
// hit grazes a triangle edge/vertex or lies in a triangle's plane, so the
// caller can retry with a jittered row origin; such ties would otherwise
// make the crossing count unreliable.
bool collect_row_crossings(const TriMesh& m, const Vec3& orig, std::vector<double>& xs, double scale) {
  xs.clear();
  const Vec3 dir = Vec3::UnitX();
  constexpr double kBaryTol = 1e-9;
  for (const Vec3i& tr : m.triangles) {
    const Vec3& a = m.vertices[tr.x()];
    const Vec3& b = m.vertices[tr.y()];
    const Vec3& c = m.vertices[tr.z()];
    const Vec3 n = (b - a).cross(c - a);
    // ray lying in the triangle's plane: parity is undefined for this row
    if (std::abs(n.x()) < 1e-12 * (1.0 + n.norm()) && std::abs(n.dot(orig - a)) < 1e-9 * scale)
      return false;
    double t, u, v;
    if (!ray_triangle(orig, dir, a, b, c, t, u, v)) continue;
    if (u < kBaryTol || v < kBaryTol || u + v > 1.0 - kBaryTol) return false;
    xs.push_back(orig.x() + t);
  }
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] - xs[i - 1] < 1e-9 * scale) return false;
  }
  return true;
}

grid::OccupancyGrid voxelize_frame(const TriMesh& m, int side, double vs, const Vec3& origin) {
  m.validate();
  if (m.empty()) throw std::invalid_argument("voxelize of an empty mesh");
  if (side < 2) throw std::invalid_argument("voxelize grid side must be at least 2");

  const bool closed = is_closed(m);
  if (!closed) std::fprintf(stderr, "warning: open mesh, falling back to surface-only voxelization\n");

  const MeshBvh bvh(m);
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(side, vs, origin);
  const double band = 0.5 * std::sqrt(3.0) * vs;
  const double scale = std::max(vs * side, m.bounding_radius());

  parallel_for(static_cast<std::int64_t>(side) * side, [&](std::int64_t r0, std::int64_t r1) {
    std::vector<double> xs;
    for (std::int64_t r = r0; r < r1; ++r) {
      const int y = static_cast<int>(r % side);
      const int z = static_cast<int>(r / side);
      const double cy = origin.y() + (y + 0.5) * vs;
      const double cz = origin.z() + (z + 0.5) * vs;

      bool have_parity = false;
      if (closed) {
        // jitter the row origin until no hit is degenerate
        for (int retry = 0; retry <= 12 && !have_parity; ++retry) {
          const Vec3 orig(origin.x() - vs, cy + 1e-6 * vs * retry, cz + 1.618e-6 * vs * retry);
          have_parity = collect_row_crossings(m, orig, xs, scale);
        }
      }

      std::size_t lead = 0;  // crossings left of the current center
      for (int x = 0; x < side; ++x) {
        const Vec3 center(origin.x() + (x + 0.5) * vs, cy, cz);
        bool occ = false;
        if (have_parity) {
          while (lead < xs.size() && xs[lead] < center.x()) ++lead;
          occ = (lead % 2) == 1;
        }
        if (!occ) occ = bvh.nearest_distance(center, band) <= band;
        if (occ) g.set(x, y, z, true);
      }
    }
  });
  return g;
}

}  // namespace

grid::OccupancyGrid solid_voxelize(const TriMesh& m, int side) {
  m.validate();
  if (m.empty()) throw std::invalid_argument("voxelize of an empty mesh");
  if (side < 2) throw std::invalid_argument("voxelize grid side must be at least 2");
  const auto [lo, hi] = m.bounds();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw std::invalid_argument("voxelize of a degenerate mesh");
  // bounding box inset by one voxel of margin on every side
  const double vs = extent / (side - 2);
  const Vec3 center = 0.5 * (lo + hi);
  const Vec3 origin = center - Vec3::Constant(0.5 * side * vs);
  return voxelize_frame(m, side, vs, origin);
}

grid::OccupancyGrid solid_voxelize_into(const TriMesh& m, int side, const grid::EmbedTransform& t) {
  if (!(t.scale > 0.0)) throw std::invalid_argument("embed transform scale must be positive");
  const double vs = 1.0 / t.scale;
  const Vec3 origin = t.to_world(Vec3::Zero());
  return voxelize_frame(m, side, vs, origin);
}

}  // namespace voxc::geom
