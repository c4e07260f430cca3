#include <algorithm>
#include <cmath>

#include "voxc/geom.hpp"

namespace voxc::geom {

PointCloud sample_surface(const TriMesh& m, int n, std::uint64_t seed) {
  m.validate();
  if (n < 1) throw std::invalid_argument("sample count must be positive");

  std::vector<double> cumulative(m.triangles.size());
  double total = 0.0;
  for (std::size_t i = 0; i < m.triangles.size(); ++i) {
    const Vec3i& t = m.triangles[i];
    const Vec3& a = m.vertices[t.x()];
    total += 0.5 * (m.vertices[t.y()] - a).cross(m.vertices[t.z()] - a).norm();
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("cannot sample a zero-area mesh");

  SeqRng rng(seed);
  PointCloud pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double r = rng.uniform() * total;
    const std::size_t ti =
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin();
    const Vec3i& t = m.triangles[std::min(ti, m.triangles.size() - 1)];
    double u = rng.uniform();
    double v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3& a = m.vertices[t.x()];
    pts.push_back(a + u * (m.vertices[t.y()] - a) + v * (m.vertices[t.z()] - a));
  }
  return pts;
}

}  // namespace voxc::geom
