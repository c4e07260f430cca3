#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "voxc/geom.hpp"

namespace voxc::geom {

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const Vec3& v : vertices) {
    if (!v.allFinite()) throw std::invalid_argument("mesh vertex with non-finite coordinates");
  }
  for (const Vec3i& t : triangles) {
    if (t.minCoeff() < 0 || t.maxCoeff() >= n) throw std::invalid_argument("triangle index out of range");
    if (t.x() == t.y() || t.y() == t.z() || t.x() == t.z())
      throw std::invalid_argument("triangle with repeated vertices");
  }
}

std::pair<Vec3, Vec3> TriMesh::bounds() const {
  if (vertices.empty()) throw std::invalid_argument("bounds of an empty mesh");
  Vec3 lo = vertices.front(), hi = vertices.front();
  for (const Vec3& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

double TriMesh::surface_area() const {
  double area = 0.0;
  for (const Vec3i& t : triangles) {
    const Vec3& a = vertices[t.x()];
    area += 0.5 * (vertices[t.y()] - a).cross(vertices[t.z()] - a).norm();
  }
  return area;
}

Vec3 TriMesh::centroid() const {
  Vec3 acc = Vec3::Zero();
  double area = 0.0;
  for (const Vec3i& t : triangles) {
    const Vec3& a = vertices[t.x()];
    const Vec3& b = vertices[t.y()];
    const Vec3& c = vertices[t.z()];
    const double w = 0.5 * (b - a).cross(c - a).norm();
    acc += w * (a + b + c) / 3.0;
    area += w;
  }
  if (area <= 0.0) throw std::invalid_argument("centroid of a zero-area mesh");
  return acc / area;
}

double TriMesh::bounding_radius() const {
  const auto [lo, hi] = bounds();
  const Vec3 c = 0.5 * (lo + hi);
  double r2 = 0.0;
  for (const Vec3& v : vertices) r2 = std::max(r2, (v - c).squaredNorm());
  return std::sqrt(r2);
}

TriMesh TriMesh::transformed(const Eigen::Matrix3d& rot, const Vec3& translation) const {
  TriMesh out;
  out.vertices.reserve(vertices.size());
  for (const Vec3& v : vertices) out.vertices.push_back(rot * v + translation);
  out.triangles = triangles;
  return out;
}

Eigen::Matrix3d CameraPose::rotation() const {
  using Eigen::AngleAxisd;
  return (AngleAxisd(yaw, Vec3::UnitZ()) * AngleAxisd(pitch, Vec3::UnitY()) * AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

std::size_t DepthImage::hit_count() const {
  std::size_t n = 0;
  for (double d : depths) n += std::isfinite(d);
  return n;
}

bool is_closed(const TriMesh& m) {
  if (m.triangles.empty()) return false;
  std::map<std::pair<int, int>, int> edge_count;
  for (const Vec3i& t : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  }
  for (const auto& [edge, n] : edge_count) {
    if (n != 2) return false;
  }
  return true;
}

double signed_volume(const TriMesh& m) {
  double vol = 0.0;
  for (const Vec3i& t : m.triangles)
    vol += m.vertices[t.x()].cross(m.vertices[t.y()]).dot(m.vertices[t.z()]);
  return vol / 6.0;
}

TriMesh laplacian_smooth(const TriMesh& m, int iterations) {
  std::vector<std::vector<int>> nbrs(m.vertices.size());
  auto link = [&](int a, int b) {
    auto& v = nbrs[a];
    if (std::find(v.begin(), v.end(), b) == v.end()) v.push_back(b);
  };
  for (const Vec3i& t : m.triangles) {
    link(t.x(), t.y());
    link(t.y(), t.x());
    link(t.y(), t.z());
    link(t.z(), t.y());
    link(t.z(), t.x());
    link(t.x(), t.z());
  }
  TriMesh out = m;
  std::vector<Vec3> next(out.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
      if (nbrs[i].empty()) {
        next[i] = out.vertices[i];
        continue;
      }
      Vec3 acc = Vec3::Zero();
      for (int j : nbrs[i]) acc += out.vertices[j];
      next[i] = acc / static_cast<double>(nbrs[i].size());
    }
    out.vertices.swap(next);
  }
  return out;
}

}  // namespace voxc::geom
