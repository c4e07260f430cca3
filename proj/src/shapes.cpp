#include <cmath>
#include <map>
#include <utility>

#include "voxc/shapes.hpp"

namespace voxc::geom {

namespace {

constexpr double kPi = 3.14159265358979323846;

void add_quad(TriMesh& m, int a, int b, int c, int d) {
  m.triangles.emplace_back(a, b, c);
  m.triangles.emplace_back(a, c, d);
}

// Shift so the bounding-box center sits at the origin.
TriMesh centered(TriMesh m) {
  const auto [lo, hi] = m.bounds();
  const Vec3 c = 0.5 * (lo + hi);
  for (Vec3& v : m.vertices) v -= c;
  return m;
}

}  // namespace

TriMesh make_box(const Vec3& size) {
  if (size.minCoeff() <= 0.0) throw std::invalid_argument("box dimensions must be positive");
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(), i & 4 ? h.z() : -h.z());
  add_quad(m, 0, 2, 3, 1);  // -z
  add_quad(m, 4, 5, 7, 6);  // +z
  add_quad(m, 0, 1, 5, 4);  // -y
  add_quad(m, 2, 6, 7, 3);  // +y
  add_quad(m, 0, 4, 6, 2);  // -x
  add_quad(m, 1, 3, 7, 5);  // +x
  return m;
}

TriMesh make_icosphere(double radius, int subdivisions) {
  return make_ellipsoid(Vec3::Constant(radius), subdivisions);
}

TriMesh make_ellipsoid(const Vec3& radii, int subdivisions) {
  if (radii.minCoeff() <= 0.0) throw std::invalid_argument("ellipsoid radii must be positive");
  if (subdivisions < 0 || subdivisions > 6) throw std::invalid_argument("subdivisions out of range");

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
                 {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (Vec3& v : m.vertices) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it == midpoint.end()) {
        Vec3 p = (m.vertices[a] + m.vertices[b]).normalized();
        it = midpoint.emplace(key, static_cast<int>(m.vertices.size())).first;
        m.vertices.push_back(p);
      }
      return it->second;
    };
    std::vector<Vec3i> next;
    next.reserve(m.triangles.size() * 4);
    for (const Vec3i& tri : m.triangles) {
      const int ab = mid(tri.x(), tri.y());
      const int bc = mid(tri.y(), tri.z());
      const int ca = mid(tri.z(), tri.x());
      next.emplace_back(tri.x(), ab, ca);
      next.emplace_back(tri.y(), bc, ab);
      next.emplace_back(tri.z(), ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    m.triangles = std::move(next);
  }
  for (Vec3& v : m.vertices) v = v.cwiseProduct(radii);
  return m;
}

TriMesh make_cylinder(double radius, double height, int segments) {
  if (radius <= 0.0 || height <= 0.0) throw std::invalid_argument("cylinder dimensions must be positive");
  if (segments < 3) throw std::invalid_argument("cylinder needs at least 3 segments");
  TriMesh m;
  const int cb = 2 * segments;      // bottom center
  const int ct = 2 * segments + 1;  // top center
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * kPi * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -0.5 * height);
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.5 * height);
  }
  m.vertices.emplace_back(0, 0, -0.5 * height);
  m.vertices.emplace_back(0, 0, 0.5 * height);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    add_quad(m, 2 * i, 2 * j, 2 * j + 1, 2 * i + 1);       // side, outward
    m.triangles.emplace_back(cb, 2 * j, 2 * i);            // bottom, -z
    m.triangles.emplace_back(ct, 2 * i + 1, 2 * j + 1);    // top, +z
  }
  return m;
}

TriMesh make_cone(double base_radius, double height, int segments) {
  if (base_radius <= 0.0 || height <= 0.0) throw std::invalid_argument("cone dimensions must be positive");
  if (segments < 3) throw std::invalid_argument("cone needs at least 3 segments");
  TriMesh m;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * kPi * i / segments;
    m.vertices.emplace_back(base_radius * std::cos(a), base_radius * std::sin(a), -0.5 * height);
  }
  const int apex = segments;
  const int cb = segments + 1;
  m.vertices.emplace_back(0, 0, 0.5 * height);
  m.vertices.emplace_back(0, 0, -0.5 * height);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.triangles.emplace_back(i, j, apex);  // slanted side, outward
    m.triangles.emplace_back(cb, j, i);    // base, -z
  }
  return m;
}

TriMesh make_l_prism(double ax, double ay, double notch_x, double notch_y, double height) {
  if (ax <= 0.0 || ay <= 0.0 || height <= 0.0) throw std::invalid_argument("prism dimensions must be positive");
  if (notch_x <= 0.0 || notch_x >= ax || notch_y <= 0.0 || notch_y >= ay)
    throw std::invalid_argument("notch must cut a proper corner");

  // counter-clockwise hexagonal cross section; star-shaped from P0 so the
  // face fan from P0 is valid
  const double poly[6][2] = {{0, 0}, {ax, 0}, {ax, notch_y}, {notch_x, notch_y}, {notch_x, ay}, {0, ay}};
  TriMesh m;
  for (int level = 0; level < 2; ++level) {
    const double z = level ? 0.5 * height : -0.5 * height;
    for (const auto& p : poly) m.vertices.emplace_back(p[0], p[1], z);
  }
  for (int i = 1; i < 5; ++i) {
    m.triangles.emplace_back(0, i + 1, i);          // bottom, -z
    m.triangles.emplace_back(6, 6 + i, 6 + i + 1);  // top, +z
  }
  for (int i = 0; i < 6; ++i) {
    const int j = (i + 1) % 6;
    add_quad(m, i, j, 6 + j, 6 + i);  // sides, outward for a CCW section
  }
  return centered(std::move(m));
}

TriMesh make_torus(double major_radius, double minor_radius, int major_segments, int minor_segments) {
  if (minor_radius <= 0.0 || major_radius <= minor_radius)
    throw std::invalid_argument("torus needs major radius > minor radius > 0");
  if (major_segments < 3 || minor_segments < 3) throw std::invalid_argument("torus needs 3 segments per ring");
  TriMesh m;
  for (int i = 0; i < major_segments; ++i) {
    const double u = 2.0 * kPi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double v = 2.0 * kPi * j / minor_segments;
      const double ring = major_radius + minor_radius * std::cos(v);
      m.vertices.emplace_back(ring * std::cos(u), ring * std::sin(u), minor_radius * std::sin(v));
    }
  }
  const auto idx = [&](int i, int j) { return (i % major_segments) * minor_segments + (j % minor_segments); };
  for (int i = 0; i < major_segments; ++i)
    for (int j = 0; j < minor_segments; ++j)
      add_quad(m, idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
  return m;
}

const std::vector<std::string>& shape_family_names() {
  static const std::vector<std::string> names = {"box",      "slab",   "sphere", "ellipsoid",
                                                 "cylinder", "cone",   "lprism", "torus"};
  return names;
}

TriMesh make_shape(const std::string& family, SeqRng& rng) {
  if (family == "box")
    return make_box(Vec3(rng.uniform(0.04, 0.12), rng.uniform(0.04, 0.12), rng.uniform(0.04, 0.12)));
  if (family == "slab")
    return make_box(Vec3(rng.uniform(0.06, 0.14), rng.uniform(0.06, 0.14), rng.uniform(0.008, 0.02)));
  if (family == "sphere") return make_icosphere(rng.uniform(0.025, 0.06), 2);
  if (family == "ellipsoid")
    return make_ellipsoid(Vec3(rng.uniform(0.02, 0.07), rng.uniform(0.02, 0.07), rng.uniform(0.02, 0.07)), 2);
  if (family == "cylinder") return make_cylinder(rng.uniform(0.02, 0.05), rng.uniform(0.06, 0.14), 24);
  if (family == "cone") return make_cone(rng.uniform(0.025, 0.06), rng.uniform(0.06, 0.14), 24);
  if (family == "lprism") {
    const double ax = rng.uniform(0.06, 0.12);
    const double ay = rng.uniform(0.06, 0.12);
    return make_l_prism(ax, ay, ax * rng.uniform(0.35, 0.65), ay * rng.uniform(0.35, 0.65),
                        rng.uniform(0.04, 0.10));
  }
  if (family == "torus") {
    const double major = rng.uniform(0.03, 0.05);
    return make_torus(major, major * rng.uniform(0.3, 0.5), 24, 12);
  }
  throw std::invalid_argument("unknown shape family: " + family);
}

}  // namespace voxc::geom
