#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxc/geom.hpp"

namespace voxc::geom {

bool ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                  double& t, double& u, double& v) {
  constexpr double kDetEps = 1e-9;
  constexpr double kEdgeSlack = 1e-12;  // boundary hits count as hits
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kDetEps) return false;
  const double inv = 1.0 / det;
  const Vec3 svec = orig - a;
  u = svec.dot(pvec) * inv;
  if (u < -kEdgeSlack || u > 1.0 + kEdgeSlack) return false;
  const Vec3 qvec = svec.cross(e1);
  v = dir.dot(qvec) * inv;
  if (v < -kEdgeSlack || u + v > 1.0 + kEdgeSlack) return false;
  t = e2.dot(qvec) * inv;
  return t > 1e-12;
}

namespace {

Vec3 closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + s * ab;
}

// Closest point on a triangle (Voronoi-region walk); degenerate triangles
// fall back to the nearest point on their edges.
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = va + vb + vc;
  if (denom <= 0.0) {
    Vec3 best = closest_on_segment(p, a, b);
    for (const Vec3& q : {closest_on_segment(p, b, c), closest_on_segment(p, c, a)}) {
      if ((p - q).squaredNorm() < (p - best).squaredNorm()) best = q;
    }
    return best;
  }
  return a + ab * (vb / denom) + ac * (vc / denom);
}

bool ray_box(const Vec3& orig, const Vec3& inv_dir, const Vec3& lo, const Vec3& hi, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double ta = (lo[a] - orig[a]) * inv_dir[a];
    double tb = (hi[a] - orig[a]) * inv_dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

MeshBvh::MeshBvh(const TriMesh& m) : mesh_(m) {
  m.validate();
  if (m.triangles.empty()) throw std::invalid_argument("BVH over an empty mesh");
  order_.resize(m.triangles.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids(m.triangles.size());
  for (std::size_t i = 0; i < m.triangles.size(); ++i) {
    const Vec3i& t = m.triangles[i];
    centroids[i] = (m.vertices[t.x()] + m.vertices[t.y()] + m.vertices[t.z()]) / 3.0;
  }
  nodes_.reserve(2 * m.triangles.size());
  build(0, static_cast<int>(order_.size()), centroids);
}

int MeshBvh::build(int begin, int end, std::vector<Vec3>& centroids) {
  const int node_index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int i = begin; i < end; ++i) {
    const Vec3i& t = mesh_.triangles[order_[i]];
    for (int k = 0; k < 3; ++k) {
      lo = lo.cwiseMin(mesh_.vertices[t[k]]);
      hi = hi.cwiseMax(mesh_.vertices[t[k]]);
    }
  }
  nodes_[node_index].lo = lo;
  nodes_[node_index].hi = hi;
  if (end - begin <= 4) {
    nodes_[node_index].start = begin;
    nodes_[node_index].count = end - begin;
    return node_index;
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int ia, int ib) { return centroids[ia][axis] < centroids[ib][axis]; });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  return node_index;
}

double MeshBvh::box_distance_sq(const Node& n, const Vec3& p) const {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max({n.lo[a] - p[a], 0.0, p[a] - n.hi[a]});
    d2 += d * d;
  }
  return d2;
}

bool MeshBvh::raycast(const Vec3& orig, const Vec3& dir, double& t, int& tri_index) const {
  const Vec3 inv_dir = dir.cwiseInverse();  // infinities on zero components are fine for the slab test
  double best = std::numeric_limits<double>::infinity();
  int best_tri = -1;
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top) {
    const Node& n = nodes_[stack[--top]];
    if (!ray_box(orig, inv_dir, n.lo, n.hi, best)) continue;
    if (n.count > 0) {
      for (int i = n.start; i < n.start + n.count; ++i) {
        const Vec3i& tr = mesh_.triangles[order_[i]];
        double th, uh, vh;
        if (ray_triangle(orig, dir, mesh_.vertices[tr.x()], mesh_.vertices[tr.y()], mesh_.vertices[tr.z()],
                         th, uh, vh) &&
            th < best) {
          best = th;
          best_tri = order_[i];
        }
      }
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  if (best_tri < 0) return false;
  t = best;
  tri_index = best_tri;
  return true;
}

double MeshBvh::nearest_distance(const Vec3& p, double cap) const {
  const double cap_sq = cap < std::numeric_limits<double>::infinity() ? cap * cap : cap;
  double best_sq = std::numeric_limits<double>::infinity();
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top) {
    const Node& n = nodes_[stack[--top]];
    if (box_distance_sq(n, p) > std::min(best_sq, cap_sq)) continue;
    if (n.count > 0) {
      for (int i = n.start; i < n.start + n.count; ++i) {
        const Vec3i& tr = mesh_.triangles[order_[i]];
        const Vec3 q =
            closest_on_triangle(p, mesh_.vertices[tr.x()], mesh_.vertices[tr.y()], mesh_.vertices[tr.z()]);
        best_sq = std::min(best_sq, (p - q).squaredNorm());
      }
    } else {
      // visit the nearer child first so the bound tightens sooner
      const double dl = box_distance_sq(nodes_[n.left], p);
      const double dr = box_distance_sq(nodes_[n.right], p);
      stack[top++] = dl <= dr ? n.right : n.left;
      stack[top++] = dl <= dr ? n.left : n.right;
    }
  }
  return std::sqrt(best_sq);
}

DepthImage render_depth(const TriMesh& m, const CameraPose& pose, int w, int h, double fov_y) {
  if (m.empty()) throw std::invalid_argument("render of an empty mesh");
  if (w < 16 || h < 16) throw std::invalid_argument("image must be at least 16x16");
  if (!(fov_y > 0.0) || !(fov_y < 3.141592653589793)) throw std::invalid_argument("fov out of range");

  DepthImage img;
  img.width = w;
  img.height = h;
  img.fov_y = fov_y;
  img.depths.assign(static_cast<std::size_t>(w) * h, DepthImage::kNoHit);

  const MeshBvh bvh(m);
  const Eigen::Matrix3d rot = pose.rotation();
  const double px = 2.0 * std::tan(0.5 * fov_y) / h;  // square pixels

  parallel_for(h, [&](std::int64_t y0, std::int64_t y1) {
    for (std::int64_t y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const double u = (x + 0.5 - 0.5 * w) * px;
        const double v = (y + 0.5 - 0.5 * h) * px;
        // camera-frame direction has unit z, so the ray parameter is z-depth
        const Vec3 dir = rot * Vec3(u, v, 1.0);
        double t;
        int tri;
        if (bvh.raycast(pose.position, dir, t, tri)) img.depths[y * w + x] = t;
      }
    }
  });
  return img;
}

PartialView depth_to_partial_grid(const DepthImage& d, const CameraPose& pose, int side) {
  PointCloud cloud;
  const double px = 2.0 * std::tan(0.5 * d.fov_y) / d.height;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const double z = d.at(x, y);
      if (!std::isfinite(z)) continue;
      const double u = (x + 0.5 - 0.5 * d.width) * px;
      const double v = (y + 0.5 - 0.5 * d.height) * px;
      cloud.emplace_back(z * u, z * v, z);
    }
  }
  if (cloud.empty()) throw std::invalid_argument("object not visible");

  PartialView view;
  auto [g, t] = grid::embed_pointcloud(cloud, side);
  view.grid = std::move(g);
  view.transform = t;
  view.cloud = std::move(cloud);
  view.pose = pose;
  return view;
}

}  // namespace voxc::geom
