#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <vector>

#include "voxc/postprocess.hpp"
#include "voxc/shapes.hpp"

using namespace voxc;
using postprocess::MergeState;
using postprocess::Source;

namespace {

PointCloud lattice(int nx, int ny, int nz, double spacing) {
  PointCloud out;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) out.push_back(spacing * Vec3(x, y, z));
  return out;
}

// Direct evaluation of the upsampling rule, one output voxel at a time.
// Sub-voxel centers are scaled by 2d so every comparison stays integer.
grid::OccupancyGrid oracle_upsample(const grid::OccupancyGrid& g, int d) {
  if (d == 1) return g;
  const int side = g.dims.x();
  const long D = d;
  grid::OccupancyGrid out = grid::OccupancyGrid::empty(side * d, g.voxel_size / d, g.origin);

  auto nearest_center = [&](long c) {
    int best = 0;
    long best_dist = std::labs(c - D);
    for (int k = 1; k < side; ++k) {
      const long dist = std::labs(c - (2 * k + 1) * D);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    return best;
  };
  // lower corner of the half-open source cell [k+0.5, k+1.5) containing c
  auto lower_corner = [&](long c) {
    int k = 0;
    for (int q = 0; q <= side - 2; ++q)
      if ((2 * q + 1) * D <= c) k = q;
    return k;
  };

  for (int jz = 0; jz < out.dims.z(); ++jz)
    for (int jy = 0; jy < out.dims.y(); ++jy)
      for (int jx = 0; jx < out.dims.x(); ++jx) {
        const long c[3] = {2 * jx + 1, 2 * jy + 1, 2 * jz + 1};
        bool boundary = false;
        for (int a = 0; a < 3; ++a)
          if (c[a] < D || c[a] > 2 * side * D - D) boundary = true;
        if (boundary) {
          out.set(jx, jy, jz, g.at(nearest_center(c[0]), nearest_center(c[1]), nearest_center(c[2])));
          continue;
        }
        const int kx = lower_corner(c[0]), ky = lower_corner(c[1]), kz = lower_corner(c[2]);
        long score = 0;
        for (int a = 0; a <= 1; ++a)
          for (int b = 0; b <= 1; ++b)
            for (int e = 0; e <= 1; ++e) {
              const long dist = std::labs(c[0] - (2 * (kx + a) + 1) * D) +
                                std::labs(c[1] - (2 * (ky + b) + 1) * D) +
                                std::labs(c[2] - (2 * (kz + e) + 1) * D);
              const long w = postprocess::kUpsampleLiteralWeights ? dist : 6 * D - dist;
              score += g.at(kx + a, ky + b, kz + e) ? w : -w;
            }
        out.set(jx, jy, jz, score >= 0);
      }
  return out;
}

MergeState column_state(const std::vector<int>& pattern, int d_ratio) {
  MergeState ms;
  ms.d_ratio = d_ratio;
  ms.hi_grid.dims = Vec3i(1, 1, static_cast<int>(pattern.size()));
  ms.hi_grid.data.assign(pattern.size(), 0);
  ms.hi_grid.voxel_size = 1.0;
  for (std::size_t z = 0; z < pattern.size(); ++z) ms.hi_grid.data[z] = pattern[z] ? 1 : 0;
  ms.source_mask.assign(pattern.size(), Source::None);
  for (std::size_t z = 0; z < pattern.size(); ++z)
    if (pattern[z]) ms.source_mask[z] = Source::FromCNN;
  return ms;
}

std::vector<int> column_of(const MergeState& ms) {
  std::vector<int> out;
  for (std::uint8_t v : ms.hi_grid.data) out.push_back(v ? 1 : 0);
  return out;
}

MergeState state_from_grid(const grid::OccupancyGrid& g, int d_ratio) {
  MergeState ms;
  ms.d_ratio = d_ratio;
  ms.hi_grid = g;
  ms.source_mask.assign(g.data.size(), Source::None);
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (g.data[i]) ms.source_mask[i] = Source::FromCNN;
  return ms;
}

// Dense statement of the smoothing objective: one squared second-difference
// row per voxel per axis, one-sided rows at the line ends.
struct DenseCurvature {
  int n;
  Eigen::MatrixXd A;

  explicit DenseCurvature(int side) : n(side) {
    const int N = n * n * n;
    A = Eigen::MatrixXd::Zero(3 * N, N);
    auto id = [&](int x, int y, int z) { return (z * n + y) * n + x; };
    int row = 0;
    for (int axis = 0; axis < 3; ++axis)
      for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x) {
            const int c[3] = {x, y, z};
            const int i = c[axis];
            int lo, mid, hi;
            if (i == 0) {
              lo = 0, mid = 1, hi = 2;
            } else if (i == n - 1) {
              lo = n - 3, mid = n - 2, hi = n - 1;
            } else {
              lo = i - 1, mid = i, hi = i + 1;
            }
            auto put = [&](int j, double coef) {
              int cc[3] = {x, y, z};
              cc[axis] = j;
              A(row, id(cc[0], cc[1], cc[2])) += coef;
            };
            put(lo, 1.0);
            put(mid, -2.0);
            put(hi, 1.0);
            ++row;
          }
  }

  double energy(const std::vector<double>& f) const {
    Eigen::VectorXd v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<int>(i)] = f[i];
    return (A * v).squaredNorm();
  }

  // Projected gradient with exact line search, run to numerical stall.
  double solve(const std::vector<std::uint8_t>& occ) const {
    const int N = n * n * n;
    Eigen::VectorXd s(N), f(N);
    for (int i = 0; i < N; ++i) s[i] = occ[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    f = s;
    auto project = [&] {
      for (int i = 0; i < N; ++i) f[i] = s[i] > 0 ? std::max(f[i], 0.0) : std::min(f[i], 0.0);
    };
    double e_prev = (A * f).squaredNorm();
    for (int it = 0; it < 60000; ++it) {
      const Eigen::VectorXd af = A * f;
      const Eigen::VectorXd grad = 2.0 * (A.transpose() * af);
      if (grad.squaredNorm() < 1e-28) break;
      const Eigen::VectorXd ag = A * grad;
      const double denom = ag.squaredNorm();
      if (denom <= 0) break;
      f -= (af.dot(ag) / denom) * grad;
      project();
      const double e = (A * f).squaredNorm();
      if (std::abs(e_prev - e) <= 1e-18 * std::max(1.0, e_prev)) {
        e_prev = e;
        break;
      }
      e_prev = e;
    }
    return e_prev;
  }
};

grid::OccupancyGrid random_pattern(int side, std::uint64_t key, double fill) {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(side, 1.0, Vec3::Zero());
  const CounterRng rng(key);
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = rng.uniform(i) < fill ? 1 : 0;
  return g;
}

int euler_characteristic(const geom::TriMesh& m) {
  std::set<std::pair<int, int>> edges;
  for (const Vec3i& t : m.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  return static_cast<int>(m.vertices.size()) - static_cast<int>(edges.size()) +
         static_cast<int>(m.triangles.size());
}

}  // namespace

TEST_CASE("density ratio of a cloud against itself is 1") {
  PointCloud pc;
  const CounterRng rng(77);
  for (int i = 0; i < 200; ++i)
    pc.push_back(Vec3(rng.uniform(3 * i), rng.uniform(3 * i + 1), rng.uniform(3 * i + 2)));
  CHECK(postprocess::density_ratio(pc, pc) == 1);
}

TEST_CASE("density ratio recovers lattice spacing ratios and clamps") {
  const PointCloud mm1 = lattice(8, 8, 4, 0.001);
  const PointCloud mm2 = lattice(8, 8, 4, 0.002);
  const PointCloud mm7 = lattice(8, 8, 4, 0.007);
  CHECK(postprocess::density_ratio(mm1, mm2) == 2);
  CHECK(postprocess::density_ratio(mm1, mm7) == 4);   // 7 clamps to 4
  CHECK(postprocess::density_ratio(mm2, mm1) == 1);   // finer output clamps to 1
  CHECK(postprocess::density_ratio(mm1, mm1) == 1);
}

TEST_CASE("density ratio rejects clouds under 10 points") {
  const PointCloud small = lattice(3, 3, 1, 0.001);  // 9 points
  const PointCloud big = lattice(4, 4, 4, 0.001);
  CHECK_THROWS_AS(postprocess::density_ratio(small, big), std::invalid_argument);
  CHECK_THROWS_AS(postprocess::density_ratio(big, small), std::invalid_argument);
}

TEST_CASE("upsample with ratio 1 returns the input unchanged") {
  const grid::OccupancyGrid g = random_pattern(5, 11, 0.4);
  const grid::OccupancyGrid up = postprocess::upsample(g, 1);
  CHECK(up.dims == g.dims);
  CHECK(up.data == g.data);
  CHECK(up.voxel_size == g.voxel_size);
}

TEST_CASE("upsample keeps a solid block solid") {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(2, 1.0, Vec3::Zero());
  std::fill(g.data.begin(), g.data.end(), 1);
  const grid::OccupancyGrid up = postprocess::upsample(g, 3);
  CHECK(up.dims.x() == 6);
  CHECK(up.occupied_count() == 216);
  CHECK(up.voxel_size == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("upsample matches direct rule evaluation on every 2-cube pattern") {
  for (int pattern = 0; pattern < 256; ++pattern) {
    grid::OccupancyGrid g = grid::OccupancyGrid::empty(2, 1.0, Vec3::Zero());
    for (int b = 0; b < 8; ++b) g.data[static_cast<std::size_t>(b)] = (pattern >> b) & 1;
    for (int d = 1; d <= 3; ++d) {
      const grid::OccupancyGrid got = postprocess::upsample(g, d);
      const grid::OccupancyGrid want = oracle_upsample(g, d);
      REQUIRE(got.dims == want.dims);
      if (got.data != want.data) {
        CAPTURE(pattern);
        CAPTURE(d);
        REQUIRE(got.data == want.data);
      }
    }
  }
}

TEST_CASE("upsample matches direct rule evaluation on a half-space and random grids") {
  grid::OccupancyGrid half = grid::OccupancyGrid::empty(4, 1.0, Vec3::Zero());
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) half.set(x, y, z, true);
  const grid::OccupancyGrid up = postprocess::upsample(half, 2);
  CHECK(up.data == oracle_upsample(half, 2).data);

  for (std::uint64_t key = 1; key <= 3; ++key) {
    const grid::OccupancyGrid g = random_pattern(4, key, 0.5);
    for (int d = 2; d <= 4; ++d) CHECK(postprocess::upsample(g, d).data == oracle_upsample(g, d).data);
  }
}

TEST_CASE("upsample validates its arguments") {
  const grid::OccupancyGrid g = random_pattern(4, 5, 0.5);
  CHECK_THROWS_AS(postprocess::upsample(g, 0), std::invalid_argument);
  CHECK_THROWS_AS(postprocess::upsample(g, -2), std::invalid_argument);
}

TEST_CASE("merge maps a single observed point to exactly its voxel") {
  const grid::OccupancyGrid up = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  const grid::EmbedTransform t{1.0, Vec3::Zero()};
  const PointCloud observed = {Vec3(2.5, 3.5, 4.5)};
  const MergeState ms = postprocess::merge(up, observed, t, 1);
  ms.validate();
  CHECK(ms.hi_grid.occupied_count() == 1);
  CHECK(ms.hi_grid.at(2, 3, 4));
  CHECK(ms.source_mask[ms.hi_grid.index(2, 3, 4)] == Source::FromObserved);
}

TEST_CASE("merge unions disjoint sources and tags provenance") {
  grid::OccupancyGrid up = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  up.set(1, 1, 1, true);
  up.set(2, 1, 1, true);
  const grid::EmbedTransform t{1.0, Vec3::Zero()};
  const PointCloud observed = {Vec3(5.5, 5.5, 5.5), Vec3(6.5, 5.5, 5.5)};
  const MergeState ms = postprocess::merge(up, observed, t, 2);
  ms.validate();
  CHECK(ms.d_ratio == 2);
  CHECK(ms.hi_grid.occupied_count() == 4);
  CHECK(ms.source_mask[ms.hi_grid.index(1, 1, 1)] == Source::FromCNN);
  CHECK(ms.source_mask[ms.hi_grid.index(5, 5, 5)] == Source::FromObserved);
}

TEST_CASE("merge lets observed points win shared voxels") {
  grid::OccupancyGrid up = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  up.set(3, 3, 3, true);
  const grid::EmbedTransform t{1.0, Vec3::Zero()};
  const MergeState ms = postprocess::merge(up, {Vec3(3.5, 3.5, 3.5)}, t, 1);
  CHECK(ms.hi_grid.occupied_count() == 1);
  CHECK(ms.source_mask[ms.hi_grid.index(3, 3, 3)] == Source::FromObserved);
}

TEST_CASE("merge clamps stray observed points and rejects too many") {
  const grid::OccupancyGrid up = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  const grid::EmbedTransform t{1.0, Vec3::Zero()};

  PointCloud observed;
  for (int i = 0; i < 19; ++i) observed.push_back(Vec3(4.5, 4.5, 0.5 + 0.25 * i));
  observed.push_back(Vec3(-3.0, 4.5, 4.5));  // 1 of 20 outside: exactly 5%, allowed
  const MergeState ms = postprocess::merge(up, observed, t, 1);
  CHECK(ms.hi_grid.at(0, 4, 4));  // clamped into the boundary voxel
  CHECK(ms.source_mask[ms.hi_grid.index(0, 4, 4)] == Source::FromObserved);

  PointCloud too_many = observed;
  too_many.push_back(Vec3(11.0, 4.5, 4.5));
  CHECK_THROWS_WITH_AS(postprocess::merge(up, too_many, t, 1),
                       "more than 5% of observed points fall outside the grid",
                       std::invalid_argument);
}

TEST_CASE("fill_gaps bridges a qualifying gap and tags it") {
  const MergeState ms = postprocess::fill_gaps(column_state({1, 0, 0, 1}, 3));
  ms.validate();
  CHECK(column_of(ms) == std::vector<int>{1, 1, 1, 1});
  CHECK(ms.source_mask[1] == Source::Filled);
  CHECK(ms.source_mask[2] == Source::Filled);
  CHECK(ms.source_mask[0] == Source::FromCNN);
}

TEST_CASE("fill_gaps leaves wide gaps and short columns alone") {
  CHECK(column_of(postprocess::fill_gaps(column_state({1, 0, 0, 0, 1}, 3))) ==
        std::vector<int>{1, 0, 0, 0, 1});  // gap of 4 is not under d_ratio + 1
  CHECK(column_of(postprocess::fill_gaps(column_state({0, 1, 0, 0, 0}, 3))) ==
        std::vector<int>{0, 1, 0, 0, 0});  // under two occupied voxels
  CHECK(column_of(postprocess::fill_gaps(column_state({0, 0, 0, 0, 0}, 3))) ==
        std::vector<int>{0, 0, 0, 0, 0});
  CHECK(column_of(postprocess::fill_gaps(column_state({1, 1, 0, 0, 0}, 3))) ==
        std::vector<int>{1, 1, 0, 0, 0});  // adjacent pair has no gap
}

TEST_CASE("fill_gaps only considers the first pair of occupied voxels") {
  // first gap qualifies, second is ignored
  CHECK(column_of(postprocess::fill_gaps(column_state({1, 0, 1, 0, 1}, 2))) ==
        std::vector<int>{1, 1, 1, 0, 1});
  // first gap is too wide, so nothing fills even though the second qualifies
  CHECK(column_of(postprocess::fill_gaps(column_state({1, 0, 0, 0, 1, 0, 1}, 2))) ==
        std::vector<int>{1, 0, 0, 0, 1, 0, 1});
}

TEST_CASE("fill_gaps until fixpoint bridges every qualifying gap") {
  const MergeState a = postprocess::fill_gaps(column_state({1, 0, 1, 0, 1}, 2), true);
  CHECK(column_of(a) == std::vector<int>{1, 1, 1, 1, 1});
  CHECK(a.source_mask[1] == Source::Filled);
  CHECK(a.source_mask[3] == Source::Filled);

  const MergeState b = postprocess::fill_gaps(column_state({1, 0, 0, 0, 1, 0, 1}, 2), true);
  CHECK(column_of(b) == std::vector<int>{1, 0, 0, 0, 1, 1, 1});
}

TEST_CASE("fill_gaps works per column independently") {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(4, 1.0, Vec3::Zero());
  g.set(0, 0, 0, true);
  g.set(0, 0, 2, true);  // gap of 2, bridgeable at d_ratio 2
  g.set(1, 1, 0, true);
  g.set(1, 1, 3, true);  // gap of 3, too wide
  const MergeState ms = postprocess::fill_gaps(state_from_grid(g, 2));
  CHECK(ms.hi_grid.at(0, 0, 1));
  CHECK(!ms.hi_grid.at(1, 1, 1));
  CHECK(!ms.hi_grid.at(1, 1, 2));
  CHECK(ms.hi_grid.occupied_count() == 5);
}

TEST_CASE("qp_smooth on a solid grid keeps a constant-sign field at zero energy") {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(4, 1.0, Vec3::Zero());
  std::fill(g.data.begin(), g.data.end(), 1);
  const grid::WeightedGrid f = postprocess::qp_smooth(state_from_grid(g, 1), 50, 0.005);
  for (double v : f.data) CHECK(v >= 0.0);
  const DenseCurvature dc(4);
  CHECK(dc.energy(f.data) <= 1e-12);
}

TEST_CASE("qp_smooth keeps every voxel on its own side of zero") {
  const grid::OccupancyGrid g = random_pattern(5, 21, 0.5);
  const MergeState ms = state_from_grid(g, 1);
  const grid::WeightedGrid f = postprocess::qp_smooth(ms, 300, 0.004);
  REQUIRE(f.data.size() == g.data.size());
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (g.data[i]) CHECK(f.data[i] >= 0.0);
    else CHECK(f.data[i] <= 0.0);
  }
}

TEST_CASE("qp_smooth energy is non-increasing over a slab relaxation") {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) g.set(x, y, 4, true);
  const MergeState ms = state_from_grid(g, 1);

  const DenseCurvature dc(8);
  double prev = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 12; ++iters) {
    const grid::WeightedGrid f = postprocess::qp_smooth(ms, iters, 0.004);
    const double e = dc.energy(f.data);
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
  // the field keeps the slab's own voxels non-negative
  const grid::WeightedGrid f = postprocess::qp_smooth(ms, 100, 0.004);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(f.data[f.index(x, y, 4)] >= 0.0);
}

TEST_CASE("qp_smooth reaches the dense reference objective on small grids") {
  for (int side = 4; side <= 6; ++side) {
    const grid::OccupancyGrid g = random_pattern(side, 100 + static_cast<std::uint64_t>(side), 0.5);
    const MergeState ms = state_from_grid(g, 1);
    const grid::WeightedGrid f = postprocess::qp_smooth(ms, 30000, 0.004);
    const DenseCurvature dc(side);
    const double e_pg = dc.energy(f.data);
    const double e_ref = dc.solve(g.data);
    CAPTURE(side);
    CHECK(std::abs(e_pg - e_ref) <= 1e-6);
  }
}

TEST_CASE("qp_smooth reports a diverging step size") {
  const grid::OccupancyGrid g = random_pattern(6, 9, 0.5);
  CHECK_THROWS_WITH_AS(postprocess::qp_smooth(state_from_grid(g, 1), 50, 1e9), "step too large",
                       numerical_error);
}

TEST_CASE("qp_smooth validates its arguments") {
  const grid::OccupancyGrid g = random_pattern(4, 3, 0.5);
  const MergeState ms = state_from_grid(g, 1);
  CHECK_THROWS_AS(postprocess::qp_smooth(ms, 0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(postprocess::qp_smooth(ms, 10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(postprocess::qp_smooth(ms, 10, -1.0), std::invalid_argument);

  MergeState bad = ms;
  bad.source_mask[0] = bad.hi_grid.data[0] ? Source::None : Source::FromCNN;
  CHECK_THROWS_AS(postprocess::qp_smooth(bad, 10, 0.01), std::invalid_argument);

  const grid::OccupancyGrid tiny = grid::OccupancyGrid::empty(2, 1.0, Vec3::Zero());
  CHECK_THROWS_AS(postprocess::qp_smooth(state_from_grid(tiny, 1), 10, 0.01), std::invalid_argument);
}

// Frame mapping a radius-r object at the world origin to the grid center
// with a comfortable border, so the voxelization band stays off the walls.
grid::EmbedTransform centered_frame(int side, double r) {
  grid::EmbedTransform t;
  t.scale = 0.33 * side / r;
  t.offset = Vec3::Constant(0.5 * side);
  return t;
}

TEST_CASE("fast reconstruction of a voxelized sphere is a closed genus-0 surface") {
  const geom::TriMesh sphere = geom::make_icosphere(0.05, 2);
  const grid::EmbedTransform t = centered_frame(24, 0.05);
  const grid::OccupancyGrid solid = geom::solid_voxelize_into(sphere, 24, t);

  const geom::TriMesh mesh = postprocess::reconstruct(solid, {}, t, true);
  mesh.validate();
  REQUIRE(!mesh.empty());
  CHECK(geom::is_closed(mesh));
  CHECK(euler_characteristic(mesh) == 2);
  // back in world units: the surface sits near the original radius
  const Vec3 c = mesh.centroid();
  double mean_r = 0.0;
  for (const Vec3& v : mesh.vertices) mean_r += (v - c).norm();
  mean_r /= static_cast<double>(mesh.vertices.size());
  CHECK(mean_r == doctest::Approx(0.05).epsilon(0.3));
}

TEST_CASE("fast reconstruction of a single voxel is closed") {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  g.set(4, 4, 4, true);
  const geom::TriMesh mesh = postprocess::reconstruct(g, {}, grid::EmbedTransform{}, true);
  REQUIRE(!mesh.empty());
  CHECK(geom::is_closed(mesh));
  CHECK(euler_characteristic(mesh) == 2);
  CHECK(geom::signed_volume(mesh) > 0.0);
}

TEST_CASE("detailed reconstruction completes at matching densities") {
  const geom::TriMesh sphere = geom::make_icosphere(0.05, 3);
  // observed spacing tuned to the completion's voxel pitch so the density
  // ratio comes out 1
  const PointCloud observed = geom::sample_surface(sphere, 250, 9);
  const grid::EmbedTransform t = centered_frame(24, 0.05);
  const grid::OccupancyGrid solid = geom::solid_voxelize_into(sphere, 24, t);
  const PointCloud cnn_cloud = grid::grid_to_pointcloud(solid, t);
  REQUIRE(postprocess::density_ratio(observed, cnn_cloud) == 1);

  const geom::TriMesh mesh = postprocess::reconstruct(solid, observed, t, false);
  mesh.validate();
  REQUIRE(!mesh.empty());
  CHECK(geom::is_closed(mesh));
  const Vec3 c = mesh.centroid();
  CHECK((c - sphere.centroid()).norm() < 0.02);
  double mean_r = 0.0;
  for (const Vec3& v : mesh.vertices) mean_r += (v - c).norm();
  mean_r /= static_cast<double>(mesh.vertices.size());
  CHECK(mean_r == doctest::Approx(0.05).epsilon(0.35));
}

TEST_CASE("detailed reconstruction upsamples denser observations") {
  const geom::TriMesh sphere = geom::make_icosphere(0.05, 3);
  const PointCloud observed = geom::sample_surface(sphere, 6000, 17);
  const grid::EmbedTransform t = centered_frame(16, 0.05);
  const grid::OccupancyGrid solid = geom::solid_voxelize_into(sphere, 16, t);
  const PointCloud cnn_cloud = grid::grid_to_pointcloud(solid, t);
  REQUIRE(postprocess::density_ratio(observed, cnn_cloud) >= 2);

  const geom::TriMesh mesh = postprocess::reconstruct(solid, observed, t, false);
  mesh.validate();
  REQUIRE(!mesh.empty());
  const Vec3 c = mesh.centroid();
  CHECK((c - sphere.centroid()).norm() < 0.02);
}

TEST_CASE("detailed reconstruction requires observed points") {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  g.set(4, 4, 4, true);
  CHECK_THROWS_WITH_AS(postprocess::reconstruct(g, {}, grid::EmbedTransform{}, false),
                       "detailed reconstruction requires observed points", std::invalid_argument);
}
