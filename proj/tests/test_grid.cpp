#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "voxc/grid.hpp"

using namespace voxc;
using grid::EmbedTransform;
using grid::OccupancyGrid;
using grid::WeightedGrid;

TEST_CASE("embedding a single point occupies the canonical center voxel") {
  for (const Vec3& p : {Vec3(0, 0, 0), Vec3(0.1, -0.2, 0.7), Vec3(123.0, -55.5, 0.025)}) {
    auto [g, t] = grid::embed_pointcloud({p}, 40);
    CHECK(g.occupied_count() == 1);
    CHECK(g.at(20, 20, 18));
    CHECK(t.scale == 1.0);  // degenerate bounding box keeps world scale
  }
}

TEST_CASE("embedding cube corners spans the 0.8-fraction fitting cube") {
  const Vec3 lo(0.01, 0.02, 0.03);
  const double side = 0.07;
  PointCloud pc;
  for (int i = 0; i < 8; ++i)
    pc.emplace_back(lo.x() + (i & 1 ? side : 0), lo.y() + (i & 2 ? side : 0), lo.z() + (i & 4 ? side : 0));

  auto [g, t] = grid::embed_pointcloud(pc, 40);
  CHECK(g.occupied_count() == 8);
  Vec3i min_idx(40, 40, 40), max_idx(-1, -1, -1);
  for (int z = 0; z < 40; ++z)
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (g.at(x, y, z)) {
          min_idx = min_idx.cwiseMin(Vec3i(x, y, z));
          max_idx = max_idx.cwiseMax(Vec3i(x, y, z));
        }
  CHECK((max_idx - min_idx) == Vec3i(32, 32, 32));
  // bounding-box center lands on the canonical center coordinate
  const Vec3 center_g = t.to_grid(lo + Vec3::Constant(side / 2));
  CHECK(center_g.x() == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(center_g.y() == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(center_g.z() == doctest::Approx(18.0).epsilon(1e-12));
}

TEST_CASE("embed rejects bad input") {
  CHECK_THROWS_AS(grid::embed_pointcloud({}, 40), std::invalid_argument);
  CHECK_THROWS_AS(grid::embed_pointcloud({Vec3(0, 0, std::nan(""))}, 40), std::invalid_argument);
  CHECK_THROWS_AS(grid::embed_pointcloud({Vec3(0, 0, 0)}, 4), std::invalid_argument);
}

TEST_CASE("embed output is bit-exact under uniform input scaling") {
  SeqRng rng(7);
  PointCloud pc;
  for (int i = 0; i < 500; ++i) pc.emplace_back(rng.uniform(-0.1, 0.2), rng.uniform(0.0, 0.3), rng.uniform(-0.5, -0.1));
  PointCloud doubled;
  for (const Vec3& p : pc) doubled.push_back(2.0 * p);

  auto [g1, t1] = grid::embed_pointcloud(pc, 40);
  auto [g2, t2] = grid::embed_pointcloud(doubled, 40);
  CHECK(g1.data == g2.data);
}

TEST_CASE("embed transform inverts to the original points") {
  SeqRng rng(11);
  PointCloud pc;
  for (int i = 0; i < 100; ++i) pc.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  auto [g, t] = grid::embed_pointcloud(pc, 24);
  for (const Vec3& p : pc) {
    const Vec3 back = t.to_world(t.to_grid(p));
    CHECK((back - p).norm() <= 1e-9 * (1.0 + p.norm()));
  }
}

TEST_CASE("occupied voxel centers stay within half a voxel diagonal of the cloud") {
  SeqRng rng(13);
  PointCloud pc;
  for (int i = 0; i < 400; ++i)
    pc.emplace_back(rng.uniform(-0.04, 0.04), rng.uniform(-0.03, 0.05), rng.uniform(0.2, 0.33));
  auto [g, t] = grid::embed_pointcloud(pc, 24);
  const double bound = 0.5 * std::sqrt(3.0) * g.voxel_size;
  for (const Vec3& c : grid::grid_to_pointcloud(g, t)) {
    double best = 1e300;
    for (const Vec3& p : pc) best = std::min(best, (c - p).norm());
    CHECK(best <= bound * (1 + 1e-12));
  }
}

TEST_CASE("downsample floor mapping hits the documented cells") {
  OccupancyGrid g = OccupancyGrid::empty(256);
  CHECK(grid::downsample(g, 40).occupied_count() == 0);

  g.set(255, 255, 255, true);
  OccupancyGrid d = grid::downsample(g, 40);
  CHECK(d.occupied_count() == 1);
  CHECK(d.at(39, 39, 39));  // floor(255 * 40 / 256) = 39

  OccupancyGrid g8 = OccupancyGrid::empty(8);
  g8.set(0, 0, 0, true);
  OccupancyGrid d4 = grid::downsample(g8, 4);
  CHECK(d4.occupied_count() == 1);
  CHECK(d4.at(0, 0, 0));
}

TEST_CASE("downsample is monotone under added occupancy") {
  SeqRng rng(5);
  OccupancyGrid a = OccupancyGrid::empty(17);
  for (int i = 0; i < 300; ++i)
    a.set(static_cast<int>(rng.index(17)), static_cast<int>(rng.index(17)), static_cast<int>(rng.index(17)), true);
  OccupancyGrid b = a;
  for (int i = 0; i < 100; ++i)
    b.set(static_cast<int>(rng.index(17)), static_cast<int>(rng.index(17)), static_cast<int>(rng.index(17)), true);

  OccupancyGrid da = grid::downsample(a, 5);
  OccupancyGrid db = grid::downsample(b, 5);
  for (std::size_t i = 0; i < da.data.size(); ++i) {
    if (da.data[i]) CHECK(db.data[i]);
  }
  CHECK_THROWS_AS(grid::downsample(a, 0), std::invalid_argument);
  CHECK_THROWS_AS(grid::downsample(a, 18), std::invalid_argument);
}

TEST_CASE("grid_to_pointcloud emits voxel centers") {
  OccupancyGrid g = OccupancyGrid::empty(8);
  EmbedTransform identity;
  CHECK(grid::grid_to_pointcloud(g, identity).empty());

  g.set(3, 1, 6, true);
  const PointCloud pc = grid::grid_to_pointcloud(g, identity);
  REQUIRE(pc.size() == 1);
  CHECK(pc[0] == Vec3(3.5, 1.5, 6.5));
}

TEST_CASE("occupy_from_points clamps and counts out-of-range points") {
  OccupancyGrid g = OccupancyGrid::empty(10);
  EmbedTransform identity;
  const PointCloud pc = {Vec3(2.5, 2.5, 2.5), Vec3(-3.0, 5.0, 5.0), Vec3(5.0, 5.0, 11.2)};
  CHECK(grid::occupy_from_points(g, pc, identity) == 2);
  CHECK(g.at(2, 2, 2));
  CHECK(g.at(0, 5, 5));
  CHECK(g.at(5, 5, 9));
}

TEST_CASE("weighted grid mirrors occupancy layout") {
  OccupancyGrid g = OccupancyGrid::empty(4);
  g.set(1, 2, 3, true);
  const WeightedGrid w = WeightedGrid::from_occupancy(g, 1.0, -1.0);
  CHECK(w.at(1, 2, 3) == 1.0);
  CHECK(w.at(0, 0, 0) == -1.0);
  CHECK(w.total() == g.total());
}
