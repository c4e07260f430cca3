#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxc/io.hpp"
#include "voxc/shapes.hpp"

using namespace voxc;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

PointCloud sample_cloud() {
  PointCloud pc;
  SeqRng rng(11);
  for (int i = 0; i < 57; ++i)
    pc.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return pc;
}

datagen::Dataset tiny_dataset() {
  std::vector<datagen::NamedMesh> meshes;
  meshes.push_back({"box", geom::make_box(Vec3(0.06, 0.04, 0.05))});
  meshes.push_back({"ball", geom::make_icosphere(0.03, 2)});
  datagen::SplitConfig cfg;
  cfg.n_roll = 2;
  cfg.n_pitch = 1;
  cfg.n_yaw = 2;
  cfg.holdout_model_frac = 0.5;
  cfg.holdout_view_frac = 0.25;
  return datagen::build_dataset(meshes, cfg, 12, 7);
}

}  // namespace

TEST_CASE("ascii clouds round-trip doubles exactly") {
  const PointCloud pc = sample_cloud();
  io::save_pointcloud_ascii(pc, "io_cloud.xyz");
  const PointCloud back = io::load_pointcloud("io_cloud.xyz");
  REQUIRE(back.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK(back[i] == pc[i]);
}

TEST_CASE("binary clouds round-trip byte for byte") {
  io::save_pointcloud_binary(sample_cloud(), "io_cloud.vxpc");
  const std::string first = slurp("io_cloud.vxpc");
  CHECK(first.substr(0, 4) == "VXPC");

  const PointCloud loaded = io::load_pointcloud("io_cloud.vxpc");
  io::save_pointcloud_binary(loaded, "io_cloud2.vxpc");
  CHECK(slurp("io_cloud2.vxpc") == first);
}

TEST_CASE("cloud loader reports malformed input with line numbers") {
  spit("io_bad.xyz", "0 0 0\n1 2\n");
  CHECK_THROWS_WITH_AS(io::load_pointcloud("io_bad.xyz"),
                       "io_bad.xyz: line 2: expected three numbers, got \"1 2\"", io_error);

  spit("io_bad.xyz", "0 0 0 0\n");
  CHECK_THROWS_WITH_AS(io::load_pointcloud("io_bad.xyz"),
                       "io_bad.xyz: line 1: trailing token \"0\"", io_error);

  // istream number extraction refuses nan/inf outright
  spit("io_bad.xyz", "1 2 nan\n");
  CHECK_THROWS_WITH_AS(io::load_pointcloud("io_bad.xyz"),
                       "io_bad.xyz: line 1: expected three numbers, got \"1 2 nan\"", io_error);

  spit("io_bad.vxpc", std::string("VXPC") + std::string(4, '\x07'));
  CHECK_THROWS_AS(io::load_pointcloud("io_bad.vxpc"), io_error);

  CHECK_THROWS_AS(io::load_pointcloud("io_absent.xyz"), io_error);

  // blank lines are allowed, ascii text without the magic parses as xyz
  spit("io_ok.xyz", "\n0.5 0 0\n\n1 1 1\n");
  CHECK(io::load_pointcloud("io_ok.xyz").size() == 2);
}

TEST_CASE("off meshes round-trip and tolerate comments and polygons") {
  const geom::TriMesh m = geom::make_l_prism(0.06, 0.05, 0.03, 0.02, 0.04);
  io::save_mesh_off(m, "io_mesh.off");
  const geom::TriMesh back = io::load_mesh("io_mesh.off");
  REQUIRE(back.vertices.size() == m.vertices.size());
  REQUIRE(back.triangles.size() == m.triangles.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK(back.vertices[i] == m.vertices[i]);
  for (std::size_t i = 0; i < m.triangles.size(); ++i) CHECK(back.triangles[i] == m.triangles[i]);

  spit("io_quad.off",
       "OFF # comment after header\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n# full line comment\n0 1 0\n4 0 "
       "1 2 3\n");
  const geom::TriMesh quad = io::load_mesh("io_quad.off");
  REQUIRE(quad.vertices.size() == 4);
  REQUIRE(quad.triangles.size() == 2);
  CHECK(quad.triangles[0] == Vec3i(0, 1, 2));
  CHECK(quad.triangles[1] == Vec3i(0, 2, 3));
}

TEST_CASE("off loader rejects structural defects") {
  spit("io_bad.off", "FFO\n1 0 0\n0 0 0\n");
  CHECK_THROWS_WITH_AS(io::load_mesh("io_bad.off"), "io_bad.off: missing OFF header", io_error);

  spit("io_bad.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
  CHECK_THROWS_WITH_AS(io::load_mesh("io_bad.off"),
                       "io_bad.off: face 0 has an out-of-range vertex", io_error);

  spit("io_bad.off", "OFF\n2 1 0\n0 0 0\n");
  CHECK_THROWS_WITH_AS(io::load_mesh("io_bad.off"), "io_bad.off: vertex 1 unreadable", io_error);

  CHECK_THROWS_AS(io::load_mesh("io_mesh.obj"), io_error);
}

TEST_CASE("stl meshes restore shared edges through the corner merge") {
  const geom::TriMesh m = geom::make_ellipsoid(Vec3(0.05, 0.04, 0.03), 2);
  io::save_mesh_stl(m, "io_mesh.stl");
  const std::string bytes = slurp("io_mesh.stl");
  CHECK(bytes.size() == 84 + 50 * m.triangles.size());

  const geom::TriMesh back = io::load_mesh("io_mesh.stl");
  CHECK(back.triangles.size() == m.triangles.size());
  CHECK(back.vertices.size() == m.vertices.size());
  CHECK(geom::is_closed(back));

  // the merge renumbers vertices by first appearance, so compare as sets
  for (const Vec3& v : m.vertices) {
    double nearest = 1e9;
    for (const Vec3& w : back.vertices) nearest = std::min(nearest, (v - w).norm());
    CHECK(nearest < 1e-6);
  }
  CHECK(back.surface_area() == doctest::Approx(m.surface_area()).epsilon(1e-6));
}

TEST_CASE("stl loader rejects ascii and truncated files") {
  spit("io_bad.stl", "solid thing\nfacet normal 0 0 1\nendsolid" + std::string(60, ' '));
  CHECK_THROWS_WITH_AS(io::load_mesh("io_bad.stl"),
                       "io_bad.stl: ASCII STL is not supported, re-export as binary", io_error);

  spit("io_bad.stl", std::string(40, '\0'));
  CHECK_THROWS_WITH_AS(io::load_mesh("io_bad.stl"), "io_bad.stl: too short for binary STL",
                       io_error);

  const std::string good = slurp("io_mesh.stl");
  spit("io_bad.stl", good.substr(0, good.size() - 10));
  CHECK_THROWS_AS(io::load_mesh("io_bad.stl"), io_error);
}

TEST_CASE("datasets round-trip every pair field") {
  const datagen::Dataset ds = tiny_dataset();
  REQUIRE(ds.pairs.size() > 0);
  io::save_dataset(ds, "io_data.vxds");
  const datagen::Dataset back = io::load_dataset("io_data.vxds");

  REQUIRE(back.side == ds.side);
  REQUIRE(back.pairs.size() == ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const datagen::TrainingPair& a = ds.pairs[i];
    const datagen::TrainingPair& b = back.pairs[i];
    CHECK(b.spec.mesh_id == a.spec.mesh_id);
    CHECK(b.spec.split == a.spec.split);
    CHECK(b.spec.pose.position == a.spec.pose.position);
    CHECK(b.spec.pose.roll == a.spec.pose.roll);
    CHECK(b.spec.pose.pitch == a.spec.pose.pitch);
    CHECK(b.spec.pose.yaw == a.spec.pose.yaw);
    CHECK(b.transform.scale == a.transform.scale);
    CHECK(b.transform.offset == a.transform.offset);
    CHECK(b.x.data == a.x.data);
    CHECK(b.y.data == a.y.data);
    CHECK(b.x.voxel_size == doctest::Approx(1.0 / a.transform.scale).epsilon(1e-15));
    CHECK(b.cloud.empty());
  }

  // identical content serializes identically
  io::save_dataset(ds, "io_data2.vxds");
  CHECK(slurp("io_data2.vxds") == slurp("io_data.vxds"));
}

TEST_CASE("dataset grid bits are packed x-major from the low bit") {
  const int side = 5;
  datagen::Dataset ds;
  ds.side = side;
  datagen::TrainingPair p;
  p.transform = {2.0, Vec3(1, 2, 3)};
  p.spec.mesh_id = "m0";
  p.x = grid::OccupancyGrid::empty(side, 0.5, -p.transform.offset / 2.0);
  p.y = p.x;
  p.x.set(1, 2, 3, true);
  p.y.set(4, 0, 2, true);
  ds.pairs.push_back(p);
  io::save_dataset(ds, "io_bits.vxds");

  const std::string bytes = slurp("io_bits.vxds");
  // header, one manifest row, then the u64 block size before the zlib data
  const std::size_t manifest = 4 + 2 + 6 * 8 + 1 + 4 * 8;
  std::size_t pos = 4 + 4 + 4 + 8 + manifest;
  std::uint64_t packed_size = 0;
  std::memcpy(&packed_size, bytes.data() + pos, 8);
  pos += 8;

  const std::size_t raw_size = (2 * side * side * side + 7) / 8;
  std::string raw(raw_size, '\0');
  uLongf got = raw_size;
  REQUIRE(uncompress(reinterpret_cast<Bytef*>(raw.data()), &got,
                     reinterpret_cast<const Bytef*>(bytes.data() + pos),
                     packed_size) == Z_OK);
  REQUIRE(got == raw_size);

  std::size_t ones = 0;
  for (char b : raw) ones += std::popcount(static_cast<unsigned char>(b));
  CHECK(ones == 2);
  const std::size_t bit_x = (1 * side + 2) * side + 3;
  const std::size_t bit_y = side * side * side + (4 * side + 0) * side + 2;
  CHECK(((raw[bit_x / 8] >> (bit_x % 8)) & 1) == 1);
  CHECK(((raw[bit_y / 8] >> (bit_y % 8)) & 1) == 1);
}

TEST_CASE("dataset loader rejects corruption") {
  io::save_dataset(tiny_dataset(), "io_data.vxds");
  const std::string good = slurp("io_data.vxds");

  std::string flipped = good;
  flipped[good.size() / 2] = char(flipped[good.size() / 2] ^ 0x10);
  spit("io_bad.vxds", flipped);
  CHECK_THROWS_WITH_AS(io::load_dataset("io_bad.vxds"), "io_bad.vxds: CRC mismatch", io_error);

  spit("io_bad.vxds", good.substr(0, good.size() / 3));
  CHECK_THROWS_AS(io::load_dataset("io_bad.vxds"), io_error);

  spit("io_bad.vxds", good + "x");
  CHECK_THROWS_WITH_AS(io::load_dataset("io_bad.vxds"), "io_bad.vxds: CRC mismatch", io_error);

  std::string wrong_magic = good;
  wrong_magic[0] = 'W';
  spit("io_bad.vxds", wrong_magic);
  CHECK_THROWS_WITH_AS(io::load_dataset("io_bad.vxds"), "io_bad.vxds: not a dataset file",
                       io_error);

  datagen::Dataset mismatched;
  mismatched.side = 4;
  datagen::TrainingPair p;
  p.x = grid::OccupancyGrid::empty(5);
  p.y = grid::OccupancyGrid::empty(5);
  mismatched.pairs.push_back(p);
  CHECK_THROWS_AS(io::save_dataset(mismatched, "io_bad.vxds"), std::invalid_argument);
}
