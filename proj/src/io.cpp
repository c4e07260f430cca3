#include "voxc/io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace voxc::io {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw io_error("cannot read " + path);
  return std::move(buf).str();
}

// Little-endian scalar append/read. The reader tracks its offset and fails
// loudly instead of running past the end.
template <typename T>
void append_scalar(std::string& out, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.append(raw, sizeof(T));
}

struct Cursor {
  const std::string& bytes;
  std::size_t pos = 0;
  std::string where;

  template <typename T>
  T take() {
    if (bytes.size() - pos < sizeof(T))
      throw io_error(where + ": truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string take_bytes(std::size_t n) {
    if (bytes.size() - pos < n)
      throw io_error(where + ": truncated at byte " + std::to_string(pos));
    std::string v = bytes.substr(pos, n);
    pos += n;
    return v;
  }
  void expect_end() const {
    if (pos != bytes.size())
      throw io_error(where + ": " + std::to_string(bytes.size() - pos) + " trailing bytes");
  }
};

void append_double_text(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

constexpr char kCloudMagic[4] = {'V', 'X', 'P', 'C'};
constexpr char kDatasetMagic[4] = {'V', 'X', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

PointCloud parse_cloud_ascii(const std::string& text, const std::string& path) {
  PointCloud pc;
  std::istringstream in(text);
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    Vec3 p;
    std::string extra;
    if (!(row >> p.x() >> p.y() >> p.z()))
      throw io_error(path + ": line " + std::to_string(line_no) +
                     ": expected three numbers, got \"" + line + "\"");
    if (row >> extra)
      throw io_error(path + ": line " + std::to_string(line_no) + ": trailing token \"" + extra +
                     "\"");
    if (!p.allFinite())
      throw io_error(path + ": line " + std::to_string(line_no) + ": non-finite coordinate");
    pc.push_back(p);
  }
  return pc;
}

PointCloud parse_cloud_binary(const std::string& bytes, const std::string& path) {
  Cursor c{bytes, 4, path};
  const std::uint32_t n = c.take<std::uint32_t>();
  if (bytes.size() != 8 + std::size_t(12) * n)
    throw io_error(path + ": size does not match the point count header");
  PointCloud pc(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float x = c.take<float>();
    const float y = c.take<float>();
    const float z = c.take<float>();
    pc[i] = Vec3(x, y, z);
  }
  return pc;
}

// Normals recomputed on write; degenerate triangles get a zero normal, which
// STL viewers tolerate.
Vec3 triangle_normal(const geom::TriMesh& m, const Vec3i& t) {
  const Vec3 n = (m.vertices[t.y()] - m.vertices[t.x()])
                     .cross(m.vertices[t.z()] - m.vertices[t.x()]);
  const double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

geom::TriMesh load_mesh_off(const std::string& path) {
  std::string text = read_file(path);
  // Strip '#' comments so the token stream below sees only data.
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '#') continue;
    while (i < text.size() && text[i] != '\n') text[i++] = ' ';
  }
  std::istringstream in(text);
  std::string magic;
  if (!(in >> magic) || magic != "OFF") throw io_error(path + ": missing OFF header");
  std::int64_t nv = 0, nf = 0, ne = 0;
  if (!(in >> nv >> nf >> ne) || nv < 0 || nf < 0)
    throw io_error(path + ": bad element counts");
  geom::TriMesh m;
  m.vertices.resize(nv);
  for (std::int64_t i = 0; i < nv; ++i) {
    if (!(in >> m.vertices[i].x() >> m.vertices[i].y() >> m.vertices[i].z()))
      throw io_error(path + ": vertex " + std::to_string(i) + " unreadable");
  }
  for (std::int64_t i = 0; i < nf; ++i) {
    std::int64_t corners = 0;
    if (!(in >> corners) || corners < 3)
      throw io_error(path + ": face " + std::to_string(i) + " unreadable");
    std::vector<std::int64_t> idx(corners);
    for (auto& v : idx) {
      if (!(in >> v) || v < 0 || v >= nv)
        throw io_error(path + ": face " + std::to_string(i) + " has an out-of-range vertex");
    }
    for (std::int64_t k = 1; k + 1 < corners; ++k)
      m.triangles.emplace_back(int(idx[0]), int(idx[k]), int(idx[k + 1]));
  }
  m.validate();
  return m;
}

geom::TriMesh load_mesh_stl(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 84) throw io_error(path + ": too short for binary STL");
  Cursor c{bytes, 80, path};
  const std::uint32_t n = c.take<std::uint32_t>();
  if (bytes.size() != 84 + std::size_t(50) * n) {
    if (bytes.rfind("solid", 0) == 0)
      throw io_error(path + ": ASCII STL is not supported, re-export as binary");
    throw io_error(path + ": size does not match the triangle count header");
  }
  geom::TriMesh m;
  std::map<std::array<float, 3>, int> seen;
  auto vertex_id = [&](const std::array<float, 3>& v) {
    auto [it, fresh] = seen.emplace(v, int(m.vertices.size()));
    if (fresh) m.vertices.emplace_back(v[0], v[1], v[2]);
    return it->second;
  };
  for (std::uint32_t i = 0; i < n; ++i) {
    c.pos += 12;  // stored normal, recomputed on demand instead
    int ids[3];
    for (int k = 0; k < 3; ++k) {
      std::array<float, 3> v;
      v[0] = c.take<float>();
      v[1] = c.take<float>();
      v[2] = c.take<float>();
      ids[k] = vertex_id(v);
    }
    c.pos += 2;  // attribute byte count
    m.triangles.emplace_back(ids[0], ids[1], ids[2]);
  }
  m.validate();
  return m;
}

std::string zlib_pack(const std::string& raw) {
  uLongf cap = compressBound(raw.size());
  std::string out(cap, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &cap,
                reinterpret_cast<const Bytef*>(raw.data()), raw.size(),
                Z_DEFAULT_COMPRESSION) != Z_OK)
    throw io_error("zlib compression failed");
  out.resize(cap);
  return out;
}

std::string zlib_unpack(const std::string& packed, std::size_t expected, const std::string& where) {
  std::string out(expected, '\0');
  uLongf got = expected;
  if (uncompress(reinterpret_cast<Bytef*>(out.data()), &got,
                 reinterpret_cast<const Bytef*>(packed.data()), packed.size()) != Z_OK ||
      got != expected)
    throw io_error(where + ": corrupt grid block");
  return out;
}

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), bytes.size()));
}

// One pair's grids as a single bitstream: all of x, then all of y, scanned
// x-major (x slowest, z fastest), bits filled LSB first and padded to whole
// bytes only at the very end.
std::string pack_pair_bits(const grid::OccupancyGrid& x, const grid::OccupancyGrid& y, int side) {
  const std::size_t voxels = std::size_t(side) * side * side;
  std::string raw((2 * voxels + 7) / 8, '\0');
  std::size_t bit = 0;
  for (const grid::OccupancyGrid* g : {&x, &y}) {
    for (int gx = 0; gx < side; ++gx)
      for (int gy = 0; gy < side; ++gy)
        for (int gz = 0; gz < side; ++gz) {
          if (g->at(gx, gy, gz)) raw[bit / 8] |= char(1u << (bit % 8));
          ++bit;
        }
  }
  return raw;
}

void unpack_pair_bits(const std::string& raw, grid::OccupancyGrid& x, grid::OccupancyGrid& y,
                      int side) {
  std::size_t bit = 0;
  for (grid::OccupancyGrid* g : {&x, &y}) {
    for (int gx = 0; gx < side; ++gx)
      for (int gy = 0; gy < side; ++gy)
        for (int gz = 0; gz < side; ++gz) {
          g->set(gx, gy, gz, (raw[bit / 8] >> (bit % 8)) & 1);
          ++bit;
        }
  }
}

}  // namespace

PointCloud load_pointcloud(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kCloudMagic, 4) == 0)
    return parse_cloud_binary(bytes, path);
  return parse_cloud_ascii(bytes, path);
}

void save_pointcloud_ascii(const PointCloud& pc, const std::string& path) {
  std::string out;
  for (const Vec3& p : pc) {
    append_double_text(out, p.x());
    out += ' ';
    append_double_text(out, p.y());
    out += ' ';
    append_double_text(out, p.z());
    out += '\n';
  }
  atomic_write_file(path, out);
}

void save_pointcloud_binary(const PointCloud& pc, const std::string& path) {
  std::string out(kCloudMagic, 4);
  append_scalar(out, std::uint32_t(pc.size()));
  for (const Vec3& p : pc) {
    append_scalar(out, float(p.x()));
    append_scalar(out, float(p.y()));
    append_scalar(out, float(p.z()));
  }
  atomic_write_file(path, out);
}

geom::TriMesh load_mesh(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".off") return load_mesh_off(path);
  if (ext == ".stl") return load_mesh_stl(path);
  throw io_error(path + ": unsupported mesh extension \"" + ext + "\"");
}

void save_mesh_off(const geom::TriMesh& m, const std::string& path) {
  m.validate();
  std::string out = "OFF\n";
  out += std::to_string(m.vertices.size()) + ' ' + std::to_string(m.triangles.size()) + " 0\n";
  for (const Vec3& v : m.vertices) {
    append_double_text(out, v.x());
    out += ' ';
    append_double_text(out, v.y());
    out += ' ';
    append_double_text(out, v.z());
    out += '\n';
  }
  for (const Vec3i& t : m.triangles) {
    out += "3 " + std::to_string(t.x()) + ' ' + std::to_string(t.y()) + ' ' +
           std::to_string(t.z()) + '\n';
  }
  atomic_write_file(path, out);
}

void save_mesh_stl(const geom::TriMesh& m, const std::string& path) {
  m.validate();
  std::string out(80, '\0');
  std::memcpy(out.data(), "voxc binary stl", 15);
  append_scalar(out, std::uint32_t(m.triangles.size()));
  for (const Vec3i& t : m.triangles) {
    const Vec3 n = triangle_normal(m, t);
    for (int k = 0; k < 3; ++k) append_scalar(out, float(n[k]));
    for (int corner = 0; corner < 3; ++corner)
      for (int k = 0; k < 3; ++k) append_scalar(out, float(m.vertices[t[corner]][k]));
    append_scalar(out, std::uint16_t(0));
  }
  atomic_write_file(path, out);
}

void save_dataset(const datagen::Dataset& ds, const std::string& path) {
  if (ds.side < 1) throw std::invalid_argument("dataset grid side must be positive");
  std::string out(kDatasetMagic, 4);
  append_scalar(out, kDatasetVersion);
  append_scalar(out, std::uint32_t(ds.side));
  append_scalar(out, std::uint64_t(ds.pairs.size()));
  for (const datagen::TrainingPair& p : ds.pairs) {
    append_scalar(out, std::uint32_t(p.spec.mesh_id.size()));
    out += p.spec.mesh_id;
    for (int k = 0; k < 3; ++k) append_scalar(out, p.spec.pose.position[k]);
    append_scalar(out, p.spec.pose.roll);
    append_scalar(out, p.spec.pose.pitch);
    append_scalar(out, p.spec.pose.yaw);
    append_scalar(out, std::uint8_t(p.spec.split));
    append_scalar(out, p.transform.scale);
    for (int k = 0; k < 3; ++k) append_scalar(out, p.transform.offset[k]);
  }
  for (const datagen::TrainingPair& p : ds.pairs) {
    if (p.x.dims != Vec3i::Constant(ds.side) || p.y.dims != Vec3i::Constant(ds.side))
      throw std::invalid_argument("pair grid dims disagree with the dataset side");
    const std::string packed = zlib_pack(pack_pair_bits(p.x, p.y, ds.side));
    append_scalar(out, std::uint64_t(packed.size()));
    out += packed;
  }
  append_scalar(out, crc_of(out));
  atomic_write_file(path, out);
}

datagen::Dataset load_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4 + 4 + 4 + 8 + 4 || std::memcmp(bytes.data(), kDatasetMagic, 4) != 0)
    throw io_error(path + ": not a dataset file");
  const std::string body = bytes.substr(0, bytes.size() - 4);
  {
    Cursor tail{bytes, bytes.size() - 4, path};
    if (tail.take<std::uint32_t>() != crc_of(body)) throw io_error(path + ": CRC mismatch");
  }
  Cursor c{body, 4, path};
  const std::uint32_t version = c.take<std::uint32_t>();
  if (version != kDatasetVersion)
    throw io_error(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t side = c.take<std::uint32_t>();
  if (side < 1 || side > 512) throw io_error(path + ": implausible grid side");
  const std::uint64_t count = c.take<std::uint64_t>();
  if (count > (std::uint64_t(1) << 32)) throw io_error(path + ": implausible pair count");

  datagen::Dataset ds;
  ds.side = int(side);
  ds.pairs.resize(count);
  for (datagen::TrainingPair& p : ds.pairs) {
    const std::uint32_t id_len = c.take<std::uint32_t>();
    if (id_len > 4096) throw io_error(path + ": implausible mesh id length");
    p.spec.mesh_id = c.take_bytes(id_len);
    for (int k = 0; k < 3; ++k) p.spec.pose.position[k] = c.take<double>();
    p.spec.pose.roll = c.take<double>();
    p.spec.pose.pitch = c.take<double>();
    p.spec.pose.yaw = c.take<double>();
    const std::uint8_t split = c.take<std::uint8_t>();
    if (split > 2) throw io_error(path + ": bad split tag");
    p.spec.split = datagen::Split(split);
    p.transform.scale = c.take<double>();
    for (int k = 0; k < 3; ++k) p.transform.offset[k] = c.take<double>();
    if (!(p.transform.scale > 0) || !std::isfinite(p.transform.scale))
      throw io_error(path + ": bad embedding scale");
  }
  const std::size_t voxels = std::size_t(side) * side * side;
  const std::size_t raw_size = (2 * voxels + 7) / 8;
  for (datagen::TrainingPair& p : ds.pairs) {
    const std::uint64_t packed_size = c.take<std::uint64_t>();
    if (packed_size > body.size() - c.pos + 1)
      throw io_error(path + ": truncated at byte " + std::to_string(c.pos));
    const std::string raw = zlib_unpack(c.take_bytes(packed_size), raw_size, path);
    const double voxel_size = 1.0 / p.transform.scale;
    const Vec3 origin = -p.transform.offset / p.transform.scale;
    p.x = grid::OccupancyGrid::empty(int(side), voxel_size, origin);
    p.y = grid::OccupancyGrid::empty(int(side), voxel_size, origin);
    unpack_pair_bits(raw, p.x, p.y, int(side));
  }
  c.expect_end();
  return ds;
}

}  // namespace voxc::io
