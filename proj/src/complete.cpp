#include "voxc/complete.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace voxc::complete {

const char* method_name(Method m) {
  switch (m) {
    case Method::Partial: return "partial";
    case Method::Mirror: return "mirror";
    case Method::CNN: return "cnn";
  }
  return "unknown";
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[b] = a;
  }
};

std::uint64_t cell_key(long x, long y, long z) {
  return splitmix64(static_cast<std::uint64_t>(x) * 0x8da6b343ULL ^
                    static_cast<std::uint64_t>(y) * 0xd8163841ULL ^
                    static_cast<std::uint64_t>(z) * 0xcb1ab31fULL);
}

}  // namespace

std::vector<PointCloud> cluster(const PointCloud& pc, double tol) {
  if (!(tol > 0)) throw std::invalid_argument("cluster tolerance must be positive");
  if (pc.empty()) return {};
  const int n = static_cast<int>(pc.size());

  // hash points into tol-sized cells; neighbors can only sit in the 27 cells
  // around a point's own cell
  std::unordered_map<std::uint64_t, std::vector<int>> cells;
  cells.reserve(pc.size());
  const auto cell_of = [&](const Vec3& p) {
    return Eigen::Vector3<long>(static_cast<long>(std::floor(p.x() / tol)),
                                static_cast<long>(std::floor(p.y() / tol)),
                                static_cast<long>(std::floor(p.z() / tol)));
  };
  for (int i = 0; i < n; ++i) {
    const auto c = cell_of(pc[i]);
    cells[cell_key(c.x(), c.y(), c.z())].push_back(i);
  }

  UnionFind uf(n);
  const double tol_sq = tol * tol;
  for (int i = 0; i < n; ++i) {
    const auto c = cell_of(pc[i]);
    for (long dz = -1; dz <= 1; ++dz)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const auto it = cells.find(cell_key(c.x() + dx, c.y() + dy, c.z() + dz));
          if (it == cells.end()) continue;
          for (int j : it->second)
            if (j > i && (pc[i] - pc[j]).squaredNorm() <= tol_sq) uf.unite(i, j);
        }
  }

  std::unordered_map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

  std::vector<std::vector<int>> kept;
  for (auto& [root, members] : groups)
    if (members.size() >= 10) kept.push_back(std::move(members));
  // descending size; ties broken by first point index for a stable order
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });

  std::vector<PointCloud> out;
  out.reserve(kept.size());
  for (const auto& members : kept) {
    PointCloud c;
    c.reserve(members.size());
    for (int i : members) c.push_back(pc[i]);
    out.push_back(std::move(c));
  }
  return out;
}

Completion run(const Completer& c, const PointCloud& pc, int side) {
  if (pc.empty()) throw std::invalid_argument("empty input cloud");

  Completion result;
  switch (c.method) {
    case Method::Partial: {
      auto [g, t] = grid::embed_pointcloud(pc, side);
      result.grid = std::move(g);
      result.transform = t;
      break;
    }
    case Method::Mirror: {
      Vec3 centroid = Vec3::Zero();
      for (const Vec3& p : pc) centroid += p;
      centroid /= static_cast<double>(pc.size());
      PointCloud doubled = pc;
      doubled.reserve(pc.size() * 2);
      for (const Vec3& p : pc)
        doubled.emplace_back(p.x(), p.y(), 2.0 * centroid.z() - p.z());
      auto [g, t] = grid::embed_pointcloud(doubled, side);
      result.grid = std::move(g);
      result.transform = t;
      break;
    }
    case Method::CNN: {
      if (!c.model) throw std::invalid_argument("CNN completer has no model");
      if (c.model->arch.input_side != side)
        throw std::invalid_argument("model input side does not match the requested grid side");
      auto [g, t] = grid::embed_pointcloud(pc, side);
      result.transform = t;
      result.probabilities = net::forward(*c.model, g);
      result.grid = std::move(g);
      for (std::size_t i = 0; i < result.grid.data.size(); ++i)
        result.grid.data[i] = result.probabilities.data[i] >= 0.5 ? 1 : 0;
      break;
    }
  }
  return result;
}

}  // namespace voxc::complete
