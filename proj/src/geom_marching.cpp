#include <cmath>
#include <unordered_map>

#include "voxc/detail/mc_tables.hpp"
#include "voxc/geom.hpp"

namespace voxc::geom {

namespace {

// Bourke corner layout: 0..3 ring the lower z face, 4..7 the upper.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorner[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

TriMesh marching_cubes(const grid::WeightedGrid& f, double isolevel) {
  if (f.dims.minCoeff() < 2) throw std::invalid_argument("marching cubes needs 2 samples per axis");

  TriMesh out;
  // one shared vertex per lattice edge: key = 3 * sample linear index + axis
  std::unordered_map<std::int64_t, int> edge_vertex;
  const auto sample_index = [&](int x, int y, int z) {
    return static_cast<std::int64_t>(x) +
           static_cast<std::int64_t>(f.dims.x()) * (y + static_cast<std::int64_t>(f.dims.y()) * z);
  };

  double val[8];
  int cell[3];
  int everts[12];
  for (cell[2] = 0; cell[2] + 1 < f.dims.z(); ++cell[2]) {
    for (cell[1] = 0; cell[1] + 1 < f.dims.y(); ++cell[1]) {
      for (cell[0] = 0; cell[0] + 1 < f.dims.x(); ++cell[0]) {
        int cubeindex = 0;
        for (int c = 0; c < 8; ++c) {
          val[c] = f.at(cell[0] + kCorner[c][0], cell[1] + kCorner[c][1], cell[2] + kCorner[c][2]);
          if (val[c] < isolevel) cubeindex |= 1 << c;
        }
        const unsigned edges = detail::kMcEdgeTable[cubeindex];
        if (edges == 0) continue;

        for (int e = 0; e < 12; ++e) {
          if (!(edges >> e & 1)) continue;
          const int c0 = kEdgeCorner[e][0];
          const int c1 = kEdgeCorner[e][1];
          int axis = 0;
          while (kCorner[c0][axis] == kCorner[c1][axis]) ++axis;
          // orient the edge from the lower corner so interpolation and the
          // weld key are independent of table ordering
          const int lo = kCorner[c0][axis] < kCorner[c1][axis] ? c0 : c1;
          const int hi = lo == c0 ? c1 : c0;
          const int bx = cell[0] + kCorner[lo][0];
          const int by = cell[1] + kCorner[lo][1];
          const int bz = cell[2] + kCorner[lo][2];
          const std::int64_t key = 3 * sample_index(bx, by, bz) + axis;
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            const double v0 = val[lo];
            const double v1 = val[hi];
            double t = std::abs(v1 - v0) < 1e-300 ? 0.5 : (isolevel - v0) / (v1 - v0);
            t = std::min(1.0, std::max(0.0, t));
            Vec3 p(bx + 0.5, by + 0.5, bz + 0.5);
            p[axis] += t;
            it = edge_vertex.emplace(key, static_cast<int>(out.vertices.size())).first;
            out.vertices.push_back(p);
          }
          everts[e] = it->second;
        }

        const std::int8_t* row = detail::kMcTriTable[cubeindex];
        for (int i = 0; row[i] != -1; i += 3)
          out.triangles.emplace_back(everts[row[i]], everts[row[i + 1]], everts[row[i + 2]]);
      }
    }
  }
  return out;
}

}  // namespace voxc::geom
