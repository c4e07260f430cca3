#include "voxc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "voxc/common.hpp"

namespace voxc::postprocess {

namespace {

constexpr std::uint64_t kSpacingSampleSeed = 0x8d6f3a21c45be907ULL;
constexpr int kQpIters = 150;
constexpr double kQpStep = 0.005;

void require_cubic(const grid::OccupancyGrid& g, const char* who) {
  if (g.dims.x() != g.dims.y() || g.dims.x() != g.dims.z())
    throw std::invalid_argument(std::string(who) + " requires a cubic grid");
}

// Mean distance to the nearest other point, averaged over a deterministic
// sample of one tenth of the cloud.
double mean_nn_spacing(const PointCloud& pc) {
  const std::size_t n = pc.size();
  const std::size_t k = std::max<std::size_t>(1, n / 10);

  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  CounterRng rng(kSpacingSampleSeed);
  for (std::size_t i = 0; i < k; ++i)
    std::swap(idx[i], idx[i + rng.index(i, n - i)]);

  std::vector<double> nn(k, 0.0);
  parallel_for(static_cast<std::int64_t>(k), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t s = begin; s < end; ++s) {
      const std::size_t i = idx[static_cast<std::size_t>(s)];
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        best = std::min(best, (pc[j] - pc[i]).squaredNorm());
      }
      nn[static_cast<std::size_t>(s)] = std::sqrt(best);
    }
  });
  double sum = 0.0;
  for (double d : nn) sum += d;
  return sum / static_cast<double>(k);
}

// Fills the first gap found scanning the column upward whose width qualifies
// for bridging. Returns false when the column has no such gap.
bool bridge_first_gap(grid::OccupancyGrid& g, std::vector<Source>& mask, int x, int y,
                      int d_ratio) {
  const int nz = g.dims.z();
  int prev = -1;
  for (int z = 0; z < nz; ++z) {
    if (!g.at(x, y, z)) continue;
    if (prev >= 0) {
      const int d = z - prev;
      if (d > 1 && d < d_ratio + 1) {
        for (int f = prev + 1; f < z; ++f) {
          g.set(x, y, f, true);
          mask[g.index(x, y, f)] = Source::Filled;
        }
        return true;
      }
    }
    prev = z;
  }
  return false;
}

// Squared second differences summed over the three axes; the stencil at each
// boundary sample reuses the nearest interior one (one-sided form).
struct CurvatureEnergy {
  int n = 0;

  explicit CurvatureEnergy(int side) : n(side) {}

  // Applies fn(line, base, stride) for every grid line of one axis. Lines
  // within one axis touch disjoint voxels, so parallel chunks are safe.
  template <typename Fn>
  void for_axis_lines(int axis, Fn&& fn) const {
    const std::int64_t sx = 1, sy = n, sz = static_cast<std::int64_t>(n) * n;
    const std::int64_t stride = axis == 0 ? sx : axis == 1 ? sy : sz;
    parallel_for(static_cast<std::int64_t>(n) * n, [&](std::int64_t begin, std::int64_t end) {
      for (std::int64_t l = begin; l < end; ++l) {
        const std::int64_t a = l % n, b = l / n;
        std::int64_t base = 0;
        if (axis == 0) base = a * sy + b * sz;
        else if (axis == 1) base = a * sx + b * sz;
        else base = a * sx + b * sy;
        fn(l, base, stride);
      }
    });
  }

  void line_laplacian(const std::vector<double>& f, std::int64_t base, std::int64_t stride,
                      std::vector<double>& lap) const {
    auto v = [&](int i) { return f[static_cast<std::size_t>(base + i * stride)]; };
    for (int i = 1; i + 1 < n; ++i) lap[static_cast<std::size_t>(i)] = v(i - 1) - 2.0 * v(i) + v(i + 1);
    lap[0] = v(0) - 2.0 * v(1) + v(2);
    lap[static_cast<std::size_t>(n - 1)] = v(n - 1) - 2.0 * v(n - 2) + v(n - 3);
  }

  double energy(const std::vector<double>& f) const {
    const std::int64_t n_lines = static_cast<std::int64_t>(n) * n;
    std::vector<double> partial(static_cast<std::size_t>(n_lines) * 3, 0.0);
    for (int axis = 0; axis < 3; ++axis) {
      for_axis_lines(axis, [&, axis](std::int64_t line, std::int64_t base, std::int64_t stride) {
        thread_local std::vector<double> lap;
        lap.assign(static_cast<std::size_t>(n), 0.0);
        line_laplacian(f, base, stride, lap);
        double s = 0.0;
        for (double l : lap) s += l * l;
        partial[static_cast<std::size_t>(axis * n_lines + line)] = s;
      });
    }
    double e = 0.0;
    for (double p : partial) e += p;
    return e;
  }

  // grad += dE/df. Axis passes run sequentially; lines within a pass write
  // disjoint entries.
  void add_gradient(const std::vector<double>& f, std::vector<double>& grad) const {
    for (int axis = 0; axis < 3; ++axis) {
      for_axis_lines(axis, [&](std::int64_t, std::int64_t base, std::int64_t stride) {
        thread_local std::vector<double> lap;
        lap.assign(static_cast<std::size_t>(n), 0.0);
        line_laplacian(f, base, stride, lap);
        auto add = [&](int i, double v) { grad[static_cast<std::size_t>(base + i * stride)] += 2.0 * v; };
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          const int t_lo = std::max(1, j - 1), t_hi = std::min(n - 2, j + 1);
          for (int t = t_lo; t <= t_hi; ++t) acc += lap[static_cast<std::size_t>(t)] * (t == j ? -2.0 : 1.0);
          if (j <= 2) acc += lap[0] * (j == 1 ? -2.0 : 1.0);
          if (j >= n - 3) acc += lap[static_cast<std::size_t>(n - 1)] * (j == n - 2 ? -2.0 : 1.0);
          add(j, acc);
        }
      });
    }
  }
};

}  // namespace

void MergeState::validate() const {
  hi_grid.validate();
  if (d_ratio < 1) throw std::invalid_argument("density ratio must be at least 1");
  if (source_mask.size() != hi_grid.data.size())
    throw std::invalid_argument("source mask size does not match grid");
  for (std::size_t i = 0; i < source_mask.size(); ++i) {
    if ((hi_grid.data[i] != 0) != (source_mask[i] != Source::None))
      throw std::invalid_argument("source mask inconsistent with occupancy");
  }
}

int density_ratio(const PointCloud& observed, const PointCloud& cnn_cloud) {
  if (observed.size() < 10 || cnn_cloud.size() < 10)
    throw std::invalid_argument("density estimate needs at least 10 points per cloud");
  const double s_obs = mean_nn_spacing(observed);
  const double s_cnn = mean_nn_spacing(cnn_cloud);
  if (s_obs <= 0.0) return s_cnn <= 0.0 ? 1 : 4;
  const long r = std::lround(s_cnn / s_obs);
  return static_cast<int>(std::clamp(r, 1L, 4L));
}

grid::OccupancyGrid upsample(const grid::OccupancyGrid& g, int d_ratio) {
  g.validate();
  require_cubic(g, "upsample");
  if (d_ratio < 1) throw std::invalid_argument("density ratio must be at least 1");
  if (d_ratio == 1) return g;

  const int side = g.dims.x();
  const std::int64_t d = d_ratio;
  const int out_side = side * d_ratio;
  grid::OccupancyGrid out =
      grid::OccupancyGrid::empty(out_side, g.voxel_size / d_ratio, g.origin);

  // Sub-voxel center along an axis sits at (2j + 1) / (2d) in source-voxel
  // units; all tests below are scaled by 2d so every vote stays integer.
  const std::int64_t hi_edge = 2 * static_cast<std::int64_t>(side) * d - d;
  parallel_for(out_side, [&](std::int64_t zb, std::int64_t ze) {
    for (std::int64_t jz = zb; jz < ze; ++jz) {
      for (std::int64_t jy = 0; jy < out_side; ++jy) {
        for (std::int64_t jx = 0; jx < out_side; ++jx) {
          const std::int64_t c[3] = {2 * jx + 1, 2 * jy + 1, 2 * jz + 1};
          bool boundary = false;
          for (int a = 0; a < 3; ++a) boundary |= c[a] < d || c[a] > hi_edge;
          bool occ;
          if (boundary) {
            const int sx = static_cast<int>(c[0] / (2 * d));
            const int sy = static_cast<int>(c[1] / (2 * d));
            const int sz = static_cast<int>(c[2] / (2 * d));
            occ = g.at(sx, sy, sz);
          } else {
            int base[3];
            for (int a = 0; a < 3; ++a)
              base[a] = std::min(static_cast<int>((c[a] - d) / (2 * d)), side - 2);
            std::int64_t score = 0;
            for (int corner = 0; corner < 8; ++corner) {
              const int bx = base[0] + (corner & 1);
              const int by = base[1] + ((corner >> 1) & 1);
              const int bz = base[2] + ((corner >> 2) & 1);
              const std::int64_t dist = std::abs(c[0] - (2 * bx * d + d)) +
                                        std::abs(c[1] - (2 * by * d + d)) +
                                        std::abs(c[2] - (2 * bz * d + d));
              const std::int64_t w = kUpsampleLiteralWeights ? dist : 6 * d - dist;
              score += g.at(bx, by, bz) ? w : -w;
            }
            occ = score >= 0;
          }
          out.set(static_cast<int>(jx), static_cast<int>(jy), static_cast<int>(jz), occ);
        }
      }
    }
  });
  return out;
}

MergeState merge(const grid::OccupancyGrid& upsampled, const PointCloud& observed,
                 const grid::EmbedTransform& t, int d_ratio) {
  upsampled.validate();
  require_cubic(upsampled, "merge");
  if (d_ratio < 1) throw std::invalid_argument("density ratio must be at least 1");

  grid::OccupancyGrid obs =
      grid::OccupancyGrid::empty(upsampled.dims.x(), upsampled.voxel_size, upsampled.origin);
  const std::size_t n_outside = grid::occupy_from_points(obs, observed, t);
  if (n_outside * 20 > observed.size())
    throw std::invalid_argument("more than 5% of observed points fall outside the grid");

  MergeState ms;
  ms.d_ratio = d_ratio;
  ms.hi_grid = upsampled;
  ms.source_mask.assign(ms.hi_grid.data.size(), Source::None);
  for (std::size_t i = 0; i < ms.hi_grid.data.size(); ++i) {
    if (obs.data[i]) {
      ms.hi_grid.data[i] = 1;
      ms.source_mask[i] = Source::FromObserved;
    } else if (ms.hi_grid.data[i]) {
      ms.source_mask[i] = Source::FromCNN;
    }
  }
  return ms;
}

MergeState fill_gaps(const MergeState& ms, bool until_fixpoint) {
  ms.validate();
  MergeState out = ms;
  grid::OccupancyGrid& g = out.hi_grid;
  const int nx = g.dims.x(), ny = g.dims.y(), nz = g.dims.z();

  parallel_for(static_cast<std::int64_t>(nx) * ny, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t col = begin; col < end; ++col) {
      const int x = static_cast<int>(col % nx);
      const int y = static_cast<int>(col / nx);
      if (until_fixpoint) {
        while (bridge_first_gap(g, out.source_mask, x, y, out.d_ratio)) {
        }
        continue;
      }
      // Single pass: only the gap between the first occupied voxel and the
      // next is considered, qualifying or not.
      int first = -1, second = -1;
      for (int z = 0; z < nz && second < 0; ++z) {
        if (!g.at(x, y, z)) continue;
        if (first < 0) first = z;
        else second = z;
      }
      if (second < 0) continue;
      const int d = second - first;
      if (d > 1 && d < out.d_ratio + 1) {
        for (int f = first + 1; f < second; ++f) {
          g.set(x, y, f, true);
          out.source_mask[g.index(x, y, f)] = Source::Filled;
        }
      }
    }
  });
  return out;
}

grid::WeightedGrid qp_smooth(const MergeState& ms, int iters, double step) {
  ms.validate();
  require_cubic(ms.hi_grid, "qp_smooth");
  if (iters < 1) throw std::invalid_argument("iters must be at least 1");
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  const int n = ms.hi_grid.dims.x();
  if (n < 3) throw std::invalid_argument("grid too small to smooth");

  const std::size_t total = ms.hi_grid.data.size();
  std::vector<double> sign(total), f(total);
  for (std::size_t i = 0; i < total; ++i) sign[i] = ms.hi_grid.data[i] ? 1.0 : -1.0;
  f = sign;

  auto project = [&](std::vector<double>& v) {
    parallel_for(static_cast<std::int64_t>(total), [&](std::int64_t b, std::int64_t e) {
      for (std::int64_t i = b; i < e; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        v[u] = sign[u] > 0.0 ? std::max(v[u], 0.0) : std::min(v[u], 0.0);
      }
    });
  };

  const CurvatureEnergy ce(n);
  std::vector<double> grad(total), next(total);
  double e_cur = ce.energy(f);
  int raising = 0;
  for (int it = 0; it < iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    ce.add_gradient(f, grad);
    for (std::size_t i = 0; i < total; ++i) next[i] = f[i] - step * grad[i];
    project(next);
    const double e_next = ce.energy(next);
    f.swap(next);
    if (e_next > e_cur) {
      step *= 0.5;
      if (++raising >= 10) throw numerical_error("step too large");
    } else {
      raising = 0;
    }
    const double rel = std::abs(e_next - e_cur) / std::max(e_cur, 1e-30);
    e_cur = e_next;
    if (rel < 1e-8) break;
  }
  project(f);

  grid::WeightedGrid out = grid::WeightedGrid::zeros(ms.hi_grid.dims);
  out.data = std::move(f);
  return out;
}

geom::TriMesh reconstruct(const grid::OccupancyGrid& cnn_out, const PointCloud& observed,
                          const grid::EmbedTransform& t, bool fast) {
  cnn_out.validate();
  geom::TriMesh mesh;
  grid::EmbedTransform frame = t;
  if (fast) {
    mesh = geom::marching_cubes(grid::WeightedGrid::from_occupancy(cnn_out, 1.0, 0.0), 0.5);
  } else {
    if (observed.empty())
      throw std::invalid_argument("detailed reconstruction requires observed points");
    const PointCloud cnn_cloud = grid::grid_to_pointcloud(cnn_out, t);
    const int d = density_ratio(observed, cnn_cloud);
    const grid::OccupancyGrid up = upsample(cnn_out, d);
    frame.scale = t.scale * d;
    frame.offset = t.offset * d;
    MergeState ms = merge(up, observed, frame, d);
    ms = fill_gaps(ms);
    const grid::WeightedGrid f = qp_smooth(ms, kQpIters, kQpStep);
    mesh = geom::marching_cubes(f, 0.0);
  }
  for (Vec3& v : mesh.vertices) v = frame.to_world(v);
  return mesh;
}

}  // namespace voxc::postprocess
