#pragma once

#include "voxc/geom.hpp"
#include "voxc/grid.hpp"

namespace voxc::postprocess {

// Upsampling scores each subdivided voxel by proximity-complement weights
// (occupied corners vote with D - L1). Flipping this constant switches to
// weighting by the raw L1 distance instead, which favors the far corners;
// kept selectable for comparison runs.
inline constexpr bool kUpsampleLiteralWeights = false;

// Provenance of an occupied voxel in the merged high-resolution grid.
// Unoccupied voxels carry None.
enum class Source : std::uint8_t { None = 0, FromCNN = 1, FromObserved = 2, Filled = 3 };

struct MergeState {
  int d_ratio = 1;
  grid::OccupancyGrid hi_grid;
  std::vector<Source> source_mask;  // parallel to hi_grid.data

  // Throws when the mask size or its None/occupied pairing is inconsistent.
  void validate() const;
};

// Ratio of mean nearest-neighbor spacing, round(spacing(cnn) /
// spacing(observed)), clamped to [1, 4]. Spacing is averaged over a fixed
// deterministic sample of one tenth of each cloud. Either cloud under 10
// points throws.
int density_ratio(const PointCloud& observed, const PointCloud& cnn_cloud);

// Subdivides each voxel into d_ratio^3. Interior sub-voxels take the sign of
// the corner vote over the 8 nearest source centers; sub-voxels outside the
// source-center lattice copy their nearest source voxel. d_ratio 1 returns
// the input unchanged.
grid::OccupancyGrid upsample(const grid::OccupancyGrid& g, int d_ratio);

// Union of the upsampled grid and the voxelized observed points, tagged by
// source; observed wins where both occupy a voxel. t maps observed points
// into the high-resolution frame. Points landing outside are clamped to the
// nearest voxel; more than 5% outside throws.
MergeState merge(const grid::OccupancyGrid& upsampled, const PointCloud& observed,
                 const grid::EmbedTransform& t, int d_ratio);

// Scans each (x, y) column along +z and bridges the gap between the first
// occupied voxel and the next when it is strictly between 1 and d_ratio + 1
// voxels wide; bridged voxels are tagged Filled. With until_fixpoint the
// scan instead fills the first bridgeable gap and repeats until none remain.
MergeState fill_gaps(const MergeState& ms, bool until_fixpoint = false);

// Relaxes the signed field f (+1 occupied, -1 unoccupied) by projected
// gradient descent on the summed squared second differences, keeping the
// sign of every voxel (occupied stay >= 0, unoccupied <= 0). The step is
// halved after an iteration that raised the energy; ten consecutive raising
// iterations throw "step too large". Stops after iters steps or when the
// relative energy change drops below 1e-8.
grid::WeightedGrid qp_smooth(const MergeState& ms, int iters, double step);

// Surface extraction. fast runs marching cubes directly on the binary
// completion; otherwise the full chain (density estimate, upsample, merge
// with the observed points, gap fill, smoothing) runs first and the surface
// is the zero level set of the smoothed field. Vertices are returned in the
// frame observed points live in (t maps that frame to grid coordinates).
// The detailed path requires a non-empty observed cloud.
geom::TriMesh reconstruct(const grid::OccupancyGrid& cnn_out, const PointCloud& observed,
                          const grid::EmbedTransform& t, bool fast);

}  // namespace voxc::postprocess
