#pragma once

#include <string>
#include <vector>

#include "voxc/datagen.hpp"
#include "voxc/geom.hpp"
#include "voxc/grid.hpp"

namespace voxc::metrics {

struct MetricReport {
  double jaccard = 0.0;       // [0, 1]
  double hausdorff_mm = 0.0;  // >= 0
  double geodesic_js = 0.0;   // [0, ln 2]
};

struct GmmComponent {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

// Per-mesh geodesic shape summary: normalized mean-geodesic-distance values,
// one per sampled vertex, plus the mixture fitted to them. Weights sum to 1
// within 1e-9 and every variance is positive.
struct GeodesicDescriptor {
  std::vector<double> values;
  std::vector<GmmComponent> gmm;
};

// Intersection over union of the occupied sets. Two empty grids count as
// identical (1). Differing dims throw.
double jaccard(const grid::OccupancyGrid& a, const grid::OccupancyGrid& b);

// Solid-voxelizes both meshes into one shared frame covering their union
// bounding box (voxel edge = longest union extent / (side - 2), centered),
// then takes the grid jaccard. Both meshes must be non-empty.
double mesh_jaccard(const geom::TriMesh& a, const geom::TriMesh& b, int side = 80);

// Mean of the two directed mean distances, in millimeters: each direction
// averages the exact point-to-surface distance from n_samples surface points
// of one mesh to the other. Both directions sample with the same seed, so
// the value is invariant to argument order. n_samples must be >= 100.
double hausdorff_symmetric(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples = 300,
                           std::uint64_t seed = 0);

// Descriptor over the largest connected component: up to n_samples vertices
// are chosen deterministically from the seed, pairwise geodesics run over
// the triangle edge graph, each sample's value is its mean distance to the
// other samples normalized by the largest such mean, and a k-component 1-D
// Gaussian mixture is fitted by EM (100 iterations or 1e-8 tolerance). A
// collapsed component (variance under 1e-12) retries once with a derived
// seed and then fails.
GeodesicDescriptor geodesic_descriptor(const geom::TriMesh& m, int n_samples, int k,
                                       std::uint64_t seed);

// Jensen-Shannon divergence (natural log, range [0, ln 2]) between the two
// meshes' descriptor mixtures, integrated by 2048-point quadrature on
// [0, 1]. n_samples >= 200, k >= 1.
double geodesic_divergence(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples = 200,
                           int k = 3, std::uint64_t seed = 0);

struct SuiteEntry {
  std::string method;
  datagen::Split split = datagen::Split::TrainView;
  geom::TriMesh completion;
  geom::TriMesh ground_truth;
};

struct SuiteRow {
  std::size_t index = 0;  // position in the input list
  std::string method;
  datagen::Split split = datagen::Split::TrainView;
  MetricReport metrics;
};

struct SuiteCell {
  std::string method;
  datagen::Split split = datagen::Split::TrainView;
  std::size_t count = 0;
  MetricReport mean;
};

struct SuiteParams {
  int mesh_jaccard_side = 80;
  int hausdorff_samples = 300;
  int geodesic_samples = 200;
  int gmm_components = 3;
  std::uint64_t seed = 0;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;    // input order
  std::vector<SuiteCell> cells;  // sorted by method, then split
};

// Scores every completion against its ground truth and averages per
// (method, split) cell. Entries whose metrics cannot be computed (an empty
// mesh, a collapsed mixture) receive worst-case scores instead of failing:
// jaccard 0, hausdorff the ground-truth bounding diameter, divergence ln 2.
SuiteResult evaluate_suite(const std::vector<SuiteEntry>& entries, const SuiteParams& params = {});

}  // namespace voxc::metrics
