#pragma once

#include <string>
#include <vector>

#include "voxc/common.hpp"
#include "voxc/geom.hpp"
#include "voxc/grid.hpp"

namespace voxc::datagen {

enum class Split : std::uint8_t { TrainView = 0, HoldoutView = 1, HoldoutModel = 2 };

const char* split_name(Split s);

struct ViewSpec {
  std::string mesh_id;
  geom::CameraPose pose;
  Split split = Split::TrainView;
};

// One training example: x is the visible-surface grid, y the full object
// voxelized into the identical frame so the two overlay voxel for voxel.
struct TrainingPair {
  grid::OccupancyGrid x;
  grid::OccupancyGrid y;
  grid::EmbedTransform transform;  // camera frame -> grid coordinates
  PointCloud cloud;                // visible surface points, camera frame
  ViewSpec spec;
};

struct NamedMesh {
  std::string id;
  geom::TriMesh mesh;
};

struct SplitConfig {
  int n_roll = 11;
  int n_pitch = 6;
  int n_yaw = 11;
  double holdout_model_frac = 0.2;  // fraction of meshes held out entirely
  double holdout_view_frac = 0.25;  // fraction of views of kept meshes
};

struct Dataset {
  int side = 0;
  std::vector<TrainingPair> pairs;
};

// Uniform lattice over orientation space: roll and yaw sweep [0, 2pi)
// endpoint-exclusive, pitch sweeps [-pi/2, pi/2] endpoint-inclusive. Each
// pose sits at unit distance from the origin facing it; aim_at() rescales
// onto a concrete object.
std::vector<geom::CameraPose> sample_views(int n_roll, int n_pitch, int n_yaw);

// Keep the orientation, place the camera `distance` away looking at `target`.
geom::CameraPose aim_at(const geom::CameraPose& pose, const Vec3& target, double distance);

// Viewing distance used for every generated view of a mesh.
double camera_distance(const geom::TriMesh& m);

TrainingPair generate_pair(const geom::TriMesh& m, const geom::CameraPose& pose, int side);

Dataset build_dataset(const std::vector<NamedMesh>& meshes, const SplitConfig& cfg, int side,
                      std::uint64_t seed);

}  // namespace voxc::datagen
