#include "voxc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace voxc::datagen {

namespace {

constexpr int kViewWidth = 64;
constexpr int kViewHeight = 64;
constexpr double kViewFov = std::numbers::pi / 4;
constexpr double kDistanceFactor = 2.5;
// Views where fewer than 1% of pixels hit carry no usable surface.
constexpr double kMinHitFraction = 0.01;

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::TrainView: return "train_view";
    case Split::HoldoutView: return "holdout_view";
    case Split::HoldoutModel: return "holdout_model";
  }
  return "unknown";
}

std::vector<geom::CameraPose> sample_views(int n_roll, int n_pitch, int n_yaw) {
  if (n_roll < 1 || n_pitch < 1 || n_yaw < 1)
    throw std::invalid_argument("view counts must be at least 1");
  constexpr double pi = std::numbers::pi;
  std::vector<geom::CameraPose> out;
  out.reserve(static_cast<std::size_t>(n_roll) * n_pitch * n_yaw);
  for (int i = 0; i < n_roll; ++i) {
    for (int j = 0; j < n_pitch; ++j) {
      for (int k = 0; k < n_yaw; ++k) {
        geom::CameraPose p;
        p.roll = 2 * pi * i / n_roll;
        p.pitch = n_pitch == 1 ? -pi / 2 : -pi / 2 + pi * j / (n_pitch - 1);
        p.yaw = 2 * pi * k / n_yaw;
        p.position = -p.forward();
        out.push_back(p);
      }
    }
  }
  return out;
}

geom::CameraPose aim_at(const geom::CameraPose& pose, const Vec3& target, double distance) {
  geom::CameraPose out = pose;
  out.position = target - distance * pose.forward();
  return out;
}

double camera_distance(const geom::TriMesh& m) {
  const Vec3 c = m.centroid();
  double radius = 0;
  for (const Vec3& v : m.vertices) radius = std::max(radius, (v - c).norm());
  return kDistanceFactor * radius;
}

TrainingPair generate_pair(const geom::TriMesh& m, const geom::CameraPose& pose, int side) {
  const geom::DepthImage img = geom::render_depth(m, pose, kViewWidth, kViewHeight, kViewFov);
  geom::PartialView pv = geom::depth_to_partial_grid(img, pose, side);

  // Voxelize the full object in the camera frame so y lands in x's grid.
  const Eigen::Matrix3d r = pose.rotation();
  const geom::TriMesh in_camera = m.transformed(r.transpose(), -(r.transpose() * pose.position));

  TrainingPair pair;
  pair.y = geom::solid_voxelize_into(in_camera, side, pv.transform);
  pair.x = std::move(pv.grid);
  pair.transform = pv.transform;
  pair.cloud = std::move(pv.cloud);
  pair.spec.pose = pose;
  return pair;
}

Dataset build_dataset(const std::vector<NamedMesh>& meshes, const SplitConfig& cfg, int side,
                      std::uint64_t seed) {
  if (meshes.size() < 2)
    throw std::invalid_argument("need at least 2 meshes so holdout models exist");
  if (cfg.holdout_model_frac < 0 || cfg.holdout_view_frac < 0 ||
      cfg.holdout_model_frac + cfg.holdout_view_frac > 1.0)
    throw std::invalid_argument("split fractions must be non-negative and sum to at most 1");

  const int n_meshes = static_cast<int>(meshes.size());

  // Canonical manifest order: by mesh id, then pose index.
  std::vector<int> order(meshes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return meshes[a].id < meshes[b].id; });

  SeqRng rng(seed);

  // Pick the held-out meshes: at least one whenever the fraction is positive,
  // always leaving at least one mesh to train on.
  int n_hold = static_cast<int>(std::lround(cfg.holdout_model_frac * n_meshes));
  if (cfg.holdout_model_frac > 0) n_hold = std::max(n_hold, 1);
  n_hold = std::min(n_hold, n_meshes - 1);
  std::vector<int> shuffled = order;
  for (int i = n_meshes - 1; i > 0; --i)
    std::swap(shuffled[i], shuffled[rng.index(static_cast<std::uint64_t>(i) + 1)]);
  std::vector<std::uint8_t> is_holdout(meshes.size(), 0);
  for (int i = 0; i < n_hold; ++i) is_holdout[shuffled[i]] = 1;

  const std::vector<geom::CameraPose> lattice = sample_views(cfg.n_roll, cfg.n_pitch, cfg.n_yaw);
  const int n_views = static_cast<int>(lattice.size());

  // Per-view split labels, assigned sequentially so the result depends only
  // on the seed, never on worker scheduling.
  std::vector<std::vector<Split>> labels(meshes.size());
  for (int mi : order) {
    std::vector<Split>& l = labels[mi];
    if (is_holdout[mi]) {
      l.assign(n_views, Split::HoldoutModel);
      continue;
    }
    l.assign(n_views, Split::TrainView);
    const int n_view_hold = static_cast<int>(std::lround(cfg.holdout_view_frac * n_views));
    std::vector<int> view_idx(n_views);
    std::iota(view_idx.begin(), view_idx.end(), 0);
    for (int i = n_views - 1; i > 0; --i)
      std::swap(view_idx[i], view_idx[rng.index(static_cast<std::uint64_t>(i) + 1)]);
    for (int i = 0; i < n_view_hold; ++i) l[view_idx[i]] = Split::HoldoutView;
  }

  Dataset ds;
  ds.side = side;

  const int min_hits =
      static_cast<int>(std::ceil(kMinHitFraction * kViewWidth * kViewHeight));

  for (int mi : order) {
    const NamedMesh& nm = meshes[mi];
    const Vec3 target = nm.mesh.centroid();
    const double distance = camera_distance(nm.mesh);

    std::vector<TrainingPair> slots(n_views);
    std::vector<std::uint8_t> ok(n_views, 0);
    std::vector<std::string> skip_reason(n_views);
    std::exception_ptr failure;
    std::mutex failure_mutex;

    parallel_for(n_views, [&](std::int64_t begin, std::int64_t end) {
      for (std::int64_t v = begin; v < end; ++v) {
        const geom::CameraPose pose = aim_at(lattice[v], target, distance);
        try {
          TrainingPair pair = generate_pair(nm.mesh, pose, side);
          if (static_cast<int>(pair.cloud.size()) < min_hits) {
            skip_reason[v] = "fewer than 1% of pixels hit";
            continue;
          }
          slots[v] = std::move(pair);
          ok[v] = 1;
        } catch (const std::invalid_argument& e) {
          skip_reason[v] = e.what();
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
    if (failure) std::rethrow_exception(failure);

    for (int v = 0; v < n_views; ++v) {
      if (!ok[v]) {
        std::fprintf(stderr, "warning: skipping view %d of %s: %s\n", v, nm.id.c_str(),
                     skip_reason[v].c_str());
        continue;
      }
      TrainingPair& pair = slots[v];
      pair.spec.mesh_id = nm.id;
      pair.spec.split = labels[mi][v];
      ds.pairs.push_back(std::move(pair));
    }
  }
  return ds;
}

}  // namespace voxc::datagen
