#pragma once

#include <memory>
#include <vector>

#include "voxc/common.hpp"
#include "voxc/grid.hpp"
#include "voxc/net.hpp"

namespace voxc::complete {

enum class Method { Partial, Mirror, CNN };

const char* method_name(Method m);

// Single-linkage euclidean clustering: points within tol of each other join
// one component. Components under 10 points are dropped; the rest come back
// sorted by descending size, each keeping its points in input order.
std::vector<PointCloud> cluster(const PointCloud& pc, double tol = 0.02);

struct Completion {
  grid::OccupancyGrid grid;
  grid::EmbedTransform transform;
  // CNN only: raw sigmoid outputs backing the thresholded grid, kept for
  // downstream surface weighting.
  grid::WeightedGrid probabilities;
};

struct Completer {
  Method method = Method::Partial;
  std::shared_ptr<const net::Model> model;  // CNN only, read-only

  static Completer partial() { return {Method::Partial, nullptr}; }
  static Completer mirror() { return {Method::Mirror, nullptr}; }
  static Completer cnn(net::Model m) {
    return {Method::CNN, std::make_shared<const net::Model>(std::move(m))};
  }
};

// The cloud is in camera frame with +z the viewing direction. Partial embeds
// the cloud as-is; Mirror first unions it with its reflection through the
// plane normal to +z at the cloud centroid; CNN embeds, runs the network,
// and thresholds at 0.5.
Completion run(const Completer& c, const PointCloud& pc, int side);

}  // namespace voxc::complete
