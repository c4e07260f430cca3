#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxc/common.hpp"
#include "voxc/datagen.hpp"
#include "voxc/grid.hpp"

namespace voxc::net {

struct ConvSpec {
  int out_channels = 0;
  int kernel = 0;
  int pool = 1;
};

struct Architecture {
  int input_side = 40;
  std::vector<ConvSpec> conv_layers;
  std::vector<int> dense_sizes;  // final entry must equal input_side^3

  // Convolutions are valid (no padding); pooling is max with ceiling
  // semantics, so a partial window at the far edge still produces an output.
  static Architecture defaults(int side);
  void validate() const;
  int conv_out_side(int layer) const;  // side after conv, before pooling
  int pool_out_side(int layer) const;
  int flatten_size() const;  // features entering the first dense layer
};

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

struct Model {
  Architecture arch;
  std::vector<double> params;
  AdamState adam;
};

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_batches = 0;
  int eval_every = 100;
  std::uint64_t seed = 0;
};

struct HistoryRow {
  int batch = 0;
  // Mean Jaccard at threshold 0.5 over the fixed eval subset of each split;
  // NaN when the dataset has no pairs in that split.
  double train_view = 0;
  double holdout_view = 0;
  double holdout_model = 0;
};

struct TrainResult {
  Model final_model;
  Model peak_model;  // checkpoint with the best holdout-model Jaccard
  double peak_holdout_model = 0;
  std::vector<HistoryRow> history;
};

// Flat parameter vector layout: conv layers in order (weights then bias),
// then dense layers (weights then bias). Conv weights are indexed
// [out_ch][in_ch][kz][ky][kx]; dense weights [out][in].
struct ParamLayout {
  struct Block {
    std::size_t w_off = 0, w_count = 0, b_off = 0, b_count = 0;
    int fan_in = 0, fan_out = 0;
  };
  std::vector<Block> conv, dense;
  std::size_t total = 0;

  static ParamLayout of(const Architecture& arch);
};

Model init_model(const Architecture& arch, std::uint64_t seed);

grid::WeightedGrid forward(const Model& m, const grid::OccupancyGrid& x);

double cross_entropy(const grid::OccupancyGrid& y, const grid::WeightedGrid& y_pred);

std::vector<double> backward(const Model& m, const grid::OccupancyGrid& x,
                             const grid::OccupancyGrid& y);
// Real-valued target variant; the gradient vanishes exactly when the target
// equals the forward output.
std::vector<double> backward(const Model& m, const grid::OccupancyGrid& x,
                             const grid::WeightedGrid& target);

void adam_step(Model& m, const std::vector<double>& grad, const TrainConfig& cfg);

TrainResult train(const Model& m, const datagen::Dataset& ds, const TrainConfig& cfg);

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

// Loss evaluated at templated precision without touching the model; the
// long double instantiation backs the finite-difference gradient checks.
template <typename S>
double loss_at(const Model& m, const grid::OccupancyGrid& x, const grid::OccupancyGrid& y);

}  // namespace voxc::net
