#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "voxc/datagen.hpp"
#include "voxc/net.hpp"
#include "voxc/shapes.hpp"

using namespace voxc;

namespace {

grid::OccupancyGrid random_grid(int side, std::uint64_t key, double fill = 0.3) {
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(side, 1.0, Vec3::Zero());
  const CounterRng rng(key);
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = rng.uniform(i) < fill ? 1 : 0;
  return g;
}

net::Architecture tiny_arch() {
  net::Architecture a;
  a.input_side = 6;
  a.conv_layers = {{2, 3, 2}, {2, 2, 1}};
  a.dense_sizes = {10, 216};
  return a;
}

datagen::Dataset tiny_dataset(int side) {
  std::vector<datagen::NamedMesh> meshes;
  meshes.push_back({"box", geom::make_box(Vec3(0.08, 0.05, 0.06))});
  meshes.push_back({"sphere", geom::make_icosphere(0.04, 2)});
  datagen::SplitConfig cfg;
  cfg.n_roll = 2;
  cfg.n_pitch = 1;
  cfg.n_yaw = 2;
  cfg.holdout_model_frac = 0.5;
  cfg.holdout_view_frac = 0.25;
  return datagen::build_dataset(meshes, cfg, side, 3);
}

}  // namespace

TEST_CASE("architecture shape arithmetic and validation") {
  const net::Architecture d40 = net::Architecture::defaults(40);
  d40.validate();
  CHECK(d40.conv_out_side(0) == 37);
  CHECK(d40.pool_out_side(0) == 19);
  CHECK(d40.pool_out_side(1) == 8);
  CHECK(d40.pool_out_side(2) == 5);
  CHECK(d40.flatten_size() == 64 * 125);

  const net::Architecture d24 = net::Architecture::defaults(24);
  d24.validate();
  CHECK(d24.flatten_size() == 64);

  net::Architecture bad = tiny_arch();
  bad.dense_sizes.back() = 100;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = tiny_arch();
  bad.conv_layers[0].kernel = 9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("initialization follows the declared weight statistics") {
  net::Architecture a;
  a.input_side = 10;
  a.dense_sizes = {100, 1000};

  const net::Model m = net::init_model(a, 11);
  const net::ParamLayout lay = net::ParamLayout::of(a);

  // hidden ReLU layer: zero-mean, variance 2/fan_in
  {
    const auto& b = lay.dense[0];
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < b.w_count; ++i) mean += m.params[b.w_off + i];
    mean /= static_cast<double>(b.w_count);
    for (std::size_t i = 0; i < b.w_count; ++i) {
      const double d = m.params[b.w_off + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(b.w_count);
    const double want = 2.0 / b.fan_in;
    CHECK(std::abs(var - want) < 0.1 * want);
    for (std::size_t i = 0; i < b.b_count; ++i) CHECK(m.params[b.b_off + i] == 0.0);
  }
  // final sigmoid layer: uniform in +-sqrt(6/(fan_in+fan_out))
  {
    const auto& b = lay.dense[1];
    const double bound = std::sqrt(6.0 / (b.fan_in + b.fan_out));
    double var = 0;
    for (std::size_t i = 0; i < b.w_count; ++i) {
      const double w = m.params[b.w_off + i];
      CHECK(std::abs(w) <= bound);
      var += w * w;
    }
    var /= static_cast<double>(b.w_count);
    const double want = bound * bound / 3.0;
    CHECK(std::abs(var - want) < 0.1 * want);
    for (std::size_t i = 0; i < b.b_count; ++i) CHECK(m.params[b.b_off + i] == 0.0);
  }

  const net::Model again = net::init_model(a, 11);
  CHECK(again.params == m.params);
  const net::Model other = net::init_model(a, 12);
  CHECK(other.params != m.params);
}

TEST_CASE("forward of a zero-weight model is uniformly one half") {
  const net::Architecture a = tiny_arch();
  net::Model m = net::init_model(a, 1);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  const grid::OccupancyGrid x = random_grid(6, 42);
  const grid::WeightedGrid p = net::forward(m, x);
  for (double v : p.data) CHECK(v == 0.5);
}

TEST_CASE("forward stays strictly inside (0,1) and rejects bad dims") {
  const net::Model m = net::init_model(tiny_arch(), 5);
  const grid::WeightedGrid p = net::forward(m, random_grid(6, 9));
  for (double v : p.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(net::forward(m, random_grid(8, 9)), std::invalid_argument);
}

TEST_CASE("forward matches a hand-unrolled one-channel convolution") {
  net::Architecture a;
  a.input_side = 2;
  a.conv_layers = {{1, 2, 1}};
  a.dense_sizes = {8};
  net::Model m = net::init_model(a, 0);

  // conv weights indexed [kz][ky][kx]; input grid x-major, z slowest
  const double w[8] = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.08, -0.07};
  for (int i = 0; i < 8; ++i) m.params[i] = w[i];
  m.params[8] = 0.11;  // conv bias
  const net::ParamLayout lay = net::ParamLayout::of(a);
  for (std::size_t i = 0; i < lay.dense[0].w_count; ++i)
    m.params[lay.dense[0].w_off + i] = 0.01 * static_cast<double>(i + 1);
  for (std::size_t i = 0; i < 8; ++i) m.params[lay.dense[0].b_off + i] = -0.02 * static_cast<double>(i);

  grid::OccupancyGrid x = grid::OccupancyGrid::empty(2, 1.0, Vec3::Zero());
  const int bits[8] = {1, 0, 1, 1, 0, 1, 0, 1};
  for (int i = 0; i < 8; ++i) x.data[i] = static_cast<std::uint8_t>(bits[i]);

  double z = 0.11;
  for (int kz = 0; kz < 2; ++kz)
    for (int ky = 0; ky < 2; ++ky)
      for (int kx = 0; kx < 2; ++kx)
        z += w[(kz * 2 + ky) * 2 + kx] * bits[kx + 2 * (ky + 2 * kz)];
  const double h = z > 0 ? z : 0;

  const grid::WeightedGrid p = net::forward(m, x);
  for (int o = 0; o < 8; ++o) {
    const double logit = 0.01 * (o + 1) * h - 0.02 * o;
    const double want = 1.0 / (1.0 + std::exp(-logit));
    CHECK(std::abs(p.data[o] - want) < 1e-12);
  }
}

TEST_CASE("cross entropy matches analytic values and clamps the extremes") {
  grid::OccupancyGrid y = grid::OccupancyGrid::empty(8, 1.0, Vec3::Zero());
  grid::WeightedGrid p = grid::WeightedGrid::zeros(y.dims);

  std::fill(p.data.begin(), p.data.end(), 0.5);
  CHECK(net::cross_entropy(y, p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::fill(y.data.begin(), y.data.end(), 1);
  std::fill(p.data.begin(), p.data.end(), 1.0 - 1e-7);
  CHECK(net::cross_entropy(y, p) == doctest::Approx(1e-7).epsilon(1e-3));

  // exact endpoints are clamped to [1e-7, 1-1e-7] inside the loss
  std::fill(p.data.begin(), p.data.end(), 0.0);
  CHECK(net::cross_entropy(y, p) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));

  grid::OccupancyGrid y2 = grid::OccupancyGrid::empty(4, 1.0, Vec3::Zero());
  CHECK_THROWS_AS(net::cross_entropy(y2, p), std::invalid_argument);
}

TEST_CASE("backward matches the closed form of a two-parameter model") {
  net::Architecture a;
  a.input_side = 1;
  a.dense_sizes = {1};
  net::Model m = net::init_model(a, 2);
  m.params[0] = 0.7;   // weight
  m.params[1] = -0.3;  // bias

  grid::OccupancyGrid x = grid::OccupancyGrid::empty(1, 1.0, Vec3::Zero());
  x.data[0] = 1;
  grid::OccupancyGrid y = x;
  y.data[0] = 0;

  const double p = 1.0 / (1.0 + std::exp(-(0.7 * 1.0 - 0.3)));
  const auto g = net::backward(m, x, y);
  REQUIRE(g.size() == 2);
  CHECK(std::abs(g[0] - (p - 0.0) * 1.0) < 1e-10);
  CHECK(std::abs(g[1] - (p - 0.0)) < 1e-10);
}

TEST_CASE("gradient vanishes exactly when the target equals the prediction") {
  const net::Model m = net::init_model(tiny_arch(), 8);
  const grid::OccupancyGrid x = random_grid(6, 77);
  const grid::WeightedGrid target = net::forward(m, x);
  const auto g = net::backward(m, x, target);
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients agree with long double finite differences") {
  const net::Architecture a = tiny_arch();
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    net::Model m = net::init_model(a, seed);
    const grid::OccupancyGrid x = random_grid(6, seed * 131 + 1);
    const grid::OccupancyGrid y = random_grid(6, seed * 131 + 2, 0.4);

    const std::vector<double> g = net::backward(m, x, y);
    const double h = 1e-5;
    double worst = 0;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      if (std::abs(g[i]) <= 1e-8) continue;
      net::Model pert = m;
      pert.params[i] = m.params[i] + h;
      const double up = net::loss_at<long double>(pert, x, y);
      pert.params[i] = m.params[i] - h;
      const double dn = net::loss_at<long double>(pert, x, y);
      const double fd = (up - dn) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(std::abs(fd), std::abs(g[i])));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("adam takes a first step of size learning rate") {
  net::Architecture a;
  a.input_side = 1;
  a.dense_sizes = {1};
  net::Model m = net::init_model(a, 3);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  net::TrainConfig cfg;
  cfg.learning_rate = 1e-4;

  net::adam_step(m, {0.37, -2.4}, cfg);
  CHECK(m.adam.t == 1);
  for (double p : m.params) {
    CHECK(std::abs(p) >= 0.9999 * cfg.learning_rate);
    CHECK(std::abs(p) <= cfg.learning_rate);
  }
  CHECK(m.params[0] < 0.0);  // descends against the gradient sign
  CHECK(m.params[1] > 0.0);
}

TEST_CASE("adam ignores zero gradients but still counts steps") {
  net::Model m = net::init_model(tiny_arch(), 4);
  const std::vector<double> before = m.params;
  net::TrainConfig cfg;
  const std::vector<double> zero(m.params.size(), 0.0);
  net::adam_step(m, zero, cfg);
  net::adam_step(m, zero, cfg);
  CHECK(m.adam.t == 2);
  CHECK(m.params == before);
}

TEST_CASE("adam rejects non-finite gradients and mismatched sizes") {
  net::Model m = net::init_model(tiny_arch(), 4);
  net::TrainConfig cfg;
  std::vector<double> g(m.params.size(), 0.0);
  g[7] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(net::adam_step(m, g, cfg), "gradient overflow", numerical_error);
  g[7] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(net::adam_step(m, g, cfg), numerical_error);
  CHECK_THROWS_AS(net::adam_step(m, std::vector<double>(3, 0.0), cfg), std::invalid_argument);
}

TEST_CASE("identical models and gradients update identically") {
  net::Model a = net::init_model(tiny_arch(), 5);
  net::Model b = a;
  std::vector<double> g(a.params.size());
  const CounterRng rng(99);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(i) - 0.5;
  net::TrainConfig cfg;
  net::adam_step(a, g, cfg);
  net::adam_step(b, g, cfg);
  CHECK(a.params == b.params);
}

TEST_CASE("training histories are deterministic and flat at zero learning rate") {
  const datagen::Dataset ds = tiny_dataset(8);
  REQUIRE(!ds.pairs.empty());

  net::Architecture a;
  a.input_side = 8;
  a.conv_layers = {{2, 3, 2}};
  a.dense_sizes = {16, 512};
  const net::Model m = net::init_model(a, 6);

  net::TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_batches = 8;
  cfg.eval_every = 4;
  cfg.learning_rate = 0.0;
  cfg.seed = 17;

  const net::TrainResult r1 = net::train(m, ds, cfg);
  REQUIRE(r1.history.size() == 3);  // batches 0, 4, 8
  CHECK(r1.history[0].batch == 0);
  CHECK(r1.history[1].batch == 4);
  CHECK(r1.history[2].batch == 8);
  for (const auto& row : r1.history) {
    CHECK(row.train_view == r1.history[0].train_view);
    CHECK(row.holdout_view == r1.history[0].holdout_view);
    CHECK(row.holdout_model == r1.history[0].holdout_model);
  }
  CHECK(r1.final_model.params == m.params);

  cfg.learning_rate = 1e-3;
  const net::TrainResult r2 = net::train(m, ds, cfg);
  const net::TrainResult r3 = net::train(m, ds, cfg);
  REQUIRE(r2.history.size() == r3.history.size());
  for (std::size_t i = 0; i < r2.history.size(); ++i) {
    CHECK(r2.history[i].batch == r3.history[i].batch);
    CHECK(r2.history[i].train_view == r3.history[i].train_view);
    CHECK(r2.history[i].holdout_view == r3.history[i].holdout_view);
    CHECK(r2.history[i].holdout_model == r3.history[i].holdout_model);
  }
  CHECK(r2.final_model.params == r3.final_model.params);
  CHECK(r2.final_model.params != m.params);

  // peak checkpoint carries the best recorded holdout-model score
  double best = -1;
  for (const auto& row : r2.history) best = std::max(best, row.holdout_model);
  CHECK(r2.peak_holdout_model == best);
}

TEST_CASE("a short training run improves the fit on training views") {
  const datagen::Dataset ds = tiny_dataset(8);
  net::Architecture a;
  a.input_side = 8;
  a.conv_layers = {{4, 3, 2}};
  a.dense_sizes = {32, 512};
  const net::Model m = net::init_model(a, 7);

  net::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_batches = 150;
  cfg.eval_every = 150;
  cfg.learning_rate = 1e-3;
  cfg.seed = 5;

  const net::TrainResult r = net::train(m, ds, cfg);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history.back().train_view > r.history.front().train_view + 0.1);
}

TEST_CASE("train validates its inputs") {
  const net::Model m = net::init_model(tiny_arch(), 1);
  net::TrainConfig cfg;
  datagen::Dataset empty;
  empty.side = 6;
  CHECK_THROWS_AS(net::train(m, empty, cfg), std::invalid_argument);

  datagen::Dataset ds = tiny_dataset(8);
  CHECK_THROWS_AS(net::train(m, ds, cfg), std::invalid_argument);  // side 8 vs arch 6

  // a dataset whose pairs are all holdout has nothing to sample batches from
  datagen::Dataset holdout_only = tiny_dataset(8);
  for (auto& p : holdout_only.pairs) p.spec.split = datagen::Split::HoldoutModel;
  net::Architecture a;
  a.input_side = 8;
  a.conv_layers = {{2, 3, 2}};
  a.dense_sizes = {8, 512};
  const net::Model m8 = net::init_model(a, 2);
  CHECK_THROWS_WITH_AS(net::train(m8, holdout_only, cfg), "dataset has no training views",
                       std::invalid_argument);
}

TEST_CASE("model files round trip exactly and reject corruption") {
  const net::Model m = net::init_model(tiny_arch(), 13);
  const std::string path = "test_model.vxcn";
  net::save_model(m, path);

  const net::Model loaded = net::load_model(path);
  CHECK(loaded.arch.input_side == m.arch.input_side);
  CHECK(loaded.params == m.params);
  CHECK(loaded.adam.t == 0);

  const grid::OccupancyGrid x = random_grid(6, 55);
  const grid::WeightedGrid p1 = net::forward(m, x);
  const grid::WeightedGrid p2 = net::forward(loaded, x);
  CHECK(p1.data == p2.data);  // zero ulp difference

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  // corrupted magic
  {
    std::string bad = bytes;
    bad[0] = 'W';
    std::ofstream(path + ".bad", std::ios::binary) << bad;
    CHECK_THROWS_AS(net::load_model(path + ".bad"), io_error);
  }
  // truncation
  {
    std::ofstream(path + ".bad", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(net::load_model(path + ".bad"), io_error);
  }
  // flipped parameter byte breaks the checksum
  {
    std::string bad = bytes;
    bad[bytes.size() / 2] = static_cast<char>(bad[bytes.size() / 2] ^ 0x40);
    std::ofstream(path + ".bad", std::ios::binary) << bad;
    CHECK_THROWS_AS(net::load_model(path + ".bad"), io_error);
  }
  // declared grid side inconsistent with the dense head
  {
    std::string bad = bytes;
    const std::int32_t side = 7;
    std::memcpy(bad.data() + 8, &side, 4);
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(bad.data()), static_cast<uInt>(bad.size() - 4)));
    std::memcpy(bad.data() + bad.size() - 4, &crc, 4);
    std::ofstream(path + ".bad", std::ios::binary) << bad;
    CHECK_THROWS_AS(net::load_model(path + ".bad"), io_error);
  }
}
