#include "voxc/net.hpp"

#include <zlib.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>

namespace voxc::net {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr int kEvalSubset = 16;
// Keys separating the independent random streams drawn from one seed.
constexpr std::uint64_t kBatchStream = 0x9a3c51e07b6f42d1ULL;
constexpr std::uint64_t kEvalStream = 0x3f84a6c2e91b75a3ULL;

template <typename S>
S stable_sigmoid(S z) {
  if (z >= S(0)) return S(1) / (S(1) + std::exp(-z));
  const S e = std::exp(z);
  return e / (S(1) + e);
}

}  // namespace

Architecture Architecture::defaults(int side) {
  Architecture a;
  a.input_side = side;
  a.conv_layers = {{64, 4, 2}, {64, 4, 2}, {64, 4, 1}};
  a.dense_sizes = {3000, side * side * side};
  return a;
}

int Architecture::conv_out_side(int layer) const {
  int s = input_side;
  for (int l = 0; l <= layer; ++l) {
    s = s - conv_layers[l].kernel + 1;
    if (l < layer) s = (s + conv_layers[l].pool - 1) / conv_layers[l].pool;
  }
  return s;
}

int Architecture::pool_out_side(int layer) const {
  const int s = conv_out_side(layer);
  const int p = conv_layers[layer].pool;
  return (s + p - 1) / p;
}

int Architecture::flatten_size() const {
  if (conv_layers.empty()) return input_side * input_side * input_side;
  const int side = pool_out_side(static_cast<int>(conv_layers.size()) - 1);
  return conv_layers.back().out_channels * side * side * side;
}

void Architecture::validate() const {
  if (input_side < 1) throw std::invalid_argument("input side must be positive");
  int s = input_side;
  for (const ConvSpec& c : conv_layers) {
    if (c.out_channels < 1 || c.kernel < 1 || c.pool < 1)
      throw std::invalid_argument("conv layer sizes must be at least 1");
    if (s < c.kernel) throw std::invalid_argument("kernel larger than its input");
    s = (s - c.kernel + 1 + c.pool - 1) / c.pool;
  }
  if (dense_sizes.empty()) throw std::invalid_argument("at least one dense layer required");
  for (int d : dense_sizes)
    if (d < 1) throw std::invalid_argument("dense sizes must be at least 1");
  const long long v = static_cast<long long>(input_side) * input_side * input_side;
  if (dense_sizes.back() != v)
    throw std::invalid_argument("final dense size must equal input_side^3");
}

ParamLayout ParamLayout::of(const Architecture& arch) {
  ParamLayout lay;
  std::size_t off = 0;
  int in_ch = 1;
  for (const ConvSpec& c : arch.conv_layers) {
    Block b;
    b.fan_in = in_ch * c.kernel * c.kernel * c.kernel;
    b.fan_out = c.out_channels;
    b.w_off = off;
    b.w_count = static_cast<std::size_t>(b.fan_in) * c.out_channels;
    off += b.w_count;
    b.b_off = off;
    b.b_count = c.out_channels;
    off += b.b_count;
    lay.conv.push_back(b);
    in_ch = c.out_channels;
  }
  int in_features = arch.flatten_size();
  for (int d : arch.dense_sizes) {
    Block b;
    b.fan_in = in_features;
    b.fan_out = d;
    b.w_off = off;
    b.w_count = static_cast<std::size_t>(in_features) * d;
    off += b.w_count;
    b.b_off = off;
    b.b_count = d;
    off += b.b_count;
    lay.dense.push_back(b);
    in_features = d;
  }
  lay.total = off;
  return lay;
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  const ParamLayout lay = ParamLayout::of(arch);
  Model m;
  m.arch = arch;
  m.params.assign(lay.total, 0.0);
  m.adam.m.assign(lay.total, 0.0);
  m.adam.v.assign(lay.total, 0.0);
  m.adam.t = 0;

  SeqRng rng(seed);
  // ReLU layers: zero-mean Gaussian, variance 2/fan_in.
  for (const auto& b : lay.conv) {
    const double sigma = std::sqrt(2.0 / b.fan_in);
    for (std::size_t i = 0; i < b.w_count; ++i) m.params[b.w_off + i] = sigma * rng.normal();
  }
  for (std::size_t d = 0; d + 1 < lay.dense.size(); ++d) {
    const auto& b = lay.dense[d];
    const double sigma = std::sqrt(2.0 / b.fan_in);
    for (std::size_t i = 0; i < b.w_count; ++i) m.params[b.w_off + i] = sigma * rng.normal();
  }
  // Final sigmoid layer: uniform in +-sqrt(6/(fan_in+fan_out)).
  {
    const auto& b = lay.dense.back();
    const double bound = std::sqrt(6.0 / (b.fan_in + b.fan_out));
    for (std::size_t i = 0; i < b.w_count; ++i)
      m.params[b.w_off + i] = rng.uniform(-bound, bound);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Inference/training engine at a chosen precision. Conv layers run one
// im2col GEMM per example (bounded scratch); dense layers run one GEMM per
// batch. All accumulation orders are fixed so results never depend on
// scheduling.
template <typename S>
class Engine {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using MapMat = Eigen::Map<Mat>;
  using MapConstMat = Eigen::Map<const Mat>;
  using MapConstVec = Eigen::Map<const Vec>;

  Engine(const Architecture& arch, int max_batch)
      : arch_(arch), lay_(ParamLayout::of(arch)), max_batch_(max_batch) {
    arch_.validate();
    const int n_conv = static_cast<int>(arch_.conv_layers.size());
    int side = arch_.input_side;
    int ch = 1;
    conv_act_.resize(n_conv + 1);
    conv_act_[0].resize(static_cast<long>(side) * side * side, max_batch_);
    for (int l = 0; l < n_conv; ++l) {
      in_side_.push_back(side);
      in_ch_.push_back(ch);
      const int os = side - arch_.conv_layers[l].kernel + 1;
      out_side_.push_back(os);
      const int p = arch_.conv_layers[l].pool;
      const int ps = (os + p - 1) / p;
      pool_side_.push_back(ps);
      ch = arch_.conv_layers[l].out_channels;
      side = ps;
      conv_act_[l + 1].resize(static_cast<long>(ch) * ps * ps * ps, max_batch_);
      pool_src_.emplace_back(static_cast<long>(ch) * ps * ps * ps, max_batch_);

      const long rows = static_cast<long>(in_ch_[l]) * cube(arch_.conv_layers[l].kernel);
      const long cols = cube(os);
      const double cache_bytes =
          static_cast<double>(rows) * cols * max_batch_ * sizeof(S);
      cache_im2col_.push_back(cache_bytes <= 192.0 * (1 << 20));
      im2col_.emplace_back(rows, cache_im2col_[l] ? cols * max_batch_ : cols);
      zscratch_.emplace_back(ch, cols);
    }
    const int n_dense = static_cast<int>(arch_.dense_sizes.size());
    dense_out_.resize(n_dense);
    for (int d = 0; d < n_dense; ++d)
      dense_out_[d].resize(arch_.dense_sizes[d], max_batch_);
    target_.resize(arch_.dense_sizes.back(), max_batch_);
    grads_.assign(lay_.total, S(0));
  }

  void set_params(const std::vector<double>& p) {
    if (p.size() != lay_.total) throw std::invalid_argument("parameter size mismatch");
    params_.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) params_[i] = static_cast<S>(p[i]);
  }

  int output_size() const { return arch_.dense_sizes.back(); }

  Mat& target_buffer() { return target_; }

  // Probabilities land in dense_out_.back(); columns 0..n-1 are valid.
  const Mat& forward(const grid::OccupancyGrid* const* xs, int n) {
    if (n < 1 || n > max_batch_) throw std::invalid_argument("bad batch size");
    const long v0 = conv_act_[0].rows();
    for (int ex = 0; ex < n; ++ex) {
      const grid::OccupancyGrid& g = *xs[ex];
      if (g.dims.x() != arch_.input_side || g.dims.y() != arch_.input_side ||
          g.dims.z() != arch_.input_side)
        throw std::invalid_argument("input grid side does not match the network");
      S* dst = conv_act_[0].data() + static_cast<long>(ex) * v0;
      for (long i = 0; i < v0; ++i) dst[i] = static_cast<S>(g.data[i]);
    }
    last_n_ = n;

    const int n_conv = static_cast<int>(arch_.conv_layers.size());
    for (int l = 0; l < n_conv; ++l) {
      const auto& blk = lay_.conv[l];
      MapConstMat w(params_.data() + blk.w_off, blk.fan_in, blk.fan_out);
      MapConstVec b(params_.data() + blk.b_off, blk.b_count);
      for (int ex = 0; ex < n; ++ex) {
        S* cols = im2col_slot(l, ex);
        gather(l, ex, cols);
        MapMat k(cols, im2col_[l].rows(), cube(out_side_[l]));
        zscratch_[l].noalias() = w.transpose() * k;
        zscratch_[l].colwise() += b;
        pool_relu(l, ex);
      }
    }

    const Mat* in = &conv_act_.back();
    const int n_dense = static_cast<int>(arch_.dense_sizes.size());
    for (int d = 0; d < n_dense; ++d) {
      const auto& blk = lay_.dense[d];
      MapConstMat w(params_.data() + blk.w_off, blk.fan_in, blk.fan_out);
      MapConstVec b(params_.data() + blk.b_off, blk.b_count);
      Mat& out = dense_out_[d];
      out.leftCols(n).noalias() = w.transpose() * in->leftCols(n);
      out.leftCols(n).colwise() += b;
      S* data = out.data();
      const long rows = out.rows();
      if (d + 1 < n_dense) {
        for (long c = 0; c < n; ++c)
          for (long r = 0; r < rows; ++r) {
            S& z = data[c * rows + r];
            z = z > S(0) ? z : S(0);
          }
      } else {
        for (long c = 0; c < n; ++c)
          for (long r = 0; r < rows; ++r) {
            S& z = data[c * rows + r];
            z = stable_sigmoid(z);
          }
      }
      in = &out;
    }
    return dense_out_.back();
  }

  // Gradient of mean cross-entropy over the n*V output voxels; forward()
  // must have run for the same inputs. target_ columns 0..n-1 hold y.
  void backward(int n, std::vector<double>& grad) {
    if (n != last_n_) throw std::invalid_argument("backward batch does not match forward");
    std::fill(grads_.begin(), grads_.end(), S(0));

    const int n_dense = static_cast<int>(arch_.dense_sizes.size());
    const int n_conv = static_cast<int>(arch_.conv_layers.size());
    const long v = arch_.dense_sizes.back();
    const S inv = S(1) / (S(n) * S(v));

    Mat g = (dense_out_.back().leftCols(n) - target_.leftCols(n)) * inv;
    for (int d = n_dense - 1; d >= 0; --d) {
      const auto& blk = lay_.dense[d];
      const Mat& in = d == 0 ? conv_act_.back() : dense_out_[d - 1];
      MapMat dw(grads_.data() + blk.w_off, blk.fan_in, blk.fan_out);
      Eigen::Map<Vec> db(grads_.data() + blk.b_off, blk.b_count);
      dw.noalias() = in.leftCols(n) * g.transpose();
      db = g.rowwise().sum();
      if (d == 0 && n_conv == 0) break;
      MapConstMat w(params_.data() + blk.w_off, blk.fan_in, blk.fan_out);
      Mat gprev(blk.fan_in, n);
      gprev.noalias() = w * g;
      // ReLU mask from the post-activation input of this layer
      const S* act = in.data();
      S* gp = gprev.data();
      for (long i = 0; i < gprev.rows() * n; ++i)
        if (act[i] <= S(0)) gp[i] = S(0);
      g = std::move(gprev);
      if (d == 0) break;
    }

    for (int l = n_conv - 1; l >= 0; --l) {
      const auto& blk = lay_.conv[l];
      const int oc = arch_.conv_layers[l].out_channels;
      const long osp = cube(out_side_[l]);
      const long psp = cube(pool_side_[l]);
      MapMat dw(grads_.data() + blk.w_off, blk.fan_in, blk.fan_out);
      Eigen::Map<Vec> db(grads_.data() + blk.b_off, blk.b_count);
      MapConstMat w(params_.data() + blk.w_off, blk.fan_in, blk.fan_out);

      Mat gnext;
      if (l > 0) gnext = Mat::Zero(conv_act_[l].rows(), n);
      for (int ex = 0; ex < n; ++ex) {
        // un-pool: route each pooled gradient to its argmax source
        Mat& dconv = zscratch_[l];
        dconv.setZero();
        const int* src = pool_src_[l].data() + static_cast<long>(ex) * oc * psp;
        const S* gcol = g.data() + static_cast<long>(ex) * oc * psp;
        for (int c = 0; c < oc; ++c)
          for (long q = 0; q < psp; ++q) {
            const S val = gcol[c * psp + q];
            if (val != S(0)) dconv(c, src[c * psp + q]) = val;
          }
        S* cols = im2col_slot(l, ex);
        if (!cache_im2col_[l]) gather(l, ex, cols);
        MapMat k(cols, im2col_[l].rows(), osp);
        dw.noalias() += k * dconv.transpose();
        db += dconv.rowwise().sum();
        if (l > 0) {
          Mat dk(im2col_[l].rows(), osp);
          dk.noalias() = w * dconv;
          scatter(l, ex, dk, gnext);
        }
      }
      if (l > 0) {
        // ReLU mask of the previous pooled activation
        const S* act = conv_act_[l].data();
        S* gp = gnext.data();
        const long rows = gnext.rows();
        for (int ex = 0; ex < n; ++ex)
          for (long r = 0; r < rows; ++r)
            if (act[static_cast<long>(ex) * rows + r] <= S(0)) gp[static_cast<long>(ex) * rows + r] = S(0);
        g = std::move(gnext);
      }
    }

    grad.resize(lay_.total);
    for (std::size_t i = 0; i < lay_.total; ++i) grad[i] = static_cast<double>(grads_[i]);
  }

 private:
  static long cube(int s) { return static_cast<long>(s) * s * s; }

  S* im2col_slot(int l, int ex) {
    return im2col_[l].data() +
           (cache_im2col_[l] ? static_cast<long>(ex) * im2col_[l].rows() * cube(out_side_[l]) : 0);
  }

  // column o of the im2col matrix holds the receptive field of output o
  void gather(int l, int ex, S* cols) {
    const int s = in_side_[l];
    const int os = out_side_[l];
    const int k = arch_.conv_layers[l].kernel;
    const int ic = in_ch_[l];
    const long s3 = cube(s);
    const S* a = conv_act_[l].data() + static_cast<long>(ex) * ic * s3;
    const long rows = static_cast<long>(ic) * k * k * k;
    for (int oz = 0; oz < os; ++oz)
      for (int oy = 0; oy < os; ++oy)
        for (int ox = 0; ox < os; ++ox) {
          S* dst = cols + (static_cast<long>(ox) + static_cast<long>(os) * (oy + static_cast<long>(os) * oz)) * rows;
          for (int c = 0; c < ic; ++c)
            for (int kz = 0; kz < k; ++kz)
              for (int ky = 0; ky < k; ++ky) {
                const S* srcp =
                    a + c * s3 + (static_cast<long>(oz + kz) * s + (oy + ky)) * s + ox;
                for (int kx = 0; kx < k; ++kx) *dst++ = srcp[kx];
              }
        }
  }

  // transpose of gather: accumulate receptive-field gradients into the input
  void scatter(int l, int ex, const Mat& dk, Mat& gnext) {
    const int s = in_side_[l];
    const int os = out_side_[l];
    const int k = arch_.conv_layers[l].kernel;
    const int ic = in_ch_[l];
    const long s3 = cube(s);
    S* a = gnext.data() + static_cast<long>(ex) * ic * s3;
    const long rows = dk.rows();
    for (int oz = 0; oz < os; ++oz)
      for (int oy = 0; oy < os; ++oy)
        for (int ox = 0; ox < os; ++ox) {
          const S* src = dk.data() + (static_cast<long>(ox) + static_cast<long>(os) * (oy + static_cast<long>(os) * oz)) * rows;
          for (int c = 0; c < ic; ++c)
            for (int kz = 0; kz < k; ++kz)
              for (int ky = 0; ky < k; ++ky) {
                S* dstp = a + c * s3 + (static_cast<long>(oz + kz) * s + (oy + ky)) * s + ox;
                for (int kx = 0; kx < k; ++kx) dstp[kx] += src[kx];
                src += k;
              }
        }
  }

  void pool_relu(int l, int ex) {
    const int os = out_side_[l];
    const int ps = pool_side_[l];
    const int p = arch_.conv_layers[l].pool;
    const int oc = arch_.conv_layers[l].out_channels;
    const long psp = cube(ps);
    const Mat& z = zscratch_[l];
    S* out = conv_act_[l + 1].data() + static_cast<long>(ex) * oc * psp;
    int* src = pool_src_[l].data() + static_cast<long>(ex) * oc * psp;
    for (int c = 0; c < oc; ++c)
      for (int pz = 0; pz < ps; ++pz)
        for (int py = 0; py < ps; ++py)
          for (int px = 0; px < ps; ++px) {
            S best = std::numeric_limits<S>::lowest();
            long best_idx = 0;
            for (int dz = pz * p; dz < std::min((pz + 1) * p, os); ++dz)
              for (int dy = py * p; dy < std::min((py + 1) * p, os); ++dy)
                for (int dx = px * p; dx < std::min((px + 1) * p, os); ++dx) {
                  const long idx = dx + static_cast<long>(os) * (dy + static_cast<long>(os) * dz);
                  const S v = z(c, idx);
                  if (v > best) {
                    best = v;
                    best_idx = idx;
                  }
                }
            const long q = px + static_cast<long>(ps) * (py + static_cast<long>(ps) * pz);
            out[c * psp + q] = best > S(0) ? best : S(0);
            src[c * psp + q] = static_cast<int>(best_idx);
          }
  }

  Architecture arch_;
  ParamLayout lay_;
  int max_batch_;
  int last_n_ = 0;
  std::vector<int> in_side_, in_ch_, out_side_, pool_side_;
  std::vector<S> params_, grads_;
  std::vector<Mat> conv_act_;   // [0] = input, [l+1] = pooled+ReLU output of layer l
  std::vector<Mat> dense_out_;  // post-activation; back() = probabilities
  std::vector<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>> pool_src_;
  std::vector<Mat> im2col_;
  std::vector<Mat> zscratch_;
  std::vector<char> cache_im2col_;
  Mat target_;
};

grid::WeightedGrid forward(const Model& m, const grid::OccupancyGrid& x) {
  Engine<double> eng(m.arch, 1);
  eng.set_params(m.params);
  const grid::OccupancyGrid* xs[1] = {&x};
  const auto& p = eng.forward(xs, 1);

  grid::WeightedGrid out = grid::WeightedGrid::zeros(x.dims);
  // strictly inside (0,1): saturated sigmoids are nudged off the endpoints
  const double hi = std::nextafter(1.0, 0.0);
  const double lo = std::nextafter(0.0, 1.0);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::min(hi, std::max(lo, p(static_cast<long>(i), 0)));
  return out;
}

double cross_entropy(const grid::OccupancyGrid& y, const grid::WeightedGrid& y_pred) {
  if (y.dims != y_pred.dims) throw std::invalid_argument("grid dims mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double p = std::min(1.0 - 1e-7, std::max(1e-7, y_pred.data[i]));
    sum += y.data[i] ? -std::log(p) : -std::log1p(-p);
  }
  return sum / static_cast<double>(y.data.size());
}

namespace {

std::vector<double> backward_impl(const Model& m, const grid::OccupancyGrid& x,
                                  const std::function<double(std::size_t)>& target) {
  Engine<double> eng(m.arch, 1);
  eng.set_params(m.params);
  const grid::OccupancyGrid* xs[1] = {&x};
  eng.forward(xs, 1);
  auto& t = eng.target_buffer();
  for (long i = 0; i < t.rows(); ++i) t(i, 0) = target(static_cast<std::size_t>(i));
  std::vector<double> grad;
  eng.backward(1, grad);
  return grad;
}

}  // namespace

std::vector<double> backward(const Model& m, const grid::OccupancyGrid& x,
                             const grid::OccupancyGrid& y) {
  if (y.dims.x() != m.arch.input_side || y.dims.y() != m.arch.input_side ||
      y.dims.z() != m.arch.input_side)
    throw std::invalid_argument("target grid side does not match the network");
  return backward_impl(m, x, [&](std::size_t i) { return y.data[i] ? 1.0 : 0.0; });
}

std::vector<double> backward(const Model& m, const grid::OccupancyGrid& x,
                             const grid::WeightedGrid& target) {
  if (target.dims.x() != m.arch.input_side || target.dims.y() != m.arch.input_side ||
      target.dims.z() != m.arch.input_side)
    throw std::invalid_argument("target grid side does not match the network");
  return backward_impl(m, x, [&](std::size_t i) { return target.data[i]; });
}

void adam_step(Model& m, const std::vector<double>& grad, const TrainConfig& cfg) {
  if (grad.size() != m.params.size()) throw std::invalid_argument("gradient size mismatch");
  if (cfg.beta1 <= 0 || cfg.beta1 >= 1 || cfg.beta2 <= 0 || cfg.beta2 >= 1)
    throw std::invalid_argument("betas must lie strictly inside (0,1)");
  if (cfg.epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  for (double g : grad)
    if (!std::isfinite(g)) throw numerical_error("gradient overflow");

  m.adam.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(m.adam.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(m.adam.t));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    m.adam.m[i] = cfg.beta1 * m.adam.m[i] + (1.0 - cfg.beta1) * g;
    m.adam.v[i] = cfg.beta2 * m.adam.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m.adam.m[i] / c1;
    const double vhat = m.adam.v[i] / c2;
    m.params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

namespace {

double jaccard_at_half(const float* probs, const grid::OccupancyGrid& y) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const bool a = probs[i] >= 0.5f;
    const bool b = y.data[i] != 0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// without replacement, deterministic in (key, n, k)
std::vector<std::size_t> pick_subset(std::size_t n, std::size_t k, std::uint64_t key) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const CounterRng rng(key);
  const std::size_t take = std::min(n, k);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.index(i, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return idx;
}

}  // namespace

TrainResult train(const Model& m, const datagen::Dataset& ds, const TrainConfig& cfg) {
  m.arch.validate();
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (cfg.eval_every < 1) throw std::invalid_argument("eval_every must be at least 1");
  if (cfg.max_batches < 0) throw std::invalid_argument("max_batches must be non-negative");
  if (ds.pairs.empty()) throw std::invalid_argument("dataset is empty");
  if (ds.side != m.arch.input_side)
    throw std::invalid_argument("dataset grid side does not match the network");

  std::vector<std::size_t> split_idx[3];
  for (std::size_t i = 0; i < ds.pairs.size(); ++i)
    split_idx[static_cast<int>(ds.pairs[i].spec.split)].push_back(i);
  const auto& train_idx = split_idx[static_cast<int>(datagen::Split::TrainView)];
  if (train_idx.empty()) throw std::invalid_argument("dataset has no training views");

  // eval subsets are fixed once per run
  std::vector<std::size_t> eval_idx[3];
  for (int s = 0; s < 3; ++s) {
    const auto picks =
        pick_subset(split_idx[s].size(), kEvalSubset, splitmix64(cfg.seed ^ kEvalStream) + s);
    for (std::size_t p : picks) eval_idx[s].push_back(split_idx[s][p]);
  }

  Engine<float> eng(m.arch, cfg.batch_size);
  Model cur = m;
  eng.set_params(cur.params);

  const auto evaluate = [&](int batch) {
    HistoryRow row;
    row.batch = batch;
    double* fields[3] = {&row.train_view, &row.holdout_view, &row.holdout_model};
    for (int s = 0; s < 3; ++s) {
      if (eval_idx[s].empty()) {
        *fields[s] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double sum = 0;
      std::size_t done = 0;
      while (done < eval_idx[s].size()) {
        const int n =
            static_cast<int>(std::min<std::size_t>(cfg.batch_size, eval_idx[s].size() - done));
        std::vector<const grid::OccupancyGrid*> xs(n);
        for (int i = 0; i < n; ++i) xs[i] = &ds.pairs[eval_idx[s][done + i]].x;
        const auto& p = eng.forward(xs.data(), n);
        for (int i = 0; i < n; ++i)
          sum += jaccard_at_half(p.data() + static_cast<long>(i) * p.rows(),
                                 ds.pairs[eval_idx[s][done + i]].y);
        done += n;
      }
      *fields[s] = sum / static_cast<double>(eval_idx[s].size());
    }
    return row;
  };

  TrainResult result;
  result.history.push_back(evaluate(0));
  result.peak_model = cur;
  result.peak_holdout_model = std::numeric_limits<double>::quiet_NaN();
  if (!std::isnan(result.history[0].holdout_model))
    result.peak_holdout_model = result.history[0].holdout_model;

  const CounterRng batch_rng(splitmix64(cfg.seed ^ kBatchStream));
  std::vector<const grid::OccupancyGrid*> xs(cfg.batch_size);
  std::vector<const grid::OccupancyGrid*> ys(cfg.batch_size);
  std::vector<double> grad;

  for (int b = 1; b <= cfg.max_batches; ++b) {
    for (int i = 0; i < cfg.batch_size; ++i) {
      const std::uint64_t counter =
          static_cast<std::uint64_t>(b - 1) * cfg.batch_size + i;
      const std::size_t pick = train_idx[batch_rng.index(counter, train_idx.size())];
      xs[i] = &ds.pairs[pick].x;
      ys[i] = &ds.pairs[pick].y;
    }
    eng.forward(xs.data(), cfg.batch_size);
    auto& t = eng.target_buffer();
    for (int i = 0; i < cfg.batch_size; ++i) {
      float* col = t.data() + static_cast<long>(i) * t.rows();
      const auto& ydata = ys[i]->data;
      for (long r = 0; r < t.rows(); ++r) col[r] = ydata[r] ? 1.0f : 0.0f;
    }
    eng.backward(cfg.batch_size, grad);
    adam_step(cur, grad, cfg);
    eng.set_params(cur.params);

    if (b % cfg.eval_every == 0 || b == cfg.max_batches) {
      const HistoryRow row = evaluate(b);
      result.history.push_back(row);
      if (!std::isnan(row.holdout_model) &&
          (std::isnan(result.peak_holdout_model) || row.holdout_model > result.peak_holdout_model)) {
        result.peak_holdout_model = row.holdout_model;
        result.peak_model = cur;
      }
    }
  }
  result.final_model = std::move(cur);
  return result;
}

// --------------------------- model serialization ---------------------------

namespace {

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}
void put_u32(std::string& out, std::uint32_t v) { put_bytes(out, &v, 4); }
void put_i32(std::string& out, std::int32_t v) { put_bytes(out, &v, 4); }
void put_u64(std::string& out, std::uint64_t v) { put_bytes(out, &v, 8); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void read(void* p, std::size_t n) {
    if (pos + n > buf.size()) throw io_error("truncated model file");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, 4);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    read(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, 8);
    return v;
  }
};

}  // namespace

void save_model(const Model& m, const std::string& path) {
  m.arch.validate();
  const ParamLayout lay = ParamLayout::of(m.arch);
  if (m.params.size() != lay.total) throw std::invalid_argument("parameter size mismatch");

  std::string buf;
  buf.reserve(m.params.size() * 8 + 256);
  put_bytes(buf, "VXCN", 4);
  put_u32(buf, kModelVersion);
  put_i32(buf, m.arch.input_side);
  put_u32(buf, static_cast<std::uint32_t>(m.arch.conv_layers.size()));
  for (const ConvSpec& c : m.arch.conv_layers) {
    put_i32(buf, c.out_channels);
    put_i32(buf, c.kernel);
    put_i32(buf, c.pool);
  }
  put_u32(buf, static_cast<std::uint32_t>(m.arch.dense_sizes.size()));
  for (int d : m.arch.dense_sizes) put_i32(buf, d);
  put_u64(buf, m.params.size());
  put_bytes(buf, m.params.data(), m.params.size() * 8);

  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  put_u32(buf, crc);
  atomic_write_file(path, buf);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open model file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 + 4) throw io_error("truncated model file");

  const std::uint32_t stored_crc = [&] {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + buf.size() - 4, 4);
    return v;
  }();
  const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
      0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
  if (crc != stored_crc) throw io_error("model file checksum mismatch");

  Reader r{buf};
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, "VXCN", 4) != 0) throw io_error("bad model magic");
  if (r.u32() != kModelVersion) throw io_error("unsupported model version");

  Model m;
  m.arch.input_side = r.i32();
  const std::uint32_t n_conv = r.u32();
  if (n_conv > 64) throw io_error("implausible conv layer count");
  for (std::uint32_t i = 0; i < n_conv; ++i) {
    ConvSpec c;
    c.out_channels = r.i32();
    c.kernel = r.i32();
    c.pool = r.i32();
    m.arch.conv_layers.push_back(c);
  }
  const std::uint32_t n_dense = r.u32();
  if (n_dense > 64) throw io_error("implausible dense layer count");
  for (std::uint32_t i = 0; i < n_dense; ++i) m.arch.dense_sizes.push_back(r.i32());

  try {
    m.arch.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(std::string("model file declares an invalid architecture: ") + e.what());
  }
  const ParamLayout lay = ParamLayout::of(m.arch);
  const std::uint64_t count = r.u64();
  if (count != lay.total) throw io_error("parameter count does not match the architecture");
  if (r.pos + count * 8 + 4 != buf.size()) throw io_error("truncated model file");
  m.params.resize(count);
  r.read(m.params.data(), count * 8);
  m.adam.m.assign(count, 0.0);
  m.adam.v.assign(count, 0.0);
  m.adam.t = 0;
  return m;
}

template <typename S>
double loss_at(const Model& m, const grid::OccupancyGrid& x, const grid::OccupancyGrid& y) {
  Engine<S> eng(m.arch, 1);
  eng.set_params(m.params);
  const grid::OccupancyGrid* xs[1] = {&x};
  const auto& p = eng.forward(xs, 1);
  // the training objective itself: mean cross-entropy, no clamping
  long double sum = 0;
  for (long i = 0; i < p.rows(); ++i) {
    const long double pi = static_cast<long double>(p(i, 0));
    sum += y.data[static_cast<std::size_t>(i)] ? -std::log(pi) : -std::log1p(-pi);
  }
  return static_cast<double>(sum / static_cast<long double>(p.rows()));
}

template double loss_at<float>(const Model&, const grid::OccupancyGrid&,
                               const grid::OccupancyGrid&);
template double loss_at<double>(const Model&, const grid::OccupancyGrid&,
                                const grid::OccupancyGrid&);
template double loss_at<long double>(const Model&, const grid::OccupancyGrid&,
                                     const grid::OccupancyGrid&);

}  // namespace voxc::net
