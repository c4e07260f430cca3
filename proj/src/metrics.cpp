#include "voxc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <utility>

#include "voxc/common.hpp"

namespace voxc::metrics {

namespace {

constexpr std::uint64_t kGeoSampleMix = 0x71c9a3d208f5b461ULL;
constexpr std::uint64_t kGmmInitMix = 0x3b8e15f6a92d47c3ULL;
constexpr double kLn2 = 0.6931471805599453;
constexpr int kJsQuadraturePoints = 2048;

std::vector<std::vector<std::pair<int, double>>> edge_graph(const geom::TriMesh& m) {
  std::vector<std::vector<std::pair<int, double>>> adj(m.vertices.size());
  for (const Vec3i& t : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      const double w = (m.vertices[static_cast<std::size_t>(a)] -
                        m.vertices[static_cast<std::size_t>(b)])
                           .norm();
      adj[static_cast<std::size_t>(a)].push_back({b, w});
      adj[static_cast<std::size_t>(b)].push_back({a, w});
    }
  }
  return adj;
}

// Vertices of the largest edge-connected component, ascending index order.
std::vector<int> largest_component(const std::vector<std::vector<std::pair<int, double>>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  int best_label = -1;
  std::size_t best_size = 0;
  int labels = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0 || adj[static_cast<std::size_t>(s)].empty()) continue;
    const int label = labels++;
    std::size_t size = 0;
    stack.assign(1, s);
    comp[static_cast<std::size_t>(s)] = label;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++size;
      for (const auto& [u, w] : adj[static_cast<std::size_t>(v)]) {
        (void)w;
        if (comp[static_cast<std::size_t>(u)] < 0) {
          comp[static_cast<std::size_t>(u)] = label;
          stack.push_back(u);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = label;
    }
  }
  std::vector<int> out;
  out.reserve(best_size);
  for (int v = 0; v < n; ++v)
    if (comp[static_cast<std::size_t>(v)] == best_label) out.push_back(v);
  return out;
}

std::vector<double> dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj,
                             int source) {
  std::vector<double> dist(adj.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(v)]) continue;
    for (const auto& [u, w] : adj[static_cast<std::size_t>(v)]) {
      const double nd = d + w;
      if (nd < dist[static_cast<std::size_t>(u)]) {
        dist[static_cast<std::size_t>(u)] = nd;
        heap.push({nd, u});
      }
    }
  }
  return dist;
}

struct GmmFit {
  std::vector<GmmComponent> components;
  bool collapsed = false;
};

GmmFit fit_gmm_once(const std::vector<double>& xs, int k, std::uint64_t seed) {
  const std::size_t n = xs.size();
  GmmFit fit;

  // seeded distinct starting means, shared variance
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  CounterRng rng(splitmix64(seed ^ kGmmInitMix));
  const std::size_t kk = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < std::min(kk, n); ++i)
    std::swap(idx[i], idx[i + rng.index(i, n - i)]);

  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var = std::max(var / static_cast<double>(n), 1e-8);

  std::vector<double> w(kk, 1.0 / static_cast<double>(k));
  std::vector<double> mu(kk), s2(kk, var);
  for (std::size_t c = 0; c < kk; ++c) mu[c] = xs[idx[c % n]];

  std::vector<double> resp(kk);
  double ll_prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    std::vector<double> nk(kk, 0.0), sum_x(kk, 0.0), sum_xx(kk, 0.0);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        resp[c] = std::log(w[c]) - 0.5 * std::log(2.0 * M_PI * s2[c]) -
                  (xs[i] - mu[c]) * (xs[i] - mu[c]) / (2.0 * s2[c]);
        best = std::max(best, resp[c]);
      }
      double denom = 0.0;
      for (std::size_t c = 0; c < kk; ++c) denom += std::exp(resp[c] - best);
      ll += best + std::log(denom);
      for (std::size_t c = 0; c < kk; ++c) {
        const double r = std::exp(resp[c] - best) / denom;
        nk[c] += r;
        sum_x[c] += r * xs[i];
        sum_xx[c] += r * xs[i] * xs[i];
      }
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (nk[c] < 1e-12) {
        fit.collapsed = true;
        return fit;
      }
      w[c] = nk[c] / static_cast<double>(n);
      mu[c] = sum_x[c] / nk[c];
      s2[c] = sum_xx[c] / nk[c] - mu[c] * mu[c];
      if (s2[c] < 1e-12) {
        fit.collapsed = true;
        return fit;
      }
    }
    if (std::abs(ll - ll_prev) < 1e-8) break;
    ll_prev = ll;
  }

  fit.components.resize(kk);
  for (std::size_t c = 0; c < kk; ++c) fit.components[c] = {w[c], mu[c], s2[c]};
  return fit;
}

std::vector<GmmComponent> fit_gmm(const std::vector<double>& xs, int k, std::uint64_t seed) {
  GmmFit fit = fit_gmm_once(xs, k, seed);
  if (fit.collapsed) fit = fit_gmm_once(xs, k, splitmix64(seed) + 1);
  if (fit.collapsed) throw numerical_error("degenerate mixture variance");
  return fit.components;
}

double mixture_pdf(const std::vector<GmmComponent>& g, double x) {
  double p = 0.0;
  for (const GmmComponent& c : g)
    p += c.weight * std::exp(-(x - c.mean) * (x - c.mean) / (2.0 * c.variance)) /
         std::sqrt(2.0 * M_PI * c.variance);
  return p;
}

double js_divergence(const std::vector<GmmComponent>& ga, const std::vector<GmmComponent>& gb) {
  const double dx = 1.0 / kJsQuadraturePoints;
  double a = 0.0, b = 0.0;
  for (int i = 0; i < kJsQuadraturePoints; ++i) {
    const double x = (i + 0.5) * dx;
    const double p = mixture_pdf(ga, x), q = mixture_pdf(gb, x);
    const double m = 0.5 * (p + q);
    if (p > 0.0) a += p * std::log(p / m);
    if (q > 0.0) b += q * std::log(q / m);
  }
  return std::max(0.5 * (a + b) * dx, 0.0);
}

double directed_mean_distance(const geom::TriMesh& from, const geom::MeshBvh& to_bvh,
                              int n_samples, std::uint64_t seed) {
  const PointCloud samples = geom::sample_surface(from, n_samples, seed);
  std::vector<double> d(samples.size(), 0.0);
  parallel_for(static_cast<std::int64_t>(samples.size()), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i)
      d[static_cast<std::size_t>(i)] = to_bvh.nearest_distance(samples[static_cast<std::size_t>(i)]);
  });
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(d.size());
}

}  // namespace

double jaccard(const grid::OccupancyGrid& a, const grid::OccupancyGrid& b) {
  a.validate();
  b.validate();
  if (a.dims != b.dims) throw std::invalid_argument("grid dims mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool va = a.data[i] != 0, vb = b.data[i] != 0;
    inter += va && vb;
    uni += va || vb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mesh_jaccard(const geom::TriMesh& a, const geom::TriMesh& b, int side) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mesh_jaccard needs non-empty meshes");
  if (side < 8) throw std::invalid_argument("grid side must be at least 8");
  const auto [alo, ahi] = a.bounds();
  const auto [blo, bhi] = b.bounds();
  const Vec3 lo = alo.cwiseMin(blo), hi = ahi.cwiseMax(bhi);
  const double extent = std::max((hi - lo).maxCoeff(), 1e-12);

  grid::EmbedTransform t;
  t.scale = (side - 2) / extent;
  t.offset = Vec3::Constant(0.5 * side) - 0.5 * (lo + hi) * t.scale;
  return jaccard(geom::solid_voxelize_into(a, side, t), geom::solid_voxelize_into(b, side, t));
}

double hausdorff_symmetric(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples,
                           std::uint64_t seed) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff needs non-empty meshes");
  if (n_samples < 100) throw std::invalid_argument("hausdorff needs at least 100 samples");
  a.validate();
  b.validate();
  const geom::MeshBvh bvh_a(a), bvh_b(b);
  const double ab = directed_mean_distance(a, bvh_b, n_samples, seed);
  const double ba = directed_mean_distance(b, bvh_a, n_samples, seed);
  return 1000.0 * 0.5 * (ab + ba);
}

GeodesicDescriptor geodesic_descriptor(const geom::TriMesh& m, int n_samples, int k,
                                       std::uint64_t seed) {
  if (m.empty()) throw std::invalid_argument("geodesic descriptor needs a non-empty mesh");
  if (n_samples < 2) throw std::invalid_argument("geodesic descriptor needs at least 2 samples");
  if (k < 1) throw std::invalid_argument("mixture needs at least 1 component");
  m.validate();

  const auto adj = edge_graph(m);
  const std::vector<int> comp = largest_component(adj);
  if (comp.size() < 2) throw std::invalid_argument("mesh too small for a geodesic descriptor");

  // deterministic distinct vertex sample from the component
  const std::size_t n_pick = std::min<std::size_t>(static_cast<std::size_t>(n_samples), comp.size());
  std::vector<int> pool = comp;
  CounterRng rng(splitmix64(seed ^ kGeoSampleMix));
  for (std::size_t i = 0; i < n_pick; ++i)
    std::swap(pool[i], pool[i + rng.index(i, pool.size() - i)]);
  std::vector<int> picks(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_pick));

  std::vector<double> values(n_pick, 0.0);
  parallel_for(static_cast<std::int64_t>(n_pick), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::vector<double> dist = dijkstra(adj, picks[static_cast<std::size_t>(i)]);
      double sum = 0.0;
      for (std::size_t j = 0; j < n_pick; ++j)
        if (j != static_cast<std::size_t>(i)) sum += dist[static_cast<std::size_t>(picks[j])];
      values[static_cast<std::size_t>(i)] = sum / static_cast<double>(n_pick - 1);
    }
  });

  const double vmax = *std::max_element(values.begin(), values.end());
  if (!(vmax > 0.0)) throw std::invalid_argument("degenerate mesh geometry");
  for (double& v : values) v /= vmax;

  GeodesicDescriptor out;
  out.values = std::move(values);
  out.gmm = fit_gmm(out.values, k, seed);
  return out;
}

double geodesic_divergence(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples, int k,
                           std::uint64_t seed) {
  if (n_samples < 200) throw std::invalid_argument("geodesic divergence needs at least 200 samples");
  if (k < 1) throw std::invalid_argument("mixture needs at least 1 component");
  const GeodesicDescriptor da = geodesic_descriptor(a, n_samples, k, seed);
  const GeodesicDescriptor db = geodesic_descriptor(b, n_samples, k, seed);
  return js_divergence(da.gmm, db.gmm);
}

SuiteResult evaluate_suite(const std::vector<SuiteEntry>& entries, const SuiteParams& params) {
  if (entries.empty()) throw std::invalid_argument("no completions to evaluate");
  if (params.mesh_jaccard_side < 8) throw std::invalid_argument("grid side must be at least 8");
  if (params.hausdorff_samples < 100)
    throw std::invalid_argument("hausdorff needs at least 100 samples");
  if (params.geodesic_samples < 200)
    throw std::invalid_argument("geodesic divergence needs at least 200 samples");
  if (params.gmm_components < 1) throw std::invalid_argument("mixture needs at least 1 component");

  SuiteResult result;
  result.rows.resize(entries.size());
  parallel_for(static_cast<std::int64_t>(entries.size()), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const SuiteEntry& entry = entries[static_cast<std::size_t>(i)];
      SuiteRow& row = result.rows[static_cast<std::size_t>(i)];
      row.index = static_cast<std::size_t>(i);
      row.method = entry.method;
      row.split = entry.split;
      if (entry.completion.empty() || entry.ground_truth.empty()) {
        if (entry.completion.empty() && entry.ground_truth.empty()) {
          row.metrics = {1.0, 0.0, 0.0};
        } else {
          const geom::TriMesh& have =
              entry.completion.empty() ? entry.ground_truth : entry.completion;
          const auto [lo, hi] = have.bounds();
          row.metrics = {0.0, 1000.0 * (hi - lo).norm(), kLn2};
        }
        continue;
      }
      try {
        row.metrics.jaccard =
            mesh_jaccard(entry.completion, entry.ground_truth, params.mesh_jaccard_side);
        row.metrics.hausdorff_mm = hausdorff_symmetric(entry.completion, entry.ground_truth,
                                                       params.hausdorff_samples, params.seed);
        row.metrics.geodesic_js =
            geodesic_divergence(entry.completion, entry.ground_truth, params.geodesic_samples,
                                params.gmm_components, params.seed);
      } catch (const std::exception&) {
        const auto [lo, hi] = entry.ground_truth.bounds();
        row.metrics = {0.0, 1000.0 * (hi - lo).norm(), kLn2};
      }
    }
  });

  std::map<std::pair<std::string, int>, SuiteCell> cells;
  for (const SuiteRow& row : result.rows) {
    SuiteCell& cell = cells[{row.method, static_cast<int>(row.split)}];
    cell.method = row.method;
    cell.split = row.split;
    ++cell.count;
    cell.mean.jaccard += row.metrics.jaccard;
    cell.mean.hausdorff_mm += row.metrics.hausdorff_mm;
    cell.mean.geodesic_js += row.metrics.geodesic_js;
  }
  for (auto& [key, cell] : cells) {
    (void)key;
    const double n = static_cast<double>(cell.count);
    cell.mean.jaccard /= n;
    cell.mean.hausdorff_mm /= n;
    cell.mean.geodesic_js /= n;
    result.cells.push_back(cell);
  }
  return result;
}

}  // namespace voxc::metrics
