#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "voxc/complete.hpp"
#include "voxc/datagen.hpp"
#include "voxc/geom.hpp"
#include "voxc/grid.hpp"
#include "voxc/io.hpp"
#include "voxc/metrics.hpp"
#include "voxc/net.hpp"
#include "voxc/postprocess.hpp"
#include "voxc/shapes.hpp"

namespace py = pybind11;
using namespace voxc;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

PointCloud to_cloud(const DoubleArray& points) {
  if (points.ndim() != 2 || points.shape(1) != 3)
    throw std::invalid_argument("points must have shape (n, 3)");
  PointCloud pc(points.shape(0));
  const auto view = points.unchecked<2>();
  for (py::ssize_t i = 0; i < points.shape(0); ++i)
    pc[i] = Vec3(view(i, 0), view(i, 1), view(i, 2));
  return pc;
}

py::array_t<double> from_cloud(const PointCloud& pc) {
  py::array_t<double> out({py::ssize_t(pc.size()), py::ssize_t(3)});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (int k = 0; k < 3; ++k) view(i, k) = pc[i][k];
  return out;
}

geom::TriMesh to_mesh(const DoubleArray& vertices, const IntArray& triangles) {
  if (vertices.ndim() != 2 || vertices.shape(1) != 3)
    throw std::invalid_argument("vertices must have shape (n, 3)");
  if (triangles.ndim() != 2 || triangles.shape(1) != 3)
    throw std::invalid_argument("triangles must have shape (m, 3)");
  geom::TriMesh m;
  m.vertices.resize(vertices.shape(0));
  const auto v = vertices.unchecked<2>();
  for (py::ssize_t i = 0; i < vertices.shape(0); ++i)
    m.vertices[i] = Vec3(v(i, 0), v(i, 1), v(i, 2));
  m.triangles.resize(triangles.shape(0));
  const auto t = triangles.unchecked<2>();
  for (py::ssize_t i = 0; i < triangles.shape(0); ++i)
    m.triangles[i] = Vec3i(t(i, 0), t(i, 1), t(i, 2));
  m.validate();
  return m;
}

py::tuple from_mesh(const geom::TriMesh& m) {
  py::array_t<int> tris({py::ssize_t(m.triangles.size()), py::ssize_t(3)});
  auto t = tris.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.triangles.size(); ++i)
    for (int k = 0; k < 3; ++k) t(i, k) = m.triangles[i][k];
  return py::make_tuple(from_cloud(m.vertices), tris);
}

// Grids cross the boundary as arrays indexed [x, y, z]; the backing buffer
// is x-fastest, so the strides below expose it without reshuffling.
grid::OccupancyGrid to_grid(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2))
    throw std::invalid_argument("grid must have shape (side, side, side)");
  const int side = int(a.shape(0));
  grid::OccupancyGrid g = grid::OccupancyGrid::empty(side);
  const auto view = a.unchecked<3>();
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y)
      for (int z = 0; z < side; ++z) g.set(x, y, z, view(x, y, z) != 0);
  return g;
}

py::array_t<std::uint8_t> from_grid(const grid::OccupancyGrid& g) {
  const py::ssize_t x = g.dims.x(), y = g.dims.y(), z = g.dims.z();
  return py::array_t<std::uint8_t>({x, y, z}, {py::ssize_t(1), x, x * y}, g.data.data());
}

py::array_t<double> from_field(const grid::WeightedGrid& f) {
  const py::ssize_t x = f.dims.x(), y = f.dims.y(), z = f.dims.z();
  const py::ssize_t w = py::ssize_t(sizeof(double));
  return py::array_t<double>({x, y, z}, {w, x * w, x * y * w}, f.data.data());
}

grid::WeightedGrid to_field(const DoubleArray& a) {
  if (a.ndim() != 3) throw std::invalid_argument("field must be a 3d array");
  grid::WeightedGrid f =
      grid::WeightedGrid::zeros(Vec3i(int(a.shape(0)), int(a.shape(1)), int(a.shape(2))));
  const auto view = a.unchecked<3>();
  for (py::ssize_t x = 0; x < a.shape(0); ++x)
    for (py::ssize_t y = 0; y < a.shape(1); ++y)
      for (py::ssize_t z = 0; z < a.shape(2); ++z)
        f.data[f.index(int(x), int(y), int(z))] = view(x, y, z);
  return f;
}

py::array_t<double> from_vec3(const Vec3& v) {
  py::array_t<double> out(3);
  auto view = out.mutable_unchecked<1>();
  for (int k = 0; k < 3; ++k) view(k) = v[k];
  return out;
}

grid::EmbedTransform to_transform(double scale, const DoubleArray& offset) {
  if (offset.ndim() != 1 || offset.shape(0) != 3)
    throw std::invalid_argument("offset must have shape (3,)");
  const auto view = offset.unchecked<1>();
  return {scale, Vec3(view(0), view(1), view(2))};
}

net::Architecture to_arch(int side, const std::vector<std::tuple<int, int, int>>& conv,
                          const std::vector<int>& dense) {
  net::Architecture a;
  a.input_side = side;
  if (conv.empty() && dense.empty()) return net::Architecture::defaults(side);
  for (const auto& [channels, kernel, pool] : conv) a.conv_layers.push_back({channels, kernel, pool});
  a.dense_sizes = dense;
  a.dense_sizes.push_back(side * side * side);
  a.validate();
  return a;
}

complete::Completer to_completer(const std::string& method, const net::Model* model) {
  if (method == "partial") return complete::Completer::partial();
  if (method == "mirror") return complete::Completer::mirror();
  if (method == "cnn") {
    if (!model) throw std::invalid_argument("method \"cnn\" needs a model");
    return complete::Completer::cnn(*model);
  }
  throw std::invalid_argument("unknown method \"" + method +
                              "\"; expected partial, mirror, or cnn");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "voxel occupancy shape completion";

  py::register_exception<io_error>(m, "IoError", PyExc_OSError);
  py::register_exception<numerical_error>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<net::Model>(m, "Model")
      .def_property_readonly("side", [](const net::Model& mod) { return mod.arch.input_side; })
      .def_property_readonly("parameter_count",
                             [](const net::Model& mod) { return mod.params.size(); })
      .def("save", [](const net::Model& mod, const std::string& path) { net::save_model(mod, path); },
           py::arg("path"));

  m.def("shape_families", [] { return geom::shape_family_names(); });
  m.def(
      "make_shape",
      [](const std::string& family, std::uint64_t seed) {
        SeqRng rng(seed);
        return from_mesh(geom::make_shape(family, rng));
      },
      py::arg("family"), py::arg("seed") = 0);

  m.def(
      "load_mesh", [](const std::string& path) { return from_mesh(io::load_mesh(path)); },
      py::arg("path"));
  m.def(
      "save_mesh",
      [](const std::string& path, const DoubleArray& v, const IntArray& t) {
        const geom::TriMesh mesh = to_mesh(v, t);
        if (path.size() >= 4 && path.substr(path.size() - 4) == ".stl")
          io::save_mesh_stl(mesh, path);
        else
          io::save_mesh_off(mesh, path);
      },
      py::arg("path"), py::arg("vertices"), py::arg("triangles"));
  m.def(
      "is_closed",
      [](const DoubleArray& v, const IntArray& t) { return geom::is_closed(to_mesh(v, t)); },
      py::arg("vertices"), py::arg("triangles"));

  m.def(
      "load_cloud", [](const std::string& path) { return from_cloud(io::load_pointcloud(path)); },
      py::arg("path"));
  m.def(
      "save_cloud",
      [](const std::string& path, const DoubleArray& points, bool binary) {
        if (binary)
          io::save_pointcloud_binary(to_cloud(points), path);
        else
          io::save_pointcloud_ascii(to_cloud(points), path);
      },
      py::arg("path"), py::arg("points"), py::arg("binary") = true);

  m.def(
      "solid_voxelize",
      [](const DoubleArray& v, const IntArray& t, int side) {
        const geom::TriMesh mesh = to_mesh(v, t);
        grid::OccupancyGrid g;
        {
          py::gil_scoped_release release;
          g = geom::solid_voxelize(mesh, side);
        }
        return from_grid(g);
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("side"));
  m.def(
      "marching_cubes",
      [](const DoubleArray& field, double isolevel) {
        return from_mesh(geom::marching_cubes(to_field(field), isolevel));
      },
      py::arg("field"), py::arg("isolevel") = 0.5);

  m.def(
      "generate_pair",
      [](const DoubleArray& v, const IntArray& t, double roll, double pitch, double yaw,
         int side) {
        const geom::TriMesh mesh = to_mesh(v, t);
        geom::CameraPose pose;
        pose.roll = roll;
        pose.pitch = pitch;
        pose.yaw = yaw;
        datagen::TrainingPair pair;
        {
          py::gil_scoped_release release;
          pose = datagen::aim_at(pose, mesh.centroid(), datagen::camera_distance(mesh));
          pair = datagen::generate_pair(mesh, pose, side);
        }
        return py::make_tuple(from_grid(pair.x), from_grid(pair.y), pair.transform.scale,
                              from_vec3(pair.transform.offset));
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("roll"), py::arg("pitch"),
      py::arg("yaw"), py::arg("side"));

  m.def(
      "gen_dataset",
      [](const std::vector<std::tuple<std::string, DoubleArray, IntArray>>& meshes, int side,
         const std::string& out_path, int n_roll, int n_pitch, int n_yaw,
         double holdout_model_frac, double holdout_view_frac, std::uint64_t seed) {
        std::vector<datagen::NamedMesh> named;
        for (const auto& [name, v, t] : meshes) named.push_back({name, to_mesh(v, t)});
        datagen::SplitConfig cfg;
        cfg.n_roll = n_roll;
        cfg.n_pitch = n_pitch;
        cfg.n_yaw = n_yaw;
        cfg.holdout_model_frac = holdout_model_frac;
        cfg.holdout_view_frac = holdout_view_frac;
        std::map<std::string, std::size_t> counts;
        {
          py::gil_scoped_release release;
          const datagen::Dataset ds = datagen::build_dataset(named, cfg, side, seed);
          io::save_dataset(ds, out_path);
          for (const auto& p : ds.pairs) counts[datagen::split_name(p.spec.split)]++;
        }
        return counts;
      },
      py::arg("meshes"), py::arg("side"), py::arg("out_path"), py::arg("n_roll") = 2,
      py::arg("n_pitch") = 2, py::arg("n_yaw") = 2, py::arg("holdout_model_frac") = 0.2,
      py::arg("holdout_view_frac") = 0.25, py::arg("seed") = 0);

  m.def(
      "init_model",
      [](int side, std::uint64_t seed, const std::vector<std::tuple<int, int, int>>& conv,
         const std::vector<int>& dense) {
        return net::init_model(to_arch(side, conv, dense), seed);
      },
      py::arg("side"), py::arg("seed") = 0,
      py::arg("conv") = std::vector<std::tuple<int, int, int>>{},
      py::arg("dense") = std::vector<int>{});
  m.def(
      "load_model", [](const std::string& path) { return net::load_model(path); },
      py::arg("path"));

  m.def(
      "forward",
      [](const net::Model& model, const ByteArray& x) {
        const grid::OccupancyGrid g = to_grid(x);
        grid::WeightedGrid p;
        {
          py::gil_scoped_release release;
          p = net::forward(model, g);
        }
        return from_field(p);
      },
      py::arg("model"), py::arg("x"));

  m.def(
      "train",
      [](const net::Model& model, const std::string& dataset_path, int batches, int batch_size,
         double lr, int eval_every, std::uint64_t seed) {
        net::TrainConfig cfg;
        cfg.max_batches = batches;
        cfg.batch_size = batch_size;
        cfg.learning_rate = lr;
        cfg.eval_every = eval_every;
        cfg.seed = seed;
        net::TrainResult result;
        {
          py::gil_scoped_release release;
          const datagen::Dataset ds = io::load_dataset(dataset_path);
          result = net::train(model, ds, cfg);
        }
        py::array_t<double> history({py::ssize_t(result.history.size()), py::ssize_t(4)});
        auto h = history.mutable_unchecked<2>();
        for (std::size_t i = 0; i < result.history.size(); ++i) {
          h(i, 0) = result.history[i].batch;
          h(i, 1) = result.history[i].train_view;
          h(i, 2) = result.history[i].holdout_view;
          h(i, 3) = result.history[i].holdout_model;
        }
        return py::make_tuple(std::move(result.final_model), std::move(result.peak_model),
                              history);
      },
      py::arg("model"), py::arg("dataset_path"), py::arg("batches"), py::arg("batch_size") = 32,
      py::arg("lr") = 1e-4, py::arg("eval_every") = 100, py::arg("seed") = 0);

  m.def(
      "cluster",
      [](const DoubleArray& points, double tol) {
        const PointCloud pc = to_cloud(points);
        std::vector<PointCloud> groups;
        {
          py::gil_scoped_release release;
          groups = complete::cluster(pc, tol);
        }
        std::vector<py::array_t<double>> out;
        for (const PointCloud& g : groups) out.push_back(from_cloud(g));
        return out;
      },
      py::arg("points"), py::arg("tol") = 0.02);

  m.def(
      "complete_cloud",
      [](const DoubleArray& points, const std::string& method, int side,
         const net::Model* model) {
        const complete::Completer completer = to_completer(method, model);
        const PointCloud pc = to_cloud(points);
        complete::Completion comp;
        {
          py::gil_scoped_release release;
          comp = complete::run(completer, pc, side);
        }
        return py::make_tuple(from_grid(comp.grid), comp.transform.scale,
                              from_vec3(comp.transform.offset));
      },
      py::arg("points"), py::arg("method"), py::arg("side") = 40,
      py::arg("model") = nullptr);

  m.def(
      "reconstruct",
      [](const ByteArray& completion, const DoubleArray& observed, double scale,
         const DoubleArray& offset, bool fast) {
        const grid::OccupancyGrid g = to_grid(completion);
        const PointCloud pc = to_cloud(observed);
        const grid::EmbedTransform t = to_transform(scale, offset);
        geom::TriMesh mesh;
        {
          py::gil_scoped_release release;
          mesh = postprocess::reconstruct(g, pc, t, fast);
        }
        return from_mesh(mesh);
      },
      py::arg("completion"), py::arg("observed"), py::arg("scale"), py::arg("offset"),
      py::arg("fast") = false);

  m.def(
      "jaccard",
      [](const ByteArray& a, const ByteArray& b) {
        return metrics::jaccard(to_grid(a), to_grid(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "mesh_jaccard",
      [](const DoubleArray& va, const IntArray& ta, const DoubleArray& vb, const IntArray& tb,
         int side) {
        const geom::TriMesh a = to_mesh(va, ta), b = to_mesh(vb, tb);
        py::gil_scoped_release release;
        return metrics::mesh_jaccard(a, b, side);
      },
      py::arg("vertices_a"), py::arg("triangles_a"), py::arg("vertices_b"),
      py::arg("triangles_b"), py::arg("side") = 80);
  m.def(
      "hausdorff_mm",
      [](const DoubleArray& va, const IntArray& ta, const DoubleArray& vb, const IntArray& tb,
         int n_samples, std::uint64_t seed) {
        const geom::TriMesh a = to_mesh(va, ta), b = to_mesh(vb, tb);
        py::gil_scoped_release release;
        return metrics::hausdorff_symmetric(a, b, n_samples, seed);
      },
      py::arg("vertices_a"), py::arg("triangles_a"), py::arg("vertices_b"),
      py::arg("triangles_b"), py::arg("n_samples") = 300, py::arg("seed") = 0);
  m.def(
      "geodesic_divergence",
      [](const DoubleArray& va, const IntArray& ta, const DoubleArray& vb, const IntArray& tb,
         int n_samples, std::uint64_t seed) {
        const geom::TriMesh a = to_mesh(va, ta), b = to_mesh(vb, tb);
        py::gil_scoped_release release;
        return metrics::geodesic_divergence(a, b, n_samples, 3, seed);
      },
      py::arg("vertices_a"), py::arg("triangles_a"), py::arg("vertices_b"),
      py::arg("triangles_b"), py::arg("n_samples") = 200, py::arg("seed") = 0);
}
