#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "voxc/complete.hpp"
#include "voxc/datagen.hpp"
#include "voxc/io.hpp"
#include "voxc/metrics.hpp"
#include "voxc/net.hpp"
#include "voxc/postprocess.hpp"
#include "voxc/shapes.hpp"

namespace fs = std::filesystem;
using namespace voxc;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_general(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Wall-clock breakdown of one completion run over a segmented scene: the
// segmentation itself, the object of interest, and the per-object cost of
// everything else. The total is reconstructed from the parts.
struct TimingReport {
  double t_segment = 0;
  double t_target = 0;
  double t_non_target = 0;
  int n_non_target = 0;

  double t_completion() const { return t_segment + t_target + n_non_target * t_non_target; }

  void print(std::ostream& out) const {
    out << "t_segment=" << format_metric(t_segment) << "\tt_target=" << format_metric(t_target)
        << "\tt_non_target=" << format_metric(t_non_target)
        << "\tn_non_target=" << n_non_target
        << "\tt_completion=" << format_metric(t_completion()) << "\n";
  }
};

// The stock network shape only fits grids large enough to survive three
// 4-wide convolutions; smaller grids get a slimmer stack trimmed to fit.
net::Architecture training_arch(int side) {
  if (side >= 28) return net::Architecture::defaults(side);
  net::Architecture a;
  a.input_side = side;
  int s = side;
  const auto add_if_fits = [&](int channels, int kernel, int pool) {
    if (s - kernel + 1 < 1) return;
    a.conv_layers.push_back({channels, kernel, pool});
    s = (s - kernel + 1 + pool - 1) / pool;
  };
  add_if_fits(16, 4, 2);
  add_if_fits(16, 4, 2);
  add_if_fits(16, 2, 1);
  a.dense_sizes = {256, side * side * side};
  return a;
}

complete::Method parse_method(const std::string& name) {
  if (name == "partial") return complete::Method::Partial;
  if (name == "mirror") return complete::Method::Mirror;
  if (name == "cnn") return complete::Method::CNN;
  throw std::invalid_argument("unknown method \"" + name +
                              "\"; expected partial, mirror, or cnn");
}

// Evaluation surface of a grid. Objects routinely reach the fitting cube's
// walls, where a plain extraction would leave the surface open and the
// volume-overlap metric degenerate, so the grid is rebuilt inside a zero
// border that caps every wall crossing.
geom::TriMesh capped_mesh(const grid::OccupancyGrid& g, const grid::EmbedTransform& t) {
  grid::WeightedGrid f = grid::WeightedGrid::zeros(g.dims + Vec3i::Constant(2));
  for (int z = 0; z < g.dims.z(); ++z)
    for (int y = 0; y < g.dims.y(); ++y)
      for (int x = 0; x < g.dims.x(); ++x)
        f.data[f.index(x + 1, y + 1, z + 1)] = g.at(x, y, z) ? 1.0 : 0.0;
  geom::TriMesh m = geom::marching_cubes(f, 0.5);
  for (Vec3& v : m.vertices) v = t.to_world(v - Vec3::Ones());
  return m;
}

struct GenDataOptions {
  std::string mesh_dir;
  std::string out_file;
  int grid_side = 40;
  std::string views = "11x6x11";
  double holdout_frac = 0.2;
  double holdout_view_frac = 0.25;
  std::uint64_t seed = 0;
};

void run_gen_data(const GenDataOptions& opt) {
  datagen::SplitConfig cfg;
  if (std::sscanf(opt.views.c_str(), "%dx%dx%d", &cfg.n_roll, &cfg.n_pitch, &cfg.n_yaw) != 3 ||
      cfg.n_roll < 1 || cfg.n_pitch < 1 || cfg.n_yaw < 1)
    throw std::invalid_argument("--views expects ROLLxPITCHxYAW, e.g. 11x6x11");
  cfg.holdout_model_frac = opt.holdout_frac;
  cfg.holdout_view_frac = opt.holdout_view_frac;

  if (!fs::is_directory(opt.mesh_dir)) throw io_error(opt.mesh_dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(opt.mesh_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".off" || ext == ".stl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw io_error("no mesh files (.off or .stl) in " + opt.mesh_dir);

  std::vector<datagen::NamedMesh> meshes;
  for (const fs::path& f : files) {
    try {
      meshes.push_back({f.stem().string(), io::load_mesh(f.string())});
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
    }
  }
  if (meshes.size() < 2)
    throw io_error("need at least 2 readable meshes, found " + std::to_string(meshes.size()));

  const datagen::Dataset ds = datagen::build_dataset(meshes, cfg, opt.grid_side, opt.seed);
  io::save_dataset(ds, opt.out_file);

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : ds.pairs) counts[static_cast<int>(p.spec.split)]++;
  for (int s = 0; s < 3; ++s)
    std::cout << datagen::split_name(datagen::Split(s)) << "\t" << counts[s] << "\n";
}

struct TrainOptions {
  std::string dataset;
  std::string out_model;
  int batches = 2000;
  double lr = 1e-4;
  int batch_size = 32;
  int eval_every = 100;
  std::uint64_t seed = 0;
};

void run_train(const TrainOptions& opt) {
  const datagen::Dataset ds = io::load_dataset(opt.dataset);
  net::Architecture arch = training_arch(ds.side);
  arch.validate();
  const net::Model init = net::init_model(arch, opt.seed);

  net::TrainConfig cfg;
  cfg.batch_size = opt.batch_size;
  cfg.learning_rate = opt.lr;
  cfg.max_batches = opt.batches;
  cfg.eval_every = opt.eval_every;
  cfg.seed = opt.seed;

  net::TrainResult result;
  if (opt.batches == 0) {
    result.final_model = init;
    result.peak_model = init;
  } else {
    result = net::train(init, ds, cfg);
  }

  fs::path base(opt.out_model);
  fs::path peak_path = base;
  peak_path.replace_extension();
  peak_path += ".peak";
  peak_path += base.extension();
  fs::path history_path = base;
  history_path.replace_extension();
  history_path += ".history.tsv";

  net::save_model(result.final_model, opt.out_model);
  net::save_model(result.peak_model, peak_path.string());

  std::string tsv = "dataset\tbatches\tbatch_size\tlr\teval_every\tseed\n";
  tsv += opt.dataset + "\t" + std::to_string(opt.batches) + "\t" +
         std::to_string(opt.batch_size) + "\t" + format_general(opt.lr) + "\t" +
         std::to_string(opt.eval_every) + "\t" + std::to_string(opt.seed) + "\n\n";
  tsv += "batch\tsplit\tjaccard\n";
  for (const net::HistoryRow& row : result.history) {
    const double values[3] = {row.train_view, row.holdout_view, row.holdout_model};
    for (int s = 0; s < 3; ++s) {
      if (std::isnan(values[s])) continue;
      tsv += std::to_string(row.batch) + "\t" + datagen::split_name(datagen::Split(s)) + "\t" +
             format_metric(values[s]) + "\n";
    }
  }
  atomic_write_file(history_path.string(), tsv);

  std::cout << "model\t" << opt.out_model << "\n";
  std::cout << "peak\t" << peak_path.string() << "\n";
  std::cout << "history\t" << history_path.string() << "\n";
}

struct CompleteOptions {
  std::string model;
  std::string cloud_file;
  std::string method = "cnn";
  bool fast = false;
  bool stl = false;
  std::string out = "mesh.off";
  int cluster_index = 0;
  int grid_side = 40;
  double cluster_tol = 0.02;
};

void run_complete(const CompleteOptions& opt) {
  const PointCloud pc = io::load_pointcloud(opt.cloud_file);
  const complete::Method method = parse_method(opt.method);

  complete::Completer completer;
  int side = opt.grid_side;
  switch (method) {
    case complete::Method::Partial:
      completer = complete::Completer::partial();
      break;
    case complete::Method::Mirror:
      completer = complete::Completer::mirror();
      break;
    case complete::Method::CNN: {
      net::Model model = net::load_model(opt.model);
      side = model.arch.input_side;
      completer = complete::Completer::cnn(std::move(model));
      break;
    }
  }

  TimingReport timing;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<PointCloud> clusters = complete::cluster(pc, opt.cluster_tol);
  timing.t_segment = seconds_since(t0);

  if (clusters.empty())
    throw std::invalid_argument("no clusters with at least 10 points in " + opt.cloud_file);
  if (opt.cluster_index < 0 || std::size_t(opt.cluster_index) >= clusters.size()) {
    std::string msg = "cluster index " + std::to_string(opt.cluster_index) + " out of range; " +
                      std::to_string(clusters.size()) + " clusters available:";
    for (std::size_t i = 0; i < clusters.size(); ++i)
      msg += "\n  " + std::to_string(i) + ": " + std::to_string(clusters[i].size()) + " points";
    throw std::invalid_argument(msg);
  }

  const auto t1 = std::chrono::steady_clock::now();
  const PointCloud& target = clusters[opt.cluster_index];
  const complete::Completion comp = complete::run(completer, target, side);
  const geom::TriMesh mesh = postprocess::reconstruct(comp.grid, target, comp.transform, opt.fast);
  timing.t_target = seconds_since(t1);

  timing.n_non_target = int(clusters.size()) - 1;
  if (timing.n_non_target > 0) {
    const auto t2 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (int(i) == opt.cluster_index) continue;
      const complete::Completion other = complete::run(completer, clusters[i], side);
      postprocess::reconstruct(other.grid, clusters[i], other.transform, true);
    }
    timing.t_non_target = seconds_since(t2) / timing.n_non_target;
  }

  if (opt.stl)
    io::save_mesh_stl(mesh, opt.out);
  else
    io::save_mesh_off(mesh, opt.out);
  timing.print(std::cout);
}

struct EvaluateOptions {
  std::string dataset;
  std::string model;
  std::vector<std::string> methods = {"partial", "mirror", "cnn"};
  std::string out = "report.tsv";
  std::uint64_t seed = 0;
};

void run_evaluate(const EvaluateOptions& opt) {
  const datagen::Dataset ds = io::load_dataset(opt.dataset);
  const net::Model model = net::load_model(opt.model);
  if (model.arch.input_side != ds.side)
    throw std::invalid_argument("model expects side " + std::to_string(model.arch.input_side) +
                                " but the dataset is side " + std::to_string(ds.side));
  if (opt.methods.empty()) throw std::invalid_argument("--methods must name at least one method");
  for (const std::string& m : opt.methods) {
    // oracle passes the ground truth through; it exists to calibrate tests
    if (m != "oracle") parse_method(m);
  }

  const std::size_t n = ds.pairs.size();
  std::vector<geom::TriMesh> gt(n);
  std::vector<PointCloud> observed(n);
  for (std::size_t i = 0; i < n; ++i) {
    gt[i] = capped_mesh(ds.pairs[i].y, ds.pairs[i].transform);
    observed[i] = grid::grid_to_pointcloud(ds.pairs[i].x, ds.pairs[i].transform);
  }

  const complete::Completer mirror = complete::Completer::mirror();
  const complete::Completer cnn = complete::Completer::cnn(model);

  std::vector<metrics::SuiteEntry> entries;
  entries.reserve(opt.methods.size() * n);
  for (const std::string& name : opt.methods) {
    for (std::size_t i = 0; i < n; ++i) {
      const datagen::TrainingPair& p = ds.pairs[i];
      geom::TriMesh completion;
      if (name == "oracle") {
        completion = gt[i];
      } else if (name == "partial") {
        completion = geom::laplacian_smooth(capped_mesh(p.x, p.transform), 3);
      } else {
        const complete::Completer& c = (name == "cnn") ? cnn : mirror;
        const complete::Completion comp = complete::run(c, observed[i], ds.side);
        completion = capped_mesh(comp.grid, comp.transform);
      }
      entries.push_back({name, p.spec.split, std::move(completion), gt[i]});
    }
  }

  metrics::SuiteParams params;
  params.seed = opt.seed;
  const metrics::SuiteResult suite = metrics::evaluate_suite(entries, params);

  const char* columns = "jaccard\thausdorff_mm\tgeodesic_js";
  std::string tsv = std::string("method\tsplit\tcount\t") + columns + "\n";
  for (const metrics::SuiteCell& cell : suite.cells) {
    tsv += cell.method + "\t" + datagen::split_name(cell.split) + "\t" +
           std::to_string(cell.count) + "\t" + format_metric(cell.mean.jaccard) + "\t" +
           format_metric(cell.mean.hausdorff_mm) + "\t" + format_metric(cell.mean.geodesic_js) +
           "\n";
  }
  std::cout << tsv;
  tsv += std::string("\npair\tmethod\tsplit\t") + columns + "\n";
  for (const metrics::SuiteRow& row : suite.rows) {
    tsv += std::to_string(row.index % n) + "\t" + row.method + "\t" +
           datagen::split_name(row.split) + "\t" + format_metric(row.metrics.jaccard) + "\t" +
           format_metric(row.metrics.hausdorff_mm) + "\t" +
           format_metric(row.metrics.geodesic_js) + "\n";
  }
  atomic_write_file(opt.out, tsv);
}

struct MakeShapesOptions {
  std::string out_dir;
  std::vector<std::string> families;
  int count = 2;
  std::uint64_t seed = 0;
};

void run_make_shapes(const MakeShapesOptions& opt) {
  std::vector<std::string> families = opt.families;
  if (families.empty()) families = geom::shape_family_names();
  for (const std::string& f : families) {
    const auto& known = geom::shape_family_names();
    if (std::find(known.begin(), known.end(), f) == known.end()) {
      std::string msg = "unknown shape family \"" + f + "\"; available:";
      for (const std::string& k : known) msg += " " + k;
      throw std::invalid_argument(msg);
    }
  }
  if (opt.count < 1) throw std::invalid_argument("--count must be at least 1");

  fs::create_directories(opt.out_dir);
  SeqRng rng(opt.seed);
  std::size_t written = 0;
  for (const std::string& family : families) {
    for (int i = 0; i < opt.count; ++i) {
      const geom::TriMesh m = geom::make_shape(family, rng);
      io::save_mesh_off(m, (fs::path(opt.out_dir) / (family + "_" + std::to_string(i) + ".off"))
                               .string());
      ++written;
    }
  }
  std::cout << "wrote " << written << " meshes to " << opt.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point cloud shape completion: dataset generation, training, "
               "completion, and evaluation"};
  app.require_subcommand(1);

  GenDataOptions gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "render views of meshes into a dataset");
  cmd_gen->add_option("mesh_dir", gen.mesh_dir, "directory of .off/.stl meshes")->required();
  cmd_gen->add_option("out_file", gen.out_file, "dataset file to write")->required();
  cmd_gen->add_option("--grid-side", gen.grid_side, "voxel grid side length");
  cmd_gen->add_option("--views", gen.views, "orientation lattice, ROLLxPITCHxYAW");
  cmd_gen->add_option("--holdout-frac", gen.holdout_frac, "fraction of meshes held out entirely");
  cmd_gen->add_option("--holdout-view-frac", gen.holdout_view_frac,
                      "fraction of views of kept meshes held out");
  cmd_gen->add_option("--seed", gen.seed, "rng seed");
  cmd_gen->callback([&] { run_gen_data(gen); });

  TrainOptions train;
  CLI::App* cmd_train = app.add_subcommand("train", "train a completion network on a dataset");
  cmd_train->add_option("dataset", train.dataset, "dataset file")->required();
  cmd_train->add_option("out_model", train.out_model, "model file to write")->required();
  cmd_train->add_option("--batches", train.batches, "number of training batches");
  cmd_train->add_option("--lr", train.lr, "learning rate");
  cmd_train->add_option("--batch-size", train.batch_size, "examples per batch");
  cmd_train->add_option("--eval-every", train.eval_every, "batches between evaluations");
  cmd_train->add_option("--seed", train.seed, "rng seed");
  cmd_train->callback([&] { run_train(train); });

  CompleteOptions comp;
  CLI::App* cmd_complete = app.add_subcommand("complete", "complete one object from a cloud");
  cmd_complete->add_option("model", comp.model, "model file (read only for --method cnn)")
      ->required();
  cmd_complete->add_option("cloud_file", comp.cloud_file, "point cloud, ascii xyz or binary")
      ->required();
  cmd_complete->add_option("--method", comp.method, "partial, mirror, or cnn");
  cmd_complete->add_flag("--fast", comp.fast, "skip the detailed surface pipeline");
  cmd_complete->add_option("--out", comp.out, "mesh file to write");
  cmd_complete->add_flag("--stl", comp.stl, "write binary STL instead of OFF");
  cmd_complete->add_option("--cluster-index", comp.cluster_index, "which cluster to complete");
  cmd_complete->add_option("--grid-side", comp.grid_side,
                           "grid side for partial/mirror (cnn uses the model's)");
  cmd_complete->add_option("--cluster-tol", comp.cluster_tol, "clustering distance in meters");
  cmd_complete->callback([&] { run_complete(comp); });

  EvaluateOptions eval;
  CLI::App* cmd_eval = app.add_subcommand("evaluate", "score methods over a dataset");
  cmd_eval->add_option("dataset", eval.dataset, "dataset file")->required();
  cmd_eval->add_option("model", eval.model, "model file")->required();
  cmd_eval->add_option("--methods", eval.methods, "methods to score (also: oracle)")
      ->delimiter(',');
  cmd_eval->add_option("--out", eval.out, "report file to write");
  cmd_eval->add_option("--seed", eval.seed, "metric sampling seed");
  cmd_eval->callback([&] { run_evaluate(eval); });

  MakeShapesOptions shapes;
  CLI::App* cmd_shapes = app.add_subcommand("make-shapes", "write procedural desk-object meshes");
  cmd_shapes->add_option("out_dir", shapes.out_dir, "directory to fill")->required();
  cmd_shapes->add_option("--families", shapes.families, "shape families to draw from")
      ->delimiter(',');
  cmd_shapes->add_option("--count", shapes.count, "meshes per family");
  cmd_shapes->add_option("--seed", shapes.seed, "rng seed");
  cmd_shapes->callback([&] { run_make_shapes(shapes); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
