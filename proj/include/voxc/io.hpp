#pragma once

#include <string>

#include "voxc/datagen.hpp"
#include "voxc/geom.hpp"

namespace voxc::io {

// Point cloud files. ASCII is one "x y z" triple per line in meters, written
// with enough digits to round-trip doubles exactly. Binary is the magic
// "VXPC", a little-endian u32 count, then count little-endian f32 triples;
// loading and re-saving a binary cloud reproduces it byte for byte. The
// loader sniffs the magic, so either format can be passed anywhere a cloud
// file is expected. Malformed input raises io_error naming the offending
// line or byte offset.
PointCloud load_pointcloud(const std::string& path);
void save_pointcloud_ascii(const PointCloud& pc, const std::string& path);
void save_pointcloud_binary(const PointCloud& pc, const std::string& path);

// Mesh files, dispatched on extension: ".off" and ".stl" (binary STL only).
// STL stores one vertex per triangle corner, so the loader merges corners
// that agree exactly in f32 to recover shared edges.
geom::TriMesh load_mesh(const std::string& path);
void save_mesh_off(const geom::TriMesh& m, const std::string& path);
void save_mesh_stl(const geom::TriMesh& m, const std::string& path);

// Dataset container: magic "VXDS", version, grid side, pair count, a
// manifest row per pair (mesh id, camera pose, split, embedding transform),
// then per pair the x and y grids as one x-major bitstream (x slowest, then
// y, then z; bits filled LSB first) compressed with zlib, and a CRC32 of
// everything before it as the trailer. Loading restores every field except
// TrainingPair::cloud, which stays empty; the observed surface can be
// recovered as grid_to_pointcloud(x, transform). Any structural defect,
// including a CRC mismatch, raises io_error.
void save_dataset(const datagen::Dataset& ds, const std::string& path);
datagen::Dataset load_dataset(const std::string& path);

}  // namespace voxc::io
