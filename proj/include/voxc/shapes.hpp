#pragma once

#include "voxc/geom.hpp"

namespace voxc::geom {

// Watertight procedural meshes, centered on their bounding-box center at the
// origin, dimensions in meters, triangles wound outward.

TriMesh make_box(const Vec3& size);
TriMesh make_icosphere(double radius, int subdivisions);
TriMesh make_ellipsoid(const Vec3& radii, int subdivisions);
TriMesh make_cylinder(double radius, double height, int segments);
TriMesh make_cone(double base_radius, double height, int segments);
// L-shaped cross section in xy extruded along z: the full ax-by-ay rectangle
// minus its [notch_x, ax] x [notch_y, ay] corner block.
TriMesh make_l_prism(double ax, double ay, double notch_x, double notch_y, double height);
TriMesh make_torus(double major_radius, double minor_radius, int major_segments, int minor_segments);

// Desk-object family catalog used for dataset generation: each name yields
// meshes with randomized dimensions at tabletop scale (a few centimeters).
const std::vector<std::string>& shape_family_names();
TriMesh make_shape(const std::string& family, SeqRng& rng);

}  // namespace voxc::geom
