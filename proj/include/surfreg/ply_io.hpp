#pragma once

#include <filesystem>

#include "surfreg/geometry.hpp"
#include "surfreg/mesh.hpp"

namespace surfreg {

// ASCII PLY. Vertex properties are written in the order
//   x y z [nx ny nz] [red green blue]
// with coordinates as doubles (17 significant digits) and colors as uchar
// 0-255. The reader accepts any property order, float or uchar colors, and
// ignores unknown properties.

void write_ply(const std::filesystem::path& path, const ColoredPointCloud& cloud);
ColoredPointCloud read_ply_cloud(const std::filesystem::path& path);

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
/// Reads vertices and triangular faces (polygons are fan-triangulated).
TriangleMesh read_ply_mesh(const std::filesystem::path& path);

}  // namespace surfreg
