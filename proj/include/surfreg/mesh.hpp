#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "surfreg/geometry.hpp"

namespace surfreg {

/// Indexed triangle mesh. Optional per-vertex integer labels.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> labels;

  /// Throws InvalidParameter on out-of-range indices or zero-area triangles.
  void validate() const;
  TriangleMesh transformed(const RigidTransform& t) const;
  void append(const TriangleMesh& other);

  Vec3 triangle_normal(std::size_t tri) const;  // unit, right-hand winding
  double triangle_area(std::size_t tri) const;
  double area() const;

  /// Area-weighted uniform surface samples with face normals.
  ColoredPointCloud sample_surface(std::size_t count, std::uint64_t seed) const;
};

}  // namespace surfreg
