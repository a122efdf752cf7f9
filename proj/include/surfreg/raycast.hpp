#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "surfreg/geometry.hpp"
#include "surfreg/mesh.hpp"

namespace surfreg {

struct RayHit {
  double t = 0.0;            // ray parameter (distance in units of |dir|)
  std::uint32_t triangle = 0;
  int label = 0;             // label of the source mesh
};

/// Bounding-volume hierarchy over triangles for exact nearest-hit queries.
class RayCaster {
 public:
  RayCaster() = default;
  /// Each mesh contributes its triangles tagged with the matching label.
  RayCaster(const std::vector<TriangleMesh>& meshes, const std::vector<int>& labels);

  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir) const;
  Vec3 normal(std::uint32_t triangle) const { return normals_[triangle]; }
  std::size_t triangle_count() const { return tris_.size(); }

 private:
  struct Tri {
    Vec3 a, b, c;
    int label = 0;
  };
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Tri> tris_;
  std::vector<Vec3> normals_;
  std::vector<Node> nodes_;
};

}  // namespace surfreg
