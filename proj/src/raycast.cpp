#include "surfreg/raycast.hpp"

#include <algorithm>
#include <limits>

#include "surfreg/error.hpp"

namespace surfreg {

namespace {
constexpr std::uint32_t kLeafTris = 4;
}

RayCaster::RayCaster(const std::vector<TriangleMesh>& meshes, const std::vector<int>& labels) {
  if (meshes.size() != labels.size()) {
    throw Error(ErrorKind::InvalidParameter, "raycaster: one label per mesh required");
  }
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const TriangleMesh& mesh = meshes[m];
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
      const auto& t = mesh.triangles[i];
      tris_.push_back({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], labels[m]});
    }
  }
  if (!tris_.empty()) build(0, static_cast<std::uint32_t>(tris_.size()));
  normals_.reserve(tris_.size());
  for (const Tri& t : tris_) normals_.push_back((t.b - t.a).cross(t.c - t.a).normalized());
}

std::int32_t RayCaster::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (const Vec3* v : {&tris_[i].a, &tris_[i].b, &tris_[i].c}) {
      node.lo = node.lo.cwiseMin(*v);
      node.hi = node.hi.cwiseMax(*v);
    }
  }
  node.begin = begin;
  node.end = end;
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafTris) return id;

  Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 chi = -clo;
  auto centroid = [](const Tri& t) -> Vec3 { return (t.a + t.b + t.c) / 3.0; };
  for (std::uint32_t i = begin; i < end; ++i) {
    const Vec3 c = centroid(tris_[i]);
    clo = clo.cwiseMin(c);
    chi = chi.cwiseMax(c);
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(tris_.begin() + begin, tris_.begin() + mid, tris_.begin() + end,
                   [&](const Tri& a, const Tri& b) { return centroid(a)[axis] < centroid(b)[axis]; });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<RayHit> RayCaster::intersect(const Vec3& origin, const Vec3& dir) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_tri = 0;
  bool found = false;

  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double tmin = 0.0;
    double tmax = best_t;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      double t0 = (node.lo[a] - origin[a]) * inv[a];
      double t1 = (node.hi[a] - origin[a]) * inv[a];
      if (t0 > t1) std::swap(t0, t1);
      // NaN from 0 * inf: the ray is parallel and inside the slab.
      if (t0 == t0) tmin = std::max(tmin, t0);
      if (t1 == t1) tmax = std::min(tmax, t1);
      if (tmin > tmax * (1.0 + 1e-12)) {
        miss = true;
        break;
      }
    }
    if (miss) continue;
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Tri& tri = tris_[i];
        const Vec3 e1 = tri.b - tri.a;
        const Vec3 e2 = tri.c - tri.a;
        const Vec3 p = dir.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < 1e-300) continue;
        const double inv_det = 1.0 / det;
        const Vec3 s = origin - tri.a;
        const double u = s.dot(p) * inv_det;
        if (u < 0.0 || u > 1.0) continue;
        const Vec3 q = s.cross(e1);
        const double v = dir.dot(q) * inv_det;
        if (v < 0.0 || u + v > 1.0) continue;
        const double t = e2.dot(q) * inv_det;
        if (t > 1e-9 && t < best_t) {
          best_t = t;
          best_tri = i;
          found = true;
        }
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  if (!found) return std::nullopt;
  // Re-evaluate the ray parameter against the triangle plane; this is exact
  // for axis-aligned geometry.
  const Tri& tri = tris_[best_tri];
  const Vec3 n = (tri.b - tri.a).cross(tri.c - tri.a);
  const double denom = n.dot(dir);
  const double t = denom != 0.0 ? n.dot(tri.a - origin) / denom : best_t;
  return RayHit{t, best_tri, tri.label};
}

}  // namespace surfreg
