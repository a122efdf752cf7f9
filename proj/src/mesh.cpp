#include "surfreg/mesh.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "surfreg/error.hpp"

namespace surfreg {

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  if (!labels.empty() && labels.size() != vertices.size()) {
    throw Error(ErrorKind::InvalidParameter, "mesh: labels/vertices length mismatch");
  }
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (int idx : triangles[i]) {
      if (idx < 0 || idx >= n) {
        std::ostringstream msg;
        msg << "mesh: triangle " << i << " index " << idx << " out of range";
        throw Error(ErrorKind::InvalidParameter, msg.str());
      }
    }
    if (!(triangle_area(i) > 0.0)) {
      std::ostringstream msg;
      msg << "mesh: triangle " << i << " is degenerate";
      throw Error(ErrorKind::InvalidParameter, msg.str());
    }
  }
}

TriangleMesh TriangleMesh::transformed(const RigidTransform& t) const {
  TriangleMesh out = *this;
  for (auto& v : out.vertices) v = t.apply(v);
  return out;
}

void TriangleMesh::append(const TriangleMesh& other) {
  const int offset = static_cast<int>(vertices.size());
  if (labels.empty() && !other.labels.empty()) labels.assign(vertices.size(), 0);
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  if (!labels.empty()) {
    if (other.labels.empty()) {
      labels.resize(vertices.size(), 0);
    } else {
      labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    }
  }
  for (const auto& t : other.triangles) {
    triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
}

Vec3 TriangleMesh::triangle_normal(std::size_t tri) const {
  const auto& t = triangles[tri];
  const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  return n.normalized();
}

double TriangleMesh::triangle_area(std::size_t tri) const {
  const auto& t = triangles[tri];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) a += triangle_area(i);
  return a;
}

ColoredPointCloud TriangleMesh::sample_surface(std::size_t count, std::uint64_t seed) const {
  ColoredPointCloud out;
  if (triangles.empty() || count == 0) return out;
  std::vector<double> cdf(triangles.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    acc += triangle_area(i);
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.points.reserve(count);
  out.normals.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double pick = unit(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const std::size_t tri = std::min<std::size_t>(it - cdf.begin(), triangles.size() - 1);
    double a = unit(rng);
    double b = unit(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const auto& t = triangles[tri];
    const Vec3& p0 = vertices[t[0]];
    out.points.push_back(p0 + a * (vertices[t[1]] - p0) + b * (vertices[t[2]] - p0));
    out.normals.push_back(triangle_normal(tri));
  }
  return out;
}

}  // namespace surfreg
