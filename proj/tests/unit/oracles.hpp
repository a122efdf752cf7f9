#pragma once

// Brute-force reference implementations shared by the unit and acceptance
// tests. Each one recomputes a quantity from its definition with no shortcut
// (no spatial index, no incremental update) and shares no code with the
// library beyond the value types.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "surfreg/geometry.hpp"
#include "surfreg/kdtree.hpp"
#include "surfreg/mesh.hpp"
#include "surfreg/registration.hpp"

namespace oracle {

using surfreg::Mat3;
using surfreg::Neighbor;
using surfreg::RigidTransform;
using surfreg::Vec3;

inline std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> out(n);
  for (Vec3& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

inline RigidTransform random_transform(std::mt19937_64& rng, double max_angle = std::numbers::pi,
                                       double max_translation = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
  const double angle = max_angle * std::abs(u(rng));
  Vec3 t(u(rng), u(rng), u(rng));
  return RigidTransform(Eigen::AngleAxisd(angle, axis).toRotationMatrix(), max_translation * t);
}

/// Sorted linear scan.
inline std::vector<Neighbor> knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<Neighbor> all;
  for (std::uint32_t i = 0; i < pts.size(); ++i) all.push_back({i, (pts[i] - q).squaredNorm()});
  std::sort(all.begin(), all.end(), surfreg::neighbor_less);
  all.resize(std::min(k, all.size()));
  return all;
}

inline double nearest_distance(const std::vector<Vec3>& pts, const Vec3& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : pts) best = std::min(best, (p - q).norm());
  return best;
}

struct KeyLess {
  bool operator()(const std::array<long, 3>& a, const std::array<long, 3>& b) const { return a < b; }
};

inline std::array<long, 3> voxel_of(const Vec3& p, double size) {
  return {static_cast<long>(std::floor(p.x() / size)), static_cast<long>(std::floor(p.y() / size)),
          static_cast<long>(std::floor(p.z() / size))};
}

inline std::size_t distinct_voxels(const std::vector<Vec3>& pts, double size) {
  std::set<std::array<long, 3>, KeyLess> keys;
  for (const Vec3& p : pts) keys.insert(voxel_of(p, size));
  return keys.size();
}

/// Horn's closed-form absolute orientation via unit quaternions. Independent
/// of the SVD formulation used by the library.
inline RigidTransform horn_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  Mat3 s = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) s += (src[i] - cs) * (dst[i] - cd).transpose();
  const double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2);
  const double syx = s(1, 0), syy = s(1, 1), syz = s(1, 2);
  const double szx = s(2, 0), szy = s(2, 1), szz = s(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(n);
  const Eigen::Vector4d q = es.eigenvectors().col(3);
  const Mat3 r = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
  return RigidTransform(r, cd - r * cs);
}

inline double rms_after(const RigidTransform& t, const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  double s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) s += (t.apply(src[i]) - dst[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(src.size()));
}

/// Type-7 percentile straight from the order statistics.
inline double percentile7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Point-to-triangle distance (Ericson, closest point on triangle).
inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

inline double mesh_distance(const surfreg::TriangleMesh& m, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : m.triangles) {
    best = std::min(best, point_triangle_distance(p, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]));
  }
  return best;
}

/// Moller-Trumbore over every triangle; nearest positive hit parameter.
inline std::optional<double> ray_mesh(const surfreg::TriangleMesh& m, const Vec3& o, const Vec3& d) {
  std::optional<double> best;
  for (const auto& t : m.triangles) {
    const Vec3& a = m.vertices[t[0]];
    const Vec3 e1 = m.vertices[t[1]] - a, e2 = m.vertices[t[2]] - a;
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) continue;
    const Vec3 tv = o - a;
    const double u = tv.dot(pv) / det;
    if (u < 0 || u > 1) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) / det;
    if (v < 0 || u + v > 1) continue;
    const double s = e2.dot(qv) / det;
    if (s > 1e-12 && (!best || s < *best)) best = s;
  }
  return best;
}

/// Coverage, trimmed mean and combined score by exhaustive nearest search.
inline surfreg::ScoreResult score(const RigidTransform& t, const surfreg::ColoredPointCloud& model,
                                  const surfreg::ColoredPointCloud& scene, const surfreg::RegConfig& cfg) {
  std::vector<double> within;
  std::size_t covered = 0;
  for (const Vec3& p : model.points) {
    const double d = nearest_distance(scene.points, t.apply(p));
    covered += d <= cfg.voxel_base;
    if (d <= cfg.d_max) within.push_back(d);
  }
  surfreg::ScoreResult s;
  s.coverage = static_cast<double>(covered) / static_cast<double>(model.size());
  if (within.empty()) {
    s.trimmed_mean_dist = cfg.d_max;
  } else {
    std::sort(within.begin(), within.end());
    const std::size_t keep = within.size() - static_cast<std::size_t>(std::floor(cfg.trim * within.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < keep; ++i) sum += within[i];
    s.trimmed_mean_dist = std::min(sum / keep, cfg.d_max);
  }
  s.score = cfg.lambda_c * s.coverage + cfg.lambda_r * (1.0 - s.trimmed_mean_dist / cfg.d_max);
  return s;
}

}  // namespace oracle
