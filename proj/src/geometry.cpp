#include "surfreg/geometry.hpp"

#include "surfreg/error.hpp"
#include "surfreg/kdtree.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

namespace surfreg {

namespace {

constexpr double kRotationTolerance = 1e-9;

bool is_rotation(const Mat3& r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= kRotationTolerance && std::abs(r.determinant() - 1.0) <= kRotationTolerance;
}

Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

}  // namespace

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation)) {
    throw Error(ErrorKind::InvalidParameter, "rotation is not orthonormal with det +1");
  }
  if (!translation.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "translation is not finite");
  }
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
  const Eigen::RowVector4d bottom = m.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kRotationTolerance) {
    throw Error(ErrorKind::InvalidParameter, "homogeneous matrix bottom row must be 0 0 0 1");
  }
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

RigidTransform RigidTransform::translation(const Vec3& t) {
  return {Mat3::Identity(), t, Unchecked{}};
}

RigidTransform RigidTransform::rotation_about(const Vec3& axis, double angle, const Vec3& pivot) {
  const Mat3 r = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return {r, pivot - r * pivot, Unchecked{}};
}

RigidTransform RigidTransform::exp(const Eigen::Matrix<double, 6, 1>& twist) {
  const Vec3 w = twist.head<3>();
  const Vec3 v = twist.tail<3>();
  const double theta = w.norm();
  const Mat3 k = skew(w);
  Mat3 r;
  Mat3 jac;
  if (theta < 1e-10) {
    r = Mat3::Identity() + k;
    jac = Mat3::Identity() + 0.5 * k;
  } else {
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    const double c = (theta - std::sin(theta)) / (theta * theta * theta);
    r = Mat3::Identity() + a * k + b * k * k;
    jac = Mat3::Identity() + b * k + c * k * k;
  }
  // Re-project onto SO(3) so long compositions stay inside tolerance.
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = svd.matrixU() * svd.matrixV().transpose();
  return {r, jac * v, Unchecked{}};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), Unchecked{}};
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_, Unchecked{}};
}

double RigidTransform::rotation_angle_to(const RigidTransform& other) const {
  return rotation_angle(rotation_.transpose() * other.rotation_);
}

double rotation_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  // acos loses precision near 0; use the skew part there.
  const Vec3 s(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidParameter, "intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw Error(ErrorKind::InvalidParameter, "intrinsics: principal point outside image");
  }
}

void ColoredPointCloud::validate() const {
  if (has_colors() && colors.size() != points.size()) {
    throw Error(ErrorKind::InvalidParameter, "point cloud: colors/points length mismatch");
  }
  if (has_normals()) {
    if (normals.size() != points.size()) {
      throw Error(ErrorKind::InvalidParameter, "point cloud: normals/points length mismatch");
    }
    for (const auto& n : normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) {
        throw Error(ErrorKind::InvalidParameter, "point cloud: normal is not unit length");
      }
    }
  }
}

ColoredPointCloud ColoredPointCloud::transformed(const RigidTransform& t) const {
  ColoredPointCloud out;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(t.apply(p));
  out.colors = colors;
  out.normals.reserve(normals.size());
  for (const auto& n : normals) out.normals.push_back(t.rotate(n));
  return out;
}

Vec3 ColoredPointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  if (points.empty()) return c;
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

VoxelKey voxel_key(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

Vec3 voxel_center(const VoxelKey& k, double voxel_size) {
  return {(k.x + 0.5) * voxel_size, (k.y + 0.5) * voxel_size, (k.z + 0.5) * voxel_size};
}

Vec3 backproject(const CameraIntrinsics& k, const Vec2& pixel, double z) {
  if (!(z > 0.0)) {
    std::ostringstream msg;
    msg << "backproject: depth must be positive, got " << z;
    throw Error(ErrorKind::InvalidDepth, msg.str());
  }
  return {(pixel.x() - k.cx) * z / k.fx, (pixel.y() - k.cy) * z / k.fy, z};
}

std::optional<Vec2> project(const CameraIntrinsics& k, const RigidTransform& world_to_cam,
                            const Vec3& x) {
  const Vec3 c = world_to_cam.apply(x);
  if (!(c.z() > 0.0)) return std::nullopt;
  const Vec2 u(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
  if (!k.contains(u)) return std::nullopt;
  return u;
}

ColoredPointCloud voxel_downsample(const ColoredPointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "voxel_downsample: voxel size must be positive");
  }
  struct Acc {
    Vec3 p = Vec3::Zero();
    Vec3 c = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    std::size_t count = 0;
  };
  std::map<VoxelKey, Acc> bins;
  const bool colors = cloud.has_colors();
  const bool normals = cloud.has_normals();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Acc& a = bins[voxel_key(cloud.points[i], voxel_size)];
    a.p += cloud.points[i];
    if (colors) a.c += cloud.colors[i];
    if (normals) a.n += cloud.normals[i];
    ++a.count;
  }
  ColoredPointCloud out;
  out.points.reserve(bins.size());
  for (const auto& [key, a] : bins) {
    const double inv = 1.0 / static_cast<double>(a.count);
    out.points.push_back(a.p * inv);
    if (colors) out.colors.push_back(a.c * inv);
    if (normals) {
      const double len = a.n.norm();
      // Opposing normals cancel; fall back to the first contributor's direction.
      out.normals.push_back(len > 1e-12 ? Vec3(a.n / len) : Vec3(0.0, 0.0, 1.0));
    }
  }
  return out;
}

namespace {

Vec3 pca_normal(const ColoredPointCloud& cloud, const std::vector<Neighbor>& nbrs) {
  Vec3 mean = Vec3::Zero();
  for (const auto& nb : nbrs) mean += cloud.points[nb.index];
  mean /= static_cast<double>(nbrs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& nb : nbrs) {
    const Vec3 d = cloud.points[nb.index] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  return solver.eigenvectors().col(0).normalized();
}

void check_normal_inputs(const ColoredPointCloud& cloud, int k) {
  if (k < 3) throw Error(ErrorKind::InvalidParameter, "estimate_normals: k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    std::ostringstream msg;
    msg << "estimate_normals: need at least " << k << " points, got " << cloud.size();
    throw Error(ErrorKind::InsufficientPoints, msg.str());
  }
}

}  // namespace

ColoredPointCloud estimate_normals(const ColoredPointCloud& cloud, int k, const Vec3& viewpoint) {
  check_normal_inputs(cloud, k);
  const SpatialIndex index(cloud.points);
  ColoredPointCloud out = cloud;
  out.normals.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3 n = pca_normal(cloud, index.knn(cloud.points[i], static_cast<std::size_t>(k)));
    if (n.dot(viewpoint - cloud.points[i]) < 0.0) n = -n;
    out.normals[i] = n;
  }
  return out;
}

ColoredPointCloud estimate_normals_oriented(const ColoredPointCloud& cloud, int k,
                                            std::span<const Vec3> reference) {
  check_normal_inputs(cloud, k);
  if (reference.size() != cloud.size()) {
    throw Error(ErrorKind::InvalidParameter, "estimate_normals: reference size mismatch");
  }
  const SpatialIndex index(cloud.points);
  ColoredPointCloud out = cloud;
  out.normals.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3 n = pca_normal(cloud, index.knn(cloud.points[i], static_cast<std::size_t>(k)));
    if (n.dot(reference[i]) < 0.0) n = -n;
    out.normals[i] = n;
  }
  return out;
}

RigidFit rigid_fit(std::span<const Vec3> src, std::span<const Vec3> dst) {
  const std::vector<double> ones(src.size(), 1.0);
  return rigid_fit_weighted(src, dst, ones);
}

RigidFit rigid_fit_weighted(std::span<const Vec3> src, std::span<const Vec3> dst,
                            std::span<const double> weights) {
  if (src.size() != dst.size() || weights.size() != src.size()) {
    throw Error(ErrorKind::DegenerateFit, "rigid_fit: point list lengths differ");
  }
  if (src.size() < 3) {
    throw Error(ErrorKind::DegenerateFit, "rigid_fit: need at least 3 correspondences");
  }
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    wsum += weights[i];
    cs += weights[i] * src[i];
    cd += weights[i] * dst[i];
  }
  if (!(wsum > 0.0)) throw Error(ErrorKind::DegenerateFit, "rigid_fit: zero total weight");
  cs /= wsum;
  cd /= wsum;

  Mat3 cross = Mat3::Zero();
  Mat3 scatter_src = Mat3::Zero();
  Mat3 scatter_dst = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - cs;
    const Vec3 b = dst[i] - cd;
    cross += weights[i] * b * a.transpose();
    scatter_src += weights[i] * a * a.transpose();
    scatter_dst += weights[i] * b * b.transpose();
  }
  // Collinear (or coincident) configurations leave a rotational degree of freedom.
  for (const Mat3* s : {&scatter_src, &scatter_dst}) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(*s, Eigen::EigenvaluesOnly);
    const auto ev = eig.eigenvalues();
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
      throw Error(ErrorKind::DegenerateFit, "rigid_fit: points are collinear or coincident");
    }
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  Mat3 r = u * v.transpose();
  const Vec3 t = cd - r * cs;
  const RigidTransform tf(r, t);

  double sse = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sse += weights[i] * (tf.apply(src[i]) - dst[i]).squaredNorm();
  }
  return {tf, std::sqrt(sse / wsum)};
}

}  // namespace surfreg
