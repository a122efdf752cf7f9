#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace surfreg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Proper rigid motion x -> R x + t. Construction checks that R is a rotation.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_matrix(const Mat4& m);
  static RigidTransform translation(const Vec3& t);
  /// Rotation of `angle` radians about the unit `axis` passing through `pivot`.
  static RigidTransform rotation_about(const Vec3& axis, double angle,
                                       const Vec3& pivot = Vec3::Zero());
  /// Exponential map of a twist (omega, v), applied as a left increment.
  static RigidTransform exp(const Eigen::Matrix<double, 6, 1>& twist);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat4 matrix() const;

  Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

  /// Geodesic rotation angle between this and `other`, radians.
  double rotation_angle_to(const RigidTransform& other) const;

 private:
  struct Unchecked {};
  RigidTransform(const Mat3& r, const Vec3& t, Unchecked)
      : rotation_(r), translation_(t) {}

  Mat3 rotation_;
  Vec3 translation_;
};

/// Rotation angle of a rotation matrix, radians in [0, pi].
double rotation_angle(const Mat3& r);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
  /// Continuous pixel coordinate lies on the raster: [-0.5, W-0.5) x [-0.5, H-0.5).
  bool contains(const Vec2& u) const {
    return u.x() >= -0.5 && u.x() < width - 0.5 && u.y() >= -0.5 && u.y() < height - 0.5;
  }
};

/// Points with optional per-point colors (RGB in [0,1]) and unit normals.
struct ColoredPointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void validate() const;
  ColoredPointCloud transformed(const RigidTransform& t) const;
  Vec3 centroid() const;
};

/// Integer voxel coordinate: floor(coord / size) per axis.
struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(k.x) * 0x9E3779B185EBCA87ULL;
    h ^= static_cast<std::uint32_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint32_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

VoxelKey voxel_key(const Vec3& p, double voxel_size);
Vec3 voxel_center(const VoxelKey& k, double voxel_size);

/// Pixel + depth -> camera-frame point. Throws InvalidDepth for z <= 0.
Vec3 backproject(const CameraIntrinsics& k, const Vec2& pixel, double z);

/// World point -> pixel through `world_to_cam`; nullopt when behind the camera
/// or outside the raster.
std::optional<Vec2> project(const CameraIntrinsics& k, const RigidTransform& world_to_cam,
                            const Vec3& x);

/// One point per occupied voxel at the member centroid. Colors and normals are
/// averaged (normals renormalized). Output is ordered by voxel key.
ColoredPointCloud voxel_downsample(const ColoredPointCloud& cloud, double voxel_size);

inline constexpr int kDefaultNormalNeighbors = 30;

/// PCA normals over the k nearest neighbours (including the point itself),
/// flipped to face `viewpoint`.
ColoredPointCloud estimate_normals(const ColoredPointCloud& cloud,
                                   int k = kDefaultNormalNeighbors,
                                   const Vec3& viewpoint = Vec3::Zero());

/// Same as estimate_normals, but each normal is flipped to agree with the
/// corresponding entry of `reference` (which must be aligned with `cloud`).
ColoredPointCloud estimate_normals_oriented(const ColoredPointCloud& cloud, int k,
                                            std::span<const Vec3> reference);

struct RigidFit {
  RigidTransform transform;
  double rms = 0.0;
};

/// Least-squares rigid transform mapping src onto dst (cross-covariance SVD).
RigidFit rigid_fit(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Same, with non-negative per-pair weights.
RigidFit rigid_fit_weighted(std::span<const Vec3> src, std::span<const Vec3> dst,
                            std::span<const double> weights);

}  // namespace surfreg
