#pragma once

#include <unordered_map>
#include <vector>

#include "surfreg/geometry.hpp"
#include "surfreg/sensor.hpp"

namespace surfreg {

inline constexpr double kDefaultSendVoxel = 0.01;
inline constexpr double kDefaultMapVoxel = 0.01;

/// Color given to points that fall outside the PV image.
inline const Vec3 kOutOfViewGray{0.5, 0.5, 0.5};

/// Every valid depth pixel lifted to the world frame and colored from the PV
/// image, without downsampling.
ColoredPointCloud backproject_frame(const SensorFrame& frame);

/// backproject_frame followed by voxel_downsample at `send_voxel`.
ColoredPointCloud fuse_frame(const SensorFrame& frame, double send_voxel = kDefaultSendVoxel);

/// Accumulated world-frame map with one point per voxel; later observations
/// replace earlier ones.
class SceneMap {
 public:
  explicit SceneMap(double voxel_size = kDefaultMapVoxel);

  /// Throws Ordering when `timestamp` precedes the latest fused timestamp.
  void accumulate(const ColoredPointCloud& cloud, double timestamp);

  std::size_t size() const { return points_.size(); }
  double voxel_size() const { return voxel_size_; }
  double latest_timestamp() const { return latest_; }
  const std::vector<double>& last_seen() const { return last_seen_; }

  /// Immutable copy of the current map, ordered by insertion.
  ColoredPointCloud snapshot() const;

 private:
  double voxel_size_;
  double latest_;
  std::vector<Vec3> points_;
  std::vector<Vec3> colors_;
  std::vector<double> last_seen_;
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> index_;
};

}  // namespace surfreg
