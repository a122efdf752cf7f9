#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "surfreg/geometry.hpp"
#include "surfreg/raster.hpp"

namespace surfreg {

inline constexpr int kDefaultPvWidth = 640;
inline constexpr int kDefaultPvHeight = 360;
inline constexpr int kDefaultDepthWidth = 320;
inline constexpr int kDefaultDepthHeight = 288;

/// One synchronized capture: PV color image, depth map and device pose with
/// per-camera calibration. Camera frames are x right, y down, z forward.
struct SensorFrame {
  double timestamp = 0.0;
  /// Timestamp of the PV image paired with this depth frame.
  double pv_timestamp = 0.0;
  RgbImage pv_image;
  DepthMap depth_map;
  RigidTransform pose_ref_to_world;
  RigidTransform extr_depth_to_ref;
  RigidTransform extr_pv_to_ref;
  CameraIntrinsics intr_depth;
  CameraIntrinsics intr_pv;
  std::optional<BinaryMask> gt_label_map;
  std::optional<RigidTransform> gt_model_pose;

  RigidTransform depth_to_world() const { return pose_ref_to_world * extr_depth_to_ref; }
  RigidTransform pv_to_world() const { return pose_ref_to_world * extr_pv_to_ref; }
  RigidTransform world_to_pv() const { return pv_to_world().inverse(); }
  RigidTransform world_to_depth() const { return depth_to_world().inverse(); }

  /// Raster sizes match intrinsics, depths are finite and >= 0.
  void validate() const;
};

/// Default synthetic calibration, approximating a head-mounted RGB-D rig.
CameraIntrinsics default_pv_intrinsics();
CameraIntrinsics default_depth_intrinsics();
RigidTransform default_extr_pv_to_ref();
RigidTransform default_extr_depth_to_ref();

/// Depth of each valid depth pixel re-projected into the PV raster (z-buffered,
/// splatted to cover the PV footprint of a depth pixel). 0 where unknown.
DepthMap depth_in_pv(const SensorFrame& frame);

/// Quantize in-memory depth to the on-disk millimetre grid.
void quantize_depth_mm(SensorFrame& frame);

}  // namespace surfreg
