#include "surfreg/sensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "surfreg/error.hpp"

namespace surfreg {

void SensorFrame::validate() const {
  intr_depth.validate();
  intr_pv.validate();
  if (depth_map.width() != intr_depth.width || depth_map.height() != intr_depth.height) {
    throw Error(ErrorKind::InvalidParameter, "frame: depth raster does not match intrinsics");
  }
  if (pv_image.width() != intr_pv.width || pv_image.height() != intr_pv.height) {
    throw Error(ErrorKind::InvalidParameter, "frame: PV raster does not match intrinsics");
  }
  if (gt_label_map &&
      (gt_label_map->width() != intr_pv.width || gt_label_map->height() != intr_pv.height)) {
    throw Error(ErrorKind::InvalidParameter, "frame: label raster does not match PV intrinsics");
  }
  for (const double z : depth_map.data()) {
    if (!(z >= 0.0) || !std::isfinite(z)) {
      throw Error(ErrorKind::InvalidParameter, "frame: depth values must be finite and >= 0");
    }
  }
}

CameraIntrinsics default_pv_intrinsics() {
  return {512.0, 512.0, 320.0, 180.0, kDefaultPvWidth, kDefaultPvHeight};
}

CameraIntrinsics default_depth_intrinsics() {
  return {208.0, 208.0, 160.0, 144.0, kDefaultDepthWidth, kDefaultDepthHeight};
}

RigidTransform default_extr_pv_to_ref() {
  return RigidTransform::translation(Vec3(0.01, 0.0, 0.0));
}

RigidTransform default_extr_depth_to_ref() {
  return RigidTransform::translation(Vec3(-0.01, 0.005, 0.0)) *
         RigidTransform::rotation_about(Vec3::UnitY(), std::numbers::pi / 180.0);
}

DepthMap depth_in_pv(const SensorFrame& frame) {
  const CameraIntrinsics& kd = frame.intr_depth;
  const CameraIntrinsics& kp = frame.intr_pv;
  DepthMap out(kp.width, kp.height, 0.0);
  const RigidTransform depth_to_pv = frame.world_to_pv() * frame.depth_to_world();
  const double ratio = std::max(kp.fx / kd.fx, kp.fy / kd.fy);
  const int half = std::max(0, static_cast<int>(std::ceil((ratio - 1.0) * 0.5)));
  for (int row = 0; row < kd.height; ++row) {
    for (int col = 0; col < kd.width; ++col) {
      const double z = frame.depth_map(col, row);
      if (!(z > 0.0)) continue;
      const Vec3 c = depth_to_pv.apply(backproject(kd, Vec2(col, row), z));
      if (!(c.z() > 0.0)) continue;
      const int u = static_cast<int>(std::floor(kp.fx * c.x() / c.z() + kp.cx + 0.5));
      const int v = static_cast<int>(std::floor(kp.fy * c.y() / c.z() + kp.cy + 0.5));
      for (int dv = -half; dv <= half; ++dv) {
        for (int du = -half; du <= half; ++du) {
          if (!out.in_bounds(u + du, v + dv)) continue;
          double& slot = out(u + du, v + dv);
          if (slot == 0.0 || c.z() < slot) slot = c.z();
        }
      }
    }
  }
  return out;
}

void quantize_depth_mm(SensorFrame& frame) {
  for (double& z : frame.depth_map.data()) {
    const double mm = std::round(z * 1000.0);
    z = std::min(mm, 65535.0) / 1000.0;
  }
}

}  // namespace surfreg
