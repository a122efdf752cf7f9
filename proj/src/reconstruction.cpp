#include "surfreg/reconstruction.hpp"

#include <limits>
#include <sstream>

#include "surfreg/error.hpp"

namespace surfreg {

ColoredPointCloud backproject_frame(const SensorFrame& frame) {
  const CameraIntrinsics& kd = frame.intr_depth;
  const CameraIntrinsics& kp = frame.intr_pv;
  const RigidTransform d2w = frame.depth_to_world();
  const RigidTransform w2pv = frame.world_to_pv();
  const bool has_pv = frame.pv_image.width() == kp.width && frame.pv_image.height() == kp.height;

  ColoredPointCloud cloud;
  for (int row = 0; row < kd.height; ++row) {
    for (int col = 0; col < kd.width; ++col) {
      const double z = frame.depth_map(col, row);
      if (!(z > 0.0)) continue;
      const Vec3 x = d2w.apply(backproject(kd, Vec2(col, row), z));
      Vec3 color = kOutOfViewGray;
      if (has_pv) {
        if (const auto u = project(kp, w2pv, x)) {
          const int pc = static_cast<int>(std::floor(u->x() + 0.5));
          const int pr = static_cast<int>(std::floor(u->y() + 0.5));
          const Rgb8& px = frame.pv_image(pc, pr);
          color = Vec3(px[0], px[1], px[2]) / 255.0;
        }
      }
      cloud.points.push_back(x);
      cloud.colors.push_back(color);
    }
  }
  return cloud;
}

ColoredPointCloud fuse_frame(const SensorFrame& frame, double send_voxel) {
  if (!(send_voxel > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "fuse_frame: send voxel size must be positive");
  }
  return voxel_downsample(backproject_frame(frame), send_voxel);
}

SceneMap::SceneMap(double voxel_size)
    : voxel_size_(voxel_size), latest_(-std::numeric_limits<double>::infinity()) {
  if (!(voxel_size > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "scene map: voxel size must be positive");
  }
}

void SceneMap::accumulate(const ColoredPointCloud& cloud, double timestamp) {
  if (timestamp < latest_) {
    std::ostringstream msg;
    msg << "scene map: timestamp " << timestamp << " precedes latest " << latest_;
    throw Error(ErrorKind::Ordering, msg.str());
  }
  latest_ = timestamp;
  const bool colors = cloud.has_colors();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 color = colors ? cloud.colors[i] : kOutOfViewGray;
    const auto [it, inserted] = index_.try_emplace(voxel_key(cloud.points[i], voxel_size_),
                                                   points_.size());
    if (inserted) {
      points_.push_back(cloud.points[i]);
      colors_.push_back(color);
      last_seen_.push_back(timestamp);
    } else {
      points_[it->second] = cloud.points[i];
      colors_[it->second] = color;
      last_seen_[it->second] = timestamp;
    }
  }
}

ColoredPointCloud SceneMap::snapshot() const {
  ColoredPointCloud out;
  out.points = points_;
  out.colors = colors_;
  return out;
}

}  // namespace surfreg
