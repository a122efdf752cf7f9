#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surfreg/mesh.hpp"
#include "surfreg/sensor.hpp"

namespace surfreg {

/// Target mesh (in its own model frame) plus static world-frame clutter.
struct SynthScene {
  TriangleMesh target;
  std::vector<TriangleMesh> distractors;
};

struct RenderOptions {
  CameraIntrinsics intr_depth = default_depth_intrinsics();
  CameraIntrinsics intr_pv = default_pv_intrinsics();
  RigidTransform extr_depth_to_ref = default_extr_depth_to_ref();
  RigidTransform extr_pv_to_ref = default_extr_pv_to_ref();
  /// Per-pixel i.i.d. Gaussian depth noise, meters.
  double noise_sigma = 0.0;
  /// sigma0 of the distance-dependent term sigma0 * (z / 1 m)^2, meters.
  double noise_sigma_quadratic = 0.0;
  std::uint64_t seed = 0;
  double start_time = 0.0;
  double frame_interval = 0.2;
  bool render_pv = true;
};

/// Ray-casts the scene from each device pose in `trajectory`. The target is
/// placed by `model_pose`. Depth is the camera-frame z of the nearest hit,
/// 0 on a miss. Labels mark PV pixels whose first hit is the target.
std::vector<SensorFrame> synth_render(const SynthScene& scene, const RigidTransform& model_pose,
                                      std::span<const RigidTransform> trajectory,
                                      const RenderOptions& options = {});

/// Variant with one target pose per frame (moving-object sequences).
std::vector<SensorFrame> synth_render(const SynthScene& scene,
                                      std::span<const RigidTransform> model_poses,
                                      std::span<const RigidTransform> trajectory,
                                      const RenderOptions& options = {});

/// Adds zero-mean Gaussian noise with sigma(z) = sqrt(s^2 + (s0 z^2)^2) to
/// valid depth pixels, clamped at 0. Frame i draws from seed mixed with i.
void add_depth_noise(std::span<SensorFrame> frames, double sigma, double sigma_quadratic,
                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scene library

struct TorsoParams {
  double radius = 0.15;
  double length = 0.6;
  int segments_along = 60;
  int segments_around = 48;
};

/// Half-cylinder "torso" lying along the model x axis (cranial = +x) on the
/// z = 0 plane, with chest bumps and a navel dimple that break the
/// head/feet symmetry. Closed at both ends; open underneath.
TriangleMesh make_torso_mesh(const TorsoParams& params = {});

/// Point on the curved torso surface at axial position x and polar angle phi
/// (phi = 0 at +y, pi/2 on top).
Vec3 torso_surface_point(double x, double phi, const TorsoParams& params = {});

/// Eight landmarks on the curved torso surface (model frame).
std::vector<Vec3> torso_surface_landmarks(const TorsoParams& params = {});

/// Axis-aligned rectangle in the z = height plane, normal +z.
TriangleMesh make_plane_mesh(const Vec3& center, double size_x, double size_y);
TriangleMesh make_box_mesh(const Vec3& center, const Vec3& size);
/// Square of side `size` centred at `center` with normal `normal`.
TriangleMesh make_square_mesh(const Vec3& center, const Vec3& normal, double size);

/// Device pose at `eye` looking at `target` (camera z forward, y down).
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Circular orbit around `center` at horizontal `radius` and `height` above
/// it, starting at `start_angle` and sweeping `sweep` radians over `frames`.
std::vector<RigidTransform> orbit_trajectory(const Vec3& center, double radius, double height,
                                             int frames, double start_angle, double sweep);

/// Torso on a table with a distractor box; the standard synthetic scene.
SynthScene make_torso_scene(const TorsoParams& params = {}, bool with_box = true);

/// Ground-truth model pose used by the bundled synthetic scene.
RigidTransform default_torso_pose();

}  // namespace surfreg
