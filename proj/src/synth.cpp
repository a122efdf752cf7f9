#include "surfreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "surfreg/error.hpp"
#include "surfreg/raycast.hpp"

namespace surfreg {

namespace {

constexpr int kTargetLabel = 1;
constexpr int kClutterLabel = 2;

Rgb8 to_rgb8(const Vec3& c) {
  auto b = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  return {b(c.x()), b(c.y()), b(c.z())};
}

RayCaster build_caster(const SynthScene& scene, const RigidTransform& model_pose) {
  std::vector<TriangleMesh> meshes{scene.target.transformed(model_pose)};
  std::vector<int> labels{kTargetLabel};
  for (const auto& d : scene.distractors) {
    meshes.push_back(d);
    labels.push_back(kClutterLabel);
  }
  return RayCaster(meshes, labels);
}

SensorFrame render_frame(const RayCaster& caster, const RigidTransform& model_pose,
                         const RigidTransform& device_pose, double timestamp,
                         const RenderOptions& opt) {
  SensorFrame f;
  f.timestamp = timestamp;
  f.pv_timestamp = timestamp;
  f.pose_ref_to_world = device_pose;
  f.extr_depth_to_ref = opt.extr_depth_to_ref;
  f.extr_pv_to_ref = opt.extr_pv_to_ref;
  f.intr_depth = opt.intr_depth;
  f.intr_pv = opt.intr_pv;
  f.gt_model_pose = model_pose;

  const CameraIntrinsics& kd = opt.intr_depth;
  f.depth_map = DepthMap(kd.width, kd.height, 0.0);
  const RigidTransform d2w = f.depth_to_world();
  for (int row = 0; row < kd.height; ++row) {
    for (int col = 0; col < kd.width; ++col) {
      const Vec3 dir = d2w.rotate(Vec3((col - kd.cx) / kd.fx, (row - kd.cy) / kd.fy, 1.0));
      if (const auto hit = caster.intersect(d2w.translation(), dir)) f.depth_map(col, row) = hit->t;
    }
  }

  const CameraIntrinsics& kp = opt.intr_pv;
  f.pv_image = RgbImage(kp.width, kp.height, Rgb8{0, 0, 0});
  BinaryMask labels(kp.width, kp.height, 0);
  if (opt.render_pv) {
    const RigidTransform p2w = f.pv_to_world();
    const Vec3 light = Vec3(0.3, -0.2, 1.0).normalized();
    const Vec3 target_color(0.85, 0.62, 0.52);
    const Vec3 clutter_color(0.35, 0.38, 0.45);
    const Vec3 background(0.08, 0.08, 0.1);
    for (int row = 0; row < kp.height; ++row) {
      for (int col = 0; col < kp.width; ++col) {
        const Vec3 dir = p2w.rotate(Vec3((col - kp.cx) / kp.fx, (row - kp.cy) / kp.fy, 1.0));
        const auto hit = caster.intersect(p2w.translation(), dir);
        if (!hit) {
          f.pv_image(col, row) = to_rgb8(background);
          continue;
        }
        const double shade = 0.35 + 0.65 * std::abs(caster.normal(hit->triangle).dot(light));
        const bool target = hit->label == kTargetLabel;
        f.pv_image(col, row) = to_rgb8(shade * (target ? target_color : clutter_color));
        labels(col, row) = target ? 1 : 0;
      }
    }
  }
  f.gt_label_map = std::move(labels);
  return f;
}

}  // namespace

std::vector<SensorFrame> synth_render(const SynthScene& scene, const RigidTransform& model_pose,
                                      std::span<const RigidTransform> trajectory,
                                      const RenderOptions& options) {
  std::vector<RigidTransform> poses(trajectory.size(), model_pose);
  return synth_render(scene, poses, trajectory, options);
}

std::vector<SensorFrame> synth_render(const SynthScene& scene,
                                      std::span<const RigidTransform> model_poses,
                                      std::span<const RigidTransform> trajectory,
                                      const RenderOptions& options) {
  if (trajectory.empty()) {
    throw Error(ErrorKind::InvalidParameter, "synth_render: empty camera trajectory");
  }
  if (model_poses.size() != trajectory.size()) {
    throw Error(ErrorKind::InvalidParameter, "synth_render: one model pose per frame required");
  }
  if (!(options.noise_sigma >= 0.0) || !(options.noise_sigma_quadratic >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "synth_render: noise sigma must be >= 0");
  }
  options.intr_depth.validate();
  options.intr_pv.validate();

  std::vector<SensorFrame> frames;
  frames.reserve(trajectory.size());
  std::optional<RayCaster> caster;
  std::optional<Mat4> caster_pose;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const Mat4 m = model_poses[i].matrix();
    if (!caster_pose || *caster_pose != m) {
      caster.emplace(build_caster(scene, model_poses[i]));
      caster_pose = m;
    }
    frames.push_back(render_frame(*caster, model_poses[i], trajectory[i],
                                  options.start_time + options.frame_interval * static_cast<double>(i),
                                  options));
  }
  if (options.noise_sigma > 0.0 || options.noise_sigma_quadratic > 0.0) {
    add_depth_noise(frames, options.noise_sigma, options.noise_sigma_quadratic, options.seed);
  }
  return frames;
}

void add_depth_noise(std::span<SensorFrame> frames, double sigma, double sigma_quadratic,
                     std::uint64_t seed) {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (double& z : frames[i].depth_map.data()) {
      if (!(z > 0.0)) continue;
      const double quad = sigma_quadratic * z * z;
      const double s = std::sqrt(sigma * sigma + quad * quad);
      z = std::max(0.0, z + s * unit(rng));
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

struct Bump {
  double x;
  double phi;
  double amplitude;
  double sigma;
};

std::vector<Bump> torso_bumps() {
  constexpr double half_pi = std::numbers::pi / 2.0;
  return {
      {0.17, half_pi - 0.55, 0.022, 0.045},   // chest, left
      {0.17, half_pi + 0.55, 0.022, 0.045},   // chest, right
      {-0.05, half_pi, -0.010, 0.020},        // navel
  };
}

double torso_radius(double x, double phi, const TorsoParams& p) {
  double r = p.radius;
  for (const Bump& b : torso_bumps()) {
    const double dx = x - b.x;
    const double ds = p.radius * (phi - b.phi);
    r += b.amplitude * std::exp(-(dx * dx + ds * ds) / (2.0 * b.sigma * b.sigma));
  }
  return r;
}

void add_oriented(TriangleMesh& mesh, int a, int b, int c, const Vec3& outward) {
  const Vec3 n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
  if (n.dot(outward) < 0.0) std::swap(b, c);
  mesh.triangles.push_back({a, b, c});
}

}  // namespace

Vec3 torso_surface_point(double x, double phi, const TorsoParams& params) {
  const double r = torso_radius(x, phi, params);
  return {x, r * std::cos(phi), r * std::sin(phi)};
}

TriangleMesh make_torso_mesh(const TorsoParams& p) {
  TriangleMesh mesh;
  const int nx = p.segments_along;
  const int nphi = p.segments_around;
  const double half = p.length / 2.0;
  auto vid = [&](int i, int j) { return i * (nphi + 1) + j; };
  for (int i = 0; i <= nx; ++i) {
    const double x = -half + p.length * i / nx;
    for (int j = 0; j <= nphi; ++j) {
      mesh.vertices.push_back(torso_surface_point(x, std::numbers::pi * j / nphi, p));
    }
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nphi; ++j) {
      const Vec3 mid = 0.25 * (mesh.vertices[vid(i, j)] + mesh.vertices[vid(i + 1, j + 1)] +
                               mesh.vertices[vid(i + 1, j)] + mesh.vertices[vid(i, j + 1)]);
      const Vec3 outward(0.0, mid.y(), mid.z());
      add_oriented(mesh, vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), outward);
      add_oriented(mesh, vid(i, j), vid(i + 1, j + 1), vid(i, j + 1), outward);
    }
  }
  // End caps: fan from an interior point of each half-disc, closing along the base.
  constexpr int kBaseSegments = 8;
  for (int end = 0; end < 2; ++end) {
    const int i = end == 0 ? 0 : nx;
    const double x = -half + p.length * i / nx;
    const Vec3 outward(end == 0 ? -1.0 : 1.0, 0.0, 0.0);
    std::vector<int> ring;
    for (int j = 0; j <= nphi; ++j) ring.push_back(vid(i, j));
    const Vec3 left = mesh.vertices[vid(i, nphi)];
    const Vec3 right = mesh.vertices[vid(i, 0)];
    for (int k = 1; k < kBaseSegments; ++k) {
      mesh.vertices.push_back(left + (right - left) * (static_cast<double>(k) / kBaseSegments));
      ring.push_back(static_cast<int>(mesh.vertices.size()) - 1);
    }
    ring.push_back(vid(i, 0));
    mesh.vertices.emplace_back(x, 0.0, 0.4 * p.radius);
    const int center = static_cast<int>(mesh.vertices.size()) - 1;
    for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
      add_oriented(mesh, center, ring[k], ring[k + 1], outward);
    }
  }
  mesh.validate();
  return mesh;
}

std::vector<Vec3> torso_surface_landmarks(const TorsoParams& p) {
  constexpr double pi = std::numbers::pi;
  const double h = p.length / 2.0;
  return {
      torso_surface_point(0.8 * h, pi / 2, p),        torso_surface_point(-0.8 * h, pi / 2, p),
      torso_surface_point(0.4 * h, pi / 4, p),        torso_surface_point(0.4 * h, 3 * pi / 4, p),
      torso_surface_point(-0.4 * h, pi / 3, p),       torso_surface_point(-0.4 * h, 2 * pi / 3, p),
      torso_surface_point(0.0, pi / 6, p),            torso_surface_point(0.0, 5 * pi / 6, p),
  };
}

TriangleMesh make_plane_mesh(const Vec3& center, double size_x, double size_y) {
  TriangleMesh mesh;
  const double hx = size_x / 2.0;
  const double hy = size_y / 2.0;
  mesh.vertices = {center + Vec3(-hx, -hy, 0.0), center + Vec3(hx, -hy, 0.0),
                   center + Vec3(hx, hy, 0.0), center + Vec3(-hx, hy, 0.0)};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

TriangleMesh make_square_mesh(const Vec3& center, const Vec3& normal, double size) {
  const Vec3 n = normal.normalized();
  const Vec3 helper = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 a = helper.cross(n).normalized();
  const Vec3 b = n.cross(a);
  const double h = size / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {center - h * a - h * b, center + h * a - h * b, center + h * a + h * b,
                   center - h * a + h * b};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

TriangleMesh make_box_mesh(const Vec3& center, const Vec3& size) {
  TriangleMesh mesh;
  const Vec3 h = size / 2.0;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.push_back(center + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                                          (i & 4) ? h.z() : -h.z()));
  }
  const int faces[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                           {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  for (const auto& f : faces) {
    Vec3 mid = Vec3::Zero();
    for (int k : f) mid += mesh.vertices[k];
    const Vec3 outward = mid / 4.0 - center;
    add_oriented(mesh, f[0], f[1], f[2], outward);
    add_oriented(mesh, f[0], f[2], f[3], outward);
  }
  return mesh;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitY());
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return RigidTransform(r, eye);
}

std::vector<RigidTransform> orbit_trajectory(const Vec3& center, double radius, double height,
                                             int frames, double start_angle, double sweep) {
  if (frames <= 0) throw Error(ErrorKind::InvalidParameter, "orbit: frames must be positive");
  std::vector<RigidTransform> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    const double a = start_angle + (frames > 1 ? sweep * i / (frames - 1) : 0.0);
    const Vec3 eye = center + Vec3(radius * std::cos(a), radius * std::sin(a), height);
    out.push_back(look_at(eye, center));
  }
  return out;
}

RigidTransform default_torso_pose() {
  return RigidTransform::translation(Vec3(0.05, -0.03, 0.75)) *
         RigidTransform::rotation_about(Vec3::UnitZ(), 0.35);
}

SynthScene make_torso_scene(const TorsoParams& params, bool with_box) {
  SynthScene scene;
  scene.target = make_torso_mesh(params);
  const Vec3 table_top = default_torso_pose().apply(Vec3::Zero());
  scene.distractors.push_back(make_plane_mesh(table_top, 2.4, 2.4));
  if (with_box) {
    scene.distractors.push_back(
        make_box_mesh(table_top + Vec3(-0.15, 0.42, 0.06), Vec3(0.16, 0.12, 0.12)));
  }
  return scene;
}

}  // namespace surfreg
