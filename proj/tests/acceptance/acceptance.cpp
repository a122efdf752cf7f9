// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "surfreg/error.hpp"
#include "surfreg/evaluation.hpp"
#include "surfreg/pipeline.hpp"
#include "surfreg/raycast.hpp"
#include "surfreg/reconstruction.hpp"
#include "surfreg/registration.hpp"
#include "surfreg/segmentation.hpp"
#include "surfreg/synth.hpp"

using namespace surfreg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double max_surface_tre(const RigidTransform& est, const RigidTransform& gt) {
  double worst = 0.0;
  for (const Vec3& p : torso_surface_landmarks()) worst = std::max(worst, (est.apply(p) - gt.apply(p)).norm());
  return worst;
}

double mean_surface_tre(const RigidTransform& est, const RigidTransform& gt) {
  const auto lm = torso_surface_landmarks();
  double sum = 0.0;
  for (const Vec3& p : lm) sum += (est.apply(p) - gt.apply(p)).norm();
  return sum / static_cast<double>(lm.size());
}

struct PipelineRun {
  SyntheticRun run;
  PipelineResult result;
  double total_seconds = 0.0;
};

PipelineRun synthetic_pipeline(const PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  PipelineRun out;
  out.run = make_synthetic_run(cfg.synth, cfg.seed);
  const ModelData model = prepare_model(synthetic_model_cloud(cfg.synth, cfg.seed), cfg.reg);
  OracleSegmenter seg(cfg.oracle_erosion, cfg.seed);
  out.result = run_pipeline(frames_from_vector(out.run.frames), model, seg, cfg);
  out.total_seconds = seconds_since(t0);
  return out;
}

// Target surface points seen by the depth camera, recovered by ray casting the
// scene independently of the renderer's depth rasters.
std::set<VoxelKey> visible_target_voxels(const SynthScene& scene, const RigidTransform& pose,
                                         std::span<const SensorFrame> frames, double voxel) {
  std::vector<TriangleMesh> meshes{scene.target.transformed(pose)};
  std::vector<int> labels{1};
  for (const TriangleMesh& d : scene.distractors) {
    meshes.push_back(d);
    labels.push_back(2);
  }
  const RayCaster rc(meshes, labels);
  std::set<VoxelKey> keys;
  for (const SensorFrame& f : frames) {
    const RigidTransform d2w = f.depth_to_world();
    const Vec3 o = d2w.translation();
    for (int v = 0; v < f.intr_depth.height; ++v) {
      for (int u = 0; u < f.intr_depth.width; ++u) {
        const Vec3 dir = d2w.rotate(Vec3((u - f.intr_depth.cx) / f.intr_depth.fx, (v - f.intr_depth.cy) / f.intr_depth.fy, 1.0));
        const auto hit = rc.intersect(o, dir);
        if (hit && hit->label == 1) keys.insert(voxel_key(o + hit->t * dir, voxel));
      }
    }
  }
  return keys;
}

double iou_with(const VoxelMask& mask, const std::set<VoxelKey>& truth) {
  return voxel_iou(active_keys(mask), std::vector<VoxelKey>(truth.begin(), truth.end()));
}

/// Returns a square blob in the image corner, far from the target.
class GarbageSegmenter final : public Segmenter {
 public:
  SegmentResult segment(const SensorFrame& f, std::span<const Prompt>) override {
    SegmentResult r;
    r.mask = BinaryMask(f.intr_pv.width, f.intr_pv.height, 0);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x) r.mask(x, y) = 1;
    r.confidence = 0.9;
    return r;
  }
  std::string name() const override { return "garbage"; }
};

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  PipelineConfig cfg;
  const PipelineRun p = synthetic_pipeline(cfg);
  const bool tracked = p.result.final_pose.has_value();
  o.require(tracked, "tracked");
  if (tracked) {
    const double tre = max_surface_tre(*p.result.final_pose, p.run.model_pose);
    o.require(tre <= 1e-3, fmt("max TRE at 8 surface landmarks %.3f mm <= 1 mm", tre * 1e3));
  }
  o.require(p.total_seconds < 60.0, fmt("runtime %.1f s < 60 s", p.total_seconds));
  return o;
}

Outcome criterion2() {
  Outcome o;
  int trend = 0;
  double worst_mean = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PipelineConfig cfg;
    cfg.synth.noise_sigma = 0.002;
    cfg.seed = seed;
    cfg.reg.seed = seed;
    const PipelineRun p = synthetic_pipeline(cfg);
    if (!p.result.final_pose || p.result.surface.empty()) {
      o.require(false, "seed " + std::to_string(seed) + " not tracked");
      continue;
    }
    const double mean_tre = mean_surface_tre(*p.result.final_pose, p.run.model_pose);
    worst_mean = std::max(worst_mean, mean_tre);

    LandmarkSet lm = default_body_landmarks();
    for (const Vec3& m : lm.model) lm.world.push_back(p.run.model_pose.apply(m));
    const TreReport rep = evaluate_registration(*p.result.final_pose, lm, p.result.surface);
    std::vector<std::size_t> order(rep.landmarks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return rep.landmarks[a].dva < rep.landmarks[b].dva; });
    double near = 0.0, far = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      near += rep.landmarks[order[k]].tre / 5.0;
      far += rep.landmarks[order[order.size() - 1 - k]].tre / 5.0;
    }
    trend += far > near;
    per_seed << (seed > 1 ? ", " : "") << fmt("%.2f/%.2f", near * 1e3, far * 1e3);
  }
  o.require(worst_mean <= 0.010, fmt("worst mean surface-landmark TRE %.2f mm <= 10 mm", worst_mean * 1e3));
  o.require(trend >= 4, "far-DVA TRE > near-DVA TRE in " + std::to_string(trend) + "/5 runs (near/far mm: " +
                            per_seed.str() + ")");
  return o;
}

Outcome criterion3() {
  Outcome o;
  const SynthScene scene = make_torso_scene();
  const RigidTransform gt = default_torso_pose();
  RegConfig cfg;
  const ModelData model = prepare_model(make_torso_mesh().sample_surface(20000, 77), cfg);
  const Vec3 center = gt.apply(Vec3(0.0, 0.0, 0.07));
  int recovered = 0;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    const double angle = std::uniform_real_distribution<double>(-2.2, -0.2)(rng);
    const auto traj = orbit_trajectory(center, 0.85, 0.55, 1, angle, 0.0);
    RenderOptions ro;
    ro.noise_sigma = 0.002;
    ro.seed = trial;
    const auto frames = synth_render(scene, gt, traj, ro);
    const SensorFrame& f = frames[0];
    OracleSegmenter seg;
    const SegConfig sc;
    const ColoredPointCloud fused = fuse_frame(f, 0.01);
    const VoxelMask mask = init_mask(fused, seg.segment(f, {}).mask, f, sc);
    const ColoredPointCloud observed = extract_surface(mask, fused, f.pv_to_world().translation());

    // A previously accepted pose that is the truth flipped about the long axis.
    RegistrationState state = initial_state(model);
    const RigidTransform flipped = gt * RigidTransform::rotation_about(Vec3::UnitX(), std::numbers::pi, model.centroid);
    const Pyramid sp = build_pyramid(observed, cfg.levels, cfg.voxel_base, cfg.normal_neighbors);
    state.pose = flipped;
    state.score = score_pose(flipped, model.pyramid.finest().cloud, sp.finest().cloud, cfg).score;
    cfg.seed = trial;
    register_frame(state, model, observed, cfg);
    const double err = deg(state.pose->rotation_angle_to(gt));
    worst = std::max(worst, err);
    recovered += err <= 5.0;
  }
  o.require(recovered >= 19, std::to_string(recovered) + "/20 trials within 5 deg");
  o.detail << fmt("; worst rotation error %.2f deg", worst);
  return o;
}

Outcome criterion4() {
  Outcome o;
  RegConfig cfg;
  const TriangleMesh torso = make_torso_mesh();
  const RigidTransform gt = default_torso_pose();
  const ColoredPointCloud model_cloud = torso.sample_surface(20000, 5);
  const ColoredPointCloud scene_cloud = torso.transformed(gt).sample_surface(50000, 6);
  const Pyramid mp = build_pyramid(model_cloud, cfg.levels, cfg.voxel_base, cfg.normal_neighbors);
  const Pyramid sp = build_pyramid(scene_cloud, cfg.levels, cfg.voxel_base, cfg.normal_neighbors);
  const Vec3 c = gt.apply(model_cloud.centroid());
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g;
  int ok = 0;
  int worsened = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double angle = rad(10.0) * unit(rng);
    const double shift = 0.020 * unit(rng);
    const RigidTransform init =
        RigidTransform::translation(shift * dir) * RigidTransform::rotation_about(axis, angle, c) * gt;
    const IcpResult r = refine_icp(init, mp, sp, cfg);
    const double rot = deg(r.transform.rotation_angle_to(gt));
    const double trans = (r.transform.apply(model_cloud.centroid()) - c).norm();
    ok += rot <= 0.5 && trans <= 1e-3;
    const double d0 = trimmed_mean_distance(init, mp.finest().cloud, sp.finest().cloud, cfg.d_max, cfg.trim);
    const double d1 = trimmed_mean_distance(r.transform, mp.finest().cloud, sp.finest().cloud, cfg.d_max, cfg.trim);
    worsened += d1 > d0;
  }
  o.require(ok >= 45, std::to_string(ok) + "/50 within 1 mm / 0.5 deg");
  o.require(worsened == 0, std::to_string(worsened) + " trials with a larger final trimmed mean");
  return o;
}

// Brute-force agreement on 100 random small instances per quantity.
Outcome criterion5_oracles() {
  Outcome o;
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;

  double err_resid = 0.0, err_nme = 0.0;
  const CheckerboardSpec spec{4, 3, 0.03};
  const std::vector<Vec3> board = checkerboard_model(spec);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform t = oracle::random_transform(rng, std::numbers::pi, 1.0);
    std::vector<Vec3> corners;
    for (const Vec3& q : board) corners.push_back(t.apply(q) + 0.003 * Vec3(g(rng), g(rng), g(rng)));
    const double depth = 0.3 + 2.0 * u(rng);
    const ReconSample s = eval_reconstruction(corners, spec, Vec3(0, 0, 1), depth);
    const RigidTransform h = oracle::horn_fit(board, corners);
    double ss = 0.0;
    for (std::size_t k = 0; k < board.size(); ++k) {
      const double e = (h.apply(board[k]) - corners[k]).norm();
      err_resid = std::max(err_resid, std::abs(e - s.residuals[k]));
      ss += e * e;
    }
    err_nme = std::max(err_nme, std::abs(std::sqrt(ss / board.size()) / depth - s.nme));
  }
  o.require(err_resid <= 1e-9, fmt("residuals %.1e", err_resid));
  o.require(err_nme <= 1e-9, fmt("NME %.1e", err_nme));

  double err_tre = 0.0;
  for (int i = 0; i < 100; ++i) {
    LandmarkSet lm;
    const int n = 3 + static_cast<int>(u(rng) * 8);
    for (int k = 0; k < n; ++k) {
      lm.names.push_back("p" + std::to_string(k));
      lm.model.push_back(Vec3(g(rng), g(rng), g(rng)));
      lm.world.push_back(Vec3(g(rng), g(rng), g(rng)));
    }
    const RigidTransform est = oracle::random_transform(rng);
    const std::vector<double> got = tre(est, lm);
    const Mat4 m = est.matrix();
    for (int k = 0; k < n; ++k) {
      const Eigen::Vector4d x = m * lm.model[k].homogeneous();
      err_tre = std::max(err_tre, std::abs((x.head<3>() - lm.world[k]).norm() - got[k]));
    }
  }
  o.require(err_tre <= 1e-9, fmt("TRE %.1e", err_tre));

  double err_score = 0.0;
  RegConfig rc;
  for (int i = 0; i < 100; ++i) {
    ColoredPointCloud model, scene;
    model.points = oracle::random_points(20 + i % 30, 9000 + i, 0.0, 0.1);
    scene.points = oracle::random_points(40 + i % 25, 19000 + i, 0.0, 0.1);
    const RigidTransform t = oracle::random_transform(rng, 0.3, 0.03);
    const ScoreResult got = score_pose(t, model, scene, rc);
    const ScoreResult want = oracle::score(t, model, scene, rc);
    err_score = std::max({err_score, std::abs(got.score - want.score), std::abs(got.coverage - want.coverage),
                          std::abs(got.trimmed_mean_dist - want.trimmed_mean_dist)});
  }
  o.require(err_score <= 1e-9, fmt("score %.1e", err_score));

  // IoU gate: acceptance iff IoU(refined mask, projected mask) >= tau, and a
  // rejected frame leaves the voxel set untouched.
  int gate_mismatch = 0;
  int gate_accepted = 0;
  double err_iou = 0.0;
  const SegConfig sc;
  for (int i = 0; i < 100; ++i) {
    // fx = 400 px: a 2 cm voxel at 1 m covers a 9x9 footprint.
    constexpr int W = 40;
    SensorFrame f;
    f.intr_pv = {400.0, 400.0, 19.5, 19.5, W, W};
    f.intr_depth = f.intr_pv;
    f.depth_map = DepthMap(W, W, 1.0);
    f.pv_image = RgbImage(W, W, Rgb8{0, 0, 0});
    VoxelMask mask(sc.voxel_res);
    const int cx = 8 + static_cast<int>(u(rng) * 24), cy = 8 + static_cast<int>(u(rng) * 24);
    const Vec3 a = backproject(f.intr_pv, Vec2(cx, cy), 1.0);
    mask.active().emplace(voxel_key(a, sc.voxel_res), VoxelState{1, 0, a});
    // Half the blobs sit on the voxel, the rest anywhere.
    BinaryMask seg_mask(W, W, 0);
    const int bw = 1 + static_cast<int>(u(rng) * 14), bh = 1 + static_cast<int>(u(rng) * 14);
    const bool on_target = u(rng) < 0.5;
    const int bx = on_target ? cx - bw / 2 + static_cast<int>(u(rng) * 9) - 4 : static_cast<int>(u(rng) * W);
    const int by = on_target ? cy - bh / 2 + static_cast<int>(u(rng) * 9) - 4 : static_cast<int>(u(rng) * W);
    for (int y = std::max(0, by); y < std::min(W, by + bh); ++y)
      for (int x = std::max(0, bx); x < std::min(W, bx + bw); ++x) seg_mask(x, y) = 1;
    class Fixed final : public Segmenter {
     public:
      explicit Fixed(BinaryMask m) : m_(std::move(m)) {}
      SegmentResult segment(const SensorFrame&, std::span<const Prompt>) override { return {m_, 1.0}; }
      std::string name() const override { return "fixed"; }

     private:
      BinaryMask m_;
    } seg(seg_mask);
    const PropagateResult r = propagate(mask, f, seg, {}, sc);
    const BinaryMask proj = project_mask(mask, f, sc);
    const BinaryMask refined = refine_mask2d(seg_mask, f, sc);
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < W; ++y) {
      for (int x = 0; x < W; ++x) {
        inter += proj(x, y) && refined(x, y);
        uni += proj(x, y) || refined(x, y);
      }
    }
    const double iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    err_iou = std::max(err_iou, std::abs(iou - r.iou));
    gate_mismatch += r.accepted != (iou >= sc.tau_iou);
    gate_accepted += r.accepted;
    if (!r.accepted) gate_mismatch += !(r.mask == mask);
  }
  o.require(err_iou <= 1e-9 && gate_mismatch == 0 && gate_accepted > 0 && gate_accepted < 100,
            "IoU gate " + fmt("%.1e", err_iou) + ", " + std::to_string(gate_mismatch) + " mismatches, " +
                std::to_string(gate_accepted) + " accepted");

  // Carving gate: retained iff free / (occ + 1) <= rho_max.
  int carve_mismatch = 0;
  for (int i = 0; i < 100; ++i) {
    VoxelMask m(0.02);
    const int n = 1 + static_cast<int>(u(rng) * 20);
    for (int k = 0; k < n; ++k) {
      VoxelState v{static_cast<std::uint32_t>(u(rng) * 6), static_cast<std::uint32_t>(u(rng) * 6), Vec3::Zero()};
      m.active().emplace(VoxelKey{k, i, 0}, v);
    }
    const double rho = 0.05 + 0.9 * u(rng);
    SegConfig c;
    c.rho_max = rho;
    const VoxelMask kept = regularize(m, c);
    for (const auto& [key, v] : m.active()) {
      const bool retain = static_cast<double>(v.free) / (static_cast<double>(v.occ) + 1.0) <= rho;
      carve_mismatch += retain != kept.is_active(key);
      carve_mismatch += carve_condition(v, rho) == retain;
    }
  }
  o.require(carve_mismatch == 0, "carving gate " + std::to_string(carve_mismatch) + " mismatches");
  return o;
}

Outcome criterion5() {
  Outcome o;
  const CheckerboardSpec spec;
  // Close/Low cell: 0.5 m, low tilt, sigma0 = 3 mm quadratic noise.
  std::vector<ReconSample> close_low;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const CornerSample c = simulate_checkerboard_view(spec, 0.5, 10.0, 0.0, 0.003, seed);
    close_low.push_back(eval_reconstruction(c.corners, spec, c.normal, c.depth));
  }
  double cl_mean = -1.0;
  for (const StratCell& cell : stratify(close_low)) {
    if (cell.distance == DistanceBin::Close && cell.tilt == TiltBin::Low && cell.samples > 0) cl_mean = cell.residuals.mean;
  }
  o.require(cl_mean >= 0.002 && cl_mean <= 0.007, fmt("Close/Low mean residual %.2f mm in [2, 7] mm", cl_mean * 1e3));

  int trend = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<ReconSample> samples;
    for (double d : {0.5, 0.7, 1.6, 1.9}) {
      const CornerSample c = simulate_checkerboard_view(spec, d, 10.0, 0.0, 0.003, 100 + seed * 10 + samples.size());
      samples.push_back(eval_reconstruction(c.corners, spec, c.normal, c.depth));
    }
    double close = -1.0, far = -1.0;
    for (const StratCell& cell : stratify(samples)) {
      if (cell.tilt != TiltBin::Low || cell.samples == 0) continue;
      if (cell.distance == DistanceBin::Close) close = cell.residuals.mean;
      if (cell.distance == DistanceBin::Far) far = cell.residuals.mean;
    }
    trend += close >= 0.0 && far > close;
  }
  o.require(trend == 5, "Far > Close in " + std::to_string(trend) + "/5 seeds");

  const Outcome br = criterion5_oracles();
  o.require(br.pass, "brute-force agreement (" + br.detail.str() + ")");
  return o;
}

Outcome criterion6() {
  Outcome o;
  const SynthScene scene = make_torso_scene();
  const RigidTransform pose = default_torso_pose();
  const Vec3 center = pose.apply(Vec3(0.0, 0.0, 0.07));
  const SegConfig sc;
  const double send_voxel = PipelineConfig{}.send_voxel;
  OracleSegmenter seg;
  SceneMap map(PipelineConfig{}.map_voxel);
  VoxelMask mask(sc.voxel_res);

  const auto orbit = synth_render(scene, pose, orbit_trajectory(center, 0.85, 0.55, 20, -2.2, 2.0));
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    const SensorFrame& f = orbit[i];
    const ColoredPointCloud fused = fuse_frame(f, send_voxel);
    map.accumulate(fused, f.timestamp);
    if (i == 0) {
      mask = init_mask(fused, seg.segment(f, {}).mask, f, sc);
    } else {
      mask = propagate(mask, f, seg, map.snapshot(), sc).mask;
    }
  }
  const double orbit_iou = iou_with(mask, visible_target_voxels(scene, pose, orbit, sc.voxel_res));
  o.require(orbit_iou >= 0.9, fmt("orbit IoU %.3f >= 0.9", orbit_iou));

  // Garbage frames: a blob far from the target fails the IoU gate.
  {
    GarbageSegmenter garbage;
    bool identical = true;
    bool rejected = true;
    VoxelMask m = mask;
    for (std::size_t i = 0; i < orbit.size(); i += 4) {
      const PropagateResult r = propagate(m, orbit[i], garbage, map.snapshot(), sc);
      rejected = rejected && !r.accepted;
      identical = identical && r.mask == mask;
      m = r.mask;
    }
    o.require(rejected && identical, "garbage frames rejected, voxel set bit-identical");
  }

  // The torso slides 0.2 m sideways; a reverse orbit follows.
  const RigidTransform moved = RigidTransform::translation(pose.rotate(Vec3(0.0, 0.2, 0.0))) * pose;
  RenderOptions ro;
  ro.start_time = orbit.back().timestamp + 1.0;
  const auto after = synth_render(scene, moved, orbit_trajectory(center, 0.85, 0.55, 15, -0.2, -2.0), ro);
  int accepted = 0;
  int restored_at = 0;
  double iou_at_10 = 0.0;
  std::set<VoxelKey> truth;
  for (std::size_t i = 0; i < after.size() && accepted < 10; ++i) {
    const SensorFrame& f = after[i];
    const auto seen = visible_target_voxels(scene, moved, std::span(&f, 1), sc.voxel_res);
    truth.insert(seen.begin(), seen.end());
    map.accumulate(fuse_frame(f, send_voxel), f.timestamp);
    const PropagateResult r = propagate(mask, f, seg, map.snapshot(), sc);
    mask = r.mask;
    if (!r.accepted) continue;
    ++accepted;
    const double iou = iou_with(mask, truth);
    if (!restored_at && iou >= 0.85) restored_at = accepted;
    iou_at_10 = iou;
  }
  o.require(restored_at > 0, "after displacement IoU >= 0.85 at accepted propagation " +
                                 (restored_at ? std::to_string(restored_at) : std::string("never")) +
                                 fmt(" (IoU %.3f after %.0f)", iou_at_10, accepted));
  return o;
}

Outcome criterion7() {
  Outcome o;
  RegConfig cfg;
  const TriangleMesh torso = make_torso_mesh();
  const ModelData model = prepare_model(torso.sample_surface(20000, 3), cfg);
  const ColoredPointCloud scene = torso.transformed(default_torso_pose()).sample_surface(50000, 4);
  RegistrationState state = initial_state(model);
  const auto t0 = Clock::now();
  register_frame(state, model, scene, cfg);
  const double reg_s = seconds_since(t0);
  o.require(reg_s < 1.0, fmt("register_frame on %.0f points %.3f s < 1 s", scene.size(), reg_s));

  PipelineConfig pc;
  const PipelineRun p = synthetic_pipeline(pc);
  const double fps = static_cast<double>(p.run.frames.size()) / p.result.wall_seconds;
  o.require(fps >= 5.0, fmt("pipeline %.1f frames/s >= 5 (%.0f frames)", fps, p.run.frames.size()));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 noise-free end-to-end", criterion1}, {"2 noisy end-to-end", criterion2},
      {"3 symmetry recovery", criterion3},     {"4 ICP basin", criterion4},
      {"5 reconstruction evaluation", criterion5}, {"6 mask lifecycle", criterion6},
      {"7 performance", criterion7},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(static_cast<int>(i + 1))) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("criterion %s: %s (%s) [%.1f s]\n", criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
