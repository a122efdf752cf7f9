#include "surfreg/pipeline.hpp"

#include <chrono>
#include <exception>
#include <fstream>
#include <iomanip>
#include <memory>
#include <thread>

#include "surfreg/error.hpp"
#include "surfreg/ply_io.hpp"
#include "surfreg/service_client.hpp"

namespace surfreg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Reconstructed {
  std::size_t index = 0;
  SensorFrame frame;
  ColoredPointCloud fused;
  ColoredPointCloud snapshot;
};

struct Segmented {
  FrameRecord record;
  std::optional<ColoredPointCloud> surface;
};

// First error wins; every queue is aborted so blocked stages return.
class Failure {
 public:
  template <class... Q>
  void set(std::exception_ptr e, Q&... queues) {
    {
      std::lock_guard lock(mu_);
      if (!error_) error_ = e;
    }
    (queues.abort(), ...);
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

// Due when at least `interval` has elapsed since `last` (a small tolerance
// absorbs timestamp rounding).
bool due(const std::optional<double>& last, double t, double interval) {
  return !last || t - *last >= interval - 1e-6;
}

}  // namespace

FrameSource frames_from_vector(const std::vector<SensorFrame>& frames) {
  return {frames.size(), [&frames](std::size_t i) { return frames[i]; }};
}

PipelineResult run_pipeline(const FrameSource& source, const ModelData& model, Segmenter& segmenter,
                            const PipelineConfig& cfg) {
  cfg.validate();
  const auto t_start = Clock::now();
  BoundedQueue<std::unique_ptr<Reconstructed>> q_recon(cfg.queue_capacity);
  BoundedQueue<Segmented> q_seg(cfg.queue_capacity);
  Failure failure;
  PipelineResult result;
  SceneMap map(cfg.map_voxel);
  VoxelMask mask(cfg.seg.voxel_res);

  std::thread reconstruct([&] {
    try {
      for (std::size_t i = 0; i < source.count; ++i) {
        auto item = std::make_unique<Reconstructed>();
        item->index = i;
        item->frame = source.get(i);
        const auto t0 = Clock::now();
        item->fused = fuse_frame(item->frame, cfg.send_voxel);
        map.accumulate(item->fused, item->frame.timestamp);
        item->snapshot = map.snapshot();
        result.stage_seconds.reconstruct += seconds_since(t0);
        if (!q_recon.push(std::move(item))) return;
      }
      q_recon.close();
    } catch (...) {
      failure.set(std::current_exception(), q_recon, q_seg);
    }
  });

  std::thread segment([&] {
    try {
      std::optional<double> last_seg;
      std::optional<double> last_reg;
      while (auto next = q_recon.pop()) {
        const std::unique_ptr<Reconstructed>& item = *next;
        const auto t0 = Clock::now();
        const SensorFrame& f = item->frame;
        Segmented out;
        out.record.index = item->index;
        out.record.timestamp = f.timestamp;
        if (mask.empty()) {
          std::vector<Prompt> prompts = cfg.initial_prompts;
          if (prompts.empty()) prompts.push_back({f.intr_pv.width / 2, f.intr_pv.height / 2, true});
          try {
            const SegmentResult s = segmenter.segment(f, prompts);
            mask = init_mask(item->fused, s.mask, f, cfg.seg);
            out.record.mask_updated = true;
            out.record.mask_iou = 1.0;
            last_seg = f.timestamp;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::Segmenter && e.kind() != ErrorKind::EmptyInitialization) throw;
            out.record.note = std::string("init skipped: ") + e.what();
          }
        } else if (due(last_seg, f.timestamp, cfg.seg.segment_interval)) {
          PropagateResult p = propagate(mask, f, segmenter, item->snapshot, cfg.seg);
          mask = std::move(p.mask);
          out.record.mask_updated = p.accepted;
          out.record.mask_iou = p.iou;
          if (!p.error.empty()) out.record.note = "segmenter error at t=" + std::to_string(f.timestamp) + ": " + p.error;
          last_seg = f.timestamp;
        }
        out.record.mask_voxels = mask.size();
        if (!mask.empty() && due(last_reg, f.timestamp, cfg.register_interval)) {
          try {
            out.surface = extract_surface(mask, item->snapshot, f.pv_to_world().translation());
            last_reg = f.timestamp;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptySurface) throw;
            out.record.note = e.what();
          }
        }
        result.stage_seconds.segment += seconds_since(t0);
        if (!q_seg.push(std::move(out))) return;
      }
      q_seg.close();
    } catch (...) {
      failure.set(std::current_exception(), q_recon, q_seg);
    }
  });

  std::thread reg([&] {
    try {
      RegistrationState state = initial_state(model);
      while (auto item = q_seg.pop()) {
        FrameRecord rec = std::move(item->record);
        if (item->surface) {
          const auto t0 = Clock::now();
          try {
            rec.registration = register_frame(state, model, *item->surface, cfg.reg);
            rec.registered = true;
            result.surface = std::move(*item->surface);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateInput) throw;
            rec.note = e.what();
          }
          result.stage_seconds.reg += seconds_since(t0);
        }
        rec.pose = state.pose;
        result.frames.push_back(std::move(rec));
      }
      result.final_pose = state.pose;
    } catch (...) {
      failure.set(std::current_exception(), q_recon, q_seg);
    }
  });

  reconstruct.join();
  segment.join();
  reg.join();
  failure.rethrow();
  result.mask = std::move(mask);
  result.map = map.snapshot();
  result.wall_seconds = seconds_since(t_start);
  return result;
}

SyntheticRun make_synthetic_run(const SynthConfig& cfg, std::uint64_t seed) {
  SyntheticRun run;
  run.scene = make_torso_scene({}, cfg.distractor);
  run.model_pose = default_torso_pose();
  const Vec3 center = run.model_pose.apply(Vec3(0.0, 0.0, 0.07));
  const auto traj =
      orbit_trajectory(center, cfg.orbit_radius, cfg.orbit_height, cfg.frames, cfg.orbit_start, cfg.orbit_sweep);
  RenderOptions opt;
  opt.noise_sigma = cfg.noise_sigma;
  opt.noise_sigma_quadratic = cfg.noise_sigma_quadratic;
  opt.seed = seed;
  opt.frame_interval = cfg.frame_interval;
  run.frames = synth_render(run.scene, run.model_pose, traj, opt);
  return run;
}

ColoredPointCloud synthetic_model_cloud(const SynthConfig& cfg, std::uint64_t seed) {
  return load_model_cloud({}, cfg.model_samples, seed);
}

std::unique_ptr<Segmenter> make_segmenter(const PipelineConfig& cfg) {
  if (cfg.segmenter == "oracle") return std::make_unique<OracleSegmenter>(cfg.oracle_erosion, cfg.seed);
  auto client = std::make_unique<ServiceSegmenter>(cfg.segmenter.substr(std::string("service:").size()));
  try {
    const ServiceHealth h = client->health();
    if (h.status != "ok") throw Error(ErrorKind::Segmenter, "service reports status '" + h.status + "'");
  } catch (const Error& e) {
    throw Error(ErrorKind::Io, std::string("segmenter service unavailable: ") + e.what());
  }
  return client;
}

ColoredPointCloud load_model_cloud(const std::filesystem::path& path, std::size_t samples,
                                   std::uint64_t seed) {
  if (path.empty()) return make_torso_mesh().sample_surface(samples, seed);
  const TriangleMesh mesh = read_ply_mesh(path);
  if (!mesh.triangles.empty()) return mesh.sample_surface(samples, seed);
  ColoredPointCloud cloud = read_ply_cloud(path);
  if (cloud.empty()) throw Error(ErrorKind::DegenerateInput, "model file has no points: " + path.string());
  return cloud;
}

void write_pose_file(const std::filesystem::path& path, const RigidTransform& pose) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const Mat4 m = pose.matrix();
  out << std::setprecision(17);
  for (int r = 0; r < 4; ++r) {
    out << m(r, 0) << ' ' << m(r, 1) << ' ' << m(r, 2) << ' ' << m(r, 3) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

RigidTransform read_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  Mat4 m;
  for (int i = 0; i < 16; ++i) {
    if (!(in >> m(i / 4, i % 4))) throw Error(ErrorKind::Format, path.string() + ": expected 16 numbers");
  }
  try {
    return RigidTransform::from_matrix(m);
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_trajectory(const std::filesystem::path& path, const std::vector<FrameRecord>& frames) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "# index timestamp mask_updated mask_voxels registered accepted score coverage "
         "trimmed_mean_dist candidates pose(r00..r33)\n";
  out << std::setprecision(17);
  for (const FrameRecord& f : frames) {
    const RegistrationResult& r = f.registration;
    out << f.index << ' ' << f.timestamp << ' ' << f.mask_updated << ' ' << f.mask_voxels << ' ' << f.registered
        << ' ' << r.accepted << ' ' << r.score << ' ' << r.coverage << ' ' << r.trimmed_mean_dist << ' '
        << r.candidate_count;
    if (f.pose) {
      const Mat4 m = f.pose->matrix();
      for (int i = 0; i < 16; ++i) out << ' ' << m(i / 4, i % 4);
    } else {
      for (int i = 0; i < 16; ++i) out << " nan";
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace surfreg
