#pragma once

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <deque>
#include <string>
#include <vector>

#include "surfreg/config.hpp"
#include "surfreg/reconstruction.hpp"
#include "surfreg/registration.hpp"
#include "surfreg/segmentation.hpp"
#include "surfreg/synth.hpp"

namespace surfreg {

/// Fixed-capacity FIFO connecting pipeline stages. push blocks while full;
/// pop blocks while empty and returns nullopt once the queue is closed and
/// drained. abort() wakes everyone and makes both calls give up immediately.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return aborted_ || items_.size() < capacity_; });
    if (aborted_ || closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return aborted_ || closed_ || !items_.empty(); });
    if (aborted_ || items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  void abort() {
    std::lock_guard lock(mu_);
    aborted_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
  bool aborted_ = false;
};

struct FrameRecord {
  std::size_t index = 0;
  double timestamp = 0.0;
  bool mask_updated = false;  // init or accepted propagation
  double mask_iou = 0.0;
  std::size_t mask_voxels = 0;
  bool registered = false;
  RegistrationResult registration;
  std::optional<RigidTransform> pose;  // tracked pose after this frame
  std::string note;                    // skipped stages, segmenter errors
};

struct StageTimes {
  double reconstruct = 0.0;  // seconds, summed over frames
  double segment = 0.0;
  double reg = 0.0;
};

struct PipelineResult {
  std::vector<FrameRecord> frames;
  std::optional<RigidTransform> final_pose;
  VoxelMask mask;
  ColoredPointCloud map;
  ColoredPointCloud surface;  // last extracted target surface
  double wall_seconds = 0.0;
  StageTimes stage_seconds;
};

/// Random access to the frames of a run; called from the reconstruction stage only.
struct FrameSource {
  std::size_t count = 0;
  std::function<SensorFrame(std::size_t)> get;
};

FrameSource frames_from_vector(const std::vector<SensorFrame>& frames);

/// Runs reconstruct -> segment -> register as three threads joined by bounded
/// queues. Results depend only on the inputs, never on scheduling. A stage
/// error aborts the run and is rethrown after all threads have stopped.
PipelineResult run_pipeline(const FrameSource& source, const ModelData& model, Segmenter& segmenter,
                            const PipelineConfig& cfg);

/// Bundled synthetic scene rendered along the configured orbit.
struct SyntheticRun {
  SynthScene scene;
  RigidTransform model_pose;
  std::vector<SensorFrame> frames;
};

SyntheticRun make_synthetic_run(const SynthConfig& cfg, std::uint64_t seed);

/// Model cloud for the synthetic torso: area-uniform surface samples.
ColoredPointCloud synthetic_model_cloud(const SynthConfig& cfg, std::uint64_t seed);

/// "oracle" or "service:<url>" (the service is probed with GET /health).
std::unique_ptr<Segmenter> make_segmenter(const PipelineConfig& cfg);

/// Model for registration: a .ply mesh is sampled (`samples` points, `seed`),
/// a .ply point cloud is used as is; an empty path gives the synthetic torso.
ColoredPointCloud load_model_cloud(const std::filesystem::path& path, std::size_t samples,
                                   std::uint64_t seed);

/// Four lines of four numbers, row-major, 17 significant digits.
void write_pose_file(const std::filesystem::path& path, const RigidTransform& pose);
RigidTransform read_pose_file(const std::filesystem::path& path);

/// One line per frame: index, timestamp, flags, registration metrics and the
/// tracked pose (row-major 4x4, "nan" while untracked).
void write_trajectory(const std::filesystem::path& path, const std::vector<FrameRecord>& frames);

}  // namespace surfreg
