#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "surfreg/geometry.hpp"
#include "surfreg/raster.hpp"
#include "surfreg/sensor.hpp"

namespace surfreg {

struct Prompt {
  int col = 0;
  int row = 0;
  bool positive = true;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct SegmentResult {
  BinaryMask mask;
  double confidence = 0.0;
};

/// Promptable 2D segmenter. Implementations segment frame.pv_image and must
/// return a mask with the image's dimensions; failures throw.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegmentResult segment(const SensorFrame& frame, std::span<const Prompt> prompts) = 0;
  virtual std::string name() const = 0;
};

/// Test double that returns the frame's ground-truth label map, optionally
/// eroded by a random radius in [0, erosion_radius] pixels per call.
class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(int erosion_radius = 0, std::uint64_t seed = 0);
  SegmentResult segment(const SensorFrame& frame, std::span<const Prompt> prompts) override;
  std::string name() const override { return "oracle"; }

 private:
  int erosion_radius_;
  std::mt19937_64 rng_;
};

struct SegConfig {
  double tau_iou = 0.08;
  double rho_max = 0.35;
  int k_obs = 2;
  double segment_interval = 0.2;  // seconds between segmenter calls
  double depth_gate = 0.03;       // meters
  double voxel_res = 0.02;        // meters

  void validate() const;
};

struct VoxelState {
  std::uint32_t occ = 0;
  std::uint32_t free = 0;
  /// Mean of the surface observations that instantiated the voxel; used for
  /// projection and depth tests instead of the voxel center.
  Vec3 anchor = Vec3::Zero();

  friend bool operator==(const VoxelState&, const VoxelState&) = default;
};

struct PendingVoxel {
  std::uint32_t observations = 0;
  Vec3 point_sum = Vec3::Zero();
  std::uint64_t point_count = 0;

  friend bool operator==(const PendingVoxel&, const PendingVoxel&) = default;
};

/// Sparse voxel mask of the tracked surface with per-voxel occupancy counters.
class VoxelMask {
 public:
  explicit VoxelMask(double resolution = 0.02);

  double resolution() const { return resolution_; }
  std::size_t size() const { return active_.size(); }
  bool empty() const { return active_.empty(); }
  bool is_active(const VoxelKey& k) const { return active_.count(k) != 0; }

  const std::map<VoxelKey, VoxelState>& active() const { return active_; }
  const std::map<VoxelKey, PendingVoxel>& pending() const { return pending_; }
  std::map<VoxelKey, VoxelState>& active() { return active_; }
  std::map<VoxelKey, PendingVoxel>& pending() { return pending_; }

  /// Active voxels with at least one inactive voxel in their 26-neighbourhood.
  std::vector<VoxelKey> frontier() const;

  friend bool operator==(const VoxelMask&, const VoxelMask&) = default;

 private:
  double resolution_;
  std::map<VoxelKey, VoxelState> active_;
  std::map<VoxelKey, PendingVoxel> pending_;
};

/// Keeps cloud points whose PV projection lands inside `mask2d` and activates
/// their voxels with occ = 1. Throws EmptyInitialization when nothing is kept.
VoxelMask init_mask(const ColoredPointCloud& cloud, const BinaryMask& mask2d,
                    const SensorFrame& frame, const SegConfig& cfg);

/// Rasterizes active voxels (square footprint of the voxel's projected size)
/// into the PV image, keeping pixels whose depth agrees within depth_gate,
/// then closes the result with a 3x3 structuring element.
BinaryMask project_mask(const VoxelMask& mask, const SensorFrame& frame, const SegConfig& cfg);
BinaryMask project_mask(const VoxelMask& mask, const SensorFrame& frame, const SegConfig& cfg,
                        const DepthMap& pv_depth);

/// Interior pixel farthest (Chebyshev) from the background; pixels outside
/// the raster count as background. Ties go to the smallest (row, col).
std::optional<Prompt> select_prompt(const BinaryMask& proj);

/// Chebyshev distance-to-background for every pixel (0 on background).
Raster<int> chebyshev_distance(const BinaryMask& mask);

/// Drops mask pixels whose depth differs from the median valid depth of the
/// mask pixels in their 5x5 neighbourhood by more than depth_gate.
BinaryMask refine_mask2d(const BinaryMask& raw, const SensorFrame& frame, const SegConfig& cfg);
BinaryMask refine_mask2d(const BinaryMask& raw, const DepthMap& pv_depth, const SegConfig& cfg);

BinaryMask close3x3(const BinaryMask& mask);
double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct PropagateResult {
  VoxelMask mask;
  bool accepted = false;
  double iou = 0.0;
  std::size_t activated = 0;
  std::size_t carved = 0;
  std::string error;  // non-empty when the segmenter failed
};

/// One 3D-2D feedback step: project, prompt, segment, refine, IoU gate, grow
/// from the frontier, update occupancy counters and carve.
PropagateResult propagate(const VoxelMask& mask, const SensorFrame& frame, Segmenter& segmenter,
                          const ColoredPointCloud& map_snapshot, const SegConfig& cfg);

/// Removes voxels with free / (occ + 1) > rho_max.
VoxelMask regularize(const VoxelMask& mask, const SegConfig& cfg);
bool carve_condition(const VoxelState& v, double rho_max);

/// Map points inside active voxels, with normals facing `viewpoint`.
ColoredPointCloud extract_surface(const VoxelMask& mask, const ColoredPointCloud& map_snapshot,
                                  const Vec3& viewpoint);

/// Intersection-over-union of two voxel key sets.
double voxel_iou(const std::vector<VoxelKey>& a, const std::vector<VoxelKey>& b);
std::vector<VoxelKey> active_keys(const VoxelMask& mask);

}  // namespace surfreg
