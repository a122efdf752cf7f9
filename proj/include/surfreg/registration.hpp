#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "surfreg/geometry.hpp"

namespace surfreg {

inline constexpr int kFpfhBins = 11;
inline constexpr int kFpfhSize = 3 * kFpfhBins;

using Histogram = std::array<double, kFpfhSize>;

struct FeatureSet {
  std::vector<Histogram> histograms;
  std::size_t size() const { return histograms.size(); }
};

struct PyramidLevel {
  ColoredPointCloud cloud;  // with normals
  double voxel = 0.0;
};

/// Coarsest level first.
struct Pyramid {
  std::vector<PyramidLevel> levels;
  const PyramidLevel& coarsest() const { return levels.front(); }
  const PyramidLevel& finest() const { return levels.back(); }
};

struct RansacConfig {
  int sample_size = 4;
  int max_iterations = 100000;
  double confidence = 0.999;
  double edge_ratio = 0.9;
  double inlier_factor = 1.5;  // inlier gate = inlier_factor * coarse voxel
};

struct FgrConfig {
  int iterations = 64;
  double division_factor = 1.4;
  int decrease_every = 4;
  double tuple_scale = 0.95;
  int max_tuples = 1000;
};

struct RegConfig {
  double lambda_c = 0.7;
  double lambda_r = 0.3;
  double trim = 0.2;
  double d_max = 0.05;
  double delta_s_min = 0.02;
  int levels = 3;
  double voxel_base = 0.01;  // finest level voxel; also the coverage gate
  double tau_factor = 3.0;
  double tau_decay = 0.7;
  int icp_max_iterations = 30;
  double icp_eps_translation = 1e-5;
  double icp_eps_rotation = 1e-4;
  double huber_delta = 0.01;
  double normal_gate_deg = 60.0;
  double min_coverage = 0.3;
  int escape_after = 25;
  double fpfh_radius_factor = 5.0;  // times the coarsest voxel
  int normal_neighbors = kDefaultNormalNeighbors;
  double continuity_angle_deg = 10.0;
  double continuity_distance = 0.05;
  double dedup_angle_deg = 1.0;
  double dedup_distance = 0.001;
  std::size_t max_candidates = 14;
  RansacConfig ransac;
  FgrConfig fgr;
  std::uint64_t seed = 0;

  void validate() const;
  double coarse_voxel() const;
};

/// Level l (0 = coarsest) is voxel_downsample(cloud, base * 2^(levels-1-l))
/// with PCA normals re-estimated over min(k, n) neighbours. Normals are
/// oriented to agree with the downsampled input normals when the input has
/// them, otherwise away from the cloud centroid.
Pyramid build_pyramid(const ColoredPointCloud& cloud, int levels, double voxel_base,
                      int normal_neighbors = kDefaultNormalNeighbors);

/// Darboux-frame pair feature (alpha, phi, theta) between two oriented points,
/// with the source chosen as the endpoint whose normal is more aligned with
/// the connecting line. All zero for coincident points or parallel geometry.
std::array<double, 3> pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

/// Fast point feature histograms. SPFH(p) bins the pair features of p with
/// each radius neighbour (11 bins per angle, each block summing to 100).
/// FPFH(p) = SPFH(p) + per-block renormalized (to 100) sum over neighbours of
/// SPFH(q) / |p - q|. Points without neighbours get a zero histogram.
FeatureSet compute_fpfh(const ColoredPointCloud& cloud, double radius);

/// Mutual nearest neighbours in feature space, as (model index, scene index).
std::vector<std::pair<std::uint32_t, std::uint32_t>> mutual_feature_matches(
    const FeatureSet& model, const FeatureSet& scene);

struct GlobalInitResult {
  RigidTransform transform;
  double fitness = 0.0;
  bool used_fallback = false;
};

/// RANSAC over mutual feature matches; FGR when RANSAC fitness falls below
/// min_coverage. Maps model points onto the scene.
GlobalInitResult global_init(const ColoredPointCloud& model, const FeatureSet& model_features,
                             const ColoredPointCloud& scene, const FeatureSet& scene_features,
                             const RegConfig& cfg);

/// Geman-McClure graduated non-convexity over fixed correspondences.
RigidTransform fast_global_registration(std::span<const Vec3> model, std::span<const Vec3> scene,
                                        const FgrConfig& cfg, double final_scale);

struct RegistrationState {
  std::optional<RigidTransform> pose;
  double score = 0.0;
  int frames_since_accept = 0;
  Vec3 model_centroid = Vec3::Zero();
  std::array<Vec3, 3> model_axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
};

struct RegistrationResult {
  RigidTransform pose;
  double score = 0.0;
  double coverage = 0.0;
  double trimmed_mean_dist = 0.0;
  bool accepted = false;
  std::size_t candidate_count = 0;
};

/// Precomputed model side of the registration problem.
struct ModelData {
  ColoredPointCloud cloud;
  Pyramid pyramid;
  FeatureSet coarse_features;
  Vec3 centroid = Vec3::Zero();
  std::array<Vec3, 3> axes{};  // principal axes, decreasing variance
};

ModelData prepare_model(const ColoredPointCloud& model, const RegConfig& cfg);
RegistrationState initial_state(const ModelData& model);

/// Bases {prior, T0} each combined with pi rotations about the world axes
/// through the transformed model centroid and about the model principal axes
/// through the model centroid. Near-duplicates are removed.
std::vector<RigidTransform> spawn_candidates(const std::optional<RigidTransform>& prior,
                                             const RigidTransform& t0,
                                             const RegistrationState& state,
                                             const RegConfig& cfg = {});

struct IcpResult {
  RigidTransform transform;
  double trimmed_mean_dist = 0.0;
  int iterations = 0;
};

/// Multi-level robust point-to-plane ICP over aligned model/scene pyramids.
/// The returned pose never has a larger trimmed mean distance (measured on the
/// finest level) than `init`. Throws NoOverlap when the first iteration finds
/// no correspondences.
IcpResult refine_icp(const RigidTransform& init, const Pyramid& model, const Pyramid& scene,
                     const RegConfig& cfg);

/// Single-level variant with an explicit starting gate.
IcpResult refine_icp_level(const RigidTransform& init, const ColoredPointCloud& model,
                           const ColoredPointCloud& scene, double voxel, const RegConfig& cfg);

struct ScoreResult {
  double score = 0.0;
  double coverage = 0.0;
  double trimmed_mean_dist = 0.0;
};

/// Model-to-scene nearest distances of the transformed model points that lie
/// within d_max; the mean after dropping the largest floor(trim * n).
double trimmed_mean_distance(const RigidTransform& t, const ColoredPointCloud& model,
                             const ColoredPointCloud& scene, double d_max, double trim);

ScoreResult score_pose(const RigidTransform& t, const ColoredPointCloud& model,
                       const ColoredPointCloud& scene, const RegConfig& cfg);

/// Score from its parts: lambda_c * coverage + lambda_r * (1 - min(d, d_max) / d_max).
double combine_score(double coverage, double trimmed_mean_dist, const RegConfig& cfg);

/// Temporal filter. Mutates `state` (pose, score, counter) and returns the decision.
bool temporal_accept(RegistrationState& state, const RegistrationResult& best,
                     const RegConfig& cfg);

/// True when `a` and `b` differ by less than the continuity thresholds,
/// measured as rotation angle and displacement of the model centroid.
bool poses_close(const RigidTransform& a, const RigidTransform& b, const Vec3& model_centroid,
                 double angle_deg, double distance);

/// Index of the winner: highest score, then smaller trimmed distance, then
/// earlier position.
std::size_t select_best(std::span<const RegistrationResult> results);

RegistrationResult register_frame(RegistrationState& state, const ModelData& model,
                                  const ColoredPointCloud& scene, const RegConfig& cfg);

}  // namespace surfreg
