#pragma once

#include <filesystem>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surfreg/geometry.hpp"

namespace surfreg {

// ---------------------------------------------------------------------------
// Statistics

/// Type-7 percentile (linear interpolation between order statistics), q in [0, 1].
double percentile(std::span<const double> samples, double q);

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for n < 2
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Stats summarize(std::span<const double> values);

// ---------------------------------------------------------------------------
// Reconstruction accuracy

struct CheckerboardSpec {
  int cols = 8;
  int rows = 5;
  double spacing = 0.030;

  void validate() const;
  int corner_count() const { return cols * rows; }
};

/// Corner k = i + j * cols sits at (i d, j d, 0).
std::vector<Vec3> checkerboard_model(const CheckerboardSpec& spec);

/// 30th percentile of the depth samples gathered around a corner. Throws NoDepth.
double robust_corner_depth(std::span<const double> samples);

struct ReconSample {
  std::vector<Vec3> corners;
  std::vector<double> residuals;  // meters, one per corner
  double viewing_distance = 0.0;  // mean corner depth, meters
  double tilt_deg = 0.0;
  double rms = 0.0;
  double nme = 0.0;  // rms / viewing_distance
  Stats stats;
};

/// Board tilt from its unit normal expressed in the camera frame. The sign of
/// the normal is ignored: arccos(|n_z|).
double tilt_degrees(const Vec3& normal);

/// Best rigid fit of the board model onto `corners` and the per-corner
/// residuals. Degenerate fits propagate as DegenerateFit.
ReconSample eval_reconstruction(std::span<const Vec3> corners, const CheckerboardSpec& spec,
                                const Vec3& board_normal, double mean_depth);

enum class DistanceBin { Close, Medium, Far };
enum class TiltBin { Low, Mid, High };

/// Close [0.3, 1.0), Medium [1.0, 1.5), Far [1.5, inf); nullopt below 0.3 m.
std::optional<DistanceBin> distance_bin(double meters);
/// Low [0, 30), Mid [30, 60), High [60, inf) degrees.
TiltBin tilt_bin(double degrees);
const char* to_string(DistanceBin b);
const char* to_string(TiltBin b);

struct StratCell {
  DistanceBin distance = DistanceBin::Close;
  TiltBin tilt = TiltBin::Low;
  std::size_t samples = 0;
  Stats residuals;  // pooled per-corner residuals, meters
  double mean_nme = 0.0;
};

/// Non-empty cells in (distance, tilt) order. Samples closer than 0.3 m are dropped.
std::vector<StratCell> stratify(std::span<const ReconSample> samples);

// ---------------------------------------------------------------------------
// Registration accuracy

struct LandmarkSet {
  std::vector<std::string> names;
  std::vector<Vec3> model;  // x_CT
  std::vector<Vec3> world;  // x_W

  std::size_t size() const { return names.size(); }
  void validate() const;
};

/// Thirteen body landmarks around the synthetic torso (model frame), with
/// bilateral pairs suffixed _l / _r. `world` is left empty.
LandmarkSet default_body_landmarks();

/// Least-squares alignment of the model landmarks onto the world landmarks.
/// Evaluation reference only.
RigidFit fiducial_reference(const LandmarkSet& landmarks);

std::vector<double> tre(const RigidTransform& estimate, const LandmarkSet& landmarks);

/// Distance to the nearest observed point. Throws NoData on an empty cloud.
double dva(const Vec3& landmark_world, const ColoredPointCloud& observed);
std::vector<double> dva(std::span<const Vec3> landmarks_world, const ColoredPointCloud& observed);

struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
};

/// |(x - point) . normal|; throws InvalidParameter unless |normal| = 1 within 1e-9.
double dmp(const Vec3& landmark_model, const Plane& plane);

/// Plane through the mean midpoint of every name_l / name_r pair, normal along
/// the average unit left-to-right direction. Needs at least one pair.
Plane mid_sagittal_plane(const LandmarkSet& landmarks);

struct LandmarkReport {
  std::string name;
  double tre = 0.0;
  double dva = 0.0;
  double dmp = 0.0;
};

struct TreReport {
  std::vector<LandmarkReport> landmarks;
  Stats tre_stats;
  double fiducial_rms = 0.0;
};

/// TRE of `estimate`, with DVA against `observed` (world) when non-empty and
/// DMP against the mid-sagittal plane when the set has bilateral pairs.
TreReport evaluate_registration(const RigidTransform& estimate, const LandmarkSet& landmarks,
                                const ColoredPointCloud& observed);

// ---------------------------------------------------------------------------
// Text formats and reports

/// "name x y z" per line; blank lines and '#' comments ignored.
std::vector<std::pair<std::string, Vec3>> parse_landmark_file(const std::filesystem::path& path);
/// Pairs model and world entries by name, keeping the model file order.
LandmarkSet match_landmarks(const std::vector<std::pair<std::string, Vec3>>& model,
                            const std::vector<std::pair<std::string, Vec3>>& world);

/// One block per sample:
///   sample <depth_m> <nx> <ny> <nz>
///   x y z            (cols * rows lines)
struct CornerSample {
  double depth = 0.0;
  Vec3 normal = Vec3::UnitZ();
  std::vector<Vec3> corners;
};
/// Renders a board `distance` meters in front of the PV camera, tilted by
/// `tilt_deg` about the camera x axis, and recovers its corners the way a
/// detector + depth lookup would: each ground-truth corner is projected and
/// rounded to a PV pixel, its depth is robust_corner_depth over back-projected
/// depth samples within 5 px, and the pixel is lifted with the PV intrinsics.
/// Corners and normal are in the PV camera frame.
CornerSample simulate_checkerboard_view(const CheckerboardSpec& spec, double distance, double tilt_deg,
                                        double noise_sigma, double noise_sigma_quadratic,
                                        std::uint64_t seed);

std::vector<CornerSample> parse_corner_file(const std::filesystem::path& path,
                                            const CheckerboardSpec& spec);
void write_corner_file(const std::filesystem::path& path, std::span<const CornerSample> samples);

std::string recon_report_json(std::span<const ReconSample> samples,
                              std::span<const StratCell> cells);
std::string recon_report_table(std::span<const StratCell> cells);
std::string tre_report_json(const TreReport& report);
std::string tre_report_table(const TreReport& report);

}  // namespace surfreg
