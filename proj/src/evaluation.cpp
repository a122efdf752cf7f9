#include "surfreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "surfreg/error.hpp"
#include "surfreg/kdtree.hpp"
#include "surfreg/synth.hpp"

namespace surfreg {

double percentile(std::span<const double> samples, double q) {
  if (samples.empty()) throw Error(ErrorKind::NoData, "percentile: no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::InvalidParameter, "percentile: q outside [0, 1]");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

Stats summarize(std::span<const double> values) {
  Stats st;
  st.count = values.size();
  if (values.empty()) return st;
  const double n = static_cast<double>(values.size());
  st.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.std = std::sqrt(ss / (n - 1.0));
  }
  st.median = percentile(values, 0.5);
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  st.min = *mn;
  st.max = *mx;
  return st;
}

void CheckerboardSpec::validate() const {
  if (cols < 2 || rows < 2) throw Error(ErrorKind::InvalidParameter, "checkerboard: need at least 2x2 corners");
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidParameter, "checkerboard: spacing must be > 0");
}

std::vector<Vec3> checkerboard_model(const CheckerboardSpec& spec) {
  spec.validate();
  std::vector<Vec3> q;
  q.reserve(static_cast<std::size_t>(spec.corner_count()));
  for (int j = 0; j < spec.rows; ++j) {
    for (int i = 0; i < spec.cols; ++i) q.emplace_back(i * spec.spacing, j * spec.spacing, 0.0);
  }
  return q;
}

double robust_corner_depth(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorKind::NoDepth, "robust_corner_depth: no depth samples near the corner");
  return percentile(samples, 0.3);
}

double tilt_degrees(const Vec3& normal) {
  const double nz = std::clamp(std::abs(normal.z()) / normal.norm(), 0.0, 1.0);
  return std::acos(nz) * 180.0 / std::numbers::pi;
}

ReconSample eval_reconstruction(std::span<const Vec3> corners, const CheckerboardSpec& spec,
                                const Vec3& board_normal, double mean_depth) {
  if (static_cast<int>(corners.size()) != spec.corner_count()) {
    throw Error(ErrorKind::InvalidParameter, "eval_reconstruction: expected " +
                                                 std::to_string(spec.corner_count()) + " corners, got " +
                                                 std::to_string(corners.size()));
  }
  if (!(mean_depth > 0.0)) throw Error(ErrorKind::InvalidParameter, "eval_reconstruction: mean depth must be > 0");
  const std::vector<Vec3> q = checkerboard_model(spec);
  const RigidFit fit = rigid_fit(q, corners);
  ReconSample s;
  s.corners.assign(corners.begin(), corners.end());
  s.residuals.reserve(q.size());
  double ss = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double e = (corners[k] - fit.transform.apply(q[k])).norm();
    s.residuals.push_back(e);
    ss += e * e;
  }
  s.viewing_distance = mean_depth;
  s.tilt_deg = tilt_degrees(board_normal);
  s.rms = std::sqrt(ss / static_cast<double>(q.size()));
  s.nme = s.rms / mean_depth;
  s.stats = summarize(s.residuals);
  return s;
}

std::optional<DistanceBin> distance_bin(double m) {
  if (m < 0.3) return std::nullopt;
  if (m < 1.0) return DistanceBin::Close;
  if (m < 1.5) return DistanceBin::Medium;
  return DistanceBin::Far;
}

TiltBin tilt_bin(double deg) {
  if (deg < 30.0) return TiltBin::Low;
  if (deg < 60.0) return TiltBin::Mid;
  return TiltBin::High;
}

const char* to_string(DistanceBin b) {
  switch (b) {
    case DistanceBin::Close: return "Close";
    case DistanceBin::Medium: return "Medium";
    case DistanceBin::Far: return "Far";
  }
  return "?";
}

const char* to_string(TiltBin b) {
  switch (b) {
    case TiltBin::Low: return "Low";
    case TiltBin::Mid: return "Mid";
    case TiltBin::High: return "High";
  }
  return "?";
}

std::vector<StratCell> stratify(std::span<const ReconSample> samples) {
  struct Acc {
    std::vector<double> residuals;
    double nme_sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<int, int>, Acc> cells;
  for (const ReconSample& s : samples) {
    const auto db = distance_bin(s.viewing_distance);
    if (!db) continue;
    Acc& a = cells[{static_cast<int>(*db), static_cast<int>(tilt_bin(s.tilt_deg))}];
    a.residuals.insert(a.residuals.end(), s.residuals.begin(), s.residuals.end());
    a.nme_sum += s.nme;
    ++a.n;
  }
  std::vector<StratCell> out;
  for (const auto& [key, a] : cells) {
    StratCell c;
    c.distance = static_cast<DistanceBin>(key.first);
    c.tilt = static_cast<TiltBin>(key.second);
    c.samples = a.n;
    c.residuals = summarize(a.residuals);
    c.mean_nme = a.nme_sum / static_cast<double>(a.n);
    out.push_back(c);
  }
  return out;
}

void LandmarkSet::validate() const {
  if (model.size() != names.size() || (!world.empty() && world.size() != names.size())) {
    throw Error(ErrorKind::InvalidParameter, "landmark set: names/model/world lengths differ");
  }
}

LandmarkSet default_body_landmarks() {
  constexpr double pi = std::numbers::pi;
  LandmarkSet s;
  auto add = [&](const char* name, const Vec3& p) {
    s.names.emplace_back(name);
    s.model.push_back(p);
  };
  // Supine adult around the torso segment (x = -0.3 pelvis .. 0.3 shoulders):
  // head resting on the table, arms at the sides, feet pointing up.
  add("eye_l", {0.52, 0.035, 0.17});
  add("eye_r", {0.52, -0.035, 0.17});
  add("mouth_l", {0.44, 0.025, 0.16});
  add("mouth_r", {0.44, -0.025, 0.16});
  add("nipple_l", torso_surface_point(0.17, pi / 2 - 0.55));
  add("nipple_r", torso_surface_point(0.17, pi / 2 + 0.55));
  add("navel", torso_surface_point(-0.05, pi / 2));
  add("groin_l", {-0.34, 0.08, 0.10});
  add("groin_r", {-0.34, -0.08, 0.10});
  add("fingertip_l", {-0.45, 0.30, 0.05});
  add("fingertip_r", {-0.45, -0.30, 0.05});
  add("toe_l", {-1.20, 0.10, 0.22});
  add("toe_r", {-1.20, -0.10, 0.22});
  return s;
}

RigidFit fiducial_reference(const LandmarkSet& landmarks) {
  landmarks.validate();
  if (landmarks.world.empty()) throw Error(ErrorKind::NoData, "fiducial_reference: no world landmarks");
  return rigid_fit(landmarks.model, landmarks.world);
}

std::vector<double> tre(const RigidTransform& estimate, const LandmarkSet& landmarks) {
  landmarks.validate();
  if (landmarks.world.empty()) throw Error(ErrorKind::NoData, "tre: no world landmarks");
  std::vector<double> out;
  out.reserve(landmarks.size());
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    out.push_back((estimate.apply(landmarks.model[i]) - landmarks.world[i]).norm());
  }
  return out;
}

std::vector<double> dva(std::span<const Vec3> landmarks_world, const ColoredPointCloud& observed) {
  if (observed.empty()) throw Error(ErrorKind::NoData, "dva: observed cloud is empty");
  const KdTree<3> tree(observed.points);
  std::vector<double> out;
  out.reserve(landmarks_world.size());
  for (const Vec3& x : landmarks_world) out.push_back(std::sqrt(tree.nearest(x).dist2));
  return out;
}

double dva(const Vec3& landmark_world, const ColoredPointCloud& observed) {
  return dva(std::span<const Vec3>(&landmark_world, 1), observed).front();
}

double dmp(const Vec3& x, const Plane& plane) {
  if (std::abs(plane.normal.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidParameter, "dmp: plane normal is not unit length");
  }
  return std::abs((x - plane.point).dot(plane.normal));
}

Plane mid_sagittal_plane(const LandmarkSet& landmarks) {
  landmarks.validate();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < landmarks.size(); ++i) index[landmarks.names[i]] = i;
  Vec3 mid_sum = Vec3::Zero();
  Vec3 dir_sum = Vec3::Zero();
  int pairs = 0;
  for (const auto& [name, i] : index) {
    if (name.size() < 3 || name.substr(name.size() - 2) != "_l") continue;
    const auto r = index.find(name.substr(0, name.size() - 2) + "_r");
    if (r == index.end()) continue;
    const Vec3& pl = landmarks.model[i];
    const Vec3& pr = landmarks.model[r->second];
    const Vec3 d = pr - pl;
    if (d.norm() == 0.0) continue;
    mid_sum += 0.5 * (pl + pr);
    dir_sum += d.normalized();
    ++pairs;
  }
  if (pairs == 0 || dir_sum.norm() == 0.0) {
    throw Error(ErrorKind::NoData, "mid_sagittal_plane: no usable _l/_r landmark pairs");
  }
  return {mid_sum / pairs, dir_sum.normalized()};
}

TreReport evaluate_registration(const RigidTransform& estimate, const LandmarkSet& landmarks,
                                const ColoredPointCloud& observed) {
  TreReport rep;
  const std::vector<double> t = tre(estimate, landmarks);
  rep.fiducial_rms = fiducial_reference(landmarks).rms;
  std::vector<double> d(landmarks.size(), std::nan(""));
  if (!observed.empty()) d = dva(landmarks.world, observed);
  std::optional<Plane> plane;
  try {
    plane = mid_sagittal_plane(landmarks);
  } catch (const Error&) {
  }
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    rep.landmarks.push_back(
        {landmarks.names[i], t[i], d[i], plane ? dmp(landmarks.model[i], *plane) : std::nan("")});
  }
  rep.tre_stats = summarize(t);
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> content_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      lines.emplace_back();
      continue;
    }
    lines.push_back(line);
  }
  return lines;
}

[[noreturn]] void bad_line(const std::filesystem::path& path, std::size_t lineno, const std::string& what) {
  throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": " + what);
}

nlohmann::json stats_json(const Stats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"median", s.median},
          {"min", s.min},     {"max", s.max}};
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

std::vector<std::pair<std::string, Vec3>> parse_landmark_file(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, Vec3>> out;
  const auto lines = content_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::istringstream ss(lines[i]);
    std::string name;
    double x, y, z;
    std::string extra;
    if (!(ss >> name >> x >> y >> z) || (ss >> extra)) bad_line(path, i + 1, "expected 'name x y z'");
    for (const auto& e : out) {
      if (e.first == name) bad_line(path, i + 1, "duplicate landmark '" + name + "'");
    }
    out.emplace_back(name, Vec3(x, y, z));
  }
  return out;
}

LandmarkSet match_landmarks(const std::vector<std::pair<std::string, Vec3>>& model,
                            const std::vector<std::pair<std::string, Vec3>>& world) {
  std::map<std::string, Vec3> w(world.begin(), world.end());
  LandmarkSet s;
  for (const auto& [name, p] : model) {
    const auto it = w.find(name);
    if (it == w.end()) continue;
    s.names.push_back(name);
    s.model.push_back(p);
    s.world.push_back(it->second);
  }
  if (s.size() < 3) throw Error(ErrorKind::DegenerateInput, "fewer than 3 landmarks present in both files");
  return s;
}

CornerSample simulate_checkerboard_view(const CheckerboardSpec& spec, double distance, double tilt_deg,
                                        double noise_sigma, double noise_sigma_quadratic,
                                        std::uint64_t seed) {
  spec.validate();
  if (!(distance > 0.0)) throw Error(ErrorKind::InvalidParameter, "checkerboard view: distance must be > 0");
  RenderOptions opt;
  opt.noise_sigma = noise_sigma;
  opt.noise_sigma_quadratic = noise_sigma_quadratic;
  opt.seed = seed;
  opt.render_pv = false;
  const RigidTransform device = RigidTransform::identity();
  const RigidTransform pv_to_world = device * opt.extr_pv_to_ref;

  // Board frame: corner grid centred on the origin, normal -z (facing the camera).
  const std::vector<Vec3> q = checkerboard_model(spec);
  const Vec3 grid_center(0.5 * (spec.cols - 1) * spec.spacing, 0.5 * (spec.rows - 1) * spec.spacing, 0.0);
  const RigidTransform board_in_pv = RigidTransform::translation(Vec3(0.0, 0.0, distance)) *
                                     RigidTransform::rotation_about(Vec3::UnitX(), tilt_deg * std::numbers::pi / 180.0) *
                                     RigidTransform::translation(-grid_center);
  const RigidTransform board_to_world = pv_to_world * board_in_pv;

  const double size = (std::max(spec.cols, spec.rows) + 3) * spec.spacing;
  SynthScene scene;
  scene.target = make_square_mesh(grid_center, Vec3::UnitZ(), size);
  const RigidTransform traj[] = {device};
  const SensorFrame frame = synth_render(scene, board_to_world, traj, opt).front();

  const RigidTransform world_to_pv = frame.world_to_pv();
  std::vector<Vec2> pix;
  std::vector<double> depth;
  const RigidTransform d2w = frame.depth_to_world();
  for (int r = 0; r < frame.depth_map.height(); ++r) {
    for (int c = 0; c < frame.depth_map.width(); ++c) {
      const double z = frame.depth_map(c, r);
      if (!(z > 0.0)) continue;
      const Vec3 x = world_to_pv.apply(d2w.apply(backproject(frame.intr_depth, Vec2(c, r), z)));
      if (x.z() <= 0.0) continue;
      pix.emplace_back(frame.intr_pv.fx * x.x() / x.z() + frame.intr_pv.cx,
                       frame.intr_pv.fy * x.y() / x.z() + frame.intr_pv.cy);
      depth.push_back(x.z());
    }
  }

  CornerSample out;
  out.normal = board_in_pv.rotate(Vec3::UnitZ());
  double depth_sum = 0.0;
  for (const Vec3& qk : q) {
    const auto u = project(frame.intr_pv, world_to_pv, board_to_world.apply(qk));
    if (!u) throw Error(ErrorKind::DegenerateInput, "checkerboard view: corner outside the PV image");
    const Vec2 uk(std::floor(u->x() + 0.5), std::floor(u->y() + 0.5));
    std::vector<double> near;
    for (std::size_t i = 0; i < pix.size(); ++i) {
      if ((pix[i] - uk).squaredNorm() <= 25.0) near.push_back(depth[i]);
    }
    const double zk = robust_corner_depth(near);
    out.corners.push_back(backproject(frame.intr_pv, uk, zk));
    depth_sum += zk;
  }
  out.depth = depth_sum / static_cast<double>(q.size());
  return out;
}

std::vector<CornerSample> parse_corner_file(const std::filesystem::path& path, const CheckerboardSpec& spec) {
  spec.validate();
  std::vector<CornerSample> out;
  const auto lines = content_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::istringstream ss(lines[i]);
    std::string word;
    ss >> word;
    if (word == "sample") {
      CornerSample s;
      double nx, ny, nz;
      if (!(ss >> s.depth >> nx >> ny >> nz)) bad_line(path, i + 1, "expected 'sample depth nx ny nz'");
      s.normal = Vec3(nx, ny, nz);
      out.push_back(s);
      continue;
    }
    if (out.empty()) bad_line(path, i + 1, "corner before the first 'sample' header");
    std::istringstream cs(lines[i]);
    double x, y, z;
    if (!(cs >> x >> y >> z)) bad_line(path, i + 1, "expected 'x y z'");
    out.back().corners.emplace_back(x, y, z);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (static_cast<int>(out[k].corners.size()) != spec.corner_count()) {
      throw Error(ErrorKind::Format, path.string() + ": sample " + std::to_string(k) + " has " +
                                         std::to_string(out[k].corners.size()) + " corners, expected " +
                                         std::to_string(spec.corner_count()));
    }
  }
  return out;
}

void write_corner_file(const std::filesystem::path& path, std::span<const CornerSample> samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  for (const CornerSample& s : samples) {
    out << "sample " << s.depth << ' ' << s.normal.x() << ' ' << s.normal.y() << ' ' << s.normal.z() << '\n';
    for (const Vec3& p : s.corners) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::string recon_report_json(std::span<const ReconSample> samples, std::span<const StratCell> cells) {
  nlohmann::json j;
  j["samples"] = nlohmann::json::array();
  for (const ReconSample& s : samples) {
    j["samples"].push_back({{"viewing_distance", s.viewing_distance},
                            {"tilt_deg", s.tilt_deg},
                            {"rms", s.rms},
                            {"nme", s.nme},
                            {"residuals", s.residuals},
                            {"stats", stats_json(s.stats)}});
  }
  j["cells"] = nlohmann::json::array();
  for (const StratCell& c : cells) {
    j["cells"].push_back({{"distance", to_string(c.distance)},
                          {"tilt", to_string(c.tilt)},
                          {"samples", c.samples},
                          {"residuals", stats_json(c.residuals)},
                          {"mean_nme", c.mean_nme}});
  }
  return j.dump(2);
}

std::string recon_report_table(std::span<const StratCell> cells) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(8) << "Dist" << std::setw(6) << "Tilt" << std::right << std::setw(4) << "n"
      << std::setw(9) << "mean" << std::setw(9) << "std" << std::setw(9) << "median" << std::setw(9) << "min"
      << std::setw(9) << "max" << std::setw(11) << "NME(e-3)" << '\n';
  for (const StratCell& c : cells) {
    const Stats& s = c.residuals;
    out << std::left << std::setw(8) << to_string(c.distance) << std::setw(6) << to_string(c.tilt) << std::right
        << std::setw(4) << c.samples << std::setw(9) << s.mean * 1e3 << std::setw(9) << s.std * 1e3 << std::setw(9)
        << s.median * 1e3 << std::setw(9) << s.min * 1e3 << std::setw(9) << s.max * 1e3 << std::setw(11)
        << c.mean_nme * 1e3 << '\n';
  }
  out << "(residuals in mm)\n";
  return out.str();
}

std::string tre_report_json(const TreReport& report) {
  nlohmann::json j;
  j["landmarks"] = nlohmann::json::array();
  for (const LandmarkReport& l : report.landmarks) {
    j["landmarks"].push_back(
        {{"name", l.name}, {"tre", l.tre}, {"dva", number_or_null(l.dva)}, {"dmp", number_or_null(l.dmp)}});
  }
  j["tre"] = stats_json(report.tre_stats);
  j["fiducial_rms"] = report.fiducial_rms;
  return j.dump(2);
}

std::string tre_report_table(const TreReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(14) << "Landmark" << std::right << std::setw(10) << "TRE" << std::setw(10) << "DVA"
      << std::setw(10) << "DMP" << '\n';
  for (const LandmarkReport& l : report.landmarks) {
    out << std::left << std::setw(14) << l.name << std::right << std::setw(10) << l.tre * 1e3 << std::setw(10)
        << l.dva * 1e3 << std::setw(10) << l.dmp * 1e3 << '\n';
  }
  const Stats& s = report.tre_stats;
  out << "TRE mean " << s.mean * 1e3 << " std " << s.std * 1e3 << " median " << s.median * 1e3 << " min "
      << s.min * 1e3 << " max " << s.max * 1e3 << " (mm)\n";
  return out.str();
}

}  // namespace surfreg
