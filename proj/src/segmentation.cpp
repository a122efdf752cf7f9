#include "surfreg/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "surfreg/error.hpp"
#include "surfreg/kdtree.hpp"

namespace surfreg {

namespace {

bool all_invalid(const DepthMap& d) {
  return std::all_of(d.data().begin(), d.data().end(), [](double z) { return !(z > 0.0); });
}

struct PixelHit {
  int col;
  int row;
  double z;
};

std::optional<PixelHit> to_pixel(const CameraIntrinsics& k, const RigidTransform& world_to_cam,
                                 const Vec3& x) {
  const Vec3 c = world_to_cam.apply(x);
  if (!(c.z() > 0.0)) return std::nullopt;
  const Vec2 u(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
  if (!k.contains(u)) return std::nullopt;
  return PixelHit{static_cast<int>(std::floor(u.x() + 0.5)),
                  static_cast<int>(std::floor(u.y() + 0.5)), c.z()};
}

}  // namespace

// ---------------------------------------------------------------------------

OracleSegmenter::OracleSegmenter(int erosion_radius, std::uint64_t seed)
    : erosion_radius_(erosion_radius), rng_(seed) {
  if (erosion_radius < 0) {
    throw Error(ErrorKind::InvalidParameter, "oracle segmenter: negative erosion radius");
  }
}

SegmentResult OracleSegmenter::segment(const SensorFrame& frame, std::span<const Prompt>) {
  if (!frame.gt_label_map) {
    throw Error(ErrorKind::Segmenter, "oracle segmenter: frame has no ground-truth labels");
  }
  SegmentResult out{*frame.gt_label_map, 1.0};
  if (erosion_radius_ > 0) {
    const int r = std::uniform_int_distribution<int>(0, erosion_radius_)(rng_);
    if (r > 0) {
      const Raster<int> dt = chebyshev_distance(out.mask);
      for (std::size_t i = 0; i < dt.size(); ++i) out.mask.data()[i] = dt.data()[i] > r ? 1 : 0;
    }
  }
  return out;
}

void SegConfig::validate() const {
  auto fail = [](const char* what) {
    throw Error(ErrorKind::InvalidParameter, std::string("segmentation config: ") + what);
  };
  if (!(tau_iou >= 0.0 && tau_iou <= 1.0)) fail("tau_iou must lie in [0, 1]");
  if (!(rho_max > 0.0)) fail("rho_max must be positive");
  if (k_obs < 1) fail("k_obs must be at least 1");
  if (!(segment_interval >= 0.0)) fail("segment_interval must be non-negative");
  if (!(depth_gate > 0.0)) fail("depth_gate must be positive");
  if (!(voxel_res > 0.0)) fail("voxel_res must be positive");
}

VoxelMask::VoxelMask(double resolution) : resolution_(resolution) {
  if (!(resolution > 0.0)) throw Error(ErrorKind::InvalidParameter, "voxel mask: resolution <= 0");
}

std::vector<VoxelKey> VoxelMask::frontier() const {
  std::vector<VoxelKey> out;
  for (const auto& [k, v] : active_) {
    bool open = false;
    for (int dz = -1; dz <= 1 && !open; ++dz) {
      for (int dy = -1; dy <= 1 && !open; ++dy) {
        for (int dx = -1; dx <= 1 && !open; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          open = !is_active({k.x + dx, k.y + dy, k.z + dz});
        }
      }
    }
    if (open) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------

VoxelMask init_mask(const ColoredPointCloud& cloud, const BinaryMask& mask2d,
                    const SensorFrame& frame, const SegConfig& cfg) {
  cfg.validate();
  if (mask2d.width() != frame.intr_pv.width || mask2d.height() != frame.intr_pv.height) {
    throw Error(ErrorKind::InvalidParameter, "init_mask: mask size differs from the PV image");
  }
  const RigidTransform w2pv = frame.world_to_pv();
  // Points the PV camera cannot see (nearer surface at their pixel) are not
  // part of what the mask outlines.
  const DepthMap pvd = depth_in_pv(frame);
  std::map<VoxelKey, std::pair<Vec3, std::size_t>> sums;
  for (const Vec3& p : cloud.points) {
    const auto hit = to_pixel(frame.intr_pv, w2pv, p);
    if (!hit || mask2d(hit->col, hit->row) == 0) continue;
    const double d = pvd(hit->col, hit->row);
    if (d > 0.0 && d < hit->z - cfg.depth_gate) continue;
    auto& s = sums.try_emplace(voxel_key(p, cfg.voxel_res), Vec3::Zero(), 0).first->second;
    s.first += p;
    ++s.second;
  }
  if (sums.empty()) {
    throw Error(ErrorKind::EmptyInitialization, "init_mask: no points project into the mask");
  }
  VoxelMask mask(cfg.voxel_res);
  for (const auto& [k, s] : sums) {
    mask.active().emplace(k, VoxelState{1, 0, s.first / static_cast<double>(s.second)});
  }
  return mask;
}

BinaryMask close3x3(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask dil(w, h, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::uint8_t v = 0;
      for (int dr = -1; dr <= 1 && !v; ++dr) {
        for (int dc = -1; dc <= 1 && !v; ++dc) {
          if (mask.in_bounds(c + dc, r + dr) && mask(c + dc, r + dr)) v = 1;
        }
      }
      dil(c, r) = v;
    }
  }
  // Erosion treats out-of-raster pixels as set so closing never shrinks a mask.
  BinaryMask out(w, h, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::uint8_t v = 1;
      for (int dr = -1; dr <= 1 && v; ++dr) {
        for (int dc = -1; dc <= 1 && v; ++dc) {
          if (dil.in_bounds(c + dc, r + dr) && !dil(c + dc, r + dr)) v = 0;
        }
      }
      out(c, r) = v;
    }
  }
  return out;
}

namespace {

/// Square splat of half-width floor(0.5 * r * fx / z) around the projected
/// anchor, clipped to the raster. Empty when the anchor is behind the camera.
struct Footprint {
  int c0 = 0, c1 = -1, r0 = 0, r1 = -1;
  double z = 0.0;
  bool empty() const { return c1 < c0 || r1 < r0; }
};

Footprint footprint(const Vec3& anchor, double r, const CameraIntrinsics& k, const RigidTransform& w2pv) {
  Footprint fp;
  const Vec3 c = w2pv.apply(anchor);
  if (!(c.z() > 0.0)) return fp;
  const int half = static_cast<int>(std::floor(0.5 * r * k.fx / c.z()));
  const int cu = static_cast<int>(std::floor(k.fx * c.x() / c.z() + k.cx + 0.5));
  const int cv = static_cast<int>(std::floor(k.fy * c.y() / c.z() + k.cy + 0.5));
  fp.c0 = std::max(cu - half, 0);
  fp.c1 = std::min(cu + half, k.width - 1);
  fp.r0 = std::max(cv - half, 0);
  fp.r1 = std::min(cv + half, k.height - 1);
  fp.z = c.z();
  return fp;
}

}  // namespace

BinaryMask project_mask(const VoxelMask& mask, const SensorFrame& frame, const SegConfig& cfg) {
  return project_mask(mask, frame, cfg, depth_in_pv(frame));
}

BinaryMask project_mask(const VoxelMask& mask, const SensorFrame& frame, const SegConfig& cfg,
                        const DepthMap& pv_depth) {
  const CameraIntrinsics& k = frame.intr_pv;
  BinaryMask out(k.width, k.height, 0);
  const bool no_depth = all_invalid(pv_depth);
  const RigidTransform w2pv = frame.world_to_pv();
  const double r = mask.resolution();
  for (const auto& [key, v] : mask.active()) {
    const Footprint fp = footprint(v.anchor, r, k, w2pv);
    for (int row = fp.r0; row <= fp.r1; ++row) {
      for (int col = fp.c0; col <= fp.c1; ++col) {
        if (no_depth) {
          out(col, row) = 1;
          continue;
        }
        const double d = pv_depth(col, row);
        if (d > 0.0 && std::abs(d - fp.z) <= cfg.depth_gate) out(col, row) = 1;
      }
    }
  }
  return close3x3(out);
}

Raster<int> chebyshev_distance(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  Raster<int> d(w, h, 0);
  auto at = [&](int c, int r) { return d.in_bounds(c, r) ? d(c, r) : 0; };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask(c, r)) continue;
      d(c, r) = 1 + std::min({at(c - 1, r), at(c - 1, r - 1), at(c, r - 1), at(c + 1, r - 1)});
    }
  }
  for (int r = h - 1; r >= 0; --r) {
    for (int c = w - 1; c >= 0; --c) {
      if (!mask(c, r)) continue;
      d(c, r) = std::min(
          d(c, r), 1 + std::min({at(c + 1, r), at(c + 1, r + 1), at(c, r + 1), at(c - 1, r + 1)}));
    }
  }
  return d;
}

std::optional<Prompt> select_prompt(const BinaryMask& proj) {
  const Raster<int> dt = chebyshev_distance(proj);
  int best = 0;
  Prompt p;
  for (int r = 0; r < dt.height(); ++r) {
    for (int c = 0; c < dt.width(); ++c) {
      if (dt(c, r) > best) {
        best = dt(c, r);
        p = Prompt{c, r, true};
      }
    }
  }
  if (best == 0) return std::nullopt;
  return p;
}

BinaryMask refine_mask2d(const BinaryMask& raw, const SensorFrame& frame, const SegConfig& cfg) {
  return refine_mask2d(raw, depth_in_pv(frame), cfg);
}

BinaryMask refine_mask2d(const BinaryMask& raw, const DepthMap& pv_depth, const SegConfig& cfg) {
  if (raw.width() != pv_depth.width() || raw.height() != pv_depth.height()) {
    throw Error(ErrorKind::InvalidParameter, "refine_mask2d: mask and depth sizes differ");
  }
  BinaryMask out = raw;
  std::vector<double> window;
  window.reserve(25);
  for (int r = 0; r < raw.height(); ++r) {
    for (int c = 0; c < raw.width(); ++c) {
      if (!raw(c, r)) continue;
      const double z = pv_depth(c, r);
      if (!(z > 0.0)) continue;
      window.clear();
      for (int dr = -2; dr <= 2; ++dr) {
        for (int dc = -2; dc <= 2; ++dc) {
          if (!raw.in_bounds(c + dc, r + dr) || !raw(c + dc, r + dr)) continue;
          const double v = pv_depth(c + dc, r + dr);
          if (v > 0.0) window.push_back(v);
        }
      }
      const std::size_t n = window.size();
      std::nth_element(window.begin(), window.begin() + n / 2, window.end());
      double median = window[n / 2];
      if (n % 2 == 0) {
        median = 0.5 * (median + *std::max_element(window.begin(), window.begin() + n / 2));
      }
      if (std::abs(z - median) > cfg.depth_gate) out(c, r) = 0;
    }
  }
  return out;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorKind::InvalidParameter, "mask_iou: mask sizes differ");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data()[i] != 0;
    const bool y = b.data()[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool carve_condition(const VoxelState& v, double rho_max) {
  return static_cast<double>(v.free) / (static_cast<double>(v.occ) + 1.0) > rho_max;
}

VoxelMask regularize(const VoxelMask& mask, const SegConfig& cfg) {
  VoxelMask out = mask;
  std::erase_if(out.active(), [&](const auto& kv) { return carve_condition(kv.second, cfg.rho_max); });
  return out;
}

PropagateResult propagate(const VoxelMask& mask, const SensorFrame& frame, Segmenter& segmenter,
                          const ColoredPointCloud& map_snapshot, const SegConfig& cfg) {
  cfg.validate();
  PropagateResult res;
  res.mask = mask;
  const DepthMap pvd = depth_in_pv(frame);
  const BinaryMask proj = project_mask(mask, frame, cfg, pvd);
  const auto prompt = select_prompt(proj);
  if (!prompt) return res;

  SegmentResult seg;
  try {
    const Prompt prompts[] = {*prompt};
    seg = segmenter.segment(frame, prompts);
  } catch (const Error& e) {
    res.error = e.what();
    return res;
  }
  if (seg.mask.width() != frame.intr_pv.width || seg.mask.height() != frame.intr_pv.height) {
    std::ostringstream msg;
    msg << segmenter.name() << " returned a " << seg.mask.width() << "x" << seg.mask.height()
        << " mask for a " << frame.intr_pv.width << "x" << frame.intr_pv.height << " image";
    res.error = msg.str();
    return res;
  }
  const BinaryMask mhat = refine_mask2d(seg.mask, pvd, cfg);
  res.iou = mask_iou(mhat, proj);
  if (res.iou < cfg.tau_iou) return res;
  res.accepted = true;

  VoxelMask& out = res.mask;
  const bool no_depth = all_invalid(pvd);
  const RigidTransform w2pv = frame.world_to_pv();
  const double r = out.resolution();

  // Grow: observations inside the refined mask near the current frontier.
  const std::vector<VoxelKey> frontier = mask.frontier();
  std::vector<Vec3> centers;
  centers.reserve(frontier.size());
  for (const VoxelKey& k : frontier) centers.push_back(voxel_center(k, r));
  const KdTree<3> index(centers);
  std::map<VoxelKey, std::pair<Vec3, std::size_t>> seen;
  auto consider = [&](const Vec3& x, bool gated) {
    const auto hit = to_pixel(frame.intr_pv, w2pv, x);
    if (!hit || !mhat(hit->col, hit->row)) return;
    if (gated && !no_depth) {
      const double d = pvd(hit->col, hit->row);
      if (!(d > 0.0) || std::abs(d - hit->z) > cfg.depth_gate) return;
    }
    const VoxelKey k = voxel_key(x, r);
    if (out.is_active(k)) return;
    if (index.empty() || index.nearest(x).dist2 > 4.0 * r * r) return;
    auto& s = seen.try_emplace(k, Vec3::Zero(), 0).first->second;
    s.first += x;
    ++s.second;
  };
  // Depth pixels the PV camera cannot see (nearer surface at their PV pixel)
  // carry no evidence about the mask.
  const RigidTransform d2w = frame.depth_to_world();
  const CameraIntrinsics& kd = frame.intr_depth;
  for (int row = 0; row < frame.depth_map.height(); ++row) {
    for (int col = 0; col < frame.depth_map.width(); ++col) {
      const double z = frame.depth_map(col, row);
      if (!(z > 0.0)) continue;
      const Vec3 x = d2w.apply(backproject(kd, Vec2(col, row), z));
      const auto hit = to_pixel(frame.intr_pv, w2pv, x);
      if (!hit) continue;
      const double d = pvd(hit->col, hit->row);
      if (d > 0.0 && d < hit->z - cfg.depth_gate) continue;
      consider(x, false);
    }
  }
  for (const Vec3& p : map_snapshot.points) consider(p, true);

  // Occupancy evidence for the voxels that were active before this frame. A
  // voxel's projection is its footprint, as rasterized by project_mask.
  for (auto& [key, v] : out.active()) {
    const Footprint fp = footprint(v.anchor, r, frame.intr_pv, w2pv);
    if (fp.empty()) continue;
    std::size_t consistent = 0, consistent_in = 0, any_in = 0, behind = 0, in_front = 0;
    for (int row = fp.r0; row <= fp.r1; ++row) {
      for (int col = fp.c0; col <= fp.c1; ++col) {
        const bool in = mhat(col, row) != 0;
        any_in += in;
        if (no_depth) continue;
        const double d = pvd(col, row);
        if (!(d > 0.0)) continue;
        if (d < fp.z - cfg.depth_gate) {
          ++in_front;
        } else if (d > fp.z + cfg.depth_gate) {
          ++behind;
        } else {
          ++consistent;
          consistent_in += in;
        }
      }
    }
    if (no_depth) {
      ++(any_in ? v.occ : v.free);
    } else if (in_front > consistent + behind) {
      continue;  // mostly hidden behind nearer surface
    } else if (consistent > 0) {
      ++(consistent_in ? v.occ : v.free);
    } else if (behind > in_front) {
      ++v.free;  // the rays pass through the voxel
    }
  }

  for (const auto& [k, s] : seen) {
    PendingVoxel& p = out.pending()[k];
    p.observations += static_cast<std::uint32_t>(s.second);
    p.point_sum += s.first;
    p.point_count += s.second;
    if (static_cast<int>(p.observations) >= cfg.k_obs) {
      out.active().emplace(
          k, VoxelState{1, 0, p.point_sum / static_cast<double>(p.point_count)});
      out.pending().erase(k);
      ++res.activated;
    }
  }

  const std::size_t before = out.size();
  out = regularize(out, cfg);
  res.carved = before - out.size();
  return res;
}

ColoredPointCloud extract_surface(const VoxelMask& mask, const ColoredPointCloud& map_snapshot,
                                  const Vec3& viewpoint) {
  ColoredPointCloud cloud;
  for (std::size_t i = 0; i < map_snapshot.size(); ++i) {
    if (!mask.is_active(voxel_key(map_snapshot.points[i], mask.resolution()))) continue;
    cloud.points.push_back(map_snapshot.points[i]);
    if (map_snapshot.has_colors()) cloud.colors.push_back(map_snapshot.colors[i]);
  }
  if (cloud.size() < 3) {
    throw Error(ErrorKind::EmptySurface, "extract_surface: fewer than 3 map points in the mask");
  }
  return estimate_normals(cloud, std::min<int>(kDefaultNormalNeighbors, cloud.size()), viewpoint);
}

std::vector<VoxelKey> active_keys(const VoxelMask& mask) {
  std::vector<VoxelKey> keys;
  keys.reserve(mask.size());
  for (const auto& kv : mask.active()) keys.push_back(kv.first);
  return keys;
}

double voxel_iou(const std::vector<VoxelKey>& a, const std::vector<VoxelKey>& b) {
  const std::set<VoxelKey> sa(a.begin(), a.end());
  const std::set<VoxelKey> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const VoxelKey& k : sa) inter += sb.count(k);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace surfreg
