#include "surfreg/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "surfreg/error.hpp"
#include "surfreg/kdtree.hpp"

namespace surfreg {

namespace {

using FeaturePoint = Eigen::Matrix<double, kFpfhSize, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }

const std::array<Vec3, 3> kWorldAxes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};

std::vector<FeaturePoint> as_points(const FeatureSet& f) {
  std::vector<FeaturePoint> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = Eigen::Map<const FeaturePoint>(f.histograms[i].data());
  }
  return out;
}

int bin_of(double value, double lo, double hi) {
  const int b = static_cast<int>(std::floor(kFpfhBins * (value - lo) / (hi - lo)));
  return std::clamp(b, 0, kFpfhBins - 1);
}

/// Nearest scene distance per transformed model point; +inf beyond `cutoff`.
std::vector<double> nearest_distances(const RigidTransform& t, const ColoredPointCloud& model,
                                      const SpatialIndex& scene, double cutoff) {
  std::vector<double> d(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    d[i] = std::sqrt(scene.nearest_within(t.apply(model.points[i]), cutoff * cutoff).dist2);
  }
  return d;
}

double trimmed_mean_of(std::vector<double> d, double d_max, double trim) {
  std::erase_if(d, [&](double x) { return x > d_max; });
  if (d.empty()) return d_max;
  std::sort(d.begin(), d.end());
  const auto drop = static_cast<std::size_t>(std::floor(trim * static_cast<double>(d.size())));
  const std::size_t keep = d.size() - drop;
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += d[i];
  return std::min(sum / static_cast<double>(keep), d_max);
}

ScoreResult score_with(const RigidTransform& t, const ColoredPointCloud& model,
                       const SpatialIndex& scene, const RegConfig& cfg) {
  ScoreResult s;
  if (model.empty() || scene.empty()) {
    s.trimmed_mean_dist = cfg.d_max;
    s.score = combine_score(0.0, cfg.d_max, cfg);
    return s;
  }
  const std::vector<double> d = nearest_distances(t, model, scene, cfg.d_max);
  const auto covered = std::count_if(d.begin(), d.end(), [&](double x) { return x <= cfg.voxel_base; });
  s.coverage = static_cast<double>(covered) / static_cast<double>(model.size());
  s.trimmed_mean_dist = trimmed_mean_of(d, cfg.d_max, cfg.trim);
  s.score = combine_score(s.coverage, s.trimmed_mean_dist, cfg);
  return s;
}

struct IndexedPyramid {
  const Pyramid* pyramid;
  std::vector<SpatialIndex> trees;

  explicit IndexedPyramid(const Pyramid& p) : pyramid(&p) {
    trees.reserve(p.levels.size());
    for (const PyramidLevel& l : p.levels) trees.emplace_back(l.cloud.points);
  }
};

/// One ICP level. Returns false when no correspondence was ever found.
bool icp_level(RigidTransform& t, const ColoredPointCloud& model, const ColoredPointCloud& scene,
               const SpatialIndex& tree, double voxel, const RegConfig& cfg, int& iterations) {
  const double cos_gate = std::cos(deg2rad(cfg.normal_gate_deg));
  double tau = cfg.tau_factor * voxel;
  bool any = false;
  for (int it = 0; it < cfg.icp_max_iterations; ++it) {
    std::vector<Vec3> xs;
    std::vector<std::uint32_t> match;
    xs.reserve(model.size());
    match.reserve(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
      const Vec3 x = t.apply(model.points[i]);
      const Neighbor nb = tree.nearest_within(x, tau * tau);
      if (nb.index == tree.size()) continue;
      if (t.rotate(model.normals[i]).dot(scene.normals[nb.index]) < cos_gate) continue;
      xs.push_back(x);
      match.push_back(nb.index);
    }
    if (xs.empty()) break;
    any = true;
    ++iterations;

    Vec3 c = Vec3::Zero();
    for (const Vec3& x : xs) c += x;
    c /= static_cast<double>(xs.size());
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const Vec3& n = scene.normals[match[k]];
      const double r = n.dot(xs[k] - scene.points[match[k]]);
      Vec6 j;
      j.head<3>() = (xs[k] - c).cross(n);
      j.tail<3>() = n;
      const double w = std::abs(r) <= cfg.huber_delta ? 1.0 : cfg.huber_delta / std::abs(r);
      h.noalias() += w * j * j.transpose();
      g.noalias() += w * r * j;
    }
    const Vec6 xi = -h.ldlt().solve(g);
    if (!xi.allFinite()) break;
    t = RigidTransform::translation(c) * RigidTransform::exp(xi) *
        RigidTransform::translation(-c) * t;
    tau = std::max(tau * cfg.tau_decay, voxel);
    if (xi.head<3>().norm() < cfg.icp_eps_rotation && xi.tail<3>().norm() < cfg.icp_eps_translation) {
      break;
    }
  }
  return any;
}

IcpResult refine_indexed(const RigidTransform& init, const Pyramid& model,
                         const IndexedPyramid& scene, const RegConfig& cfg) {
  const Pyramid& sp = *scene.pyramid;
  if (model.levels.size() != sp.levels.size()) {
    throw Error(ErrorKind::InvalidParameter, "refine_icp: pyramids have different level counts");
  }
  IcpResult res{init, 0.0, 0};
  for (std::size_t l = 0; l < sp.levels.size(); ++l) {
    const bool found = icp_level(res.transform, model.levels[l].cloud, sp.levels[l].cloud,
                                 scene.trees[l], sp.levels[l].voxel, cfg, res.iterations);
    if (!found && l == 0) {
      throw Error(ErrorKind::NoOverlap, "refine_icp: no correspondences within the initial gate");
    }
  }
  const ColoredPointCloud& mf = model.finest().cloud;
  const SpatialIndex& tf = scene.trees.back();
  const double d_init = trimmed_mean_of(nearest_distances(init, mf, tf, cfg.d_max), cfg.d_max, cfg.trim);
  res.trimmed_mean_dist = trimmed_mean_of(nearest_distances(res.transform, mf, tf, cfg.d_max), cfg.d_max, cfg.trim);
  if (res.trimmed_mean_dist > d_init) {
    res.transform = init;
    res.trimmed_mean_dist = d_init;
  }
  return res;
}

std::array<Vec3, 3> principal_axes(const std::vector<Vec3>& pts, const Vec3& centroid) {
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  std::array<Vec3, 3> axes;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = es.eigenvectors().col(2 - i);
    int big = 0;
    a.cwiseAbs().maxCoeff(&big);
    if (a[big] < 0.0) a = -a;
    axes[i] = a;
  }
  return axes;
}

}  // namespace

// ---------------------------------------------------------------------------

void RegConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::InvalidParameter, "registration config: " + what);
  };
  if (!(lambda_c >= 0.0 && lambda_r >= 0.0) || std::abs(lambda_c + lambda_r - 1.0) > 1e-12) {
    fail("lambda_c and lambda_r must be non-negative and sum to 1");
  }
  if (!(trim >= 0.0 && trim < 0.5)) fail("trim must lie in [0, 0.5)");
  if (!(d_max > 0.0)) fail("d_max must be positive");
  if (!(delta_s_min >= 0.0)) fail("delta_s_min must be non-negative");
  if (levels < 1) fail("levels must be at least 1");
  if (!(voxel_base > 0.0)) fail("voxel_base must be positive");
  if (!(tau_factor >= 1.0)) fail("tau_factor must be at least 1");
  if (!(tau_decay > 0.0 && tau_decay <= 1.0)) fail("tau_decay must lie in (0, 1]");
  if (icp_max_iterations < 1) fail("icp_max_iterations must be at least 1");
  if (!(icp_eps_translation >= 0.0 && icp_eps_rotation >= 0.0)) fail("ICP tolerances must be >= 0");
  if (!(huber_delta > 0.0)) fail("huber_delta must be positive");
  if (!(normal_gate_deg > 0.0 && normal_gate_deg <= 180.0)) fail("normal_gate_deg must lie in (0, 180]");
  if (!(min_coverage >= 0.0 && min_coverage <= 1.0)) fail("min_coverage must lie in [0, 1]");
  if (escape_after < 0) fail("escape_after must be non-negative");
  if (!(fpfh_radius_factor > 0.0)) fail("fpfh_radius_factor must be positive");
  if (normal_neighbors < 3) fail("normal_neighbors must be at least 3");
  if (!(continuity_angle_deg >= 0.0 && continuity_distance >= 0.0)) fail("continuity thresholds must be >= 0");
  if (!(dedup_angle_deg >= 0.0 && dedup_distance >= 0.0)) fail("dedup thresholds must be >= 0");
  if (max_candidates < 1) fail("max_candidates must be at least 1");
  if (ransac.sample_size < 3) fail("ransac.sample_size must be at least 3");
  if (ransac.max_iterations < 1) fail("ransac.max_iterations must be at least 1");
  if (!(ransac.confidence > 0.0 && ransac.confidence < 1.0)) fail("ransac.confidence must lie in (0, 1)");
  if (!(ransac.edge_ratio > 0.0 && ransac.edge_ratio <= 1.0)) fail("ransac.edge_ratio must lie in (0, 1]");
  if (!(ransac.inlier_factor > 0.0)) fail("ransac.inlier_factor must be positive");
  if (fgr.iterations < 1) fail("fgr.iterations must be at least 1");
  if (!(fgr.division_factor > 1.0)) fail("fgr.division_factor must exceed 1");
  if (fgr.decrease_every < 1) fail("fgr.decrease_every must be at least 1");
  if (!(fgr.tuple_scale > 0.0 && fgr.tuple_scale <= 1.0)) fail("fgr.tuple_scale must lie in (0, 1]");
  if (fgr.max_tuples < 1) fail("fgr.max_tuples must be at least 1");
}

double RegConfig::coarse_voxel() const { return voxel_base * std::ldexp(1.0, levels - 1); }

Pyramid build_pyramid(const ColoredPointCloud& cloud, int levels, double voxel_base,
                      int normal_neighbors) {
  if (levels < 1) throw Error(ErrorKind::InvalidParameter, "build_pyramid: levels must be >= 1");
  if (!(voxel_base > 0.0)) throw Error(ErrorKind::InvalidParameter, "build_pyramid: voxel <= 0");
  Pyramid p;
  for (int l = 0; l < levels; ++l) {
    const double voxel = voxel_base * std::ldexp(1.0, levels - 1 - l);
    ColoredPointCloud ds = voxel_downsample(cloud, voxel);
    if (ds.size() < 3) {
      std::ostringstream msg;
      msg << "build_pyramid: level " << l << " (voxel " << voxel << " m) has " << ds.size()
          << " points; normal estimation needs 3";
      throw Error(ErrorKind::InsufficientPoints, msg.str());
    }
    const int k = std::min<int>(normal_neighbors, static_cast<int>(ds.size()));
    std::vector<Vec3> ref;
    if (cloud.has_normals()) {
      ref = ds.normals;
    } else {
      const Vec3 c = ds.centroid();
      ref.reserve(ds.size());
      for (const Vec3& q : ds.points) ref.push_back(q - c);
    }
    p.levels.push_back({estimate_normals_oriented(ds, k, ref), voxel});
  }
  return p;
}

std::array<double, 3> pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  Vec3 dp = p2 - p1;
  const double len = dp.norm();
  if (len == 0.0) return {0.0, 0.0, 0.0};
  Vec3 src_n = n1;
  Vec3 tgt_n = n2;
  const double a1 = n1.dot(dp) / len;
  const double a2 = n2.dot(dp) / len;
  double phi = a1;
  if (std::acos(std::abs(a1)) > std::acos(std::abs(a2))) {
    src_n = n2;
    tgt_n = n1;
    dp = -dp;
    phi = -a2;
  }
  Vec3 v = dp.cross(src_n);
  const double vn = v.norm();
  if (vn == 0.0) return {0.0, 0.0, 0.0};
  v /= vn;
  const Vec3 w = src_n.cross(v);
  const double alpha = v.dot(tgt_n);
  const double theta = std::atan2(w.dot(tgt_n), src_n.dot(tgt_n));
  // Order matches the histogram blocks: theta, alpha, phi.
  return {theta, alpha, phi};
}

FeatureSet compute_fpfh(const ColoredPointCloud& cloud, double radius) {
  if (!cloud.has_normals()) throw Error(ErrorKind::InvalidParameter, "compute_fpfh: normals required");
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidParameter, "compute_fpfh: radius must be positive");
  const std::size_t n = cloud.size();
  const SpatialIndex tree(cloud.points);
  std::vector<std::vector<Neighbor>> nbrs(n);
  std::vector<Histogram> spfh(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Neighbor> all = tree.radius(cloud.points[i], radius);
    std::erase_if(all, [&](const Neighbor& nb) { return nb.index == i; });
    nbrs[i] = std::move(all);
    Histogram h{};
    if (!nbrs[i].empty()) {
      const double incr = 100.0 / static_cast<double>(nbrs[i].size());
      for (const Neighbor& nb : nbrs[i]) {
        const auto f = pair_feature(cloud.points[i], cloud.normals[i], cloud.points[nb.index],
                                    cloud.normals[nb.index]);
        h[bin_of(f[0], -kPi, kPi)] += incr;
        h[kFpfhBins + bin_of(f[1], -1.0, 1.0)] += incr;
        h[2 * kFpfhBins + bin_of(f[2], -1.0, 1.0)] += incr;
      }
    }
    spfh[i] = h;
  }
  FeatureSet out;
  out.histograms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Histogram acc{};
    std::array<double, 3> sums{};
    for (const Neighbor& nb : nbrs[i]) {
      if (nb.dist2 == 0.0) continue;
      const double w = 1.0 / std::sqrt(nb.dist2);
      for (int b = 0; b < kFpfhSize; ++b) {
        const double v = w * spfh[nb.index][b];
        acc[b] += v;
        sums[b / kFpfhBins] += v;
      }
    }
    Histogram& h = out.histograms[i];
    for (int b = 0; b < kFpfhSize; ++b) {
      const double s = sums[b / kFpfhBins];
      h[b] = spfh[i][b] + (s > 0.0 ? 100.0 * acc[b] / s : 0.0);
    }
  }
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> mutual_feature_matches(
    const FeatureSet& model, const FeatureSet& scene) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  if (model.size() == 0 || scene.size() == 0) return out;
  const std::vector<FeaturePoint> mp = as_points(model);
  const std::vector<FeaturePoint> sp = as_points(scene);
  const KdTree<kFpfhSize> mt(mp);
  const KdTree<kFpfhSize> st(sp);
  for (std::uint32_t i = 0; i < mp.size(); ++i) {
    const std::uint32_t j = st.nearest(mp[i]).index;
    if (mt.nearest(sp[j]).index == i) out.emplace_back(i, j);
  }
  return out;
}

RigidTransform fast_global_registration(std::span<const Vec3> model, std::span<const Vec3> scene,
                                        const FgrConfig& cfg, double final_scale) {
  if (model.size() != scene.size()) {
    throw Error(ErrorKind::InvalidParameter, "fgr: correspondence lists differ in length");
  }
  if (model.size() < 3) throw Error(ErrorKind::DegenerateInput, "fgr: fewer than 3 correspondences");

  // Tuple test: keep correspondences that appear in length-consistent triples.
  std::vector<std::size_t> keep;
  {
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<std::size_t> pick(0, model.size() - 1);
    std::set<std::size_t> chosen;
    int tuples = 0;
    const long trials = static_cast<long>(cfg.max_tuples) * 100;
    for (long t = 0; t < trials && tuples < cfg.max_tuples; ++t) {
      const std::size_t a = pick(rng);
      const std::size_t b = pick(rng);
      const std::size_t c = pick(rng);
      if (a == b || b == c || a == c) continue;
      bool ok = true;
      for (auto [i, j] : {std::pair{a, b}, std::pair{b, c}, std::pair{a, c}}) {
        const double lm = (model[i] - model[j]).norm();
        const double ls = (scene[i] - scene[j]).norm();
        if (!(lm * cfg.tuple_scale < ls && ls < lm / cfg.tuple_scale)) ok = false;
      }
      if (!ok) continue;
      chosen.insert({a, b, c});
      ++tuples;
    }
    keep.assign(chosen.begin(), chosen.end());
  }
  if (keep.size() < 3) {
    keep.resize(model.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  }

  Vec3 mc = Vec3::Zero();
  Vec3 sc = Vec3::Zero();
  for (std::size_t i : keep) {
    mc += model[i];
    sc += scene[i];
  }
  mc /= static_cast<double>(keep.size());
  sc /= static_cast<double>(keep.size());
  double scale = 0.0;
  for (std::size_t i : keep) {
    scale = std::max({scale, (model[i] - mc).norm(), (scene[i] - sc).norm()});
  }
  if (!(scale > 0.0)) scale = 1.0;
  std::vector<Vec3> p;
  std::vector<Vec3> q;
  for (std::size_t i : keep) {
    p.push_back((model[i] - mc) / scale);
    q.push_back((scene[i] - sc) / scale);
  }

  RigidTransform t;
  double mu = 1.0;
  const double mu_min = final_scale / scale;
  std::vector<double> w(p.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    if (it % cfg.decrease_every == 0 && mu > mu_min) mu /= cfg.division_factor;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double r2 = (t.apply(p[i]) - q[i]).squaredNorm();
      const double l = mu / (mu + r2);
      w[i] = l * l;
    }
    try {
      t = rigid_fit_weighted(p, q, w).transform;
    } catch (const Error&) {
      break;
    }
  }
  // q = R p + t in normalized coordinates; undo centering and scaling.
  const Mat3& r = t.rotation();
  return RigidTransform(r, sc + scale * t.translation() - r * mc);
}

GlobalInitResult global_init(const ColoredPointCloud& model, const FeatureSet& model_features,
                             const ColoredPointCloud& scene, const FeatureSet& scene_features,
                             const RegConfig& cfg) {
  const auto need = static_cast<std::size_t>(cfg.ransac.sample_size);
  if (model.size() < need || scene.size() < need) {
    std::ostringstream msg;
    msg << "global_init: need at least " << need << " points per cloud (model " << model.size()
        << ", scene " << scene.size() << ")";
    throw Error(ErrorKind::DegenerateInput, msg.str());
  }
  if (model_features.size() != model.size() || scene_features.size() != scene.size()) {
    throw Error(ErrorKind::InvalidParameter, "global_init: features not aligned with clouds");
  }
  const double gate = cfg.ransac.inlier_factor * cfg.coarse_voxel();
  const SpatialIndex scene_tree(scene.points);
  const auto matches = mutual_feature_matches(model_features, scene_features);
  auto fitness_of = [&](const RigidTransform& t) {
    std::size_t in = 0;
    for (const Vec3& m : model.points) in += scene_tree.nearest(t.apply(m)).dist2 <= gate * gate;
    return static_cast<double>(in) / static_cast<double>(model.size());
  };

  GlobalInitResult res;
  std::vector<Vec3> ms;
  std::vector<Vec3> ss;
  for (const auto& [i, j] : matches) {
    ms.push_back(model.points[i]);
    ss.push_back(scene.points[j]);
  }

  if (matches.size() >= need) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
    std::vector<std::size_t> sample(need);
    std::vector<Vec3> a(need);
    std::vector<Vec3> b(need);
    long best_count = -1;
    RigidTransform best;
    long max_it = cfg.ransac.max_iterations;
    for (long it = 0; it < max_it; ++it) {
      for (std::size_t s = 0; s < need; ++s) {
        std::size_t k;
        do {
          k = pick(rng);
        } while (std::find(sample.begin(), sample.begin() + s, k) != sample.begin() + s);
        sample[s] = k;
        a[s] = ms[k];
        b[s] = ss[k];
      }
      bool ok = true;
      for (std::size_t x = 0; x < need && ok; ++x) {
        for (std::size_t y = x + 1; y < need && ok; ++y) {
          const double lm = (a[x] - a[y]).norm();
          const double ls = (b[x] - b[y]).norm();
          if (lm < cfg.ransac.edge_ratio * ls || ls < cfg.ransac.edge_ratio * lm) ok = false;
        }
      }
      if (!ok) continue;
      RigidTransform t;
      try {
        t = rigid_fit(a, b).transform;
      } catch (const Error&) {
        continue;
      }
      long count = 0;
      for (std::size_t k = 0; k < ms.size(); ++k) count += (t.apply(ms[k]) - ss[k]).squaredNorm() <= gate * gate;
      if (count > best_count) {
        best_count = count;
        best = t;
        const double w = static_cast<double>(count) / static_cast<double>(ms.size());
        const double miss = 1.0 - std::pow(w, static_cast<double>(need));
        if (miss <= 0.0) {
          max_it = it + 1;
        } else if (miss < 1.0) {
          const double est = std::log(1.0 - cfg.ransac.confidence) / std::log(miss);
          max_it = std::min<long>(max_it, std::max<long>(it + 1, static_cast<long>(std::ceil(est))));
        }
      }
    }
    if (best_count >= 3) {
      std::vector<Vec3> ia;
      std::vector<Vec3> ib;
      for (std::size_t k = 0; k < ms.size(); ++k) {
        if ((best.apply(ms[k]) - ss[k]).squaredNorm() <= gate * gate) {
          ia.push_back(ms[k]);
          ib.push_back(ss[k]);
        }
      }
      try {
        best = rigid_fit(ia, ib).transform;
      } catch (const Error&) {
      }
    }
    if (best_count >= 0) {
      res.transform = best;
      res.fitness = fitness_of(best);
    }
  }

  if (res.fitness < cfg.min_coverage) {
    res.used_fallback = true;
    if (ms.size() >= 3) {
      res.transform = fast_global_registration(ms, ss, cfg.fgr, gate);
    } else {
      res.transform = RigidTransform::translation(scene.centroid() - model.centroid());
    }
    res.fitness = fitness_of(res.transform);
  }
  return res;
}

ModelData prepare_model(const ColoredPointCloud& model, const RegConfig& cfg) {
  cfg.validate();
  ModelData m;
  m.cloud = model;
  m.pyramid = build_pyramid(model, cfg.levels, cfg.voxel_base, cfg.normal_neighbors);
  m.coarse_features =
      compute_fpfh(m.pyramid.coarsest().cloud, cfg.fpfh_radius_factor * cfg.coarse_voxel());
  m.centroid = model.centroid();
  m.axes = principal_axes(model.points, m.centroid);
  return m;
}

RegistrationState initial_state(const ModelData& model) {
  RegistrationState s;
  s.model_centroid = model.centroid;
  s.model_axes = model.axes;
  return s;
}

std::vector<RigidTransform> spawn_candidates(const std::optional<RigidTransform>& prior,
                                             const RigidTransform& t0,
                                             const RegistrationState& state,
                                             const RegConfig& cfg) {
  std::vector<RigidTransform> bases;
  if (prior) bases.push_back(*prior);
  bases.push_back(t0);
  std::vector<RigidTransform> raw;
  for (const RigidTransform& b : bases) {
    raw.push_back(b);
    const Vec3 c = b.apply(state.model_centroid);
    for (const Vec3& axis : kWorldAxes) {
      raw.push_back(RigidTransform::rotation_about(axis, kPi, c) * b);
    }
    for (const Vec3& axis : state.model_axes) {
      raw.push_back(b * RigidTransform::rotation_about(axis, kPi, state.model_centroid));
    }
  }
  std::vector<RigidTransform> pool;
  const double max_angle = deg2rad(cfg.dedup_angle_deg);
  for (const RigidTransform& t : raw) {
    const bool dup = std::any_of(pool.begin(), pool.end(), [&](const RigidTransform& q) {
      return t.rotation_angle_to(q) <= max_angle &&
             (t.translation() - q.translation()).norm() <= cfg.dedup_distance;
    });
    if (!dup) pool.push_back(t);
    if (pool.size() == cfg.max_candidates) break;
  }
  return pool;
}

IcpResult refine_icp(const RigidTransform& init, const Pyramid& model, const Pyramid& scene,
                     const RegConfig& cfg) {
  cfg.validate();
  return refine_indexed(init, model, IndexedPyramid(scene), cfg);
}

IcpResult refine_icp_level(const RigidTransform& init, const ColoredPointCloud& model,
                           const ColoredPointCloud& scene, double voxel, const RegConfig& cfg) {
  Pyramid m;
  m.levels.push_back({model, voxel});
  Pyramid s;
  s.levels.push_back({scene, voxel});
  return refine_icp(init, m, s, cfg);
}

double trimmed_mean_distance(const RigidTransform& t, const ColoredPointCloud& model,
                             const ColoredPointCloud& scene, double d_max, double trim) {
  if (scene.empty() || model.empty()) return d_max;
  const SpatialIndex tree(scene.points);
  return trimmed_mean_of(nearest_distances(t, model, tree, d_max), d_max, trim);
}

double combine_score(double coverage, double trimmed_mean_dist, const RegConfig& cfg) {
  return cfg.lambda_c * coverage +
         cfg.lambda_r * (1.0 - std::min(trimmed_mean_dist, cfg.d_max) / cfg.d_max);
}

ScoreResult score_pose(const RigidTransform& t, const ColoredPointCloud& model,
                       const ColoredPointCloud& scene, const RegConfig& cfg) {
  const SpatialIndex tree(scene.points);
  return score_with(t, model, tree, cfg);
}

bool poses_close(const RigidTransform& a, const RigidTransform& b, const Vec3& model_centroid,
                 double angle_deg, double distance) {
  return a.rotation_angle_to(b) <= deg2rad(angle_deg) &&
         (a.apply(model_centroid) - b.apply(model_centroid)).norm() <= distance;
}

bool temporal_accept(RegistrationState& state, const RegistrationResult& best,
                     const RegConfig& cfg) {
  bool accept = false;
  if (!state.pose) {
    accept = best.coverage >= cfg.min_coverage;
  } else {
    const bool close = poses_close(best.pose, *state.pose, state.model_centroid,
                                   cfg.continuity_angle_deg, cfg.continuity_distance);
    if (close) {
      accept = best.score >= state.score - cfg.delta_s_min;
    } else {
      accept = best.score >= state.score + cfg.delta_s_min;
    }
    if (!accept && state.frames_since_accept > cfg.escape_after) {
      accept = best.coverage >= cfg.min_coverage;
    }
  }
  if (accept) {
    state.pose = best.pose;
    state.score = best.score;
    state.frames_since_accept = 0;
  } else {
    ++state.frames_since_accept;
  }
  return accept;
}

std::size_t select_best(std::span<const RegistrationResult> results) {
  if (results.empty()) throw Error(ErrorKind::InvalidParameter, "select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const RegistrationResult& r = results[i];
    const RegistrationResult& b = results[best];
    if (r.score > b.score || (r.score == b.score && r.trimmed_mean_dist < b.trimmed_mean_dist)) {
      best = i;
    }
  }
  return best;
}

RegistrationResult register_frame(RegistrationState& state, const ModelData& model,
                                  const ColoredPointCloud& scene, const RegConfig& cfg) {
  cfg.validate();
  if (scene.size() < static_cast<std::size_t>(cfg.normal_neighbors)) {
    std::ostringstream msg;
    msg << "register_frame: scene has " << scene.size() << " points; at least "
        << cfg.normal_neighbors << " required";
    throw Error(ErrorKind::DegenerateInput, msg.str());
  }
  Pyramid sp;
  try {
    sp = build_pyramid(scene, cfg.levels, cfg.voxel_base, cfg.normal_neighbors);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientPoints) throw;
    throw Error(ErrorKind::DegenerateInput, std::string("register_frame: ") + e.what());
  }
  const FeatureSet sf = compute_fpfh(sp.coarsest().cloud, cfg.fpfh_radius_factor * cfg.coarse_voxel());
  const GlobalInitResult gi = global_init(model.pyramid.coarsest().cloud, model.coarse_features,
                                          sp.coarsest().cloud, sf, cfg);
  const std::vector<RigidTransform> pool = spawn_candidates(state.pose, gi.transform, state, cfg);

  const IndexedPyramid indexed(sp);
  const ColoredPointCloud& mf = model.pyramid.finest().cloud;
  const SpatialIndex& fine_tree = indexed.trees.back();
  const std::size_t n = pool.size();

  // Candidates are refined level by level. One that lands on the same pose as
  // an earlier candidate after a level would follow it exactly from then on,
  // so it inherits that candidate's result.
  std::vector<RigidTransform> poses = pool;
  std::vector<std::ptrdiff_t> leader(n, -1);
  std::vector<bool> no_overlap(n, false);
  const double dedup_angle = deg2rad(cfg.dedup_angle_deg);
  for (std::size_t l = 0; l < sp.levels.size(); ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      if (leader[i] >= 0 || no_overlap[i]) continue;
      int iterations = 0;
      const bool found = icp_level(poses[i], model.pyramid.levels[l].cloud, sp.levels[l].cloud,
                                   indexed.trees[l], sp.levels[l].voxel, cfg, iterations);
      if (!found && l == 0) no_overlap[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (leader[i] >= 0 || no_overlap[i]) continue;
      for (std::size_t j = 0; j < i; ++j) {
        if (leader[j] >= 0 || no_overlap[j]) continue;
        if (poses[i].rotation_angle_to(poses[j]) <= dedup_angle &&
            (poses[i].translation() - poses[j].translation()).norm() <= cfg.dedup_distance) {
          leader[i] = static_cast<std::ptrdiff_t>(j);
          break;
        }
      }
    }
  }

  std::vector<RegistrationResult> results(n);
  for (std::size_t i = 0; i < n; ++i) {
    RegistrationResult& r = results[i];
    if (leader[i] >= 0) {
      r = results[static_cast<std::size_t>(leader[i])];
      continue;
    }
    if (no_overlap[i]) {
      r.pose = pool[i];
      r.score = 0.0;
      r.coverage = 0.0;
      r.trimmed_mean_dist = cfg.d_max;
      continue;
    }
    r.pose = poses[i];
    const double d_init = trimmed_mean_of(nearest_distances(pool[i], mf, fine_tree, cfg.d_max), cfg.d_max, cfg.trim);
    const double d_final = trimmed_mean_of(nearest_distances(poses[i], mf, fine_tree, cfg.d_max), cfg.d_max, cfg.trim);
    if (d_final > d_init) r.pose = pool[i];
    const ScoreResult s = score_with(r.pose, mf, fine_tree, cfg);
    r.score = s.score;
    r.coverage = s.coverage;
    r.trimmed_mean_dist = s.trimmed_mean_dist;
  }
  RegistrationResult best = results[select_best(results)];
  best.candidate_count = pool.size();
  best.accepted = temporal_accept(state, best, cfg);
  return best;
}

}  // namespace surfreg
