#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace surfreg {

struct Neighbor {
  std::uint32_t index = 0;
  double dist2 = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Neighbours are ordered by (squared distance, index); a brute-force scan that
/// sorts with the same key returns identical results.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

/// Exact k-d tree over a fixed-dimension point set. Immutable after build.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;

  explicit KdTree(std::span<const Point> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  /// Nearest neighbour; ties go to the smaller index. Index is size() when empty.
  Neighbor nearest(const Point& q) const {
    Neighbor best{static_cast<std::uint32_t>(points_.size()),
                  std::numeric_limits<double>::infinity()};
    if (!points_.empty()) nearest_rec(0, q, best);
    return best;
  }

  /// Nearest neighbour with squared distance <= max_dist2; index is size() when
  /// there is none. Cheaper than nearest() for queries far from the set.
  Neighbor nearest_within(const Point& q, double max_dist2) const {
    Neighbor best{static_cast<std::uint32_t>(points_.size()), max_dist2};
    if (!points_.empty()) nearest_rec(0, q, best);
    if (best.index == points_.size()) best.dist2 = std::numeric_limits<double>::infinity();
    return best;
  }

  /// k nearest neighbours sorted by (dist2, index).
  std::vector<Neighbor> knn(const Point& q, std::size_t k) const {
    std::vector<Neighbor> heap;
    k = std::min(k, points_.size());
    if (k == 0) return heap;
    heap.reserve(k + 1);
    knn_rec(0, q, k, heap);
    std::sort(heap.begin(), heap.end(), neighbor_less);
    return heap;
  }

  /// All points with squared distance <= radius^2, sorted by (dist2, index).
  std::vector<Neighbor> radius(const Point& q, double r) const {
    std::vector<Neighbor> out;
    if (!points_.empty()) radius_rec(0, q, r * r, out);
    std::sort(out.begin(), out.end(), neighbor_less);
    return out;
  }

 private:
  static constexpr std::uint32_t kLeafSize = 12;

  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = points_[order_[begin]];
    Point hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const double split = points_[order_[mid]][axis];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    Node& node = nodes_[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void nearest_rec(std::uint32_t id, const Point& q, Neighbor& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (neighbor_less(cand, best)) best = cand;
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t first = diff < 0.0 ? node.left : node.right;
    const std::uint32_t second = diff < 0.0 ? node.right : node.left;
    nearest_rec(first, q, best);
    // <= keeps equal-distance candidates with smaller indices reachable.
    if (diff * diff <= best.dist2) nearest_rec(second, q, best);
  }

  void knn_rec(std::uint32_t id, const Point& q, std::size_t k,
               std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        } else if (neighbor_less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), neighbor_less);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t first = diff < 0.0 ? node.left : node.right;
    const std::uint32_t second = diff < 0.0 ? node.right : node.left;
    knn_rec(first, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().dist2) knn_rec(second, q, k, heap);
  }

  void radius_rec(std::uint32_t id, const Point& q, double r2,
                  std::vector<Neighbor>& out) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 <= r2) out.push_back({idx, d2});
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t first = diff < 0.0 ? node.left : node.right;
    const std::uint32_t second = diff < 0.0 ? node.right : node.left;
    radius_rec(first, q, r2, out);
    if (diff * diff <= r2) radius_rec(second, q, r2, out);
  }

  std::vector<Point> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Exact nearest-neighbour index over 3D points.
using SpatialIndex = KdTree<3>;

}  // namespace surfreg
