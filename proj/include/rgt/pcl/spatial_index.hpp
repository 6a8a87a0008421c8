#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "rgt/pcl/cloud.hpp"

namespace rgt::pcl {

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

// Axis-aligned kd-tree over a fixed point set. Immutable after construction.
//
// knn() orders results by (distance, id); radius() returns ids in ascending
// order. Both are exact: results equal a linear scan over all points.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 16)
      : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<PointId>(i);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }
  std::size_t leaf_size() const { return leaf_size_; }
  const Vec3& point(PointId id) const { return points_[id]; }
  const std::vector<Vec3>& points() const { return points_; }

  std::vector<PointId> knn(const Vec3& query, std::size_t k) const {
    if (k > points_.size())
      throw ConfigError("knn: k=" + std::to_string(k) + " exceeds point count " + std::to_string(points_.size()));
    std::vector<PointId> out;
    if (k == 0) return out;
    Heap heap;
    knn_recurse(0, query, k, heap);
    std::vector<Candidate> sorted;
    sorted.reserve(k);
    while (!heap.empty()) {
      sorted.push_back(heap.top());
      heap.pop();
    }
    out.resize(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) out[i] = sorted[sorted.size() - 1 - i].second;
    return out;
  }

  std::vector<PointId> radius(const Vec3& query, double r) const {
    std::vector<PointId> out;
    for_each_in_radius(query, r, [&](PointId id) { out.push_back(id); });
    std::sort(out.begin(), out.end());
    return out;
  }

  // Calls f(id) for every point within distance r of query, in tree order.
  template <class F>
  void for_each_in_radius(const Vec3& query, double r, F&& f) const {
    if (nodes_.empty() || r < 0.0) return;
    radius_recurse(0, query, r * r, f);
  }

 private:
  struct Node {
    Vec3 lo, hi;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };
  using Candidate = std::pair<double, PointId>;  // (squared distance, id), compared lexicographically
  using Heap = std::priority_queue<Candidate>;

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[index].lo = lo;
    nodes_[index].hi = hi;
    nodes_[index].begin = begin;
    nodes_[index].end = end;
    if (end - begin <= leaf_size_) return index;

    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](PointId a, PointId b) {
                       const double ca = points_[a][axis], cb = points_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  static double box_distance2(const Node& node, const Vec3& q) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = 0.0;
      if (q[a] < node.lo[a]) d = node.lo[a] - q[a];
      else if (q[a] > node.hi[a]) d = q[a] - node.hi[a];
      d2 += d * d;
    }
    return d2;
  }

  void knn_recurse(std::int32_t index, const Vec3& q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[index];
    // A box at exactly the current worst distance may still hold a smaller id.
    if (heap.size() == k && box_distance2(node, q) > heap.top().first) return;
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const PointId id = order_[i];
        const Candidate c{squared_distance(points_[id], q), id};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double dl = box_distance2(nodes_[node.left], q);
    const double dr = box_distance2(nodes_[node.right], q);
    if (dl <= dr) {
      knn_recurse(node.left, q, k, heap);
      knn_recurse(node.right, q, k, heap);
    } else {
      knn_recurse(node.right, q, k, heap);
      knn_recurse(node.left, q, k, heap);
    }
  }

  template <class F>
  void radius_recurse(std::int32_t index, const Vec3& q, double r2, F& f) const {
    const Node& node = nodes_[index];
    if (box_distance2(node, q) > r2) return;
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const PointId id = order_[i];
        if (squared_distance(points_[id], q) <= r2) f(id);
      }
      return;
    }
    radius_recurse(node.left, q, r2, f);
    radius_recurse(node.right, q, r2, f);
  }

  std::vector<Vec3> points_;
  std::size_t leaf_size_;
  std::vector<PointId> order_;
  std::vector<Node> nodes_;
};

}  // namespace rgt::pcl
