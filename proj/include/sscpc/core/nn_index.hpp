// sscpc - exact nearest-neighbor index.
//
// A KD-tree over a fixed point set. Queries return exactly the brute-force
// nearest neighbor; equidistant candidates resolve to the lowest point index
// so label transfer and tests stay deterministic. Immutable after build,
// safe for concurrent queries.

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sscpc/core/types.hpp"

namespace sscpc {

class NNIndex {
 public:
  explicit NNIndex(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::runtime_error("empty point set");
    for (const Point3& p : points_) {
      if (!is_finite(p)) throw std::runtime_error("nn index: non-finite point");
    }
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    root_ = build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Point3>& points() const { return points_; }

  /// Index and Euclidean distance of the exact nearest neighbor of `query`.
  std::pair<std::size_t, double> nearest(const Point3& query) const {
    Best best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::size_t>::max()};
    search(root_, query, best);
    return {best.index, std::sqrt(best.d2)};
  }

  /// Squared-distance variant; avoids the sqrt when callers aggregate.
  std::pair<std::size_t, double> nearest_squared(const Point3& query) const {
    Best best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::size_t>::max()};
    search(root_, query, best);
    return {best.index, best.d2};
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t begin = 0, end = 0;  // leaf range into order_
  };

  struct Best {
    double d2;
    std::size_t index;
  };

  int build(std::size_t begin, std::size_t end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      // Ascending point index inside the leaf keeps the tie scan in order.
      std::sort(order_.begin() + begin, order_.begin() + end);
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size() - 1);
    }
    // Split the widest axis at the median.
    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(int node_id, const Point3& q, Best& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Point3 d = points_[idx] - q;
        const double d2 = d.squaredNorm();
        if (d2 < best.d2 || (d2 == best.d2 && idx < best.index)) {
          best.d2 = d2;
          best.index = idx;
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, q, best);
    // <= keeps equidistant points reachable so the lowest-index rule holds.
    if (delta * delta <= best.d2) search(far, q, best);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

inline NNIndex build_index(std::vector<Point3> points) { return NNIndex(std::move(points)); }

}  // namespace sscpc
