// sscpc - point-set operations: farthest point sampling and box containment.

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "sscpc/core/types.hpp"

namespace sscpc {

/// Farthest point sampling. The first pick is the point of lexicographic
/// rank `r` with r drawn from a seeded mt19937_64 (rank, not raw index, so
/// permuting the input permutes the output without changing the selected
/// set). Every following pick maximizes the min distance to the chosen
/// set, ties resolved to the lowest index. Returns indices in selection
/// order.
inline std::vector<std::size_t> farthest_point_sample(const LabeledCloud& cloud,
                                                      std::size_t k,
                                                      std::uint64_t seed) {
  const std::size_t n = cloud.points.size();
  if (k < 1 || k > n) {
    throw std::runtime_error("farthest_point_sample: k must be in [1, N], got k=" +
                             std::to_string(k) + " N=" + std::to_string(n));
  }
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    const Point3 &pa = cloud.points[a], &pb = cloud.points[b];
    if (pa.x() != pb.x()) return pa.x() < pb.x();
    if (pa.y() != pb.y()) return pa.y() < pb.y();
    if (pa.z() != pb.z()) return pa.z() < pb.z();
    return a < b;
  });
  std::mt19937_64 rng(seed);
  const std::size_t first = rank[rng() % n];

  std::vector<std::size_t> picked;
  picked.reserve(k);
  picked.push_back(first);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::size_t last = first;
  while (picked.size() < k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = (cloud.points[i] - cloud.points[last]).squaredNorm();
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best) {  // strict > keeps the lowest index on ties
        best = min_d2[i];
        arg = i;
      }
    }
    picked.push_back(arg);
    last = arg;
  }
  return picked;
}

/// mask[i] is true iff point i, expressed in the box frame, lies within
/// ±size/2 on every axis (closed intervals).
inline std::vector<bool> points_in_box(const LabeledCloud& cloud, const OrientedBox& box) {
  box.validate();
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  const Eigen::Vector3d half = box.size * 0.5;
  std::vector<bool> mask(cloud.points.size(), false);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Point3 d = cloud.points[i] - box.center;
    const double lx = c * d.x() - s * d.y();
    const double ly = s * d.x() + c * d.y();
    mask[i] = std::abs(lx) <= half.x() && std::abs(ly) <= half.y() &&
              std::abs(d.z()) <= half.z();
  }
  return mask;
}

}  // namespace sscpc
