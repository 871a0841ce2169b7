// sscpc - dynamic-object shape bank.
//
// Partially observed objects, pooled per sensor side, complete each other:
// a disparity score H(A,B) picks the most similar same-class candidate,
// whose points are rescaled to the source box and unioned in. Two stages:
// intra-side (multi-object), then infrastructure-from-vehicle (multi-view).
// H is symmetric Chamfer-L1 over clouds normalized to the [-1,1]^3 box.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/core/nn_index.hpp"
#include "sscpc/core/types.hpp"

namespace sscpc {

enum class BankSide { vehicle, infrastructure };

/// One object in the bank: box-frame points (meters) plus the box size that
/// anchors scale normalization.
struct BankObject {
  std::string track_id;
  SemanticClass cls = SemanticClass::car;
  BankSide side = BankSide::infrastructure;
  Eigen::Vector3d box_size = Eigen::Vector3d::Ones();  // (l, w, h)
  std::vector<Point3> canonical;                       // box frame, meters

  void validate(double tol = 1e-6) const {
    if (canonical.empty()) throw std::runtime_error("bank object '" + track_id + "': empty");
    if (!(box_size.minCoeff() > 0)) {
      throw std::runtime_error("bank object '" + track_id + "': degenerate box size");
    }
    const Eigen::Vector3d half = box_size * 0.5;
    for (const Point3& p : canonical) {
      if (std::abs(p.x()) > half.x() + tol || std::abs(p.y()) > half.y() + tol ||
          std::abs(p.z()) > half.z() + tol) {
        throw std::runtime_error("bank object '" + track_id + "': point outside box");
      }
    }
  }
};

/// Sensor-frame points -> scale-normalized box frame: translate by -center,
/// rotate by -yaw, then scale each axis by 2/size. Box corners map to
/// (+-1, +-1, +-1).
inline std::vector<Point3> canonicalize(const std::vector<Point3>& sensor_points,
                                        const OrientedBox& box) {
  if (!(box.size.minCoeff() > 0)) throw std::runtime_error("canonicalize: degenerate box size");
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  std::vector<Point3> out;
  out.reserve(sensor_points.size());
  for (const Point3& p : sensor_points) {
    const Point3 d = p - box.center;
    out.emplace_back((c * d.x() - s * d.y()) * 2.0 / box.size.x(),
                     (s * d.x() + c * d.y()) * 2.0 / box.size.y(),
                     d.z() * 2.0 / box.size.z());
  }
  return out;
}

inline std::vector<Point3> decanonicalize(const std::vector<Point3>& normalized,
                                          const OrientedBox& box) {
  if (!(box.size.minCoeff() > 0)) throw std::runtime_error("decanonicalize: degenerate box size");
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  std::vector<Point3> out;
  out.reserve(normalized.size());
  for (const Point3& p : normalized) {
    const double x = p.x() * box.size.x() * 0.5;
    const double y = p.y() * box.size.y() * 0.5;
    const double z = p.z() * box.size.z() * 0.5;
    out.emplace_back(c * x - s * y + box.center.x(), s * x + c * y + box.center.y(),
                     z + box.center.z());
  }
  return out;
}

namespace detail {

inline std::vector<Point3> scale_normalize(const BankObject& obj) {
  std::vector<Point3> out;
  out.reserve(obj.canonical.size());
  const Eigen::Vector3d inv_half =
      Eigen::Vector3d(2.0 / obj.box_size.x(), 2.0 / obj.box_size.y(), 2.0 / obj.box_size.z());
  for (const Point3& p : obj.canonical) out.emplace_back(p.cwiseProduct(inv_half));
  return out;
}

inline double directed_mean_nn(const std::vector<Point3>& from, const NNIndex& to) {
  double acc = 0.0;
  for (const Point3& p : from) acc += to.nearest(p).second;
  return acc / static_cast<double>(from.size());
}

}  // namespace detail

/// Disparity H(A,B): symmetric Chamfer-L1 between the scale-normalized
/// clouds. Zero for identical shapes; lower means more similar. Comparing
/// across classes is an error.
inline double disparity(const BankObject& a, const BankObject& b) {
  if (a.cls != b.cls) throw std::runtime_error("disparity: incomparable classes");
  a.validate();
  b.validate();
  const auto na = detail::scale_normalize(a);
  const auto nb = detail::scale_normalize(b);
  const NNIndex ia(na), ib(nb);
  return detail::directed_mean_nn(na, ib) + detail::directed_mean_nn(nb, ia);
}

/// Completes `source` from the most similar same-class bank candidate
/// (disparity ties break to the lowest track_id; the source's own
/// observation, same track_id on the same side, is skipped). The winner's
/// points are rescaled to the source box size and unioned with the
/// source's; without a candidate the source is returned unchanged.
/// Candidates with fewer than `min_points` points are ignored as donors.
inline BankObject complete_from_bank(const BankObject& source,
                                     const std::vector<BankObject>& bank,
                                     std::size_t min_points = 1) {
  source.validate();
  if (min_points < 1) throw std::runtime_error("complete_from_bank: min_points must be >= 1");

  const BankObject* best = nullptr;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& candidate : bank) {
    if (candidate.track_id == source.track_id && candidate.side == source.side) continue;
    if (candidate.cls != source.cls) continue;
    if (candidate.canonical.size() < min_points) continue;
    const double score = disparity(source, candidate);
    if (score < best_score ||
        (score == best_score && best && candidate.track_id < best->track_id)) {
      best_score = score;
      best = &candidate;
    }
  }
  if (best == nullptr) return source;

  BankObject out = source;
  // Rescale: candidate box frame -> normalized -> source box frame.
  const Eigen::Vector3d ratio = source.box_size.cwiseQuotient(best->box_size);
  out.canonical.reserve(out.canonical.size() + best->canonical.size());
  for (const Point3& p : best->canonical) out.canonical.push_back(p.cwiseProduct(ratio));
  return out;
}

/// Two-stage mutual completion. Stage 1 completes each side from its own
/// bank (multi-object); stage 2 completes every infrastructure object from
/// the best-matching stage-1 vehicle object (multi-view). The result holds
/// one object per infrastructure track, a superset of its stage-1 points.
inline std::vector<BankObject> mutual_complete(const std::vector<BankObject>& infra,
                                               const std::vector<BankObject>& vehicle,
                                               std::size_t min_points = 1) {
  std::vector<BankObject> infra_stage1;
  infra_stage1.reserve(infra.size());
  for (const auto& obj : infra) infra_stage1.push_back(complete_from_bank(obj, infra, min_points));

  std::vector<BankObject> vehicle_stage1;
  vehicle_stage1.reserve(vehicle.size());
  for (const auto& obj : vehicle) {
    vehicle_stage1.push_back(complete_from_bank(obj, vehicle, min_points));
  }

  std::vector<BankObject> out;
  out.reserve(infra_stage1.size());
  for (const auto& obj : infra_stage1) {
    out.push_back(complete_from_bank(obj, vehicle_stage1, min_points));
  }
  return out;
}

}  // namespace sscpc
