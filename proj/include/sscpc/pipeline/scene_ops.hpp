// sscpc - ground-truth generation pipeline stages.
//
// Split a frame into static background and per-box dynamic objects,
// aggregate multi-frame statics into the world frame, fuse segmentation
// masks by per-pixel majority vote, annotate world points through the
// camera, and reintegrate completed objects. Point counts are conserved at
// every stage.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sscpc/core/cloud_ops.hpp"
#include "sscpc/core/types.hpp"
#include "sscpc/io/pgm.hpp"
#include "sscpc/pipeline/camera.hpp"

namespace sscpc {

/// One dynamic object cut out of a frame: points re-expressed in the box
/// frame (translate by -center, rotate by -yaw; meters, no scaling).
struct DynamicObject {
  std::string track_id;
  SemanticClass cls = SemanticClass::car;
  OrientedBox box;                 // original sensor-frame box
  std::vector<Point3> canonical;   // box-frame points
};

struct FrameDecomposition {
  LabeledCloud static_cloud;  // labels absent
  std::vector<DynamicObject> dynamic_objects;
};

inline Point3 to_box_frame(const Point3& p, const OrientedBox& box) {
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  const Point3 d = p - box.center;
  return {c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z()};
}

inline Point3 from_box_frame(const Point3& p, const OrientedBox& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  return {c * p.x() - s * p.y() + box.center.x(), s * p.x() + c * p.y() + box.center.y(),
          p.z() + box.center.z()};
}

/// Points inside any box go to the first containing box (input order) and
/// are re-expressed in that box's frame; the rest is static background.
inline FrameDecomposition split_static_dynamic(const LabeledCloud& cloud,
                                               const std::vector<OrientedBox>& boxes) {
  FrameDecomposition out;
  out.dynamic_objects.reserve(boxes.size());
  for (const auto& box : boxes) {
    out.dynamic_objects.push_back({box.track_id, box.cls, box, {}});
  }
  std::vector<std::vector<bool>> masks;
  masks.reserve(boxes.size());
  for (const auto& box : boxes) masks.push_back(points_in_box(cloud, box));

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    bool claimed = false;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      if (masks[b][i]) {
        out.dynamic_objects[b].canonical.push_back(to_box_frame(cloud.points[i], boxes[b]));
        claimed = true;
        break;  // first box wins on overlap
      }
    }
    if (!claimed) out.static_cloud.points.push_back(cloud.points[i]);
  }
  return out;
}

/// Concatenates per-frame static clouds transformed by their frame->world
/// poses, in input order.
inline LabeledCloud aggregate_static(
    const std::vector<std::pair<const LabeledCloud*, RigidTransform>>& frames) {
  LabeledCloud out;
  for (const auto& [cloud, pose] : frames) {
    for (const Point3& p : cloud->points) out.points.push_back(pose.apply(p));
  }
  return out;
}

/// Per-pixel majority vote over aligned masks. `unlabeled` casts no vote;
/// ties resolve to the lowest class id; pixels without any vote stay
/// `unlabeled`.
inline SegmentationMask vote_labels(const std::vector<SegmentationMask>& masks) {
  if (masks.empty()) throw std::runtime_error("vote_labels: no masks");
  const int w = masks[0].width, h = masks[0].height;
  for (const auto& m : masks) {
    if (m.width != w || m.height != h) {
      throw std::runtime_error("vote_labels: mask dimensions differ");
    }
  }
  SegmentationMask fused = SegmentationMask::filled(w, h);
  std::array<std::uint32_t, kNumClasses> counts{};
  for (std::size_t px = 0; px < fused.pixels.size(); ++px) {
    counts.fill(0);
    for (const auto& m : masks) {
      const std::uint8_t v = m.pixels[px];
      if (v < kNumClasses) ++counts[v];
    }
    int best = -1;
    std::uint32_t best_count = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      if (counts[k] > best_count) {  // strict > keeps the lowest id on ties
        best_count = counts[k];
        best = k;
      }
    }
    if (best >= 0) fused.pixels[px] = static_cast<std::uint8_t>(best);
  }
  return fused;
}

/// Fetches each point's label from the fused mask at its projected pixel.
/// Invalid projections become `unlabeled`. Coordinates are untouched.
inline LabeledCloud annotate_cloud(const LabeledCloud& world_cloud, const CameraModel& cam,
                                   const SegmentationMask& fused) {
  if (fused.width != cam.width || fused.height != cam.height) {
    throw std::runtime_error("annotate_cloud: mask dimensions do not match the camera");
  }
  LabeledCloud out;
  out.points = world_cloud.points;
  out.labels.emplace(world_cloud.size(), SemanticClass::unlabeled);
  const auto hits = project_points(world_cloud, cam);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i].valid) {
      (*out.labels)[i] = static_cast<SemanticClass>(fused.at(hits[i].u, hits[i].v));
    }
  }
  return out;
}

/// A completed object ready for reintegration, in box-frame meters.
struct CompletedObject {
  OrientedBox box;
  SemanticClass cls = SemanticClass::car;
  std::vector<Point3> canonical;
};

/// Places completed objects back into the world frame through their box
/// poses, labels them with the box class, and appends to the static scene.
inline LabeledCloud reintegrate(const LabeledCloud& static_labeled,
                                const std::vector<CompletedObject>& objects) {
  if (!static_labeled.has_labels()) {
    throw std::runtime_error("reintegrate: static scene must be labeled");
  }
  LabeledCloud out = static_labeled;
  for (const auto& obj : objects) {
    for (const Point3& p : obj.canonical) {
      out.points.push_back(from_box_frame(p, obj.box));
      out.labels->push_back(obj.cls);
    }
  }
  return out;
}

}  // namespace sscpc
