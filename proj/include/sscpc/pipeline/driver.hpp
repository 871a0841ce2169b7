// sscpc - end-to-end scene pipeline.
//
// Per scene: split every frame into static background and boxed objects,
// aggregate statics into the world frame, fuse infrastructure masks by
// majority vote, annotate the aggregate through the camera, run two-stage
// shape-bank completion on the objects, and reintegrate them at each
// track's first infrastructure-frame box. Point counts are conserved and
// reported per stage.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/bank/shape_bank.hpp"
#include "sscpc/io/manifest.hpp"
#include "sscpc/io/pgm.hpp"
#include "sscpc/io/ply.hpp"
#include "sscpc/pipeline/scene_ops.hpp"

namespace sscpc {

struct PipelineCounts {
  std::uint64_t input_points = 0;       // sum of frame cloud sizes
  std::uint64_t static_points = 0;      // after split, all frames
  std::uint64_t object_points = 0;      // after split, all frames
  std::uint64_t completed_object_points = 0;
  std::uint64_t output_points = 0;
};

struct ScenePipelineResult {
  std::string scene_id;
  LabeledCloud completed;  // labeled, world frame
  PipelineCounts counts;
  std::map<std::string, std::uint64_t> class_histogram;  // class name -> points
  std::uint64_t frames = 0;
  std::uint64_t objects = 0;  // completed infrastructure tracks
};

namespace detail {

/// Yaw of a yaw-only rotation; boxes keep their yaw parameterization only
/// under such poses.
inline double yaw_of(const RigidTransform& t, const std::string& what) {
  const auto& r = t.rotation;
  if (std::abs(r(2, 2) - 1.0) > 1e-9 || std::abs(r(0, 2)) > 1e-9 || std::abs(r(1, 2)) > 1e-9 ||
      std::abs(r(2, 0)) > 1e-9 || std::abs(r(2, 1)) > 1e-9) {
    throw std::runtime_error(what + ": pose must be yaw-only to carry oriented boxes");
  }
  return std::atan2(r(1, 0), r(0, 0));
}

}  // namespace detail

inline ScenePipelineResult run_scene_pipeline(const SceneEntry& scene) {
  ScenePipelineResult result;
  result.scene_id = scene.scene_id;
  result.frames = scene.frames.size();

  // Per-(side, track) accumulation of box-frame points across frames, plus
  // the reference world box of each infrastructure track.
  struct TrackAccum {
    SemanticClass cls = SemanticClass::car;
    Eigen::Vector3d box_size = Eigen::Vector3d::Zero();
    std::vector<Point3> canonical;
  };
  std::map<std::string, TrackAccum> tracks[2];  // [0]=vehicle, [1]=infrastructure
  std::map<std::string, OrientedBox> reference_box;  // infra track -> world box

  std::vector<LabeledCloud> statics;
  statics.reserve(scene.frames.size());
  std::vector<RigidTransform> poses;
  std::vector<SegmentationMask> infra_masks;
  std::optional<CameraModel> infra_cam;

  for (const auto& frame : scene.frames) {
    const LabeledCloud cloud = read_ply(frame.cloud_path);
    result.counts.input_points += cloud.size();

    const FrameDecomposition decomp = split_static_dynamic(cloud, frame.boxes);
    result.counts.static_points += decomp.static_cloud.size();

    const bool is_infra = frame.side == SensorSide::infrastructure;
    for (const auto& obj : decomp.dynamic_objects) {
      result.counts.object_points += obj.canonical.size();
      if (obj.canonical.empty()) continue;
      TrackAccum& acc = tracks[is_infra ? 1 : 0][obj.track_id];
      acc.cls = obj.cls;
      acc.box_size = acc.box_size.cwiseMax(obj.box.size);
      acc.canonical.insert(acc.canonical.end(), obj.canonical.begin(), obj.canonical.end());

      if (is_infra && !reference_box.count(obj.track_id)) {
        const double pose_yaw = detail::yaw_of(frame.pose, "scene '" + scene.scene_id + "'");
        reference_box.emplace(
            obj.track_id,
            OrientedBox::make(frame.pose.apply(obj.box.center), obj.box.size,
                              obj.box.yaw + pose_yaw, obj.cls, obj.track_id));
      }
    }

    statics.push_back(decomp.static_cloud);
    poses.push_back(frame.pose);
    if (is_infra && frame.mask_path) {
      infra_masks.push_back(read_mask(*frame.mask_path));
      if (!infra_cam && frame.camera) infra_cam = frame.camera;
    }
  }

  // Aggregate statics into the world frame.
  std::vector<std::pair<const LabeledCloud*, RigidTransform>> static_frames;
  static_frames.reserve(statics.size());
  for (std::size_t i = 0; i < statics.size(); ++i) static_frames.emplace_back(&statics[i], poses[i]);
  const LabeledCloud world_static = aggregate_static(static_frames);

  // Fuse masks and annotate. Without any mask the background stays
  // unlabeled but the pipeline still completes.
  LabeledCloud labeled_static;
  if (!infra_masks.empty() && infra_cam) {
    const SegmentationMask fused = vote_labels(infra_masks);
    labeled_static = annotate_cloud(world_static, *infra_cam, fused);
  } else {
    labeled_static.points = world_static.points;
    labeled_static.labels.emplace(world_static.size(), SemanticClass::unlabeled);
  }

  // Shape-bank completion: intra-side, then infrastructure-from-vehicle.
  auto to_bank = [](const std::map<std::string, TrackAccum>& side_tracks, BankSide side) {
    std::vector<BankObject> bank;
    bank.reserve(side_tracks.size());
    for (const auto& [track_id, acc] : side_tracks) {
      BankObject obj;
      obj.track_id = track_id;
      obj.cls = acc.cls;
      obj.side = side;
      obj.box_size = acc.box_size;
      obj.canonical = acc.canonical;
      bank.push_back(std::move(obj));
    }
    return bank;
  };
  const std::vector<BankObject> completed = mutual_complete(
      to_bank(tracks[1], BankSide::infrastructure), to_bank(tracks[0], BankSide::vehicle));

  std::vector<CompletedObject> to_place;
  for (const auto& obj : completed) {
    const auto ref = reference_box.find(obj.track_id);
    if (ref == reference_box.end()) continue;
    result.counts.completed_object_points += obj.canonical.size();
    to_place.push_back({ref->second, obj.cls, obj.canonical});
  }
  result.objects = to_place.size();

  result.completed = reintegrate(labeled_static, to_place);
  result.counts.output_points = result.completed.size();

  for (const SemanticClass c : *result.completed.labels) {
    ++result.class_histogram[std::string(to_string(c))];
  }
  return result;
}

}  // namespace sscpc
