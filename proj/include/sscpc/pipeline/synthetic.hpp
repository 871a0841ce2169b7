// sscpc - synthetic scene generator.
//
// A desk-scale stand-in for a real cooperative capture: a road with
// sidewalk strips, box buildings, moving cars, an elevated fixed camera and
// a vehicle sensor driving through. Emits per-frame partial clouds
// (frustum-culled with exact ray-cast hidden-surface removal), per-frame
// masks ray-cast from the identical geometry, poses, and the complete
// labeled ground truth. Everything derives from one seed, so reruns are
// byte-identical.

#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "sscpc/core/rng.hpp"
#include "sscpc/core/types.hpp"
#include "sscpc/io/manifest.hpp"
#include "sscpc/io/pgm.hpp"
#include "sscpc/io/ply.hpp"
#include "sscpc/pipeline/camera.hpp"

namespace sscpc {

struct SynthParams {
  std::uint64_t seed = 7;
  int frames = 8;    // frames per side
  int objects = 2;   // moving cars
  double noise_sigma = 0.0;

  double extent_x = 30.0;        // road runs along +X from 0
  double extent_y = 20.0;        // total width, centered on the road axis
  double road_half_width = 7.0;  // |y| below -> road, above -> sidewalk
  int buildings = 2;
  double gt_spacing = 0.35;      // static surface sampling step (m)
  double object_spacing = 0.18;  // car surface sampling step (m)
  // Surface samples keep this distance from class boundaries (road edge,
  // building outlines) so one pixel never straddles two classes.
  double boundary_margin = 0.3;
  int mask_width = 384;
  int mask_height = 288;
  double frame_dt = 0.5;  // seconds between frames
  std::string scene_id = "scene_000";

  void validate() const {
    if (frames < 1) throw std::runtime_error("synth: frames must be >= 1");
    if (objects < 0) throw std::runtime_error("synth: objects must be >= 0");
    if (!(noise_sigma >= 0)) throw std::runtime_error("synth: noise sigma must be >= 0");
    if (!(extent_x > 4 && extent_y > 4)) throw std::runtime_error("synth: extents too small");
    if (!(road_half_width > 1 && road_half_width < extent_y / 2)) {
      throw std::runtime_error("synth: road width must fit inside the extent");
    }
    if (mask_width < 16 || mask_height < 16) throw std::runtime_error("synth: mask too small");
  }
};

/// Per-frame partial observation plus the pre-noise surface provenance of
/// every emitted point (test hook; the files carry only the sensor cloud).
struct FrameObservation {
  SensorSide side = SensorSide::infrastructure;
  LabeledCloud sensor_cloud;             // what lands in the PLY (unlabeled)
  std::vector<Point3> true_world;        // per point, exact surface position
  std::vector<SemanticClass> true_cls;   // per point, generating surface class
};

struct SynthResult {
  DatasetManifest manifest;
  std::filesystem::path manifest_path;
  LabeledCloud ground_truth;  // labeled, world frame
  std::filesystem::path ground_truth_path;
  std::vector<FrameObservation> observations;  // manifest frame order
};

namespace synth_detail {

// ---------------------------------------------------------------------------
// Analytic scene: one ground rectangle plus yawed boxes.
// ---------------------------------------------------------------------------

struct RaycastScene {
  double extent_x = 0, half_y = 0, road_half = 0;
  std::vector<OrientedBox> boxes;  // buildings + cars at the frame's pose
  std::vector<SemanticClass> box_cls;

  SemanticClass ground_class(double y) const {
    return std::abs(y) < road_half ? SemanticClass::road : SemanticClass::sidewalk;
  }

  /// Entry distance of a ray into a box, or +inf. Origin is assumed
  /// outside; an origin inside reports the exit so everything behind the
  /// sensor housing stays hidden.
  static double ray_box(const Point3& o, const Point3& d, const OrientedBox& box) {
    const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
    const Point3 od = o - box.center;
    const Point3 ob(c * od.x() - s * od.y(), s * od.x() + c * od.y(), od.z());
    const Point3 db(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
    const Eigen::Vector3d half = box.size * 0.5;
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (db[a] == 0.0) {
        if (std::abs(ob[a]) > half[a]) return std::numeric_limits<double>::infinity();
        continue;
      }
      double t0 = (-half[a] - ob[a]) / db[a];
      double t1 = (half[a] - ob[a]) / db[a];
      if (t0 > t1) std::swap(t0, t1);
      tmin = std::max(tmin, t0);
      tmax = std::min(tmax, t1);
      if (tmin > tmax) return std::numeric_limits<double>::infinity();
    }
    return tmin > 1e-9 ? tmin : tmax;
  }

  struct Hit {
    double t = std::numeric_limits<double>::infinity();
    SemanticClass cls = SemanticClass::unlabeled;
  };

  Hit nearest_hit(const Point3& o, const Point3& d) const {
    Hit hit;
    if (d.z() < 0.0) {
      const double t = -o.z() / d.z();
      if (t > 1e-9) {
        const Point3 p = o + t * d;
        if (p.x() >= 0 && p.x() <= extent_x && std::abs(p.y()) <= half_y) {
          hit.t = t;
          hit.cls = ground_class(p.y());
        }
      }
    }
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const double t = ray_box(o, d, boxes[b]);
      if (t < hit.t) {
        hit.t = t;
        hit.cls = box_cls[b];
      }
    }
    return hit;
  }
};

inline Point3 camera_center(const CameraModel& cam) {
  return -(cam.extrinsic.rotation.transpose() * cam.extrinsic.translation);
}

/// World->camera extrinsic for a camera at `center` looking along
/// `forward` (+Z optical axis, +X image-right, +Y image-down).
inline RigidTransform look_at(const Point3& center, const Eigen::Vector3d& forward) {
  const Eigen::Vector3d z = forward.normalized();
  Eigen::Vector3d x = z.cross(Eigen::Vector3d(0, 0, 1));
  if (x.norm() < 1e-9) x = Eigen::Vector3d(0, -1, 0);
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  RigidTransform t;
  t.rotation.row(0) = x;
  t.rotation.row(1) = y;
  t.rotation.row(2) = z;
  t.translation = -(t.rotation * center);
  return t;
}

/// True iff `p` projects into the camera and no scene surface sits strictly
/// between the camera center and the point.
inline bool point_visible(const Point3& p, const CameraModel& cam, const RaycastScene& scene) {
  if (!project_point(p, cam).valid) return false;
  const Point3 o = camera_center(cam);
  Point3 dir = p - o;
  const double t_pt = dir.norm();
  if (t_pt < 1e-9) return false;
  dir /= t_pt;
  return scene.nearest_hit(o, dir).t >= t_pt - 1e-6;
}

inline SegmentationMask render_mask(const CameraModel& cam, const RaycastScene& scene) {
  SegmentationMask mask = SegmentationMask::filled(cam.width, cam.height);
  const Point3 o = camera_center(cam);
  const Eigen::Matrix3d cam_to_world = cam.extrinsic.rotation.transpose();
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Eigen::Vector3d dir_cam((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
      const Point3 dir = (cam_to_world * dir_cam).normalized();
      const auto hit = scene.nearest_hit(o, dir);
      if (std::isfinite(hit.t)) mask.at(u, v) = static_cast<std::uint8_t>(hit.cls);
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Surface sampling
// ---------------------------------------------------------------------------

/// Jittered grid over a horizontal rectangle at height z.
inline void sample_horizontal(double x0, double x1, double y0, double y1, double z,
                              double spacing, Rng& rng, std::vector<Point3>* out) {
  const int nx = std::max(1, static_cast<int>(std::floor((x1 - x0) / spacing)));
  const int ny = std::max(1, static_cast<int>(std::floor((y1 - y0) / spacing)));
  const double sx = (x1 - x0) / nx, sy = (y1 - y0) / ny;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double x = x0 + (i + 0.5) * sx + rng.uniform(-0.3, 0.3) * sx;
      const double y = y0 + (j + 0.5) * sy + rng.uniform(-0.3, 0.3) * sy;
      out->emplace_back(std::clamp(x, x0, x1), std::clamp(y, y0, y1), z);
    }
  }
}

/// Jittered samples of an axis-aligned box's top and four side faces in the
/// box's local frame (centered at the origin). `margin` insets the grid
/// from the face edges.
inline std::vector<Point3> sample_box_faces(const Eigen::Vector3d& size, double spacing, Rng& rng,
                                            double margin = 0.0) {
  const Eigen::Vector3d h = size * 0.5;
  std::vector<Point3> out;
  auto grid = [&](int axis_u, int axis_v, int axis_n, double n_value) {
    const double hu = std::max(h[axis_u] - margin, 0.1 * h[axis_u]);
    const double hv = std::max(h[axis_v] - margin, 0.1 * h[axis_v]);
    const int nu = std::max(1, static_cast<int>(std::floor(2 * hu / spacing)));
    const int nv = std::max(1, static_cast<int>(std::floor(2 * hv / spacing)));
    const double su = 2 * hu / nu, sv = 2 * hv / nv;
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        Point3 p;
        p[axis_u] = std::clamp(-hu + (i + 0.5) * su + rng.uniform(-0.3, 0.3) * su, -hu, hu);
        p[axis_v] = std::clamp(-hv + (j + 0.5) * sv + rng.uniform(-0.3, 0.3) * sv, -hv, hv);
        p[axis_n] = n_value;
        out.push_back(p);
      }
    }
  };
  grid(0, 1, 2, h.z());   // top
  grid(0, 2, 1, -h.y());  // sides
  grid(0, 2, 1, h.y());
  grid(1, 2, 0, -h.x());
  grid(1, 2, 0, h.x());
  return out;
}

struct CarTrack {
  std::string track_id;
  Eigen::Vector3d size;
  double lane_y = 0;
  double x0 = 0;
  double speed = 0;  // signed, m/s along X
  std::vector<Point3> canonical;  // sampled surface, box frame

  OrientedBox box_at(double t_seconds) const {
    const double x = x0 + speed * t_seconds;
    const double yaw = speed >= 0 ? 0.0 : M_PI;
    // 0.3 m ground clearance keeps road points out of the box and the box
    // shell clearly off the road surface.
    return OrientedBox::make(Point3(x, lane_y, 0.3 + size.z() / 2), size, yaw,
                             SemanticClass::car, track_id);
  }
};

}  // namespace synth_detail

inline SynthResult gen_synthetic_scene(const SynthParams& params,
                                       const std::filesystem::path& out_dir) {
  using namespace synth_detail;
  params.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "clouds");
  fs::create_directories(out_dir / "masks");
  fs::create_directories(out_dir / "gt");

  const double half_y = params.extent_y / 2;

  // --- static layout ---
  Rng building_rng(derive_seed(params.seed, 1));
  std::vector<OrientedBox> buildings;
  for (int b = 0; b < params.buildings; ++b) {
    const double frac = params.buildings == 1 ? 0.5 : 0.2 + 0.55 * b / (params.buildings - 1);
    const double side = b % 2 == 0 ? 1.0 : -1.0;
    const double strip = half_y - params.road_half_width;
    const Eigen::Vector3d size(0.16 * params.extent_x + building_rng.uniform(-0.5, 0.5),
                               0.75 * strip, params.extent_x / 5 + building_rng.uniform(-0.5, 0.5));
    const Point3 center(frac * params.extent_x + building_rng.uniform(-0.5, 0.5),
                        side * (params.road_half_width + strip / 2), size.z() / 2);
    buildings.push_back(OrientedBox::make(center, size, 0.0, SemanticClass::building,
                                          "building_" + std::to_string(b)));
  }

  // --- car tracks ---
  Rng car_rng(derive_seed(params.seed, 2));
  std::vector<CarTrack> cars;
  for (int i = 0; i < params.objects; ++i) {
    CarTrack car;
    car.track_id = "car_" + std::to_string(i);
    car.size = Eigen::Vector3d(4.2 + car_rng.uniform(-0.3, 0.3), 1.9 + car_rng.uniform(-0.1, 0.1),
                               1.6 + car_rng.uniform(-0.1, 0.1));
    const double lane_side = i % 2 == 0 ? -1.0 : 1.0;
    car.lane_y = lane_side * 0.55 * params.road_half_width;
    const double dir = lane_side < 0 ? 1.0 : -1.0;  // right-hand traffic
    // Fast enough that a car (and the road strip it occludes from the
    // elevated camera) clears any pixel in well under half the frames;
    // lingering cars would win the per-pixel majority vote.
    car.speed = dir * car_rng.uniform(6.2, 7.4);
    car.x0 = dir > 0 ? car_rng.uniform(-2.0, 1.0)
                     : params.extent_x + car_rng.uniform(-1.0, 2.0);
    Rng face_rng(derive_seed(params.seed, 4, i));
    car.canonical = sample_box_faces(car.size, params.object_spacing, face_rng);
    cars.push_back(std::move(car));
  }

  // --- static ground truth ---
  Rng gt_rng(derive_seed(params.seed, 3));
  LabeledCloud gt;
  gt.labels.emplace();
  {
    const double margin = params.boundary_margin;
    std::vector<Point3> ground;
    sample_horizontal(0, params.extent_x, -half_y, half_y, 0.0, params.gt_spacing, gt_rng, &ground);
    for (const Point3& p : ground) {
      if (std::abs(std::abs(p.y()) - params.road_half_width) < margin) continue;
      // Stay off the extent edge: rays there fall off the modeled world.
      if (p.x() < margin || p.x() > params.extent_x - margin || std::abs(p.y()) > half_y - margin) {
        continue;
      }
      bool near_building = false;
      for (const auto& b : buildings) {
        if (std::abs(p.x() - b.center.x()) < b.size.x() / 2 + margin &&
            std::abs(p.y() - b.center.y()) < b.size.y() / 2 + margin) {
          near_building = true;
          break;
        }
      }
      if (near_building) continue;
      gt.points.push_back(p);
      gt.labels->push_back(std::abs(p.y()) < params.road_half_width ? SemanticClass::road
                                                                    : SemanticClass::sidewalk);
    }
    for (const auto& b : buildings) {
      for (const Point3& local : sample_box_faces(b.size, params.gt_spacing, gt_rng, margin)) {
        gt.points.push_back(local + b.center);
        gt.labels->push_back(SemanticClass::building);
      }
    }
  }

  // --- sensors ---
  CameraModel infra_cam;
  infra_cam.width = params.mask_width;
  infra_cam.height = params.mask_height;
  infra_cam.fx = infra_cam.fy = 0.3125 * params.mask_width;
  infra_cam.cx = params.mask_width / 2.0;
  infra_cam.cy = params.mask_height / 2.0;
  const Point3 mast(-0.27 * params.extent_x, 0.0, 0.45 * params.extent_x);
  infra_cam.extrinsic = look_at(mast, Eigen::Vector3d(std::cos(M_PI / 4), 0, -std::sin(M_PI / 4)));

  const RigidTransform infra_pose = RigidTransform::yaw_about_z(0.0, mast);  // sensor -> world

  // --- per-frame rendering ---
  SynthResult result;
  SceneEntry scene;
  scene.scene_id = params.scene_id;

  // Reference pose for the complete ground truth: each car at its first
  // (frame 0) box. The pipeline reintegrates at the same reference.
  const std::size_t static_gt_count = gt.points.size();
  for (const auto& car : cars) {
    const OrientedBox ref = car.box_at(0.0);
    const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
    for (const Point3& local : car.canonical) {
      gt.points.emplace_back(c * local.x() - s * local.y() + ref.center.x(),
                             s * local.x() + c * local.y() + ref.center.y(),
                             local.z() + ref.center.z());
      gt.labels->push_back(SemanticClass::car);
    }
  }

  auto pad3 = [](int v) {
    std::string s = std::to_string(v);
    return std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
  };

  for (int f = 0; f < params.frames; ++f) {
    const double t_now = f * params.frame_dt;

    RaycastScene frame_scene;
    frame_scene.extent_x = params.extent_x;
    frame_scene.half_y = half_y;
    frame_scene.road_half = params.road_half_width;
    for (const auto& b : buildings) {
      frame_scene.boxes.push_back(b);
      frame_scene.box_cls.push_back(SemanticClass::building);
    }
    std::vector<OrientedBox> car_boxes_world;
    for (const auto& car : cars) {
      car_boxes_world.push_back(car.box_at(t_now));
      frame_scene.boxes.push_back(car_boxes_world.back());
      frame_scene.box_cls.push_back(SemanticClass::car);
    }

    // World-frame candidate points for this frame: static surfaces plus the
    // car shells at their current pose.
    std::vector<Point3> candidates(gt.points.begin(), gt.points.begin() + static_gt_count);
    std::vector<SemanticClass> candidate_cls(gt.labels->begin(),
                                             gt.labels->begin() + static_gt_count);
    for (std::size_t ci = 0; ci < cars.size(); ++ci) {
      const OrientedBox box = car_boxes_world[ci];
      const double c = std::cos(box.yaw), s = std::sin(box.yaw);
      for (const Point3& local : cars[ci].canonical) {
        candidates.emplace_back(c * local.x() - s * local.y() + box.center.x(),
                                s * local.x() + c * local.y() + box.center.y(),
                                local.z() + box.center.z());
        candidate_cls.push_back(SemanticClass::car);
      }
    }

    // Vehicle sensor driving down the road.
    const double veh_x = params.extent_x * (0.08 + 0.55 * (params.frames == 1 ? 0.0 : double(f) / (params.frames - 1)));
    const Point3 veh_pos(veh_x, -0.2 * params.road_half_width, 1.8);
    const RigidTransform veh_pose = RigidTransform::yaw_about_z(0.0, veh_pos);
    CameraModel veh_cam;  // internal frustum, never written to the manifest
    veh_cam.width = 192;
    veh_cam.height = 144;
    veh_cam.fx = veh_cam.fy = 80;
    veh_cam.cx = 96;
    veh_cam.cy = 72;
    veh_cam.extrinsic = look_at(veh_pos, Eigen::Vector3d(std::cos(0.14), 0, -std::sin(0.14)));

    for (const SensorSide side : {SensorSide::infrastructure, SensorSide::vehicle}) {
      const bool is_infra = side == SensorSide::infrastructure;
      const CameraModel& cam = is_infra ? infra_cam : veh_cam;
      const RigidTransform& pose = is_infra ? infra_pose : veh_pose;
      const RigidTransform world_to_sensor = invert(pose);

      FrameObservation obs;
      obs.side = side;
      Rng noise_rng(derive_seed(params.seed, 5, 2 * f + (is_infra ? 0 : 1)));
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!point_visible(candidates[i], cam, frame_scene)) continue;
        Point3 sensor_p = world_to_sensor.apply(candidates[i]);
        if (params.noise_sigma > 0) {
          sensor_p += Point3(noise_rng.normal(0, params.noise_sigma),
                             noise_rng.normal(0, params.noise_sigma),
                             noise_rng.normal(0, params.noise_sigma));
        }
        obs.sensor_cloud.points.push_back(sensor_p);
        obs.true_world.push_back(candidates[i]);
        obs.true_cls.push_back(candidate_cls[i]);
      }

      FrameEntry frame;
      frame.timestamp_us = static_cast<std::int64_t>((f + 1) * params.frame_dt * 1e6);
      frame.side = side;
      frame.pose = pose;
      const std::string stem =
          params.scene_id + "_" + std::string(to_string(side)) + "_" + pad3(f);
      frame.cloud_path = out_dir / "clouds" / (stem + ".ply");
      write_ply(obs.sensor_cloud, frame.cloud_path, PlyEncoding::binary_little_endian);

      if (is_infra) {
        frame.camera = infra_cam;
        frame.mask_path = out_dir / "masks" / (stem + ".pgm");
        write_mask(render_mask(infra_cam, frame_scene), *frame.mask_path);
      }
      // Boxes in sensor coordinates (poses are yaw-only, so yaw stays a
      // yaw). Annotation boxes are inflated by 2 cm per side so shell
      // points that land exactly on a face survive float32 file rounding.
      for (const auto& box_w : car_boxes_world) {
        const Point3 center_s = world_to_sensor.apply(box_w.center);
        frame.boxes.push_back(OrientedBox::make(
            center_s, box_w.size + Eigen::Vector3d::Constant(0.04), box_w.yaw, box_w.cls,
            box_w.track_id));
      }
      scene.frames.push_back(std::move(frame));
      result.observations.push_back(std::move(obs));
    }
  }

  result.ground_truth = gt;
  result.ground_truth_path = out_dir / "gt" / (params.scene_id + "_gt.ply");
  write_ply(gt, result.ground_truth_path, PlyEncoding::binary_little_endian);

  result.manifest.scenes.push_back(std::move(scene));
  result.manifest_path = out_dir / "manifest.json";
  write_manifest(result.manifest, result.manifest_path);
  return result;
}

}  // namespace sscpc
