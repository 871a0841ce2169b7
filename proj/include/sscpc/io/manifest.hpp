// sscpc - dataset manifest.
//
// A manifest describes scenes of timestamped frames: per frame a cloud
// file, a sensor->world pose, dynamic-object boxes in sensor coordinates,
// and (infrastructure frames) a camera plus segmentation mask. JSON with a
// top-level `"schema": 1`. Every declared invariant is checked at load and
// violations name the offending JSON path; loaded file paths are resolved
// to absolute, writers re-relativize them against the output location.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sscpc/core/types.hpp"
#include "sscpc/pipeline/camera.hpp"

namespace sscpc {

enum class SensorSide { vehicle, infrastructure };

inline std::string_view to_string(SensorSide s) {
  return s == SensorSide::vehicle ? "vehicle" : "infrastructure";
}

struct FrameEntry {
  std::int64_t timestamp_us = 0;
  SensorSide side = SensorSide::infrastructure;
  std::filesystem::path cloud_path;
  RigidTransform pose;  // sensor -> world
  std::optional<CameraModel> camera;
  std::optional<std::filesystem::path> mask_path;
  std::vector<OrientedBox> boxes;  // sensor coordinates
};

struct SceneEntry {
  std::string scene_id;
  std::vector<FrameEntry> frames;
};

struct DatasetManifest {
  std::vector<SceneEntry> scenes;

  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.frames.size();
    return n;
  }
};

namespace detail {

inline std::runtime_error manifest_error(const std::string& jpath, const std::string& what) {
  return std::runtime_error("manifest: " + jpath + ": " + what);
}

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           const std::string& jpath) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw manifest_error(jpath, std::string("missing field '") + key + "'");
  return *it;
}

inline RigidTransform transform_from_json(const nlohmann::json& j, const std::string& jpath) {
  const auto& rot = require_field(j, "rotation", jpath);
  const auto& tra = require_field(j, "translation", jpath);
  if (!rot.is_array() || rot.size() != 9) throw manifest_error(jpath, "rotation must be 9 row-major numbers");
  if (!tra.is_array() || tra.size() != 3) throw manifest_error(jpath, "translation must be 3 numbers");
  RigidTransform t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[3 * r + c].get<double>();
  for (int i = 0; i < 3; ++i) t.translation(i) = tra[i].get<double>();
  try {
    t.validate();
  } catch (const std::exception& e) {
    throw manifest_error(jpath, e.what());
  }
  return t;
}

inline nlohmann::json transform_to_json(const RigidTransform& t) {
  nlohmann::json j;
  auto& rot = j["rotation"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  return j;
}

inline std::filesystem::path resolve_path(const std::string& raw,
                                          const std::filesystem::path& base_dir,
                                          const std::string& jpath) {
  std::filesystem::path p(raw);
  if (p.is_relative()) p = base_dir / p;
  p = p.lexically_normal();
  if (!std::filesystem::exists(p)) {
    throw manifest_error(jpath, "referenced path does not exist: " + p.string());
  }
  return p;
}

inline std::string relativize(const std::filesystem::path& target,
                              const std::filesystem::path& base_dir) {
  const auto rel = target.lexically_relative(base_dir);
  if (rel.empty() || *rel.begin() == "..") return target.string();
  return rel.generic_string();
}

}  // namespace detail

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest: " + path.string() + ": " + e.what());
  }
  const auto base_dir = std::filesystem::absolute(path).parent_path();

  if (detail::require_field(j, "schema", "$").get<int>() != 1) {
    throw detail::manifest_error("$.schema", "unsupported schema version");
  }
  DatasetManifest m;
  const auto& scenes = detail::require_field(j, "scenes", "$");
  std::set<std::string> seen_ids;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const std::string spath = "scenes[" + std::to_string(si) + "]";
    const auto& js = scenes[si];
    SceneEntry scene;
    scene.scene_id = detail::require_field(js, "scene_id", spath).get<std::string>();
    if (!seen_ids.insert(scene.scene_id).second) {
      throw detail::manifest_error(spath, "duplicate scene_id '" + scene.scene_id + "'");
    }
    const auto& frames = detail::require_field(js, "frames", spath);
    std::int64_t last_ts[2] = {INT64_MIN, INT64_MIN};  // per side
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
      const std::string fpath = spath + ".frames[" + std::to_string(fi) + "]";
      const auto& jf = frames[fi];
      FrameEntry frame;
      frame.timestamp_us = detail::require_field(jf, "timestamp", fpath).get<std::int64_t>();
      const std::string side = detail::require_field(jf, "side", fpath).get<std::string>();
      if (side == "vehicle") frame.side = SensorSide::vehicle;
      else if (side == "infrastructure") frame.side = SensorSide::infrastructure;
      else throw detail::manifest_error(fpath + ".side", "must be 'vehicle' or 'infrastructure'");

      const int side_idx = frame.side == SensorSide::vehicle ? 0 : 1;
      if (frame.timestamp_us <= last_ts[side_idx]) {
        throw detail::manifest_error(fpath + ".timestamp", "non-increasing timestamp");
      }
      last_ts[side_idx] = frame.timestamp_us;

      frame.cloud_path = detail::resolve_path(
          detail::require_field(jf, "cloud_path", fpath).get<std::string>(), base_dir,
          fpath + ".cloud_path");
      frame.pose = detail::transform_from_json(detail::require_field(jf, "pose", fpath),
                                               fpath + ".pose");

      if (jf.contains("camera")) {
        const auto& jc = jf["camera"];
        const std::string cpath = fpath + ".camera";
        CameraModel cam;
        cam.fx = detail::require_field(jc, "fx", cpath).get<double>();
        cam.fy = detail::require_field(jc, "fy", cpath).get<double>();
        cam.cx = detail::require_field(jc, "cx", cpath).get<double>();
        cam.cy = detail::require_field(jc, "cy", cpath).get<double>();
        cam.width = detail::require_field(jc, "width", cpath).get<int>();
        cam.height = detail::require_field(jc, "height", cpath).get<int>();
        cam.extrinsic = detail::transform_from_json(
            detail::require_field(jc, "extrinsic", cpath), cpath + ".extrinsic");
        try {
          cam.validate();
        } catch (const std::exception& e) {
          throw detail::manifest_error(cpath, e.what());
        }
        frame.camera = cam;
      }
      if (jf.contains("mask_path")) {
        frame.mask_path = detail::resolve_path(jf["mask_path"].get<std::string>(), base_dir,
                                               fpath + ".mask_path");
      }
      if (jf.contains("boxes")) {
        const auto& jb = jf["boxes"];
        for (std::size_t bi = 0; bi < jb.size(); ++bi) {
          const std::string bpath = fpath + ".boxes[" + std::to_string(bi) + "]";
          const auto& box_json = jb[bi];
          const auto& jcenter = detail::require_field(box_json, "center", bpath);
          const auto& jsize = detail::require_field(box_json, "size", bpath);
          if (!jcenter.is_array() || jcenter.size() != 3) throw detail::manifest_error(bpath + ".center", "must be 3 numbers");
          if (!jsize.is_array() || jsize.size() != 3) throw detail::manifest_error(bpath + ".size", "must be 3 numbers");
          const std::string cls_name = detail::require_field(box_json, "class", bpath).get<std::string>();
          const auto cls = class_from_name(cls_name);
          if (!cls) throw detail::manifest_error(bpath + ".class", "unknown class '" + cls_name + "'");
          try {
            frame.boxes.push_back(OrientedBox::make(
                Point3(jcenter[0].get<double>(), jcenter[1].get<double>(), jcenter[2].get<double>()),
                Eigen::Vector3d(jsize[0].get<double>(), jsize[1].get<double>(), jsize[2].get<double>()),
                detail::require_field(box_json, "yaw", bpath).get<double>(), *cls,
                detail::require_field(box_json, "track_id", bpath).get<std::string>()));
          } catch (const std::exception& e) {
            throw detail::manifest_error(bpath, e.what());
          }
        }
      }
      scene.frames.push_back(std::move(frame));
    }
    m.scenes.push_back(std::move(scene));
  }
  return m;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  const auto base_dir = std::filesystem::absolute(path).parent_path();
  nlohmann::json j;
  j["schema"] = 1;
  auto& scenes = j["scenes"] = nlohmann::json::array();
  for (const auto& scene : m.scenes) {
    nlohmann::json js;
    js["scene_id"] = scene.scene_id;
    auto& frames = js["frames"] = nlohmann::json::array();
    for (const auto& frame : scene.frames) {
      nlohmann::json jf;
      jf["timestamp"] = frame.timestamp_us;
      jf["side"] = std::string(to_string(frame.side));
      jf["cloud_path"] = detail::relativize(frame.cloud_path, base_dir);
      jf["pose"] = detail::transform_to_json(frame.pose);
      if (frame.camera) {
        nlohmann::json jc;
        jc["fx"] = frame.camera->fx;
        jc["fy"] = frame.camera->fy;
        jc["cx"] = frame.camera->cx;
        jc["cy"] = frame.camera->cy;
        jc["width"] = frame.camera->width;
        jc["height"] = frame.camera->height;
        jc["extrinsic"] = detail::transform_to_json(frame.camera->extrinsic);
        jf["camera"] = std::move(jc);
      }
      if (frame.mask_path) jf["mask_path"] = detail::relativize(*frame.mask_path, base_dir);
      if (!frame.boxes.empty()) {
        auto& jb = jf["boxes"] = nlohmann::json::array();
        for (const auto& box : frame.boxes) {
          nlohmann::json box_json;
          box_json["center"] = {box.center.x(), box.center.y(), box.center.z()};
          box_json["size"] = {box.size.x(), box.size.y(), box.size.z()};
          box_json["yaw"] = box.yaw;
          box_json["class"] = std::string(to_string(box.cls));
          box_json["track_id"] = box.track_id;
          jb.push_back(std::move(box_json));
        }
      }
      frames.push_back(std::move(jf));
    }
    scenes.push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("manifest: write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

enum class SplitMode { time, scene };

struct SplitResult {
  DatasetManifest train;
  DatasetManifest test;
};

/// Time mode: each scene's frame sequence is cut at floor(ratio * len),
/// first part train, rest test (order preserved). Scene mode: whole scenes
/// listed in `test_scenes` go to test, the rest to train.
inline SplitResult split_manifest(const DatasetManifest& m, SplitMode mode, double ratio,
                                  const std::vector<std::string>& test_scenes = {}) {
  SplitResult out;
  if (mode == SplitMode::time) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
      throw std::runtime_error("split_manifest: time ratio must be in (0,1)");
    }
    for (const auto& scene : m.scenes) {
      const std::size_t cut = static_cast<std::size_t>(
          std::floor(ratio * static_cast<double>(scene.frames.size())));
      SceneEntry train_scene{scene.scene_id, {scene.frames.begin(), scene.frames.begin() + cut}};
      SceneEntry test_scene{scene.scene_id, {scene.frames.begin() + cut, scene.frames.end()}};
      out.train.scenes.push_back(std::move(train_scene));
      out.test.scenes.push_back(std::move(test_scene));
    }
  } else {
    std::set<std::string> wanted(test_scenes.begin(), test_scenes.end());
    for (const auto& scene : m.scenes) wanted.erase(scene.scene_id);
    if (!wanted.empty()) {
      throw std::runtime_error("split_manifest: unknown test scene id '" + *wanted.begin() + "'");
    }
    const std::set<std::string> test_set(test_scenes.begin(), test_scenes.end());
    for (const auto& scene : m.scenes) {
      (test_set.count(scene.scene_id) ? out.test : out.train).scenes.push_back(scene);
    }
  }
  return out;
}

}  // namespace sscpc
