// sscpc - semantic scene completion for point clouds
//
// Core value types shared by every module: points, labeled clouds, the
// semantic class table, rigid transforms, oriented boxes and range crops.

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sscpc {

/// 3D point in meters. Geometry is double precision in memory; file I/O
/// narrows to float32 (see io/ply.hpp).
using Point3 = Eigen::Vector3d;

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

// ---------------------------------------------------------------------------
// Semantic classes
// ---------------------------------------------------------------------------

/// The 16 semantic classes plus a reserved `unlabeled` id. Ids are dense,
/// stable, and fit in a uint8 so they double as PLY/PGM payload values.
enum class SemanticClass : std::uint8_t {
  building = 0,
  tree = 1,
  road = 2,
  sidewalk = 3,
  person = 4,
  plant = 5,
  car = 6,
  fence = 7,
  signboard = 8,
  bus = 9,
  truck = 10,
  streetlight = 11,
  barricade = 12,
  van = 13,
  bicycle = 14,
  motorcyclist = 15,
  unlabeled = 255,
};

inline constexpr int kNumClasses = 16;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "building",  "tree",     "road",        "sidewalk", "person",
    "plant",     "car",      "fence",       "signboard", "bus",
    "truck",     "streetlight", "barricade", "van",      "bicycle",
    "motorcyclist"};

inline bool is_valid_class_id(unsigned id) {
  return id < static_cast<unsigned>(kNumClasses) || id == 255u;
}

inline std::string_view to_string(SemanticClass c) {
  if (c == SemanticClass::unlabeled) return "unlabeled";
  return kClassNames[static_cast<std::size_t>(c)];
}

inline std::optional<SemanticClass> class_from_name(std::string_view name) {
  if (name == "unlabeled") return SemanticClass::unlabeled;
  for (int i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<SemanticClass>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Labeled cloud
// ---------------------------------------------------------------------------

/// A point set with optional per-point semantic labels. When labels are
/// present their count must equal the point count.
struct LabeledCloud {
  std::vector<Point3> points;
  std::optional<std::vector<SemanticClass>> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }

  void validate() const {
    if (labels && labels->size() != points.size()) {
      throw std::runtime_error("labeled cloud: label count " +
                               std::to_string(labels->size()) +
                               " != point count " +
                               std::to_string(points.size()));
    }
    for (const Point3& p : points) {
      if (!is_finite(p)) throw std::runtime_error("labeled cloud: non-finite point");
    }
  }
};

// ---------------------------------------------------------------------------
// Rigid transforms (SE(3))
// ---------------------------------------------------------------------------

/// Rotation + translation. Rotation must stay orthonormal with det +1
/// within 1e-9; `validate()` enforces this where transforms enter the
/// system (manifest load, synthetic generator).
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  /// Pure yaw rotation about +Z plus translation.
  static RigidTransform yaw_about_z(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    RigidTransform out;
    const double c = std::cos(yaw), s = std::sin(yaw);
    out.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
    out.translation = t;
    return out;
  }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  bool is_orthonormal(double tol = 1e-9) const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && rotation.determinant() > 0.0;
  }

  void validate(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) {
      throw std::runtime_error("rigid transform: non-finite entries");
    }
    if (!is_orthonormal(tol)) {
      throw std::runtime_error("rigid transform: rotation not orthonormal with det +1");
    }
  }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  // (a ∘ b)(p) = a(b(p))
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

/// Transform every point by R·p + t. Labels pass through unchanged.
inline LabeledCloud apply_transform(const LabeledCloud& cloud, const RigidTransform& t) {
  LabeledCloud out;
  out.points.reserve(cloud.points.size());
  for (const Point3& p : cloud.points) out.points.push_back(t.apply(p));
  out.labels = cloud.labels;
  return out;
}

// ---------------------------------------------------------------------------
// Oriented boxes
// ---------------------------------------------------------------------------

/// Wraps an angle into [-pi, pi).
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * M_PI;
  double r = std::fmod(a + M_PI, kTwoPi);
  if (r < 0) r += kTwoPi;
  return r - M_PI;
}

/// Ground-truth dynamic-object box: center, (length, width, height), yaw
/// about +Z. Yaw is normalized to [-pi, pi) on construction.
struct OrientedBox {
  Point3 center = Point3::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // (length, width, height)
  double yaw = 0.0;
  SemanticClass cls = SemanticClass::car;
  std::string track_id;

  static OrientedBox make(const Point3& center, const Eigen::Vector3d& size, double yaw,
                          SemanticClass cls, std::string track_id) {
    OrientedBox b;
    b.center = center;
    b.size = size;
    b.yaw = normalize_angle(yaw);
    b.cls = cls;
    b.track_id = std::move(track_id);
    b.validate();
    return b;
  }

  void validate() const {
    if (!(size.x() > 0 && size.y() > 0 && size.z() > 0)) {
      throw std::runtime_error("oriented box: size components must be strictly positive");
    }
    if (!is_finite(center) || !std::isfinite(yaw)) {
      throw std::runtime_error("oriented box: non-finite pose");
    }
  }

  /// Pose of the box frame in the enclosing frame.
  RigidTransform pose() const { return RigidTransform::yaw_about_z(yaw, center); }
};

// ---------------------------------------------------------------------------
// Range crop
// ---------------------------------------------------------------------------

/// Axis-aligned keep-range. Half-open per axis: min <= coord < max.
struct RangeCrop {
  std::array<double, 2> x{0.0, 1.0};
  std::array<double, 2> y{0.0, 1.0};
  std::array<double, 2> z{0.0, 1.0};

  /// Sensing range used throughout the reference configuration:
  /// x [0, 250), y [-70, 70), z [-5, 12) meters.
  static RangeCrop sensor_default() {
    return RangeCrop{{0.0, 250.0}, {-70.0, 70.0}, {-5.0, 12.0}};
  }

  void validate() const {
    if (!(x[0] < x[1] && y[0] < y[1] && z[0] < z[1])) {
      throw std::runtime_error("range crop: min must be < max on every axis");
    }
  }

  bool contains(const Point3& p) const {
    return p.x() >= x[0] && p.x() < x[1] && p.y() >= y[0] && p.y() < y[1] &&
           p.z() >= z[0] && p.z() < z[1];
  }
};

/// Keep exactly the points with min <= coord < max on all axes.
inline LabeledCloud crop_range(const LabeledCloud& cloud, const RangeCrop& r) {
  r.validate();
  LabeledCloud out;
  if (cloud.labels) out.labels.emplace();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!r.contains(cloud.points[i])) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.labels) out.labels->push_back((*cloud.labels)[i]);
  }
  return out;
}

}  // namespace sscpc
