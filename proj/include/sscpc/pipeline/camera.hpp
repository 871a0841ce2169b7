// sscpc - pinhole camera model and point-to-pixel projection.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sscpc/core/types.hpp"

namespace sscpc {

/// Pinhole intrinsics plus a world -> camera extrinsic. The camera looks
/// along +Z of its own frame.
struct CameraModel {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  RigidTransform extrinsic;  // world -> camera

  void validate() const {
    if (!(fx > 0 && fy > 0)) throw std::runtime_error("camera: focal lengths must be > 0");
    if (!(width > 0 && height > 0)) throw std::runtime_error("camera: image size must be > 0");
    extrinsic.validate();
  }
};

struct PixelHit {
  int u = 0;
  int v = 0;
  bool valid = false;
};

namespace detail {
// Round half down: 2.5 -> 2, 2.51 -> 3. Pixel-center rays at u = i + 0.5
// land on pixel i under this rule.
inline int round_half_down(double x) { return static_cast<int>(std::ceil(x - 0.5)); }
}  // namespace detail

/// Projects one world-frame point. Valid iff the camera-frame depth is
/// strictly positive and the rounded pixel lies inside the image.
inline PixelHit project_point(const Point3& world, const CameraModel& cam) {
  const Point3 p = cam.extrinsic.apply(world);
  if (!(p.z() > 0)) return {};
  const double u = cam.fx * p.x() / p.z() + cam.cx;
  const double v = cam.fy * p.y() / p.z() + cam.cy;
  PixelHit hit;
  hit.u = detail::round_half_down(u);
  hit.v = detail::round_half_down(v);
  hit.valid = hit.u >= 0 && hit.u < cam.width && hit.v >= 0 && hit.v < cam.height;
  return hit;
}

/// Invalid points are flagged, never dropped: the result has one entry per
/// input point.
inline std::vector<PixelHit> project_points(const LabeledCloud& cloud, const CameraModel& cam) {
  cam.validate();
  std::vector<PixelHit> out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud.points) out.push_back(project_point(p, cam));
  return out;
}

}  // namespace sscpc
