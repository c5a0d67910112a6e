#include "cadex/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "cadex/errors.hpp"

namespace cadex {

CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_deg) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("intrinsics_from_fov: image size must be positive, got " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    throw std::invalid_argument("intrinsics_from_fov: fov must lie in (0, 180) degrees, got " +
                                std::to_string(fov_deg));
  }
  const double half_fov = 0.5 * fov_deg * std::numbers::pi / 180.0;
  CameraIntrinsics K;
  K.width = width;
  K.height = height;
  K.focal = 0.5 * width / std::tan(half_fov);
  K.cx = 0.5 * width;
  K.cy = 0.5 * height;
  return K;
}

std::optional<Pixel2> try_project(const Point3& x, const CameraIntrinsics& K) {
  if (!(x.z > 0.0)) return std::nullopt;
  return Pixel2{K.focal * x.x / x.z + K.cx, K.focal * x.y / x.z + K.cy};
}

Pixel2 project(const Point3& x, const CameraIntrinsics& K) {
  auto p = try_project(x, K);
  if (!p) throw BehindCameraError("project: point has z = " + std::to_string(x.z));
  return *p;
}

Point3 backproject(const Pixel2& p, double depth, const CameraIntrinsics& K) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("backproject: depth must be positive, got " + std::to_string(depth));
  }
  return Point3{(p.u - K.cx) * depth / K.focal, (p.v - K.cy) * depth / K.focal, depth};
}

bool in_image(const Pixel2& p, int width, int height) {
  return p.u >= 0.0 && p.v >= 0.0 && p.u <= width - 1 && p.v <= height - 1;
}

void SceneBounds::validate() const {
  for (int a = 0; a < 3; ++a) {
    const double e = hi[a] - lo[a];
    if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || !(e > 0.0)) {
      throw std::invalid_argument("SceneBounds: degenerate extent on axis " + std::to_string(a));
    }
  }
}

SceneBounds SceneBounds::padded(double fraction) const {
  SceneBounds out = *this;
  for (int a = 0; a < 3; ++a) {
    const double pad = fraction * extent(a);
    out.lo[a] -= pad;
    out.hi[a] += pad;
  }
  return out;
}

NormalizedPoint normalize_to_field(const Point3& x, const SceneBounds& bounds) {
  bounds.validate();
  NormalizedPoint out;
  for (int a = 0; a < 3; ++a) {
    const double n = (x[a] - bounds.lo[a]) / bounds.extent(a);
    const double c = std::clamp(n, 0.0, 1.0);
    if (c != n) out.clamped = true;
    out.point[a] = c;
  }
  return out;
}

Point3 normalize_affine(const Point3& x, const SceneBounds& bounds) {
  Point3 n;
  for (int a = 0; a < 3; ++a) n[a] = (x[a] - bounds.lo[a]) / bounds.extent(a);
  return n;
}

Point3 denormalize_affine(const Point3& n, const SceneBounds& bounds) {
  Point3 x;
  for (int a = 0; a < 3; ++a) x[a] = n[a] * bounds.extent(a) + bounds.lo[a];
  return x;
}

}  // namespace cadex
