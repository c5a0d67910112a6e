#pragma once

#include <array>
#include <optional>

namespace cadex {

/// Continuous pixel coordinates. Integer values are pixel centers; values may
/// lie outside the image when a track leaves the frame.
struct Pixel2 {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Pixel2&, const Pixel2&) = default;
};

/// Camera-frame point; z is depth along the optical axis.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend bool operator==(const Point3&, const Point3&) = default;
};

/// Single fixed pinhole camera with square pixels, shared by every frame.
struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double focal = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

inline constexpr double kDefaultFovDegrees = 40.0;

/// Builds intrinsics from a horizontal field of view. Throws
/// std::invalid_argument for non-positive sizes or fov outside (0, 180).
CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_deg = kDefaultFovDegrees);

/// Pinhole projection. Throws BehindCameraError when x.z <= 0.
Pixel2 project(const Point3& x, const CameraIntrinsics& K);

/// Non-throwing projection for hot loops; empty when x.z <= 0.
std::optional<Pixel2> try_project(const Point3& x, const CameraIntrinsics& K);

/// Lifts a pixel to the camera frame at the given depth. Throws
/// std::invalid_argument when depth <= 0.
Point3 backproject(const Pixel2& p, double depth, const CameraIntrinsics& K);

/// True when p lies in the closed rectangle spanned by the pixel centers.
bool in_image(const Pixel2& p, int width, int height);
inline bool in_image(const Pixel2& p, const CameraIntrinsics& K) {
  return in_image(p, K.width, K.height);
}

/// Axis-aligned camera-frame box mapped onto the unit cube by the field.
struct SceneBounds {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  /// Throws std::invalid_argument unless every axis has positive finite extent.
  void validate() const;
  /// Grows every axis by `fraction` of its extent on both sides.
  SceneBounds padded(double fraction) const;
};

struct NormalizedPoint {
  Point3 point;
  bool clamped = false;
};

/// Affine map of `bounds` onto [0,1]^3 with per-axis clamping. The clamp flag
/// reports whether any axis was clamped.
NormalizedPoint normalize_to_field(const Point3& x, const SceneBounds& bounds);

/// Affine map onto the unit cube without clamping. The deformation field uses
/// this so that inputs outside the box stay exactly invertible.
Point3 normalize_affine(const Point3& x, const SceneBounds& bounds);
Point3 denormalize_affine(const Point3& n, const SceneBounds& bounds);

}  // namespace cadex
