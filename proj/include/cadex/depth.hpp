#pragma once

#include <array>
#include <span>
#include <vector>

#include "cadex/diff.hpp"
#include "cadex/geometry.hpp"

namespace cadex {

enum class LookupPolicy { Reject, Clamp };

/// Bilinear footprint of a subpixel lookup into one H x W raster.
struct BilinearSample {
  std::array<int, 4> index{};  // flattened y * W + x
  std::array<double, 4> weight{};
};

/// Footprint for `p`. Throws OutOfBoundsError under Reject when p is outside
/// the image; Clamp moves p onto the nearest in-image location.
BilinearSample bilinear_footprint(const Pixel2& p, int width, int height,
                                  LookupPolicy policy = LookupPolicy::Reject);

inline double sample(std::span<const double> frame, const BilinearSample& s) {
  return s.weight[0] * frame[s.index[0]] + s.weight[1] * frame[s.index[1]] +
         s.weight[2] * frame[s.index[2]] + s.weight[3] * frame[s.index[3]];
}

/// Bilinear depth at p; gradient w.r.t. the four cells equals the weights.
double depth_lookup(std::span<const double> frame, int width, int height, const Pixel2& p,
                    LookupPolicy policy = LookupPolicy::Reject);

/// Per-pixel (d/du, d/dv) with central differences inside and one-sided
/// differences on the border. Output is interleaved, 2 values per pixel.
/// Throws std::invalid_argument when either side is below 2.
std::vector<double> spatial_gradient(std::span<const double> frame, int width, int height);

/// The same stencil evaluated at a single cell.
std::array<double, 2> gradient_at_cell(std::span<const double> frame, int width, int height, int x, int y);
/// Adjoint of gradient_at_cell: adds d/d(frame) for upstream (d_gu, d_gv).
void gradient_at_cell_adjoint(int width, int height, int x, int y, double d_gu, double d_gv,
                              std::span<double> d_frame);

/// Optimizable per-frame depth maps with frozen initial copies.
class DepthMapSet {
 public:
  DepthMapSet() = default;
  /// `initial` holds frames * height * width row-major depths; all must be > 0.
  DepthMapSet(int frames, int width, int height, std::vector<double> initial, double min_depth = 1e-3);

  int frames() const { return frames_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double min_depth() const { return min_depth_; }
  std::size_t frame_size() const { return static_cast<std::size_t>(width_) * height_; }

  diff::Parameter& maps() { return maps_; }
  const diff::Parameter& maps() const { return maps_; }
  std::span<const double> frame(int t) const;
  std::span<const double> init_frame(int t) const;
  /// Interleaved (d/du, d/dv) of the initial map of frame t.
  std::span<const double> init_gradient(int t) const;
  std::span<double> frame_mut(int t);

  double lookup(int t, const Pixel2& p, LookupPolicy policy = LookupPolicy::Reject) const;
  double init_lookup(int t, const Pixel2& p, LookupPolicy policy = LookupPolicy::Reject) const;
  /// Median of the initial depth of frame t.
  double median_init_depth(int t) const;

  void register_parameters(diff::ParameterTape& tape);
  /// Projects every optimized depth back above min_depth.
  void clamp_to_min();

 private:
  int frames_ = 0;
  int width_ = 0;
  int height_ = 0;
  double min_depth_ = 1e-3;
  diff::Parameter maps_;
  std::vector<double> init_;
  std::vector<double> init_grad_;
};

/// Box spanned by back-projecting every pixel at its initial depth, padded by
/// `pad` of the extent on each side.
SceneBounds scene_bounds_from_depth(const DepthMapSet& depth, const CameraIntrinsics& K, double pad = 0.1);

}  // namespace cadex
