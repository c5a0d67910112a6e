#include "cadex/depth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cadex/errors.hpp"

namespace cadex {

BilinearSample bilinear_footprint(const Pixel2& p, int width, int height, LookupPolicy policy) {
  Pixel2 q = p;
  if (!in_image(p, width, height)) {
    if (policy == LookupPolicy::Reject || !std::isfinite(p.u) || !std::isfinite(p.v)) {
      throw OutOfBoundsError("depth lookup outside image at (" + std::to_string(p.u) + ", " +
                             std::to_string(p.v) + ")");
    }
    q.u = std::clamp(p.u, 0.0, static_cast<double>(width - 1));
    q.v = std::clamp(p.v, 0.0, static_cast<double>(height - 1));
  }
  int x0 = static_cast<int>(std::floor(q.u));
  int y0 = static_cast<int>(std::floor(q.v));
  x0 = std::clamp(x0, 0, std::max(0, width - 2));
  y0 = std::clamp(y0, 0, std::max(0, height - 2));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double wx = width > 1 ? q.u - x0 : 0.0;
  const double wy = height > 1 ? q.v - y0 : 0.0;
  BilinearSample s;
  s.index = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
  s.weight = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
  return s;
}

double depth_lookup(std::span<const double> frame, int width, int height, const Pixel2& p, LookupPolicy policy) {
  return sample(frame, bilinear_footprint(p, width, height, policy));
}

std::array<double, 2> gradient_at_cell(std::span<const double> frame, int width, int height, int x, int y) {
  const auto at = [&](int xx, int yy) { return frame[static_cast<std::size_t>(yy) * width + xx]; };
  double gu;
  double gv;
  if (x == 0) gu = at(1, y) - at(0, y);
  else if (x == width - 1) gu = at(x, y) - at(x - 1, y);
  else gu = 0.5 * (at(x + 1, y) - at(x - 1, y));
  if (y == 0) gv = at(x, 1) - at(x, 0);
  else if (y == height - 1) gv = at(x, y) - at(x, y - 1);
  else gv = 0.5 * (at(x, y + 1) - at(x, y - 1));
  return {gu, gv};
}

void gradient_at_cell_adjoint(int width, int height, int x, int y, double d_gu, double d_gv,
                              std::span<double> d_frame) {
  const auto add = [&](int xx, int yy, double v) { d_frame[static_cast<std::size_t>(yy) * width + xx] += v; };
  if (x == 0) {
    add(1, y, d_gu);
    add(0, y, -d_gu);
  } else if (x == width - 1) {
    add(x, y, d_gu);
    add(x - 1, y, -d_gu);
  } else {
    add(x + 1, y, 0.5 * d_gu);
    add(x - 1, y, -0.5 * d_gu);
  }
  if (y == 0) {
    add(x, 1, d_gv);
    add(x, 0, -d_gv);
  } else if (y == height - 1) {
    add(x, y, d_gv);
    add(x, y - 1, -d_gv);
  } else {
    add(x, y + 1, 0.5 * d_gv);
    add(x, y - 1, -0.5 * d_gv);
  }
}

std::vector<double> spatial_gradient(std::span<const double> frame, int width, int height) {
  if (width < 2 || height < 2) {
    throw std::invalid_argument("spatial_gradient: raster must be at least 2x2");
  }
  std::vector<double> out(2 * static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto g = gradient_at_cell(frame, width, height, x, y);
      const std::size_t k = 2 * (static_cast<std::size_t>(y) * width + x);
      out[k] = g[0];
      out[k + 1] = g[1];
    }
  }
  return out;
}

DepthMapSet::DepthMapSet(int frames, int width, int height, std::vector<double> initial, double min_depth)
    : frames_(frames), width_(width), height_(height), min_depth_(min_depth) {
  if (frames < 1 || width < 2 || height < 2) {
    throw DataError("DepthMapSet: need >= 1 frame of at least 2x2 pixels");
  }
  if (initial.size() != static_cast<std::size_t>(frames) * width * height) {
    throw DataError("DepthMapSet: expected " + std::to_string(static_cast<std::size_t>(frames) * width * height) +
                    " depth values, got " + std::to_string(initial.size()));
  }
  for (std::size_t k = 0; k < initial.size(); ++k) {
    if (!(initial[k] > 0.0) || !std::isfinite(initial[k])) {
      throw DataError("DepthMapSet: initial depth must be positive and finite (index " + std::to_string(k) + ")");
    }
  }
  init_ = std::move(initial);
  maps_ = diff::Parameter("depth.maps", "depth", diff::ParamGroup::Depth, init_.size());
  maps_.value = init_;
  init_grad_.reserve(2 * init_.size());
  for (int t = 0; t < frames_; ++t) {
    const auto g = spatial_gradient(init_frame(t), width_, height_);
    init_grad_.insert(init_grad_.end(), g.begin(), g.end());
  }
}

std::span<const double> DepthMapSet::frame(int t) const {
  return std::span<const double>(maps_.value).subspan(t * frame_size(), frame_size());
}

std::span<double> DepthMapSet::frame_mut(int t) {
  return std::span<double>(maps_.value).subspan(t * frame_size(), frame_size());
}

std::span<const double> DepthMapSet::init_frame(int t) const {
  return std::span<const double>(init_).subspan(t * frame_size(), frame_size());
}

std::span<const double> DepthMapSet::init_gradient(int t) const {
  return std::span<const double>(init_grad_).subspan(2 * t * frame_size(), 2 * frame_size());
}

double DepthMapSet::lookup(int t, const Pixel2& p, LookupPolicy policy) const {
  return depth_lookup(frame(t), width_, height_, p, policy);
}

double DepthMapSet::init_lookup(int t, const Pixel2& p, LookupPolicy policy) const {
  return depth_lookup(init_frame(t), width_, height_, p, policy);
}

double DepthMapSet::median_init_depth(int t) const {
  auto f = init_frame(t);
  std::vector<double> copy(f.begin(), f.end());
  const auto mid = copy.begin() + static_cast<std::ptrdiff_t>(copy.size() / 2);
  std::nth_element(copy.begin(), mid, copy.end());
  return *mid;
}

void DepthMapSet::register_parameters(diff::ParameterTape& tape) { tape.add(maps_); }

void DepthMapSet::clamp_to_min() {
  for (double& d : maps_.value) d = std::max(d, min_depth_);
}

SceneBounds scene_bounds_from_depth(const DepthMapSet& depth, const CameraIntrinsics& K, double pad) {
  SceneBounds b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = std::numeric_limits<double>::infinity();
    b.hi[a] = -std::numeric_limits<double>::infinity();
  }
  for (int t = 0; t < depth.frames(); ++t) {
    const auto f = depth.init_frame(t);
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) {
        const Point3 p = backproject(Pixel2{double(x), double(y)}, f[static_cast<std::size_t>(y) * depth.width() + x], K);
        for (int a = 0; a < 3; ++a) {
          b.lo[a] = std::min(b.lo[a], p[a]);
          b.hi[a] = std::max(b.hi[a], p[a]);
        }
      }
    }
  }
  // a perfectly flat fronto-parallel scene still needs a depth extent
  for (int a = 0; a < 3; ++a) {
    if (!(b.hi[a] - b.lo[a] > 1e-9)) {
      const double c = 0.5 * (b.hi[a] + b.lo[a]);
      const double half = std::max(1e-3, 0.05 * std::abs(c));
      b.lo[a] = c - half;
      b.hi[a] = c + half;
    }
  }
  return b.padded(pad);
}

}  // namespace cadex
