#pragma once

#include <random>

#include "cadex/depth.hpp"
#include "cadex/field.hpp"

namespace cadex::testing {

/// Same structure as the default field with tiny widths and grids.
inline FieldConfig toy_field_config() {
  FieldConfig c;
  c.control_points = 4;
  c.hidden_width = 8;
  c.temporal_features = 2;
  c.spatial_resolutions = {3, 5};
  c.spatial_features = 2;
  return c;
}

inline SceneBounds unit_bounds() {
  SceneBounds b;
  b.lo = {-1.0, -1.0, 1.0};
  b.hi = {1.0, 1.0, 3.0};
  return b;
}

/// Adds Gaussian noise to every parameter so that no block is the identity.
inline void perturb(DeformationField& field, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (diff::Parameter* p : field.parameters()) {
    for (double& v : p->value) v += n(rng);
  }
}

/// Smooth positive depth maps with some per-frame variation.
inline std::vector<double> toy_depth(int frames, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(frames) * width * height);
  for (int t = 0; t < frames; ++t) {
    const double a = u(rng), b = u(rng), c = u(rng);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        d[(static_cast<std::size_t>(t) * height + y) * width + x] =
            2.0 + 0.3 * a * std::sin(0.7 * x + c) + 0.2 * b * std::cos(0.5 * y) + 0.05 * u(rng);
      }
    }
  }
  return d;
}

}  // namespace cadex::testing
