#pragma once

#include <vector>

#include "cadex/data.hpp"
#include "cadex/depth.hpp"
#include "cadex/field.hpp"
#include "cadex/geometry.hpp"

namespace cadex {

struct TrackQuery {
  int frame = 0;
  Pixel2 pixel;
};

struct TrackerConfig {
  /// Occlusion margin as a fraction of each frame's median initial depth.
  double eps_d_fraction = 0.02;
  /// Queries evaluated together per frame; results do not depend on it.
  int block_size = 1024;
};

/// visible iff p lies in the image and warped_z <= D_t[p] + eps_d.
bool visibility_test(double warped_z, std::span<const double> depth_frame, int width, int height, const Pixel2& p,
                     double eps_d);

/// Occlusion margin per frame.
std::vector<double> occlusion_margins(const DepthMapSet& depth, const TrackerConfig& config);

/// Trajectory and visibility of one query over all frames. Positions behind
/// the camera are NaN and not visible. Throws std::out_of_range for a query
/// outside the image or a bad frame index.
Track track(const DeformationField& field, const DepthMapSet& depth, const CameraIntrinsics& K, const Pixel2& p,
            int frame, const TrackerConfig& config = {});

/// Batched version of track().
TrackSet track_many(const DeformationField& field, const DepthMapSet& depth, const CameraIntrinsics& K,
                    const std::vector<TrackQuery>& queries, const TrackerConfig& config = {});

/// Queries on a regular lattice of one frame.
std::vector<TrackQuery> lattice_queries(int frame, int width, int height, int stride);

}  // namespace cadex
