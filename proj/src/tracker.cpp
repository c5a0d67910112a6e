#include "cadex/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cadex {

bool visibility_test(double warped_z, std::span<const double> depth_frame, int width, int height, const Pixel2& p,
                     double eps_d) {
  if (!std::isfinite(p.u) || !std::isfinite(p.v) || !in_image(p, width, height)) return false;
  return warped_z <= depth_lookup(depth_frame, width, height, p) + eps_d;
}

std::vector<double> occlusion_margins(const DepthMapSet& depth, const TrackerConfig& config) {
  std::vector<double> eps(depth.frames());
  for (int t = 0; t < depth.frames(); ++t) eps[t] = config.eps_d_fraction * depth.median_init_depth(t);
  return eps;
}

TrackSet track_many(const DeformationField& field, const DepthMapSet& depth, const CameraIntrinsics& K,
                    const std::vector<TrackQuery>& queries, const TrackerConfig& config) {
  const int T = depth.frames();
  const int W = depth.width();
  const int H = depth.height();
  const std::vector<double> eps = occlusion_margins(depth, config);
  const SceneBounds& bounds = field.bounds();
  TrackSet out;
  out.frames = T;
  out.tracks.resize(queries.size());
  const std::size_t block = static_cast<std::size_t>(std::max(1, config.block_size));
  for (std::size_t start = 0; start < queries.size(); start += block) {
    const std::size_t stop = std::min(queries.size(), start + block);
    const int n = static_cast<int>(stop - start);
    CoordBatch canonical(3, n);
    std::vector<double> t_query(n);
    for (int s = 0; s < n; ++s) {
      const TrackQuery& q = queries[start + s];
      if (q.frame < 0 || q.frame >= T) throw std::out_of_range("track: query frame " + std::to_string(q.frame));
      if (!in_image(q.pixel, W, H)) throw std::out_of_range("track: query pixel outside the image");
      const Point3 x = backproject(q.pixel, depth.lookup(q.frame, q.pixel), K);
      const Point3 nx = normalize_affine(x, bounds);
      canonical(0, s) = nx.x;
      canonical(1, s) = nx.y;
      canonical(2, s) = nx.z;
      t_query[s] = field.time_coordinate(q.frame);
      Track& tr = out.tracks[start + s];
      tr.query_frame = q.frame;
      tr.query = q.pixel;
      tr.positions.assign(T, Pixel2{});
      tr.visible.assign(T, 0);
      tr.warped_depth.assign(T, 0.0);
    }
    field.to_canonical_normalized(canonical, t_query, nullptr);
    std::vector<double> t_frame(n);
    for (int t = 0; t < T; ++t) {
      CoordBatch c = canonical;
      std::fill(t_frame.begin(), t_frame.end(), field.time_coordinate(t));
      field.from_canonical_normalized(c, t_frame, nullptr);
      const auto dframe = depth.frame(t);
      for (int s = 0; s < n; ++s) {
        Track& tr = out.tracks[start + s];
        const Point3 xh = denormalize_affine(Point3{c(0, s), c(1, s), c(2, s)}, bounds);
        tr.warped_depth[t] = xh.z;
        const auto p = try_project(xh, K);
        if (!p) {
          const double nan = std::numeric_limits<double>::quiet_NaN();
          tr.positions[t] = Pixel2{nan, nan};
          tr.visible[t] = 0;
          continue;
        }
        tr.positions[t] = *p;
        tr.visible[t] = visibility_test(xh.z, dframe, W, H, *p, eps[t]) ? 1 : 0;
      }
    }
    for (int s = 0; s < n; ++s) {
      Track& tr = out.tracks[start + s];
      tr.positions[tr.query_frame] = tr.query;
      tr.visible[tr.query_frame] = 1;
    }
  }
  return out;
}

Track track(const DeformationField& field, const DepthMapSet& depth, const CameraIntrinsics& K, const Pixel2& p,
            int frame, const TrackerConfig& config) {
  return track_many(field, depth, K, {TrackQuery{frame, p}}, config).tracks.front();
}

std::vector<TrackQuery> lattice_queries(int frame, int width, int height, int stride) {
  std::vector<TrackQuery> q;
  for (int y = 0; y < height; y += stride) {
    for (int x = 0; x < width; x += stride) q.push_back(TrackQuery{frame, Pixel2{double(x), double(y)}});
  }
  return q;
}

}  // namespace cadex
