#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "cadex/data.hpp"
#include "cadex/depth.hpp"
#include "cadex/diff.hpp"
#include "cadex/errors.hpp"
#include "cadex/field.hpp"
#include "cadex/geometry.hpp"

namespace cadex {

/// Weights of the depth-consistency and depth-regularization terms; the pixel
/// term always has weight 1.
struct LossWeights {
  double lambda_d = 1.0;
  double lambda_reg = 0.1;

  void validate() const;
};

/// Per-term scales applied when accumulating gradients.
struct TermScales {
  double pixel = 1.0;
  double depth = 0.0;
  double reg = 0.0;

  static TermScales total(const LossWeights& w) { return {1.0, w.lambda_d, w.lambda_reg}; }
};

struct LossTerms {
  double pixel = 0.0;
  double depth = 0.0;
  double reg = 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  /// Pairs whose warped point landed at or behind the camera plane.
  std::size_t skipped = 0;
};

/// Lifts p_i with the optimizable depth of frame i, maps it to frame j through
/// the canonical space and projects it. Returns nullopt behind the camera.
template <class Field>
std::optional<Point3> warp_point(const Field& field, const DepthMapSet& depth, const CameraIntrinsics& K,
                                 int i, const Pixel2& p_i, int j);

/// Evaluates all three terms over `batch` (means over `normalizer` pairs,
/// defaulting to the batch size). When `grads` is non-null, accumulates the
/// gradient of  scales.pixel*L_p + scales.depth*L_d + scales.reg*L_reg.
/// `total` in the result uses `weights`.
template <class Field>
LossTerms evaluate_objective(std::span<const CorrPair> batch, const Field& field, const DepthMapSet& depth,
                             const CameraIntrinsics& K, const LossWeights& weights, const TermScales& scales,
                             diff::GradientBuffer* grads, double normalizer = 0.0);

/// Mean L1 pixel error of warped queries against targets.
double pixel_loss(std::span<const CorrPair> batch, const DeformationField& field, const DepthMapSet& depth,
                  const CameraIntrinsics& K);
/// Mean |z(warped) - D_j[p_j]| with the optimizable target depth.
double depth_consistency_loss(std::span<const CorrPair> batch, const DeformationField& field,
                              const DepthMapSet& depth, const CameraIntrinsics& K);
/// Mean of ||grad D_init - grad D||_2 + |D_init - D| at target pixels.
double depth_reg_loss(std::span<const CorrPair> batch, const DepthMapSet& depth);
/// L_p + lambda_d L_d + lambda_reg L_reg.
double total_loss(std::span<const CorrPair> batch, const DeformationField& field, const DepthMapSet& depth,
                  const CameraIntrinsics& K, const LossWeights& weights);

/// Regularization value and cell gradient at one target pixel (exposed for the
/// objective and for tests).
double depth_reg_term(const DepthMapSet& depth, int frame, const Pixel2& p, double scale, std::span<double> d_frame);

// ------------------------------------------------------------------ template impl

namespace loss_detail {
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace loss_detail

template <class Field>
std::optional<Point3> warp_point(const Field& field, const DepthMapSet& depth, const CameraIntrinsics& K, int i,
                                 const Pixel2& p_i, int j) {
  const double d = depth.lookup(i, p_i);
  const Point3 x = backproject(p_i, d, K);
  const Point3 n = normalize_affine(x, field.bounds());
  CoordBatch c(3, 1);
  c << n.x, n.y, n.z;
  const double ti = field.time_coordinate(i);
  const double tj = field.time_coordinate(j);
  field.to_canonical_normalized(c, std::span<const double>(&ti, 1), nullptr);
  field.from_canonical_normalized(c, std::span<const double>(&tj, 1), nullptr);
  const Point3 out = denormalize_affine(Point3{c(0, 0), c(1, 0), c(2, 0)}, field.bounds());
  if (!(out.z > 0.0)) return std::nullopt;
  return out;
}

template <class Field>
LossTerms evaluate_objective(std::span<const CorrPair> batch, const Field& field, const DepthMapSet& depth,
                             const CameraIntrinsics& K, const LossWeights& weights, const TermScales& scales,
                             diff::GradientBuffer* grads, double normalizer) {
  using loss_detail::sign;
  LossTerms out;
  const int n = static_cast<int>(batch.size());
  out.pairs = batch.size();
  if (n == 0) return out;
  const double norm = normalizer > 0.0 ? normalizer : static_cast<double>(n);
  const SceneBounds& bounds = field.bounds();
  const int W = depth.width();
  const int H = depth.height();

  std::vector<BilinearSample> query_fp(n);
  std::vector<double> query_depth(n);
  std::vector<double> t_query(n);
  std::vector<double> t_target(n);
  CoordBatch coords(3, n);
  for (int s = 0; s < n; ++s) {
    const CorrPair& pr = batch[s];
    query_fp[s] = bilinear_footprint(pr.p_i, W, H);
    query_depth[s] = sample(depth.frame(pr.i), query_fp[s]);
    const Point3 x = backproject(pr.p_i, query_depth[s], K);
    const Point3 nx = normalize_affine(x, bounds);
    coords(0, s) = nx.x;
    coords(1, s) = nx.y;
    coords(2, s) = nx.z;
    t_query[s] = field.time_coordinate(pr.i);
    t_target[s] = field.time_coordinate(pr.j);
  }

  typename Field::Trace fwd;
  typename Field::Trace inv;
  const bool want_grad = grads != nullptr;
  field.to_canonical_normalized(coords, t_query, want_grad ? &fwd : nullptr);
  field.from_canonical_normalized(coords, t_target, want_grad ? &inv : nullptr);

  CoordBatch d_coords;
  std::span<double> g_depth;
  if (want_grad) {
    d_coords = CoordBatch::Zero(3, n);
    g_depth = (*grads)[depth.maps().slot];
  }
  const std::size_t fsize = depth.frame_size();

  double sum_p = 0.0, sum_d = 0.0, sum_r = 0.0;
  for (int s = 0; s < n; ++s) {
    const CorrPair& pr = batch[s];
    const Point3 xh = denormalize_affine(Point3{coords(0, s), coords(1, s), coords(2, s)}, bounds);
    if (!(xh.z > 0.0) || !std::isfinite(xh.x) || !std::isfinite(xh.y)) {
      ++out.skipped;
      continue;
    }
    const double inv_z = 1.0 / xh.z;
    const double pu = K.focal * xh.x * inv_z + K.cx;
    const double pv = K.focal * xh.y * inv_z + K.cy;
    const double eu = pu - pr.p_j.u;
    const double ev = pv - pr.p_j.v;
    sum_p += std::abs(eu) + std::abs(ev);

    const BilinearSample tfp = bilinear_footprint(pr.p_j, W, H);
    const auto target_frame = depth.frame(pr.j);
    const double dz = xh.z - sample(target_frame, tfp);
    sum_d += std::abs(dz);

    std::span<double> g_target_frame;
    if (want_grad) g_target_frame = g_depth.subspan(static_cast<std::size_t>(pr.j) * fsize, fsize);
    sum_r += depth_reg_term(depth, pr.j, pr.p_j, want_grad ? scales.reg / norm : 0.0, g_target_frame);

    if (!want_grad) continue;
    const double gp = scales.pixel / norm;
    const double gu = gp * sign(eu);
    const double gv = gp * sign(ev);
    const double gz_depth = scales.depth / norm * sign(dz);
    // d/d(xh) of the pixel and depth-consistency terms
    const double dx = gu * K.focal * inv_z;
    const double dy = gv * K.focal * inv_z;
    const double dzz = -(gu * K.focal * xh.x + gv * K.focal * xh.y) * inv_z * inv_z + gz_depth;
    d_coords(0, s) = dx * bounds.extent(0);
    d_coords(1, s) = dy * bounds.extent(1);
    d_coords(2, s) = dzz * bounds.extent(2);
    for (int c = 0; c < 4; ++c) g_target_frame[tfp.index[c]] -= gz_depth * tfp.weight[c];
  }
  out.pixel = sum_p / norm;
  out.depth = sum_d / norm;
  out.reg = sum_r / norm;
  out.total = out.pixel + weights.lambda_d * out.depth + weights.lambda_reg * out.reg;

  if (want_grad) {
    field.backward(inv, d_coords, *grads);
    field.backward(fwd, d_coords, *grads);
    for (int s = 0; s < n; ++s) {
      const CorrPair& pr = batch[s];
      // x = ((u - cx) d / f, (v - cy) d / f, d) with x normalized per axis
      const double gx = d_coords(0, s) / bounds.extent(0);
      const double gy = d_coords(1, s) / bounds.extent(1);
      const double gz = d_coords(2, s) / bounds.extent(2);
      const double gd = gx * (pr.p_i.u - K.cx) / K.focal + gy * (pr.p_i.v - K.cy) / K.focal + gz;
      std::span<double> g_query_frame = g_depth.subspan(static_cast<std::size_t>(pr.i) * fsize, fsize);
      for (int c = 0; c < 4; ++c) g_query_frame[query_fp[s].index[c]] += gd * query_fp[s].weight[c];
    }
  }
  return out;
}

}  // namespace cadex
