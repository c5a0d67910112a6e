#include "cadex/loss.hpp"

namespace cadex {

void LossWeights::validate() const {
  if (!(lambda_d >= 0.0) || !std::isfinite(lambda_d)) throw ConfigError("loss.lambda_d must be finite and >= 0");
  if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg)) throw ConfigError("loss.lambda_reg must be finite and >= 0");
}

double depth_reg_term(const DepthMapSet& depth, int frame, const Pixel2& p, double scale, std::span<double> d_frame) {
  const int W = depth.width();
  const int H = depth.height();
  const BilinearSample fp = bilinear_footprint(p, W, H);
  const auto opt = depth.frame(frame);
  const auto init = depth.init_frame(frame);
  const auto init_grad = depth.init_gradient(frame);
  double gi_u = 0.0, gi_v = 0.0, go_u = 0.0, go_v = 0.0;
  std::array<std::array<double, 2>, 4> cell_grad{};
  for (int c = 0; c < 4; ++c) {
    const int idx = fp.index[c];
    gi_u += fp.weight[c] * init_grad[2 * static_cast<std::size_t>(idx)];
    gi_v += fp.weight[c] * init_grad[2 * static_cast<std::size_t>(idx) + 1];
    cell_grad[c] = gradient_at_cell(opt, W, H, idx % W, idx / W);
    go_u += fp.weight[c] * cell_grad[c][0];
    go_v += fp.weight[c] * cell_grad[c][1];
  }
  const double du = gi_u - go_u;
  const double dv = gi_v - go_v;
  const double grad_norm = std::sqrt(du * du + dv * dv);
  const double value_diff = sample(init, fp) - sample(opt, fp);
  if (scale != 0.0 && !d_frame.empty()) {
    if (grad_norm > 0.0) {
      // d||g_init - g_opt|| / d g_opt = -(g_init - g_opt) / norm
      const double su = -scale * du / grad_norm;
      const double sv = -scale * dv / grad_norm;
      for (int c = 0; c < 4; ++c) {
        const int idx = fp.index[c];
        gradient_at_cell_adjoint(W, H, idx % W, idx / W, fp.weight[c] * su, fp.weight[c] * sv, d_frame);
      }
    }
    const double sd = -scale * loss_detail::sign(value_diff);
    for (int c = 0; c < 4; ++c) d_frame[fp.index[c]] += sd * fp.weight[c];
  }
  return grad_norm + std::abs(value_diff);
}

double pixel_loss(std::span<const CorrPair> batch, const DeformationField& field, const DepthMapSet& depth,
                  const CameraIntrinsics& K) {
  return evaluate_objective(batch, field, depth, K, LossWeights{}, TermScales{}, nullptr).pixel;
}

double depth_consistency_loss(std::span<const CorrPair> batch, const DeformationField& field,
                              const DepthMapSet& depth, const CameraIntrinsics& K) {
  return evaluate_objective(batch, field, depth, K, LossWeights{}, TermScales{}, nullptr).depth;
}

double depth_reg_loss(std::span<const CorrPair> batch, const DepthMapSet& depth) {
  if (batch.empty()) return 0.0;
  double sum = 0.0;
  for (const CorrPair& p : batch) sum += depth_reg_term(depth, p.j, p.p_j, 0.0, {});
  return sum / static_cast<double>(batch.size());
}

double total_loss(std::span<const CorrPair> batch, const DeformationField& field, const DepthMapSet& depth,
                  const CameraIntrinsics& K, const LossWeights& weights) {
  return evaluate_objective(batch, field, depth, K, weights, TermScales::total(weights), nullptr).total;
}

}  // namespace cadex
