#include <gtest/gtest.h>

#include <random>

#include "cadex/loss.hpp"
#include "support/toy.hpp"

namespace cadex {
namespace {

using testing::toy_field_config;

struct Toy {
  CameraIntrinsics K = intrinsics_from_fov(8, 8);
  DepthMapSet depth;
  DeformationField field;

  explicit Toy(std::vector<double> init, int frames = 2) {
    depth = DepthMapSet(frames, 8, 8, std::move(init));
    field = DeformationField(toy_field_config(), frames, scene_bounds_from_depth(depth, K), 1);
  }
};

std::vector<double> constant_frames(std::initializer_list<double> values) {
  std::vector<double> d;
  for (double v : values) d.insert(d.end(), 64, v);
  return d;
}

TEST(PixelLoss, IdentityFieldExactDepthIsZero) {
  Toy s(constant_frames({2.0, 2.0}));
  const std::vector<CorrPair> batch{{0, {3.25, 4.5}, 1, {3.25, 4.5}}, {1, {1.0, 6.0}, 0, {1.0, 6.0}}};
  EXPECT_NEAR(pixel_loss(batch, s.field, s.depth, s.K), 0.0, 1e-12);
}

TEST(PixelLoss, HandComputedL1) {
  Toy s(constant_frames({2.0, 2.0}));
  const std::vector<CorrPair> batch{{0, {1.0, 1.0}, 1, {4.0, 5.0}}};
  EXPECT_NEAR(pixel_loss(batch, s.field, s.depth, s.K), 7.0, 1e-12);
}

TEST(PixelLoss, MatchesPointwiseReimplementation) {
  Toy s(testing::toy_depth(3, 8, 8, 4), 3);
  testing::perturb(s.field, 0.3, 8);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 7.0);
  std::uniform_int_distribution<int> f(0, 2);
  std::vector<CorrPair> batch;
  for (int k = 0; k < 100; ++k) batch.push_back({f(rng), {u(rng), u(rng)}, f(rng), {u(rng), u(rng)}});
  double expected = 0.0;
  for (const CorrPair& p : batch) {
    const Point3 x = backproject(p.p_i, s.depth.lookup(p.i, p.p_i), s.K);
    const Point3 y = s.field.from_canonical(s.field.to_canonical(x, p.i), p.j);
    const Pixel2 q = project(y, s.K);
    expected += std::abs(q.u - p.p_j.u) + std::abs(q.v - p.p_j.v);
  }
  expected /= 100.0;
  EXPECT_NEAR(pixel_loss(batch, s.field, s.depth, s.K), expected, 1e-12);
  const auto warped = warp_point(s.field, s.depth, s.K, batch[0].i, batch[0].p_i, batch[0].j);
  ASSERT_TRUE(warped.has_value());
}

TEST(DepthConsistency, StaticSceneIsZero) {
  Toy s(constant_frames({2.0, 2.0}));
  const std::vector<CorrPair> batch{{0, {3.0, 4.0}, 1, {3.0, 4.0}}};
  EXPECT_NEAR(depth_consistency_loss(batch, s.field, s.depth, s.K), 0.0, 1e-12);
}

TEST(DepthConsistency, HandComputed) {
  Toy s(constant_frames({2.0, 1.5}));
  const std::vector<CorrPair> batch{{0, {3.0, 4.0}, 1, {3.0, 4.0}}};
  EXPECT_NEAR(depth_consistency_loss(batch, s.field, s.depth, s.K), 0.5, 1e-12);
}

TEST(DepthRegularization, ZeroAtInitAndShift) {
  Toy s(testing::toy_depth(2, 8, 8, 6));
  const std::vector<CorrPair> batch{{0, {3.0, 4.0}, 1, {2.5, 5.25}}, {1, {3.0, 4.0}, 0, {6.5, 0.75}}};
  EXPECT_EQ(depth_reg_loss(batch, s.depth), 0.0);
  for (double& v : s.depth.maps().value) v += 0.3;
  EXPECT_NEAR(depth_reg_loss(batch, s.depth), 0.3, 1e-12);
}

TEST(DepthRegularization, MatchesStraightLineReimplementation) {
  Toy s(testing::toy_depth(2, 8, 8, 7));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : s.depth.maps().value) v += n(rng);
  std::uniform_real_distribution<double> u(0.0, 7.0);
  std::vector<CorrPair> batch;
  for (int k = 0; k < 100; ++k) batch.push_back({0, {1.0, 1.0}, k % 2, {u(rng), u(rng)}});
  double expected = 0.0;
  for (const CorrPair& p : batch) {
    const auto gi = spatial_gradient(s.depth.init_frame(p.j), 8, 8);
    const auto go = spatial_gradient(s.depth.frame(p.j), 8, 8);
    const int x0 = std::min(static_cast<int>(p.p_j.u), 6), y0 = std::min(static_cast<int>(p.p_j.v), 6);
    const double wx = p.p_j.u - x0, wy = p.p_j.v - y0;
    double du = 0.0, dv = 0.0, dd = 0.0;
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy);
        const int idx = (y0 + dy) * 8 + x0 + dx;
        du += w * (gi[2 * idx] - go[2 * idx]);
        dv += w * (gi[2 * idx + 1] - go[2 * idx + 1]);
        dd += w * (s.depth.init_frame(p.j)[idx] - s.depth.frame(p.j)[idx]);
      }
    }
    expected += std::hypot(du, dv) + std::abs(dd);
  }
  expected /= 100.0;
  EXPECT_NEAR(depth_reg_loss(batch, s.depth), expected, 1e-12);
}

TEST(TotalLoss, WeightsAndPixelOnly) {
  // L_p = 1, L_d = 2, L_reg = 3 by construction.
  std::vector<double> init = constant_frames({6.0, 1.0});
  Toy s(init);
  for (int k = 64; k < 128; ++k) s.depth.maps().value[k] = 4.0;
  const std::vector<CorrPair> batch{{0, {3.0, 4.0}, 1, {4.0, 4.0}}};
  const LossTerms t = evaluate_objective<DeformationField>(batch, s.field, s.depth, s.K, LossWeights{0.5, 0.1},
                                                           TermScales{}, nullptr);
  EXPECT_NEAR(t.pixel, 1.0, 1e-12);
  EXPECT_NEAR(t.depth, 2.0, 1e-12);
  EXPECT_NEAR(t.reg, 3.0, 1e-12);
  EXPECT_NEAR(t.total, 2.3, 1e-12);
  EXPECT_NEAR(total_loss(batch, s.field, s.depth, s.K, {0.5, 0.1}), 2.3, 1e-12);
  EXPECT_EQ(total_loss(batch, s.field, s.depth, s.K, {0.0, 0.0}), pixel_loss(batch, s.field, s.depth, s.K));
}

TEST(Objective, EmptyBatchIsZero) {
  Toy s(constant_frames({2.0, 2.0}));
  const LossTerms t = evaluate_objective<DeformationField>({}, s.field, s.depth, s.K, LossWeights{}, TermScales{}, nullptr);
  EXPECT_EQ(t.total, 0.0);
}

TEST(Objective, UntouchedParametersGetExactlyZeroGradient) {
  Toy s(testing::toy_depth(3, 8, 8, 9), 3);
  diff::ParameterTape tape;
  s.field.register_parameters(tape);
  s.depth.register_parameters(tape);
  auto grads = tape.gradient_views();
  const std::vector<CorrPair> batch{{0, {2.5, 3.5}, 1, {4.0, 4.0}}};
  evaluate_objective<DeformationField>(batch, s.field, s.depth, s.K, LossWeights{}, TermScales{1.0, 0.3, 0.2}, &grads);
  const auto& g = s.depth.maps().grad;
  for (std::size_t k = 128; k < 192; ++k) EXPECT_EQ(g[k], 0.0);
  double touched = 0.0;
  for (std::size_t k = 0; k < 128; ++k) touched += std::abs(g[k]);
  EXPECT_GT(touched, 0.0);
}

TEST(Objective, WeightValidation) {
  EXPECT_THROW((LossWeights{-1.0, 0.0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{0.0, std::nan("")}.validate()), ConfigError);
}

}  // namespace
}  // namespace cadex
