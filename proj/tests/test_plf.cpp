#include <gtest/gtest.h>

#include <random>

#include "cadex/plf.hpp"

namespace cadex {
namespace {

std::vector<double> random_positive(int B, std::mt19937_64& rng) {
  std::normal_distribution<double> raw(0.0, 2.0);
  std::vector<double> out(2 * B + 2);
  for (auto& v : out) v = positive_map(raw(rng));
  return out;
}

TEST(PositiveMap, InverseAndDerivative) {
  for (double t : {1e-3, 0.05, 0.7, 3.0, 45.0}) {
    EXPECT_NEAR(positive_map(positive_map_inverse(t)), t, 1e-12 * std::max(1.0, t));
  }
  EXPECT_NEAR(positive_map_derivative(0.0), 0.5, 1e-15);
  EXPECT_GT(positive_map(-800.0), 0.0);
  EXPECT_THROW(positive_map_inverse(kPositiveFloor), std::invalid_argument);
}

TEST(PlfBuild, EqualDeltasGiveIdentity) {
  std::vector<double> pos(2 * 8 + 2, 0.25);
  pos[16] = pos[17] = 1.0;
  const MonotonePiecewiseLinear f = plf_build(pos);
  for (int k = 0; k < f.size(); ++k) EXPECT_DOUBLE_EQ(f.alpha[k], f.beta[k]);
  EXPECT_DOUBLE_EQ(plf_forward(f, 0.37), 0.37);
  EXPECT_DOUBLE_EQ(plf_inverse(f, 0.37), 0.37);
  EXPECT_DOUBLE_EQ(plf_forward(f, -9.0), -9.0);
}

TEST(PlfBuild, CumulativePositivePoints) {
  // B = 4: negative deltas (1,1) for both alpha and beta, positive alpha (1,1), positive beta (2,2).
  const std::vector<double> pos{1, 1, 1, 1, 1, 1, 2, 2, 1, 1};
  const MonotonePiecewiseLinear f = plf_build(pos);
  ASSERT_EQ(f.size(), 4);
  EXPECT_EQ(f.alpha[2], 1.0);
  EXPECT_EQ(f.beta[2], 2.0);
  EXPECT_EQ(f.alpha[3], 2.0);
  EXPECT_EQ(f.beta[3], 4.0);
  EXPECT_EQ(f.alpha[0], -2.0);
  EXPECT_EQ(f.alpha[1], -1.0);
}

TEST(PlfBuild, RejectsNonPositiveAndOddB) {
  std::vector<double> pos(10, 1.0);
  pos[3] = 0.0;
  EXPECT_THROW(plf_build(pos), std::logic_error);
  EXPECT_THROW(plf_build(std::vector<double>(8, 1.0)), std::logic_error);
}

TEST(PlfBuild, StrictlyIncreasingPoints) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100000; ++trial) {
    const MonotonePiecewiseLinear f = plf_build(random_positive(8, rng));
    for (int k = 0; k + 1 < f.size(); ++k) {
      ASSERT_LT(f.alpha[k], f.alpha[k + 1]);
      ASSERT_LT(f.beta[k], f.beta[k + 1]);
    }
  }
}

TEST(PlfForward, HandEvaluated) {
  MonotonePiecewiseLinear f;
  f.alpha = {0.0, 1.0};
  f.beta = {0.0, 2.0};
  EXPECT_DOUBLE_EQ(plf_forward(f, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(plf_inverse(f, 1.0), 0.5);
  f.k_right = 3.0;
  EXPECT_DOUBLE_EQ(plf_forward(f, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(plf_inverse(f, 5.0), 2.0);
  f.k_left = 0.5;
  EXPECT_DOUBLE_EQ(plf_forward(f, -2.0), -1.0);
}

TEST(PlfForward, BreakpointsBelongToRightSegment) {
  const double knots[3] = {0.0, 1.0, 2.0};
  EXPECT_EQ(plf_detail::locate(knots, 3, -1e-300), -1);
  EXPECT_EQ(plf_detail::locate(knots, 3, 0.0), 0);
  EXPECT_EQ(plf_detail::locate(knots, 3, 1.0), 1);
  EXPECT_EQ(plf_detail::locate(knots, 3, 2.0), 2);
}

TEST(PlfInverse, RoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 4.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const MonotonePiecewiseLinear f = plf_build(random_positive(8, rng));
    for (int k = 0; k < 100; ++k) {
      const double x = z(rng);
      worst = std::max(worst, std::abs(plf_inverse(f, plf_forward(f, x)) - x));
    }
  }
  EXPECT_LT(worst, 1e-12);
}

}  // namespace
}  // namespace cadex
