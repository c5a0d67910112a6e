#include <gtest/gtest.h>

#include <random>

#include "cadex/errors.hpp"
#include "cadex/field.hpp"
#include "support/toy.hpp"

namespace cadex {
namespace {

using testing::perturb;
using testing::toy_field_config;
using testing::unit_bounds;

CoordBatch random_coords(int n, std::mt19937_64& rng, double lo = -0.2, double hi = 1.2) {
  std::uniform_real_distribution<double> u(lo, hi);
  CoordBatch c(3, n);
  for (int s = 0; s < n; ++s) c.col(s) << u(rng), u(rng), u(rng);
  return c;
}

TEST(Grids, TemporalResolutions) {
  const FieldConfig c;
  EXPECT_EQ(temporal_resolutions(c, 24), (std::vector<int>{2, 6, 16}));
  EXPECT_EQ(temporal_resolutions(c, 100), (std::vector<int>{5, 25, 65}));
}

TEST(Grids, TemporalVertexAndMidpoint) {
  TemporalGrid g({5}, 2);
  for (std::size_t k = 0; k < g.data().size(); ++k) g.data().value[k] = static_cast<double>(k * k);
  std::vector<double> out(2);
  g.query(0.5, out);  // vertex 2
  EXPECT_EQ(out[0], 16.0);
  EXPECT_EQ(out[1], 25.0);
  g.query(0.375, out);  // between vertices 1 and 2
  EXPECT_DOUBLE_EQ(out[0], 0.5 * (4.0 + 16.0));
  EXPECT_DOUBLE_EQ(out[1], 0.5 * (9.0 + 25.0));
  g.query(1.0, out);
  EXPECT_EQ(out[0], 64.0);
}

TEST(Grids, SpatialVertexAndZero) {
  SpatialGrid g({3, 4}, 2);
  std::vector<double> out(4);
  g.query(0.3, 0.8, out);
  for (double v : out) EXPECT_EQ(v, 0.0);
  for (std::size_t k = 0; k < g.data().size(); ++k) g.data().value[k] = static_cast<double>(k);
  // Vertex (a=1, b=2) of the 3x3 level: offset (2 * 3 + 1) * 2.
  g.query(0.5, 1.0, out);
  EXPECT_EQ(out[0], 14.0);
  EXPECT_EQ(out[1], 15.0);
}

TEST(Grids, CellEdgeBelongsToRightCell) {
  EXPECT_EQ(locate_vertex_axis(0.5, 3).index, 1);
  EXPECT_EQ(locate_vertex_axis(0.5, 3).weight, 0.0);
  EXPECT_EQ(locate_vertex_axis(1.0, 3).index, 1);
  EXPECT_EQ(locate_vertex_axis(1.0, 3).weight, 1.0);
}

TEST(Field, ConfigValidation) {
  FieldConfig c;
  c.control_points = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FieldConfig{};
  c.spatial_resolutions = {1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Field, DefaultParameterCount) {
  const DeformationField f(FieldConfig{}, 24, unit_bounds(), 0);
  const std::size_t temporal = (2 + 6 + 16) * 16;
  const std::size_t spatial = (12 * 12 + 96 * 96) * 32;
  const std::size_t mlp = (114 * 64 + 64) + (64 * 64 + 64) + (64 * 18 + 18);
  EXPECT_EQ(f.parameter_count(), temporal + 6 * (spatial + mlp));
}

TEST(Field, FreshFieldIsIdentity) {
  const DeformationField f(FieldConfig{}, 24, unit_bounds(), 5);
  std::mt19937_64 rng(1);
  const CoordBatch x = random_coords(500, rng, -0.5, 1.5);
  std::vector<double> t(500);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t) v = u(rng);
  CoordBatch y = x;
  f.to_canonical_normalized(y, t, nullptr);
  EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-12);
  y = x;
  f.from_canonical_normalized(y, t, nullptr);
  EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Field, BlockKeepsUnchangedAxesBitIdentical) {
  DeformationField f(toy_field_config(), 6, unit_bounds(), 2);
  perturb(f, 0.3, 9);
  std::mt19937_64 rng(4);
  const CoordBatch x = random_coords(200, rng);
  std::vector<double> t(200, 0.4);
  for (const CouplingBlock& b : f.blocks()) {
    CoordBatch y = x;
    b.apply(y, t, f.temporal(), false, nullptr);
    for (int a : b.unchanged_axes()) EXPECT_TRUE((y.row(a).array() == x.row(a).array()).all());
    EXPECT_FALSE((y.row(b.axis()).array() == x.row(b.axis()).array()).all());
  }
}

TEST(Field, BlockInverse) {
  DeformationField f(toy_field_config(), 6, unit_bounds(), 2);
  perturb(f, 0.5, 10);
  std::mt19937_64 rng(5);
  const CoordBatch x = random_coords(1000, rng, -1.0, 2.0);
  std::vector<double> t(1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t) v = u(rng);
  for (const CouplingBlock& b : f.blocks()) {
    CoordBatch y = x;
    b.apply(y, t, f.temporal(), false, nullptr);
    b.apply(y, t, f.temporal(), true, nullptr);
    EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Field, PerturbedFieldInvertible) {
  DeformationField f(toy_field_config(), 6, unit_bounds(), 3);
  perturb(f, 0.5, 11);
  std::mt19937_64 rng(6);
  const CoordBatch x = random_coords(10000, rng, -1.0, 2.0);
  std::vector<double> t(10000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t) v = u(rng);
  CoordBatch y = x;
  f.to_canonical_normalized(y, t, nullptr);
  EXPECT_GT((y - x).cwiseAbs().maxCoeff(), 1e-3);
  f.from_canonical_normalized(y, t, nullptr);
  EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Field, SameFrameCompositionIsIdentity) {
  DeformationField f(toy_field_config(), 6, unit_bounds(), 3);
  perturb(f, 0.3, 12);
  const Point3 x{0.1, -0.2, 2.2};
  for (int t = 0; t < 6; ++t) {
    const Point3 y = f.from_canonical(f.to_canonical(x, t), t);
    EXPECT_NEAR(y.x, x.x, 1e-12);
    EXPECT_NEAR(y.y, x.y, 1e-12);
    EXPECT_NEAR(y.z, x.z, 1e-12);
  }
  EXPECT_THROW(f.to_canonical(x, 6), std::out_of_range);
}

TEST(Field, LatentQueryLayout) {
  DeformationField f(toy_field_config(), 6, unit_bounds(), 3);
  const CouplingBlock& b = f.blocks()[0];
  const std::vector<double> z = latent_query(b, f.temporal(), 0.25, 0.75, 0.5);
  ASSERT_EQ(static_cast<int>(z.size()), toy_field_config().latent_dim());
  std::vector<double> t(f.temporal().dim()), s(b.spatial().dim());
  f.temporal().query(0.5, t);
  b.spatial().query(0.25, 0.75, s);
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(z[k], t[k]);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_EQ(z[t.size() + k], s[k]);
}

TEST(Field, MapAtIsMonotone) {
  DeformationField f(toy_field_config(), 6, unit_bounds(), 3);
  perturb(f, 0.5, 13);
  const MonotonePiecewiseLinear m = f.blocks()[1].map_at(0.3, 0.6, 0.2, f.temporal());
  for (int k = 0; k + 1 < m.size(); ++k) {
    EXPECT_LT(m.alpha[k], m.alpha[k + 1]);
    EXPECT_LT(m.beta[k], m.beta[k + 1]);
  }
}

}  // namespace
}  // namespace cadex
