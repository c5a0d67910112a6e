#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cadex/errors.hpp"
#include "cadex/supervision.hpp"
#include "cadex/synth.hpp"

namespace cadex::synth {
namespace {

const SynthData& clean_desk() {
  static const SynthData data = [] {
    SceneSpec spec = SceneSpec::desk();
    spec.without_noise();
    return generate(Scene(spec));
  }();
  return data;
}

const Scene& clean_desk_scene() {
  static const Scene scene(SceneSpec::desk().without_noise());
  return scene;
}

TEST(Scene, PresetsValidate) {
  for (const SceneSpec& s : {SceneSpec::desk(), SceneSpec::occlusion(), SceneSpec::still()}) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_NO_THROW(Scene{s});
  }
  SceneSpec bad = SceneSpec::desk();
  bad.sigma_flow = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Scene, DefaultDeskShape) {
  const SceneSpec s = SceneSpec::desk();
  EXPECT_EQ(s.frames, 24);
  EXPECT_EQ(s.width, 64);
  EXPECT_EQ(s.height, 64);
  EXPECT_EQ(s.primitives.size(), 3u);
  EXPECT_EQ(s.sigma_flow, 0.5);
  EXPECT_EQ(s.sigma_depth, 0.05);
  EXPECT_EQ(s.sigma_feat, 0.1);
}

TEST(Scene, FrustumInvariantEnforced) {
  SceneSpec s = SceneSpec::desk();
  s.primitives[0].velocity = Eigen::Vector3d(0.5, 0.0, 0.0);
  EXPECT_THROW(Scene{s}, DataError);
}

TEST(Scene, RaycastMatchesBruteForceVisibility) {
  const Scene& scene = clean_desk_scene();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 63.0);
  std::uniform_int_distribution<int> frame(0, 23);
  int disagreements = 0, hidden = 0;
  for (int k = 0; k < 3000; ++k) {
    const int t0 = frame(rng), t1 = frame(rng);
    const SurfaceHit h = scene.raycast(t0, {u(rng), u(rng)});
    const bool a = scene.visible(h.surface, h.local, t1);
    const bool b = scene.visible_bruteforce(h.surface, h.local, t1);
    disagreements += a != b;
    hidden += !a;
  }
  EXPECT_EQ(disagreements, 0);
  EXPECT_GT(hidden, 0);
}

TEST(Scene, OcclusionPresetHidesTargetForSixFrames) {
  const Scene scene(SceneSpec::occlusion().without_noise());
  const auto queries = surface_queries(scene, 0, 1, 2);
  ASSERT_FALSE(queries.empty());
  std::vector<int> visible_count(24, 0);
  for (const auto& q : queries) {
    const Track tr = scene.gt_track(q.frame, q.pixel);
    for (int t = 0; t < 24; ++t) visible_count[t] += tr.visible[t];
  }
  int longest = 0, run = 0;
  for (int t = 0; t < 24; ++t) {
    run = visible_count[t] == 0 ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  EXPECT_EQ(longest, 6);
  for (int t = 8; t <= 13; ++t) EXPECT_EQ(visible_count[t], 0) << t;
  EXPECT_EQ(visible_count[0], static_cast<int>(queries.size()));
}

TEST(Generate, ZeroNoiseDepthIsGroundTruth) {
  const SynthData& d = clean_desk();
  ASSERT_EQ(d.init_depth.size(), d.gt.depth.size());
  for (std::size_t k = 0; k < d.gt.depth.size(); ++k) ASSERT_EQ(d.init_depth[k], d.gt.depth[k]);
}

TEST(Generate, ZeroNoiseFlowIsGroundTruthDisplacement) {
  const SynthData& d = clean_desk();
  const Scene& scene = clean_desk_scene();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pix(0, 63);
  int checked = 0;
  for (const FlowField& f : d.flows.fields()) {
    for (int k = 0; k < 20; ++k) {
      const int x = pix(rng), y = pix(rng);
      const Track tr = scene.gt_track(f.from, {double(x), double(y)});
      bool visible_between = true;
      for (int t = std::min(f.from, f.to); t <= std::max(f.from, f.to); ++t) visible_between &= tr.visible[t] != 0;
      ASSERT_EQ(f.valid(x, y), visible_between);
      if (!visible_between) continue;
      EXPECT_EQ(f.du(x, y), static_cast<float>(tr.positions[f.to].u - x));
      EXPECT_EQ(f.dv(x, y), static_cast<float>(tr.positions[f.to].v - y));
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Generate, FlowWindowPairs) {
  const SynthData& d = clean_desk();
  EXPECT_EQ(d.flows.size(), flow_frame_pairs(24, 12).size());
  EXPECT_NE(d.flows.find(0, 12), nullptr);
  EXPECT_EQ(d.flows.find(0, 13), nullptr);
}

TEST(Generate, ZeroNoiseFeaturesAreDescriptors) {
  const SynthData& d = clean_desk();
  const Scene& scene = clean_desk_scene();
  const FeatureMapStack& fm = d.features;
  EXPECT_EQ(fm.width, 16);
  std::vector<float> expected(fm.dim);
  for (int t : {0, 11, 23}) {
    for (int cy = 0; cy < fm.height; cy += 3) {
      for (int cx = 0; cx < fm.width; cx += 3) {
        const SurfaceHit h = scene.raycast(t, fm.cell_center(cx, cy));
        scene.descriptor(h.surface, h.local, expected.data());
        const float* got = fm.frame(t).cell(cy * fm.width + cx);
        for (int c = 0; c < fm.dim; ++c) EXPECT_EQ(got[c], expected[c]);
      }
    }
  }
}

TEST(Generate, FlowPairsLandOnGroundTruthTracks) {
  const SynthData& d = clean_desk();
  const Scene& scene = clean_desk_scene();
  const auto pairs = build_flow_pairs(d.flows, {{3, 9}, {17, 12}}, 64, 64, 4);
  ASSERT_GT(pairs.size(), 300u);
  double worst = 0.0;
  for (const CorrPair& p : pairs) {
    const Track tr = scene.gt_track(p.i, p.p_i);
    worst = std::max({worst, std::abs(tr.positions[p.j].u - p.p_j.u), std::abs(tr.positions[p.j].v - p.p_j.v)});
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Generate, StillSceneHasZeroFlowAndConstantTracks) {
  const Scene scene(SceneSpec::still().without_noise());
  const SynthData d = generate(scene);
  for (const FlowField& f : d.flows.fields()) {
    for (int y = 0; y < 64; y += 5) {
      for (int x = 0; x < 64; x += 5) {
        ASSERT_TRUE(f.valid(x, y));
        ASSERT_LT(std::abs(f.du(x, y)), 1e-6f);
        ASSERT_LT(std::abs(f.dv(x, y)), 1e-6f);
      }
    }
  }
  for (const Track& tr : d.gt.tracks.tracks) {
    for (int t = 0; t < 24; ++t) {
      EXPECT_NEAR(tr.positions[t].u, tr.query.u, 1e-9);
      EXPECT_NEAR(tr.positions[t].v, tr.query.v, 1e-9);
      EXPECT_EQ(tr.visible[t], 1);
    }
  }
}

TEST(Generate, DeterministicForSeed) {
  const Scene scene(SceneSpec::desk());
  const SynthData a = generate(scene);
  const SynthData b = generate(scene);
  EXPECT_EQ(a.init_depth, b.init_depth);
  EXPECT_EQ(a.features.data, b.features.data);
  EXPECT_EQ(a.flows.fields()[5].data, b.flows.fields()[5].data);
  SceneSpec other = SceneSpec::desk();
  other.seed = 1;
  const SynthData c = generate(Scene(other));
  EXPECT_NE(a.init_depth, c.init_depth);
  EXPECT_EQ(a.gt.depth, c.gt.depth);
}

TEST(Generate, NoiseLevels) {
  const Scene scene(SceneSpec::desk());
  const SynthData d = generate(scene);
  double s2 = 0.0;
  for (std::size_t k = 0; k < d.gt.depth.size(); ++k) {
    const double r = d.init_depth[k] / d.gt.depth[k] - 1.0;
    s2 += r * r;
  }
  EXPECT_NEAR(std::sqrt(s2 / d.gt.depth.size()), 0.05, 0.01);
  const Scene clean(SceneSpec::desk().without_noise());
  const SynthData g = generate(clean);
  double e2 = 0.0;
  std::size_t n = 0;
  const FlowField& noisy = d.flows.fields()[7];
  const FlowField& exact = g.flows.fields()[7];
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (!exact.valid(x, y)) continue;
      e2 += std::pow(noisy.du(x, y) - exact.du(x, y), 2) + std::pow(noisy.dv(x, y) - exact.dv(x, y), 2);
      n += 2;
    }
  }
  EXPECT_NEAR(std::sqrt(e2 / n), 0.5, 0.05);
}

TEST(Generate, GroundTruthTracksStartAtQuery) {
  const SynthData& d = clean_desk();
  const auto queries = default_queries(SceneSpec::desk());
  EXPECT_EQ(queries.size(), 512u);
  ASSERT_EQ(d.gt.tracks.tracks.size(), queries.size());
  for (std::size_t k = 0; k < queries.size(); ++k) {
    const Track& tr = d.gt.tracks.tracks[k];
    EXPECT_NEAR(tr.positions[tr.query_frame].u, queries[k].pixel.u, 1e-9);
    EXPECT_NEAR(tr.positions[tr.query_frame].v, queries[k].pixel.v, 1e-9);
    EXPECT_EQ(tr.visible[tr.query_frame], 1);
  }
  EXPECT_EQ(d.gt.descriptors.size(), queries.size());
}

TEST(Mining, ZeroNoisePairsLandOnGroundTruth) {
  const SynthData& d = clean_desk();
  const Scene& scene = clean_desk_scene();
  SupervisionConfig cfg;
  std::mt19937_64 rng(3);
  const auto pairs = build_longterm_pairs(d.features, cfg, rng);
  ASSERT_GT(pairs.size(), 100u);
  int judged = 0, correct = 0;
  const double tol = d.features.stride;
  for (const CorrPair& p : pairs) {
    const Track tr = scene.gt_track(p.i, p.p_i);
    if (!tr.visible[p.j]) continue;
    ++judged;
    const Pixel2 g = tr.positions[p.j];
    correct += std::abs(g.u - p.p_j.u) <= tol && std::abs(g.v - p.p_j.v) <= tol;
  }
  EXPECT_GT(judged, 100);
  EXPECT_EQ(correct, judged);
}

}  // namespace
}  // namespace cadex::synth
