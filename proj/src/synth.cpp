#include "cadex/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cadex/errors.hpp"

namespace cadex::synth {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kHitTolerance = 1e-7;
constexpr int kFrustumSamples = 400;

// Seeds for the independent random streams of one scene.
enum Stream : std::uint64_t { kTextureStream = 1, kFlowStream = 2, kDepthStream = 3, kFeatureStream = 4 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

Eigen::Vector3d ray_direction(const Pixel2& p, const CameraIntrinsics& K) {
  return Eigen::Vector3d((p.u - K.cx) / K.focal, (p.v - K.cy) / K.focal, 1.0);
}

// Nearest and farthest positive ray parameters of an ellipsoid hit; false on a miss.
bool intersect_ellipsoid(const Eigen::Vector3d& d, const Eigen::Vector3d& c, const Eigen::Matrix3d& R,
                         const Eigen::Vector3d& axes, double& s_near, double& s_far) {
  const Eigen::Vector3d dl = (R.transpose() * d).cwiseQuotient(axes);
  const Eigen::Vector3d cl = (R.transpose() * c).cwiseQuotient(axes);
  const double A = dl.squaredNorm();
  const double B = dl.dot(cl);
  const double C = cl.squaredNorm() - 1.0;
  const double disc = B * B - A * C;
  if (disc < 0.0) return false;
  const double root = std::sqrt(disc);
  s_near = (B - root) / A;
  s_far = (B + root) / A;
  return s_far > 0.0;
}

std::vector<Eigen::Vector3d> unit_sphere_samples(int n) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    out.emplace_back(r * std::cos(golden * k), r * std::sin(golden * k), z);
  }
  return out;
}

Primitive make_primitive(Eigen::Vector3d axes, Eigen::Vector3d center, Eigen::Vector3d velocity) {
  Primitive p;
  p.semi_axes = axes;
  p.center = center;
  p.velocity = velocity;
  return p;
}

}  // namespace

SceneSpec SceneSpec::desk() {
  SceneSpec s;
  s.name = "desk";
  Primitive a = make_primitive({0.34, 0.28, 0.28}, {-0.45, -0.3, 3.0}, {0.035, 0.0, 0.0});
  a.amplitude = {0.0, 0.08, 0.0};
  a.omega = 0.3;
  a.axis = Eigen::Vector3d(0.2, 0.3, 1.0).normalized();
  a.spin = 0.03;
  Primitive b = make_primitive({0.22, 0.34, 0.22}, {0.35, 0.35, 2.4}, {-0.01, -0.03, 0.0});
  b.amplitude = {0.06, 0.0, 0.05};
  b.omega = 0.25;
  b.phase = 1.0;
  b.axis = Eigen::Vector3d(1.0, 0.0, 0.3).normalized();
  b.spin = -0.02;
  Primitive c = make_primitive({0.42, 0.26, 0.16}, {-0.35, 0.55, 3.4}, {0.025, -0.005, 0.0});
  c.axis = Eigen::Vector3d(0.0, 0.0, 1.0);
  c.angle = 0.3;
  c.spin = 0.015;
  s.primitives = {a, b, c};
  return s;
}

SceneSpec SceneSpec::occlusion() {
  SceneSpec s;
  s.name = "occlusion";
  Primitive target = make_primitive({0.22, 0.22, 0.2}, {-0.12, 0.05, 3.2}, {0.01, 0.0, 0.0});
  target.amplitude = {0.0, 0.05, 0.0};
  target.omega = 0.2;
  target.spin = 0.02;
  Primitive occluder = make_primitive({0.24, 0.35, 0.15}, {-0.44, 0.0, 2.0}, {0.041, 0.0, 0.0});
  Primitive side = make_primitive({0.25, 0.2, 0.2}, {0.55, -0.72, 3.5}, {-0.01, 0.01, 0.0});
  side.spin = -0.02;
  s.primitives = {target, occluder, side};
  return s;
}

SceneSpec SceneSpec::still() {
  SceneSpec s = desk();
  s.name = "still";
  for (auto& p : s.primitives) {
    p.velocity.setZero();
    p.amplitude.setZero();
    p.spin = 0.0;
  }
  return s;
}

SceneSpec& SceneSpec::without_noise() {
  sigma_flow = 0.0;
  sigma_depth = 0.0;
  sigma_feat = 0.0;
  return *this;
}

void SceneSpec::validate() const {
  if (frames < 2) throw ConfigError("scene: frames must be at least 2");
  if (width < 8 || height < 8) throw ConfigError("scene: image must be at least 8x8");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("scene: fov_deg must lie in (0, 180)");
  if (!(background_depth > 0.0)) throw ConfigError("scene: background_depth must be positive");
  if (!(sigma_flow >= 0.0) || !(sigma_depth >= 0.0) || !(sigma_feat >= 0.0) || !std::isfinite(sigma_flow) ||
      !std::isfinite(sigma_depth) || !std::isfinite(sigma_feat)) {
    throw ConfigError("scene: noise levels must be finite and non-negative");
  }
  if (flow_window < 1) throw ConfigError("scene: flow_window must be positive");
  if (feature_stride < 1 || width / feature_stride < 2 || height / feature_stride < 2) {
    throw ConfigError("scene: feature_stride leaves fewer than 2x2 cells");
  }
  if (feature_dim < 2) throw ConfigError("scene: feature_dim must be at least 2");
  if (depth_noise_radius < 0) throw ConfigError("scene: depth_noise_radius must be non-negative");
  if (!(min_frustum_fraction >= 0.0 && min_frustum_fraction <= 1.0)) {
    throw ConfigError("scene: min_frustum_fraction must lie in [0, 1]");
  }
  for (std::size_t k = 0; k < primitives.size(); ++k) {
    const auto& p = primitives[k];
    if (!(p.semi_axes.minCoeff() > 0.0)) {
      throw ConfigError("scene: primitive " + std::to_string(k) + " needs positive semi-axes");
    }
    if (!(p.axis.norm() > 0.0)) throw ConfigError("scene: primitive " + std::to_string(k) + " has a zero axis");
  }
}

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  K_ = intrinsics_from_fov(spec_.width, spec_.height, spec_.fov_deg);
  for (int k = 0; k < static_cast<int>(spec_.primitives.size()); ++k) {
    const double r = spec_.primitives[k].semi_axes.maxCoeff();
    for (int t = 0; t < spec_.frames; ++t) {
      if (center(k, t).z() - r <= 0.05) {
        throw DataError("scene: primitive " + std::to_string(k) + " reaches the camera at frame " + std::to_string(t));
      }
      const double f = frustum_fraction(k, t);
      if (f < spec_.min_frustum_fraction) {
        throw DataError("scene: primitive " + std::to_string(k) + " keeps only " + std::to_string(f) +
                        " of its surface in view at frame " + std::to_string(t));
      }
    }
  }

  const int dim = spec_.feature_dim;
  std::mt19937_64 rng = stream_rng(spec_.seed, kTextureStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  const auto random_unit = [&]() {
    Eigen::VectorXd v(dim);
    for (int c = 0; c < dim; ++c) v[c] = normal(rng);
    return Eigen::VectorXd(v.normalized());
  };
  shared_ = random_unit();
  for (int s = 0; s < surfaces(); ++s) {
    Texture tex;
    tex.base = random_unit();
    tex.freq.resize(dim, 3);
    tex.offset.resize(dim);
    // Background texture is coarser to match its larger extent.
    const double scale = s == 0 ? 1.5 : 6.0;
    for (int c = 0; c < dim; ++c) {
      for (int a = 0; a < 3; ++a) tex.freq(c, a) = scale * normal(rng);
      tex.offset[c] = phase(rng);
    }
    textures_.push_back(std::move(tex));
  }
}

Eigen::Matrix3d Scene::rotation(int primitive, int t) const {
  const Primitive& p = spec_.primitives.at(primitive);
  return Eigen::AngleAxisd(p.angle + p.spin * t, p.axis.normalized()).toRotationMatrix();
}

Eigen::Vector3d Scene::center(int primitive, int t) const {
  const Primitive& p = spec_.primitives.at(primitive);
  return p.center + p.velocity * t + p.amplitude * std::sin(p.omega * t + p.phase);
}

Eigen::Vector3d Scene::world_point(int surface, const Eigen::Vector3d& local, int t) const {
  if (surface == 0) return local;
  return center(surface - 1, t) + rotation(surface - 1, t) * local;
}

SurfaceHit Scene::raycast(int t, const Pixel2& p) const {
  const Eigen::Vector3d d = ray_direction(p, K_);
  SurfaceHit hit;
  hit.surface = 0;
  hit.depth = spec_.background_depth;
  hit.local = d * spec_.background_depth;
  for (int k = 0; k < static_cast<int>(spec_.primitives.size()); ++k) {
    const Eigen::Matrix3d R = rotation(k, t);
    const Eigen::Vector3d c = center(k, t);
    double s_near = 0.0, s_far = 0.0;
    if (!intersect_ellipsoid(d, c, R, spec_.primitives[k].semi_axes, s_near, s_far)) continue;
    const double s = s_near > 0.0 ? s_near : s_far;
    if (s < hit.depth) {
      hit.surface = k + 1;
      hit.depth = s;
      hit.local = R.transpose() * (d * s - c);
    }
  }
  return hit;
}

bool Scene::visible(int surface, const Eigen::Vector3d& local, int t) const {
  const Eigen::Vector3d P = world_point(surface, local, t);
  const auto p = try_project(Point3{P.x(), P.y(), P.z()}, K_);
  if (!p || !in_image(*p, K_)) return false;
  const SurfaceHit hit = raycast(t, *p);
  return hit.surface == surface && std::abs(hit.depth - P.z()) <= kHitTolerance * std::max(1.0, P.z());
}

bool Scene::visible_bruteforce(int surface, const Eigen::Vector3d& local, int t) const {
  const Eigen::Vector3d P = world_point(surface, local, t);
  if (P.z() <= 0.0) return false;
  const Pixel2 p{K_.focal * P.x() / P.z() + K_.cx, K_.focal * P.y() / P.z() + K_.cy};
  if (!in_image(p, K_)) return false;
  const Eigen::Vector3d d = ray_direction(p, K_);
  const double tol = kHitTolerance * std::max(1.0, P.z());
  // Every intersection along the ray, from every surface, is a z-buffer candidate.
  std::vector<double> candidates{spec_.background_depth};
  for (int k = 0; k < static_cast<int>(spec_.primitives.size()); ++k) {
    double s_near = 0.0, s_far = 0.0;
    if (!intersect_ellipsoid(d, center(k, t), rotation(k, t), spec_.primitives[k].semi_axes, s_near, s_far)) continue;
    if (s_near > 0.0) candidates.push_back(s_near);
    candidates.push_back(s_far);
  }
  for (double z : candidates) {
    if (z < P.z() - tol) return false;
  }
  if (surface == 0) return std::abs(P.z() - spec_.background_depth) <= tol;
  return true;
}

double Scene::frustum_fraction(int primitive, int t) const {
  static const std::vector<Eigen::Vector3d> samples = unit_sphere_samples(kFrustumSamples);
  const Eigen::Vector3d& axes = spec_.primitives.at(primitive).semi_axes;
  int inside = 0;
  for (const auto& s : samples) {
    const Eigen::Vector3d P = world_point(primitive + 1, s.cwiseProduct(axes), t);
    const auto p = try_project(Point3{P.x(), P.y(), P.z()}, K_);
    if (p && in_image(*p, K_)) ++inside;
  }
  return static_cast<double>(inside) / kFrustumSamples;
}

std::vector<double> Scene::depth_frame(int t) const {
  std::vector<double> out(static_cast<std::size_t>(spec_.width) * spec_.height);
  for (int y = 0; y < spec_.height; ++y) {
    for (int x = 0; x < spec_.width; ++x) {
      out[static_cast<std::size_t>(y) * spec_.width + x] = raycast(t, Pixel2{double(x), double(y)}).depth;
    }
  }
  return out;
}

void Scene::descriptor(int surface, const Eigen::Vector3d& local, float* out) const {
  const Texture& tex = textures_.at(surface);
  const int dim = spec_.feature_dim;
  const Eigen::VectorXd wave = ((tex.freq * local) + tex.offset).array().sin().matrix() / std::sqrt(0.5 * dim);
  const Eigen::VectorXd v = (spec_.feature_shared * shared_ + 0.5 * tex.base + wave).normalized();
  for (int c = 0; c < dim; ++c) out[c] = static_cast<float>(v[c]);
}

std::vector<Eigen::Vector3d> Scene::gt_states(int frame, const Pixel2& p) const {
  const SurfaceHit hit = raycast(frame, p);
  std::vector<Eigen::Vector3d> out;
  out.reserve(spec_.frames);
  for (int t = 0; t < spec_.frames; ++t) out.push_back(world_point(hit.surface, hit.local, t));
  return out;
}

Track Scene::gt_track(int frame, const Pixel2& p) const {
  if (frame < 0 || frame >= spec_.frames) throw std::out_of_range("gt_track: frame index out of range");
  if (!in_image(p, K_)) throw std::out_of_range("gt_track: query pixel outside the image");
  const SurfaceHit hit = raycast(frame, p);
  Track tr;
  tr.query_frame = frame;
  tr.query = p;
  tr.positions.resize(spec_.frames);
  tr.visible.resize(spec_.frames);
  for (int t = 0; t < spec_.frames; ++t) {
    const Eigen::Vector3d P = world_point(hit.surface, hit.local, t);
    const auto q = try_project(Point3{P.x(), P.y(), P.z()}, K_);
    tr.positions[t] = q ? *q : Pixel2{kNan, kNan};
    tr.visible[t] = t == frame ? 1 : (visible(hit.surface, hit.local, t) ? 1 : 0);
  }
  return tr;
}

TrackSet Scene::gt_tracks(const std::vector<TrackQuery>& queries) const {
  TrackSet out;
  out.frames = spec_.frames;
  out.tracks.reserve(queries.size());
  for (const auto& q : queries) out.tracks.push_back(gt_track(q.frame, q.pixel));
  return out;
}

std::vector<TrackQuery> default_queries(const SceneSpec& spec, int stride) {
  std::vector<TrackQuery> out = lattice_queries(0, spec.width, spec.height, stride);
  if (spec.frames > 2) {
    const auto mid = lattice_queries(spec.frames / 2, spec.width, spec.height, stride);
    out.insert(out.end(), mid.begin(), mid.end());
  }
  return out;
}

std::vector<TrackQuery> surface_queries(const Scene& scene, int frame, int surface, int stride) {
  std::vector<TrackQuery> out;
  for (const auto& q : lattice_queries(frame, scene.spec().width, scene.spec().height, stride)) {
    if (scene.raycast(frame, q.pixel).surface == surface) out.push_back(q);
  }
  return out;
}

namespace {

std::vector<double> smoothed_noise(std::mt19937_64& rng, int width, int height, int radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(width) * height);
  for (auto& v : raw) v = normal(rng);
  if (radius == 0) return raw;
  std::vector<double> out(raw.size(), 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int yy = std::max(0, y - radius); yy <= std::min(height - 1, y + radius); ++yy) {
        for (int xx = std::max(0, x - radius); xx <= std::min(width - 1, x + radius); ++xx) {
          sum += raw[static_cast<std::size_t>(yy) * width + xx];
          ++n;
        }
      }
      // Mean of n unit normals has standard deviation 1/sqrt(n).
      out[static_cast<std::size_t>(y) * width + x] = sum / std::sqrt(static_cast<double>(n));
    }
  }
  return out;
}

}  // namespace

SynthData generate(const Scene& scene, const std::vector<TrackQuery>& queries) {
  const SceneSpec& spec = scene.spec();
  const CameraIntrinsics& K = scene.intrinsics();
  const int T = spec.frames, W = spec.width, H = spec.height;
  const std::size_t npix = static_cast<std::size_t>(W) * H;
  SynthData out;

  GroundTruth& gt = out.gt;
  gt.frames = T;
  gt.width = W;
  gt.height = H;
  gt.K = K;
  gt.depth.reserve(npix * T);
  std::vector<std::vector<SurfaceHit>> hits(T, std::vector<SurfaceHit>(npix));
  for (int t = 0; t < T; ++t) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const SurfaceHit h = scene.raycast(t, Pixel2{double(x), double(y)});
        hits[t][static_cast<std::size_t>(y) * W + x] = h;
        gt.depth.push_back(h.depth);
      }
    }
  }
  gt.tracks = scene.gt_tracks(queries);
  for (const auto& q : queries) {
    const SurfaceHit h = scene.raycast(q.frame, q.pixel);
    std::vector<float> d(spec.feature_dim);
    scene.descriptor(h.surface, h.local, d.data());
    gt.descriptors.push_back(std::move(d));
  }

  std::mt19937_64 flow_rng = stream_rng(spec.seed, kFlowStream);
  std::normal_distribution<double> flow_noise(0.0, 1.0);
  for (int i = 0; i < T; ++i) {
    // Visibility of every pixel's surface point of frame i across all frames.
    std::vector<std::uint8_t> vis(npix * T);
    std::vector<Pixel2> proj(npix * T);
    for (std::size_t k = 0; k < npix; ++k) {
      const SurfaceHit& h = hits[i][k];
      for (int t = 0; t < T; ++t) {
        const Eigen::Vector3d P = scene.world_point(h.surface, h.local, t);
        const auto q = try_project(Point3{P.x(), P.y(), P.z()}, K);
        proj[k * T + t] = q ? *q : Pixel2{kNan, kNan};
        vis[k * T + t] = t == i ? 1 : (scene.visible(h.surface, h.local, t) ? 1 : 0);
      }
    }
    for (int j = std::max(0, i - spec.flow_window); j <= std::min(T - 1, i + spec.flow_window); ++j) {
      if (j == i) continue;
      FlowField f;
      f.from = i;
      f.to = j;
      f.width = W;
      f.height = H;
      f.data.assign(npix * 3, 0.0f);
      const int lo = std::min(i, j), hi = std::max(i, j);
      for (std::size_t k = 0; k < npix; ++k) {
        bool valid = true;
        for (int t = lo; t <= hi && valid; ++t) valid = vis[k * T + t] != 0;
        const double x = static_cast<double>(k % W);
        const double y = static_cast<double>(k / W);
        double du = proj[k * T + j].u - x;
        double dv = proj[k * T + j].v - y;
        if (spec.sigma_flow > 0.0) {
          du += spec.sigma_flow * flow_noise(flow_rng);
          dv += spec.sigma_flow * flow_noise(flow_rng);
        }
        if (!valid) du = dv = 0.0;
        f.data[3 * k] = static_cast<float>(du);
        f.data[3 * k + 1] = static_cast<float>(dv);
        f.data[3 * k + 2] = valid ? 1.0f : 0.0f;
      }
      out.flows.add(std::move(f));
    }
  }

  std::mt19937_64 depth_rng = stream_rng(spec.seed, kDepthStream);
  out.init_depth.resize(npix * T);
  for (int t = 0; t < T; ++t) {
    std::vector<double> noise;
    if (spec.sigma_depth > 0.0) noise = smoothed_noise(depth_rng, W, H, spec.depth_noise_radius);
    for (std::size_t k = 0; k < npix; ++k) {
      const double d = gt.depth[t * npix + k];
      const double factor = noise.empty() ? 1.0 : std::max(0.05, 1.0 + spec.sigma_depth * noise[k]);
      out.init_depth[t * npix + k] = d * factor;
    }
  }

  FeatureMapStack& fm = out.features;
  fm.frames = T;
  fm.stride = spec.feature_stride;
  fm.width = W / spec.feature_stride;
  fm.height = H / spec.feature_stride;
  fm.dim = spec.feature_dim;
  fm.data.assign(static_cast<std::size_t>(T) * fm.width * fm.height * fm.dim, 0.0f);
  std::mt19937_64 feat_rng = stream_rng(spec.seed, kFeatureStream);
  std::normal_distribution<double> feat_noise(0.0, 1.0);
  const double per_component = spec.sigma_feat / std::sqrt(static_cast<double>(fm.dim));
  std::vector<float> d(fm.dim);
  for (int t = 0; t < T; ++t) {
    for (int cy = 0; cy < fm.height; ++cy) {
      for (int cx = 0; cx < fm.width; ++cx) {
        const SurfaceHit h = scene.raycast(t, fm.cell_center(cx, cy));
        scene.descriptor(h.surface, h.local, d.data());
        double norm = 0.0;
        for (int c = 0; c < fm.dim; ++c) {
          if (spec.sigma_feat > 0.0) d[c] = static_cast<float>(d[c] + per_component * feat_noise(feat_rng));
          norm += static_cast<double>(d[c]) * d[c];
        }
        norm = std::sqrt(norm);
        float* dst = fm.data.data() + ((static_cast<std::size_t>(t) * fm.height + cy) * fm.width + cx) * fm.dim;
        for (int c = 0; c < fm.dim; ++c) dst[c] = spec.sigma_feat > 0.0 ? static_cast<float>(d[c] / norm) : d[c];
      }
    }
  }
  return out;
}

SynthData generate(const Scene& scene) { return generate(scene, default_queries(scene.spec())); }

EvalReport gt_metrics_reference(const GroundTruth& gt, const TrackSet& pred, const FlowSet* flows) {
  return evaluate_tracks(pred, gt.tracks, flows);
}

}  // namespace cadex::synth
