#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "cadex/data.hpp"
#include "cadex/geometry.hpp"
#include "cadex/metrics.hpp"
#include "cadex/tracker.hpp"

namespace cadex::synth {

/// Rigid ellipsoid with a parametric motion. Center at frame t:
/// center + velocity * t + amplitude * sin(omega * t + phase). Orientation:
/// rotation about `axis` by angle + spin * t.
struct Primitive {
  Eigen::Vector3d semi_axes{0.3, 0.3, 0.3};
  Eigen::Vector3d center{0.0, 0.0, 3.0};
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
  double omega = 0.0;
  double phase = 0.0;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
  double angle = 0.0;
  double spin = 0.0;
};

struct SceneSpec {
  std::string name = "desk";
  int frames = 24;
  int width = 64;
  int height = 64;
  double fov_deg = kDefaultFovDegrees;
  /// Fronto-parallel background plane.
  double background_depth = 4.0;
  std::vector<Primitive> primitives;
  double sigma_flow = 0.5;
  double sigma_depth = 0.05;
  double sigma_feat = 0.1;
  int flow_window = 12;
  int feature_stride = 4;
  int feature_dim = 16;
  /// Weight of the descriptor component shared by every surface.
  double feature_shared = 0.75;
  /// Radius of the box filter applied to the multiplicative depth noise.
  int depth_noise_radius = 2;
  /// Every primitive keeps at least this fraction of its surface in view.
  double min_frustum_fraction = 0.8;
  std::uint64_t seed = 0;

  /// Three moving ellipsoids over a background plane.
  static SceneSpec desk();
  /// A small ellipsoid hidden behind a passing occluder for six frames.
  static SceneSpec occlusion();
  /// Desk geometry with every primitive at rest.
  static SceneSpec still();
  SceneSpec& without_noise();

  /// Throws ConfigError for invalid sizes or noise levels.
  void validate() const;
};

/// Surface 0 is the background; surface k + 1 is primitive k.
struct SurfaceHit {
  int surface = -1;
  Eigen::Vector3d local = Eigen::Vector3d::Zero();
  double depth = 0.0;
};

class Scene {
 public:
  /// Throws DataError when a primitive violates the frustum invariant.
  explicit Scene(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  const CameraIntrinsics& intrinsics() const { return K_; }
  int surfaces() const { return static_cast<int>(spec_.primitives.size()) + 1; }

  Eigen::Matrix3d rotation(int primitive, int t) const;
  Eigen::Vector3d center(int primitive, int t) const;
  /// Camera-frame position of a surface point at frame t.
  Eigen::Vector3d world_point(int surface, const Eigen::Vector3d& local, int t) const;
  /// First surface along the ray through p at frame t.
  SurfaceHit raycast(int t, const Pixel2& p) const;
  /// True when the surface point projects into the image and is the first hit
  /// along its ray.
  bool visible(int surface, const Eigen::Vector3d& local, int t) const;
  /// Visibility by testing every surface independently (z-buffer over all
  /// candidates); used to cross-check raycast().
  bool visible_bruteforce(int surface, const Eigen::Vector3d& local, int t) const;
  /// Fraction of sampled surface points of a primitive inside the frustum.
  double frustum_fraction(int primitive, int t) const;

  /// GT depth at pixel centers, height * width row-major.
  std::vector<double> depth_frame(int t) const;
  /// Persistent unit descriptor of a surface point.
  void descriptor(int surface, const Eigen::Vector3d& local, float* out) const;

  /// Exact track of the surface point seen at pixel p of `frame`.
  Track gt_track(int frame, const Pixel2& p) const;
  TrackSet gt_tracks(const std::vector<TrackQuery>& queries) const;
  /// 3D camera-frame states of the same track, one per frame.
  std::vector<Eigen::Vector3d> gt_states(int frame, const Pixel2& p) const;

 private:
  SceneSpec spec_;
  CameraIntrinsics K_;
  struct Texture {
    Eigen::VectorXd base;
    Eigen::MatrixXd freq;  // dim x 3
    Eigen::VectorXd offset;
  };
  std::vector<Texture> textures_;
  Eigen::VectorXd shared_;
};

struct GroundTruth {
  int frames = 0;
  int width = 0;
  int height = 0;
  CameraIntrinsics K;
  std::vector<double> depth;  // frames * height * width
  TrackSet tracks;
  /// Persistent descriptor per track, feature_dim floats each.
  std::vector<std::vector<float>> descriptors;
};

struct SynthData {
  GroundTruth gt;
  FlowSet flows;
  std::vector<double> init_depth;
  FeatureMapStack features;
};

/// Query lattice of the given frames.
std::vector<TrackQuery> default_queries(const SceneSpec& spec, int stride = 4);
/// Lattice pixels of `frame` whose first hit is `surface`.
std::vector<TrackQuery> surface_queries(const Scene& scene, int frame, int surface, int stride = 1);

/// Emits flow for every ordered frame pair within the window, noisy initial
/// depth, descriptor maps and ground truth for `queries`. Flow is invalid
/// wherever the point is hidden at any frame between source and target.
SynthData generate(const Scene& scene, const std::vector<TrackQuery>& queries);
SynthData generate(const Scene& scene);

/// Evaluates predictions against GT tracks (query frames excluded).
EvalReport gt_metrics_reference(const GroundTruth& gt, const TrackSet& pred, const FlowSet* flows = nullptr);

}  // namespace cadex::synth
