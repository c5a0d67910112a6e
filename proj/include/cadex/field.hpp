#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "cadex/diff.hpp"
#include "cadex/geometry.hpp"
#include "cadex/plf.hpp"

namespace cadex {

/// Coordinates of a batch, one column per sample.
using CoordBatch = Eigen::Matrix<double, 3, Eigen::Dynamic>;

struct FieldConfig {
  int n_blocks = 6;
  /// Control points per monotone map (even; half on each side of the origin).
  int control_points = 8;
  int hidden_width = 64;
  int hidden_layers = 2;
  int temporal_features = 16;
  /// Temporal level sizes as fractions of the frame count (ceil, at least 2).
  std::vector<double> temporal_fractions{1.0 / 20.0, 1.0 / 4.0, 13.0 / 20.0};
  std::vector<int> spatial_resolutions{12, 96};
  int spatial_features = 32;
  /// Grid features start uniform in [-init_scale, init_scale].
  double init_scale = 1e-2;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  int temporal_dim() const { return temporal_features * static_cast<int>(temporal_fractions.size()); }
  int spatial_dim() const { return spatial_features * static_cast<int>(spatial_resolutions.size()); }
  int latent_dim() const { return temporal_dim() + spatial_dim(); }
  int mlp_input_dim() const { return 2 + latent_dim(); }
  int mlp_output_dim() const { return 2 * control_points + 2; }
};

/// Number of entries of each temporal level for a clip of `frames` frames.
std::vector<int> temporal_resolutions(const FieldConfig& config, int frames);

/// Interpolation footprint of one 1-D lookup: lower index and right weight.
struct Lerp1 {
  int index = 0;
  double weight = 0.0;
};

/// Locates `x` in [0,1] on a vertex-aligned axis with `res` vertices. Cell
/// edges belong to the cell on their right; x = 1 lands in the last cell.
Lerp1 locate_vertex_axis(double x, int res);

/// Shared multi-resolution 1-D feature grid over normalized time.
class TemporalGrid {
 public:
  TemporalGrid() = default;
  TemporalGrid(std::vector<int> resolutions, int features);

  const std::vector<int>& resolutions() const { return resolutions_; }
  int features() const { return features_; }
  int dim() const { return features_ * static_cast<int>(resolutions_.size()); }
  diff::Parameter& data() { return data_; }
  const diff::Parameter& data() const { return data_; }
  std::size_t level_offset(int level) const { return offsets_[static_cast<std::size_t>(level)]; }

  /// Writes dim() features; `footprint` (size levels) receives the lookup.
  void query(double t_norm, std::span<double> out, Lerp1* footprint = nullptr) const;
  /// Scatters d(out) back onto the grid entries of a recorded footprint.
  void scatter(const Lerp1* footprint, std::span<const double> d_out, std::span<double> grad) const;

 private:
  std::vector<int> resolutions_;
  std::vector<std::size_t> offsets_;
  int features_ = 0;
  diff::Parameter data_;
};

/// Multi-resolution 2-D feature grid over the unit square.
class SpatialGrid {
 public:
  struct Footprint {
    Lerp1 a;
    Lerp1 b;
  };

  SpatialGrid() = default;
  SpatialGrid(std::vector<int> resolutions, int features);

  const std::vector<int>& resolutions() const { return resolutions_; }
  int features() const { return features_; }
  int dim() const { return features_ * static_cast<int>(resolutions_.size()); }
  diff::Parameter& data() { return data_; }
  const diff::Parameter& data() const { return data_; }
  std::size_t level_offset(int level) const { return offsets_[static_cast<std::size_t>(level)]; }

  /// Bilinear lookup at (a, b) in [0,1]^2; writes dim() features.
  void query(double a, double b, std::span<double> out, Footprint* footprint = nullptr) const;
  void scatter(const Footprint* footprint, std::span<const double> d_out, std::span<double> grad) const;
  /// Accumulates d(loss)/da and d(loss)/db through the interpolation weights.
  void coordinate_gradient(const Footprint* footprint, std::span<const double> d_out, double* d_a,
                           double* d_b) const;

 private:
  std::vector<int> resolutions_;
  std::vector<std::size_t> offsets_;
  int features_ = 0;
  diff::Parameter data_;
};

/// Dense layers with ReLU between them; the last layer is linear.
class TinyMLP {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    diff::Parameter weight;  // row-major out x in
    diff::Parameter bias;
  };

  /// Activations recorded by a batched forward pass.
  struct Trace {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;  // pre-activations of each hidden layer
    Eigen::MatrixXd output;
  };

  TinyMLP() = default;
  TinyMLP(int in, int hidden, int hidden_layers, int out);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  int input_dim() const { return layers_.front().in; }
  int output_dim() const { return layers_.back().out; }

  /// Consumes `trace.input` (in x N) and fills the remaining fields.
  void forward(Trace& trace) const;
  /// Given d(loss)/d(output) (out x N), accumulates parameter gradients and
  /// returns d(loss)/d(input).
  Eigen::MatrixXd backward(const Trace& trace, const Eigen::MatrixXd& d_output,
                           diff::GradientBuffer& grads) const;

 private:
  std::vector<Layer> layers_;
};

/// One invertible coupling step: a single coordinate passes through a
/// monotone piecewise-linear map whose shape depends only on the other two
/// coordinates and the time.
class CouplingBlock {
 public:
  /// Per-batch record needed for the reverse pass.
  struct Trace {
    bool inverse = false;
    int count = 0;
    TinyMLP::Trace mlp;
    std::vector<Lerp1> temporal;                    // levels x N
    std::vector<SpatialGrid::Footprint> spatial;    // levels x N
    std::vector<std::uint8_t> clamped;              // 2 x N, per unchanged coordinate
    Eigen::MatrixXd alpha;                          // B x N
    Eigen::MatrixXd beta;                           // B x N
    std::vector<double> point;                      // centered pre-image per sample
    std::vector<int> segment;
  };

  CouplingBlock() = default;
  CouplingBlock(int axis, const FieldConfig& config);

  int axis() const { return axis_; }
  /// The two coordinates the block conditions on, in increasing axis order.
  std::array<int, 2> unchanged_axes() const;
  int control_points() const { return control_points_; }
  SpatialGrid& spatial() { return spatial_; }
  const SpatialGrid& spatial() const { return spatial_; }
  TinyMLP& mlp() { return mlp_; }
  const TinyMLP& mlp() const { return mlp_; }

  /// Applies the block in place (forward or inverse direction).
  void apply(CoordBatch& coords, std::span<const double> t_norm, const TemporalGrid& temporal,
             bool inverse, Trace* trace) const;
  /// On entry d_coords holds d(loss)/d(output); on exit d(loss)/d(input).
  void backward(const Trace& trace, CoordBatch& d_coords, const TemporalGrid& temporal,
                diff::GradientBuffer& grads) const;

  /// The monotone map this block applies at one location and time.
  MonotonePiecewiseLinear map_at(double a, double b, double t_norm, const TemporalGrid& temporal) const;

 private:
  /// Builds the MLP input matrix for a batch and records lookups.
  void latent_batch(const CoordBatch& coords, std::span<const double> t_norm,
                    const TemporalGrid& temporal, Trace& trace) const;

  int axis_ = 2;
  int control_points_ = 8;
  SpatialGrid spatial_;
  TinyMLP mlp_;
};

/// Latent code of a block at unchanged coordinates (a, b) and normalized time:
/// temporal levels followed by spatial levels.
std::vector<double> latent_query(const CouplingBlock& block, const TemporalGrid& temporal, double a,
                                 double b, double t_norm);

/// Per-frame bijections between camera-frame points and a shared canonical space.
class DeformationField {
 public:
  struct Trace {
    std::vector<CouplingBlock::Trace> blocks;
    bool inverse = false;
  };

  DeformationField() = default;
  /// Near-identity initialization; grid features drawn from `seed`.
  DeformationField(const FieldConfig& config, int frames, const SceneBounds& bounds, std::uint64_t seed);

  const FieldConfig& config() const { return config_; }
  int frames() const { return frames_; }
  const SceneBounds& bounds() const { return bounds_; }
  TemporalGrid& temporal() { return temporal_; }
  const TemporalGrid& temporal() const { return temporal_; }
  std::vector<CouplingBlock>& blocks() { return blocks_; }
  const std::vector<CouplingBlock>& blocks() const { return blocks_; }

  /// Registers every array under the owner name "field".
  void register_parameters(diff::ParameterTape& tape);
  /// Every parameter array in registration order.
  std::vector<diff::Parameter*> parameters();
  std::vector<const diff::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  double time_coordinate(int frame) const;

  /// Batched map in normalized coordinates: forward runs blocks first to last,
  /// inverse runs them last to first with inverted maps.
  void to_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm, Trace* trace) const;
  void from_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm, Trace* trace) const;
  void backward(const Trace& trace, CoordBatch& d_coords, diff::GradientBuffer& grads) const;

  /// Camera-frame versions of the per-frame maps.
  Point3 to_canonical(const Point3& x, int frame) const;
  Point3 from_canonical(const Point3& u, int frame) const;

 private:
  void check_frame(int frame) const;

  FieldConfig config_;
  int frames_ = 0;
  SceneBounds bounds_;
  TemporalGrid temporal_;
  std::vector<CouplingBlock> blocks_;
};

}  // namespace cadex
