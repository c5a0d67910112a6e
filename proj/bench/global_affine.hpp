#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cadex/diff.hpp"
#include "cadex/field.hpp"
#include "cadex/geometry.hpp"

namespace cadex::bench {

struct GlobalAffineConfig {
  int n_blocks = 6;
  int latent_dim = 128;
  int hidden_width = 256;
  int hidden_layers = 2;

  /// Parameters of a field with this config over `frames` frames.
  std::size_t parameter_count(int frames) const;
  /// Widest hidden layer whose field does not exceed `target` parameters.
  static GlobalAffineConfig matched(std::size_t target, int frames, int n_blocks = 6, int latent_dim = 128,
                                    int hidden_layers = 2);
};

/// Coupling flow with a global per-frame latent code and one MLP per block
/// predicting an affine map (log-scale, shift) of the changed coordinate.
class GlobalAffineField {
 public:
  struct BlockTrace {
    TinyMLP::Trace mlp;
    std::vector<int> frame;
    std::vector<double> point;  // centered input of the affine map
  };
  struct Trace {
    std::vector<BlockTrace> blocks;
    bool inverse = false;
  };

  GlobalAffineField(const GlobalAffineConfig& config, int frames, const SceneBounds& bounds, std::uint64_t seed);

  const SceneBounds& bounds() const { return bounds_; }
  int frames() const { return frames_; }
  double time_coordinate(int frame) const;
  void register_parameters(diff::ParameterTape& tape);
  std::size_t parameter_count() const;

  void to_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm, Trace* trace) const;
  void from_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm, Trace* trace) const;
  void backward(const Trace& trace, CoordBatch& d_coords, diff::GradientBuffer& grads) const;

 private:
  void apply_block(int k, CoordBatch& coords, const std::vector<int>& frame, bool inverse, BlockTrace* trace) const;
  void backward_block(int k, const BlockTrace& trace, bool inverse, CoordBatch& d_coords,
                      diff::GradientBuffer& grads) const;
  std::vector<int> frame_indices(std::span<const double> t_norm) const;

  GlobalAffineConfig config_;
  int frames_ = 0;
  SceneBounds bounds_;
  diff::Parameter latent_;  // frames x latent_dim
  std::vector<TinyMLP> mlps_;
};

}  // namespace cadex::bench
