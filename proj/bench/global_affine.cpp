#include "global_affine.hpp"

#include <cmath>
#include <random>

#include "cadex/errors.hpp"

namespace cadex::bench {

namespace {

constexpr int kAxisCycle[3] = {2, 1, 0};

std::array<int, 2> unchanged(int axis) {
  if (axis == 2) return {0, 1};
  if (axis == 1) return {0, 2};
  return {1, 2};
}

void fill_uniform(std::vector<double>& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& x : v) x = u(rng);
}

}  // namespace

std::size_t GlobalAffineConfig::parameter_count(int frames) const {
  const std::size_t w = hidden_width;
  std::size_t per_block = (2 + latent_dim) * w + w;
  per_block += static_cast<std::size_t>(hidden_layers - 1) * (w * w + w);
  per_block += 2 * w + 2;
  return per_block * n_blocks + static_cast<std::size_t>(frames) * latent_dim;
}

GlobalAffineConfig GlobalAffineConfig::matched(std::size_t target, int frames, int n_blocks, int latent_dim,
                                               int hidden_layers) {
  GlobalAffineConfig c{n_blocks, latent_dim, 1, hidden_layers};
  while (true) {
    GlobalAffineConfig next = c;
    ++next.hidden_width;
    if (next.parameter_count(frames) > target) return c;
    c = next;
  }
}

GlobalAffineField::GlobalAffineField(const GlobalAffineConfig& config, int frames, const SceneBounds& bounds,
                                     std::uint64_t seed)
    : config_(config), frames_(frames), bounds_(bounds) {
  if (frames < 1 || config.n_blocks < 1 || config.latent_dim < 1 || config.hidden_width < 1) {
    throw ConfigError("GlobalAffineField: invalid configuration");
  }
  std::mt19937_64 rng(seed);
  latent_ = diff::Parameter("baseline.latent", "baseline", diff::ParamGroup::Field,
                            static_cast<std::size_t>(frames) * config.latent_dim);
  fill_uniform(latent_.value, 1e-2, rng);
  for (int k = 0; k < config.n_blocks; ++k) {
    TinyMLP mlp(2 + config.latent_dim, config.hidden_width, config.hidden_layers, 2);
    auto& layers = mlp.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight.name = "baseline.block" + std::to_string(k) + ".mlp" + std::to_string(l) + ".weight";
      layers[l].bias.name = "baseline.block" + std::to_string(k) + ".mlp" + std::to_string(l) + ".bias";
      if (l + 1 < layers.size()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layers[l].in));
        fill_uniform(layers[l].weight.value, bound, rng);
        fill_uniform(layers[l].bias.value, bound, rng);
      } else {
        // Zero output layer: every block starts as the identity.
        std::fill(layers[l].weight.value.begin(), layers[l].weight.value.end(), 0.0);
        std::fill(layers[l].bias.value.begin(), layers[l].bias.value.end(), 0.0);
      }
    }
    mlps_.push_back(std::move(mlp));
  }
}

double GlobalAffineField::time_coordinate(int frame) const {
  return frames_ > 1 ? static_cast<double>(frame) / (frames_ - 1) : 0.0;
}

void GlobalAffineField::register_parameters(diff::ParameterTape& tape) {
  tape.add(latent_);
  for (auto& mlp : mlps_) {
    for (auto& layer : mlp.layers()) {
      tape.add(layer.weight);
      tape.add(layer.bias);
    }
  }
}

std::size_t GlobalAffineField::parameter_count() const { return config_.parameter_count(frames_); }

std::vector<int> GlobalAffineField::frame_indices(std::span<const double> t_norm) const {
  std::vector<int> out(t_norm.size());
  for (std::size_t s = 0; s < t_norm.size(); ++s) {
    out[s] = std::clamp(static_cast<int>(std::lround(t_norm[s] * (frames_ - 1))), 0, frames_ - 1);
  }
  return out;
}

void GlobalAffineField::apply_block(int k, CoordBatch& coords, const std::vector<int>& frame, bool inverse,
                                    BlockTrace* trace) const {
  const int axis = kAxisCycle[k % 3];
  const auto keep = unchanged(axis);
  const Eigen::Index n = coords.cols();
  const int L = config_.latent_dim;
  TinyMLP::Trace local;
  TinyMLP::Trace& mt = trace ? trace->mlp : local;
  mt.input.resize(2 + L, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    mt.input(0, s) = coords(keep[0], s);
    mt.input(1, s) = coords(keep[1], s);
    const double* z = latent_.value.data() + static_cast<std::size_t>(frame[s]) * L;
    for (int c = 0; c < L; ++c) mt.input(2 + c, s) = z[c];
  }
  mlps_[k].forward(mt);
  if (trace) {
    trace->frame = frame;
    trace->point.resize(n);
  }
  for (Eigen::Index s = 0; s < n; ++s) {
    const double log_k = mt.output(0, s);
    const double shift = mt.output(1, s);
    const double c = coords(axis, s) - 0.5;
    const double out = inverse ? (c - shift) * std::exp(-log_k) : std::exp(log_k) * c + shift;
    if (trace) trace->point[s] = inverse ? out : c;
    coords(axis, s) = out + 0.5;
  }
}

void GlobalAffineField::to_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm,
                                                Trace* trace) const {
  const auto frame = frame_indices(t_norm);
  if (trace) {
    trace->inverse = false;
    trace->blocks.assign(mlps_.size(), {});
  }
  for (int k = 0; k < static_cast<int>(mlps_.size()); ++k) {
    apply_block(k, coords, frame, false, trace ? &trace->blocks[k] : nullptr);
  }
}

void GlobalAffineField::from_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm,
                                                  Trace* trace) const {
  const auto frame = frame_indices(t_norm);
  if (trace) {
    trace->inverse = true;
    trace->blocks.assign(mlps_.size(), {});
  }
  for (int k = static_cast<int>(mlps_.size()); k-- > 0;) {
    apply_block(k, coords, frame, true, trace ? &trace->blocks[k] : nullptr);
  }
}

void GlobalAffineField::backward_block(int k, const BlockTrace& trace, bool inverse, CoordBatch& d_coords,
                                       diff::GradientBuffer& grads) const {
  const int axis = kAxisCycle[k % 3];
  const auto keep = unchanged(axis);
  const Eigen::Index n = d_coords.cols();
  const int L = config_.latent_dim;
  Eigen::MatrixXd d_out(2, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double log_k = trace.mlp.output(0, s);
    const double g = d_coords(axis, s);
    if (inverse) {
      // x = (y - b) exp(-s): dx/dy = exp(-s), dx/db = -exp(-s), dx/ds = -x
      const double e = std::exp(-log_k);
      d_out(0, s) = -g * trace.point[s];
      d_out(1, s) = -g * e;
      d_coords(axis, s) = g * e;
    } else {
      // y = exp(s) x + b
      const double e = std::exp(log_k);
      d_out(0, s) = g * e * trace.point[s];
      d_out(1, s) = g;
      d_coords(axis, s) = g * e;
    }
  }
  const Eigen::MatrixXd d_in = mlps_[k].backward(trace.mlp, d_out, grads);
  std::span<double> g_latent = grads[latent_.slot];
  for (Eigen::Index s = 0; s < n; ++s) {
    d_coords(keep[0], s) += d_in(0, s);
    d_coords(keep[1], s) += d_in(1, s);
    double* gz = g_latent.data() + static_cast<std::size_t>(trace.frame[s]) * L;
    for (int c = 0; c < L; ++c) gz[c] += d_in(2 + c, s);
  }
}

void GlobalAffineField::backward(const Trace& trace, CoordBatch& d_coords, diff::GradientBuffer& grads) const {
  if (trace.inverse) {
    for (int k = 0; k < static_cast<int>(mlps_.size()); ++k) backward_block(k, trace.blocks[k], true, d_coords, grads);
  } else {
    for (int k = static_cast<int>(mlps_.size()); k-- > 0;) {
      backward_block(k, trace.blocks[k], false, d_coords, grads);
    }
  }
}

}  // namespace cadex::bench
