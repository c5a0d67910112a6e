#include "cadex/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "cadex/errors.hpp"

namespace cadex {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kAxisCycle[3] = {2, 1, 0};

void fill_uniform(std::vector<double>& data, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& x : data) x = dist(rng);
}

std::span<double> slot_or_throw(diff::GradientBuffer& grads, const diff::Parameter& p) {
  if (p.slot < 0 || static_cast<std::size_t>(p.slot) >= grads.size()) {
    throw std::logic_error("parameter '" + p.name + "' is not registered on the gradient tape");
  }
  return grads[p.slot];
}

}  // namespace

void FieldConfig::validate() const {
  if (n_blocks < 1) throw ConfigError("field.n_blocks must be >= 1");
  if (control_points < 2 || control_points % 2 != 0) {
    throw ConfigError("field.control_points must be even and >= 2");
  }
  if (hidden_width < 1 || hidden_layers < 1) throw ConfigError("field MLP needs hidden layers of width >= 1");
  if (temporal_features < 1 || spatial_features < 1) throw ConfigError("field feature sizes must be >= 1");
  if (temporal_fractions.empty()) throw ConfigError("field.temporal_fractions must not be empty");
  for (double f : temporal_fractions) {
    if (!(f > 0.0)) throw ConfigError("field.temporal_fractions must be positive");
  }
  if (spatial_resolutions.empty()) throw ConfigError("field.spatial_resolutions must not be empty");
  for (int r : spatial_resolutions) {
    if (r < 2) throw ConfigError("field.spatial_resolutions entries must be >= 2");
  }
  if (!(init_scale >= 0.0)) throw ConfigError("field.init_scale must be >= 0");
}

std::vector<int> temporal_resolutions(const FieldConfig& config, int frames) {
  std::vector<int> res;
  for (double f : config.temporal_fractions) {
    res.push_back(std::max(2, static_cast<int>(std::ceil(f * frames - 1e-9))));
  }
  return res;
}

Lerp1 locate_vertex_axis(double x, int res) {
  const double s = x * (res - 1);
  int i = static_cast<int>(std::floor(s));
  i = std::clamp(i, 0, res - 2);
  return Lerp1{i, s - i};
}

// ---------------------------------------------------------------- TemporalGrid

TemporalGrid::TemporalGrid(std::vector<int> resolutions, int features)
    : resolutions_(std::move(resolutions)), features_(features) {
  std::size_t total = 0;
  for (int r : resolutions_) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(r) * features_;
  }
  data_ = diff::Parameter("field.temporal", "field", diff::ParamGroup::Field, total);
}

void TemporalGrid::query(double t_norm, std::span<double> out, Lerp1* footprint) const {
  const double* g = data_.value.data();
  for (std::size_t l = 0; l < resolutions_.size(); ++l) {
    const Lerp1 fp = locate_vertex_axis(t_norm, resolutions_[l]);
    if (footprint) footprint[l] = fp;
    const double* e0 = g + offsets_[l] + static_cast<std::size_t>(fp.index) * features_;
    const double* e1 = e0 + features_;
    double* o = out.data() + l * features_;
    const double w = fp.weight;
    for (int f = 0; f < features_; ++f) o[f] = (1.0 - w) * e0[f] + w * e1[f];
  }
}

void TemporalGrid::scatter(const Lerp1* footprint, std::span<const double> d_out,
                           std::span<double> grad) const {
  for (std::size_t l = 0; l < resolutions_.size(); ++l) {
    const Lerp1& fp = footprint[l];
    double* e0 = grad.data() + offsets_[l] + static_cast<std::size_t>(fp.index) * features_;
    double* e1 = e0 + features_;
    const double* d = d_out.data() + l * features_;
    const double w = fp.weight;
    for (int f = 0; f < features_; ++f) {
      e0[f] += (1.0 - w) * d[f];
      e1[f] += w * d[f];
    }
  }
}

// ----------------------------------------------------------------- SpatialGrid

SpatialGrid::SpatialGrid(std::vector<int> resolutions, int features)
    : resolutions_(std::move(resolutions)), features_(features) {
  std::size_t total = 0;
  for (int r : resolutions_) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(r) * r * features_;
  }
  data_ = diff::Parameter("", "field", diff::ParamGroup::Field, total);
}

void SpatialGrid::query(double a, double b, std::span<double> out, Footprint* footprint) const {
  const double* g = data_.value.data();
  for (std::size_t l = 0; l < resolutions_.size(); ++l) {
    const int res = resolutions_[l];
    const Footprint fp{locate_vertex_axis(a, res), locate_vertex_axis(b, res)};
    if (footprint) footprint[l] = fp;
    const std::size_t row = static_cast<std::size_t>(res) * features_;
    const double* c00 = g + offsets_[l] + fp.b.index * row + static_cast<std::size_t>(fp.a.index) * features_;
    const double* c10 = c00 + features_;
    const double* c01 = c00 + row;
    const double* c11 = c01 + features_;
    const double wa = fp.a.weight;
    const double wb = fp.b.weight;
    const double w00 = (1 - wa) * (1 - wb), w10 = wa * (1 - wb), w01 = (1 - wa) * wb, w11 = wa * wb;
    double* o = out.data() + l * features_;
    for (int f = 0; f < features_; ++f) o[f] = w00 * c00[f] + w10 * c10[f] + w01 * c01[f] + w11 * c11[f];
  }
}

void SpatialGrid::scatter(const Footprint* footprint, std::span<const double> d_out,
                          std::span<double> grad) const {
  for (std::size_t l = 0; l < resolutions_.size(); ++l) {
    const int res = resolutions_[l];
    const Footprint& fp = footprint[l];
    const std::size_t row = static_cast<std::size_t>(res) * features_;
    double* c00 = grad.data() + offsets_[l] + fp.b.index * row + static_cast<std::size_t>(fp.a.index) * features_;
    double* c10 = c00 + features_;
    double* c01 = c00 + row;
    double* c11 = c01 + features_;
    const double wa = fp.a.weight;
    const double wb = fp.b.weight;
    const double w00 = (1 - wa) * (1 - wb), w10 = wa * (1 - wb), w01 = (1 - wa) * wb, w11 = wa * wb;
    const double* d = d_out.data() + l * features_;
    for (int f = 0; f < features_; ++f) {
      c00[f] += w00 * d[f];
      c10[f] += w10 * d[f];
      c01[f] += w01 * d[f];
      c11[f] += w11 * d[f];
    }
  }
}

void SpatialGrid::coordinate_gradient(const Footprint* footprint, std::span<const double> d_out,
                                      double* d_a, double* d_b) const {
  const double* g = data_.value.data();
  for (std::size_t l = 0; l < resolutions_.size(); ++l) {
    const int res = resolutions_[l];
    const Footprint& fp = footprint[l];
    const std::size_t row = static_cast<std::size_t>(res) * features_;
    const double* c00 = g + offsets_[l] + fp.b.index * row + static_cast<std::size_t>(fp.a.index) * features_;
    const double* c10 = c00 + features_;
    const double* c01 = c00 + row;
    const double* c11 = c01 + features_;
    const double wa = fp.a.weight;
    const double wb = fp.b.weight;
    const double* d = d_out.data() + l * features_;
    double sa = 0.0;
    double sb = 0.0;
    for (int f = 0; f < features_; ++f) {
      sa += d[f] * ((1 - wb) * (c10[f] - c00[f]) + wb * (c11[f] - c01[f]));
      sb += d[f] * ((1 - wa) * (c01[f] - c00[f]) + wa * (c11[f] - c10[f]));
    }
    *d_a += sa * (res - 1);
    *d_b += sb * (res - 1);
  }
}

// --------------------------------------------------------------------- TinyMLP

TinyMLP::TinyMLP(int in, int hidden, int hidden_layers, int out) {
  int prev = in;
  for (int l = 0; l <= hidden_layers; ++l) {
    Layer layer;
    layer.in = prev;
    layer.out = l == hidden_layers ? out : hidden;
    layer.weight = diff::Parameter("", "field", diff::ParamGroup::Field,
                                   static_cast<std::size_t>(layer.in) * layer.out);
    layer.bias = diff::Parameter("", "field", diff::ParamGroup::Field, static_cast<std::size_t>(layer.out));
    layers_.push_back(std::move(layer));
    prev = layers_.back().out;
  }
}

void TinyMLP::forward(Trace& trace) const {
  const Eigen::Index n = trace.input.cols();
  trace.pre.resize(layers_.size() - 1);
  const Eigen::MatrixXd* x = &trace.input;
  Eigen::MatrixXd activated;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Eigen::Map<const RowMatrix> w(layer.weight.value.data(), layer.out, layer.in);
    Eigen::Map<const Eigen::VectorXd> b(layer.bias.value.data(), layer.out);
    Eigen::MatrixXd& dst = l + 1 == layers_.size() ? trace.output : trace.pre[l];
    dst.resize(layer.out, n);
    dst.noalias() = w * (*x);
    dst.colwise() += b;
    if (l + 1 < layers_.size()) {
      activated = dst.cwiseMax(0.0);
      x = &activated;
    }
  }
}

Eigen::MatrixXd TinyMLP::backward(const Trace& trace, const Eigen::MatrixXd& d_output,
                                  diff::GradientBuffer& grads) const {
  Eigen::MatrixXd delta = d_output;
  Eigen::MatrixXd activated;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    Eigen::Map<const RowMatrix> w(layer.weight.value.data(), layer.out, layer.in);
    std::span<double> gw_span = slot_or_throw(grads, layer.weight);
    std::span<double> gb_span = slot_or_throw(grads, layer.bias);
    Eigen::Map<RowMatrix> gw(gw_span.data(), layer.out, layer.in);
    Eigen::Map<Eigen::VectorXd> gb(gb_span.data(), layer.out);
    const Eigen::MatrixXd* x = &trace.input;
    if (l > 0) {
      activated = trace.pre[l - 1].cwiseMax(0.0);
      x = &activated;
    }
    gw.noalias() += delta * x->transpose();
    gb += delta.rowwise().sum();
    Eigen::MatrixXd next = w.transpose() * delta;
    if (l > 0) {
      next.array() *= (trace.pre[l - 1].array() > 0.0).cast<double>();
    }
    delta = std::move(next);
  }
  return delta;
}

// --------------------------------------------------------------- CouplingBlock

CouplingBlock::CouplingBlock(int axis, const FieldConfig& config)
    : axis_(axis),
      control_points_(config.control_points),
      spatial_(config.spatial_resolutions, config.spatial_features),
      mlp_(config.mlp_input_dim(), config.hidden_width, config.hidden_layers, config.mlp_output_dim()) {}

std::array<int, 2> CouplingBlock::unchanged_axes() const {
  switch (axis_) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

void CouplingBlock::latent_batch(const CoordBatch& coords, std::span<const double> t_norm,
                                 const TemporalGrid& temporal, Trace& trace) const {
  const int n = static_cast<int>(coords.cols());
  const auto [ua, ub] = unchanged_axes();
  const int t_levels = static_cast<int>(temporal.resolutions().size());
  const int s_levels = static_cast<int>(spatial_.resolutions().size());
  const int t_dim = temporal.dim();
  const int in_dim = mlp_.input_dim();
  trace.count = n;
  trace.temporal.resize(static_cast<std::size_t>(t_levels) * n);
  trace.spatial.resize(static_cast<std::size_t>(s_levels) * n);
  trace.clamped.resize(2 * static_cast<std::size_t>(n));
  trace.mlp.input.resize(in_dim, n);
  for (int s = 0; s < n; ++s) {
    double* col = trace.mlp.input.col(s).data();
    const double a = coords(ua, s);
    const double b = coords(ub, s);
    col[0] = a;
    col[1] = b;
    const double ac = std::clamp(a, 0.0, 1.0);
    const double bc = std::clamp(b, 0.0, 1.0);
    trace.clamped[2 * s] = ac != a;
    trace.clamped[2 * s + 1] = bc != b;
    temporal.query(t_norm[s], std::span<double>(col + 2, t_dim), trace.temporal.data() + s * t_levels);
    spatial_.query(ac, bc, std::span<double>(col + 2 + t_dim, spatial_.dim()),
                   trace.spatial.data() + s * s_levels);
  }
}

void CouplingBlock::apply(CoordBatch& coords, std::span<const double> t_norm,
                          const TemporalGrid& temporal, bool inverse, Trace* trace) const {
  Trace local;
  Trace& tr = trace ? *trace : local;
  tr.inverse = inverse;
  latent_batch(coords, t_norm, temporal, tr);
  mlp_.forward(tr.mlp);
  const int n = tr.count;
  const int cp = control_points_;
  tr.alpha.resize(cp, n);
  tr.beta.resize(cp, n);
  tr.point.resize(n);
  tr.segment.resize(n);
  std::vector<double> positive(2 * cp + 2);
  for (int s = 0; s < n; ++s) {
    const double* raw = tr.mlp.output.col(s).data();
    for (int k = 0; k < 2 * cp + 2; ++k) positive[k] = positive_map(raw[k]);
    double* alpha = tr.alpha.col(s).data();
    double* beta = tr.beta.col(s).data();
    plf_detail::build_points(positive.data(), cp, alpha, beta);
    const double kl = positive[2 * cp];
    const double kr = positive[2 * cp + 1];
    const double centered = coords(axis_, s) - 0.5;
    if (!inverse) {
      const int seg = plf_detail::locate(alpha, cp, centered);
      tr.segment[s] = seg;
      tr.point[s] = centered;
      coords(axis_, s) = plf_detail::evaluate(alpha, beta, cp, kl, kr, seg, centered) + 0.5;
    } else {
      const int seg = plf_detail::locate(beta, cp, centered);
      const double x = plf_detail::evaluate_inverse(alpha, beta, cp, kl, kr, seg, centered);
      tr.segment[s] = seg;
      tr.point[s] = x;
      coords(axis_, s) = x + 0.5;
    }
  }
}

void CouplingBlock::backward(const Trace& trace, CoordBatch& d_coords, const TemporalGrid& temporal,
                             diff::GradientBuffer& grads) const {
  const int n = trace.count;
  const int cp = control_points_;
  const int out_dim = 2 * cp + 2;
  Eigen::MatrixXd d_raw(out_dim, n);
  std::vector<double> d_alpha(cp), d_beta(cp), d_positive(out_dim);
  for (int s = 0; s < n; ++s) {
    const double* raw = trace.mlp.output.col(s).data();
    const double kl = positive_map(raw[2 * cp]);
    const double kr = positive_map(raw[2 * cp + 1]);
    double dkl = 0.0;
    double dkr = 0.0;
    const double slope = plf_detail::partials(trace.alpha.col(s).data(), trace.beta.col(s).data(), cp, kl, kr,
                                              trace.segment[s], trace.point[s], d_alpha.data(),
                                              d_beta.data(), &dkl, &dkr);
    const double g = d_coords(axis_, s);
    double coef;
    if (!trace.inverse) {
      d_coords(axis_, s) = g * slope;
      coef = g;
    } else {
      // x = f^{-1}(y; theta): dx/dy = 1/f'(x), dx/dtheta = -(df/dtheta)/f'(x)
      d_coords(axis_, s) = g / slope;
      coef = -g / slope;
    }
    for (int k = 0; k < cp; ++k) {
      d_alpha[k] *= coef;
      d_beta[k] *= coef;
    }
    plf_detail::points_backward(d_alpha.data(), d_beta.data(), cp, d_positive.data());
    d_positive[2 * cp] = coef * dkl;
    d_positive[2 * cp + 1] = coef * dkr;
    double* dr = d_raw.col(s).data();
    for (int k = 0; k < out_dim; ++k) dr[k] = d_positive[k] * positive_map_derivative(raw[k]);
  }

  const Eigen::MatrixXd d_input = mlp_.backward(trace.mlp, d_raw, grads);

  const auto [ua, ub] = unchanged_axes();
  const int t_levels = static_cast<int>(temporal.resolutions().size());
  const int s_levels = static_cast<int>(spatial_.resolutions().size());
  const int t_dim = temporal.dim();
  std::span<double> g_temporal = slot_or_throw(grads, temporal.data());
  std::span<double> g_spatial = slot_or_throw(grads, spatial_.data());
  for (int s = 0; s < n; ++s) {
    const double* di = d_input.col(s).data();
    d_coords(ua, s) += di[0];
    d_coords(ub, s) += di[1];
    temporal.scatter(trace.temporal.data() + s * t_levels, std::span<const double>(di + 2, t_dim), g_temporal);
    const SpatialGrid::Footprint* fp = trace.spatial.data() + s * s_levels;
    const std::span<const double> d_spatial(di + 2 + t_dim, spatial_.dim());
    spatial_.scatter(fp, d_spatial, g_spatial);
    double da = 0.0;
    double db = 0.0;
    spatial_.coordinate_gradient(fp, d_spatial, &da, &db);
    if (!trace.clamped[2 * s]) d_coords(ua, s) += da;
    if (!trace.clamped[2 * s + 1]) d_coords(ub, s) += db;
  }
}

MonotonePiecewiseLinear CouplingBlock::map_at(double a, double b, double t_norm,
                                              const TemporalGrid& temporal) const {
  TinyMLP::Trace tr;
  tr.input.resize(mlp_.input_dim(), 1);
  tr.input(0, 0) = a;
  tr.input(1, 0) = b;
  const std::vector<double> latent = latent_query(*this, temporal, a, b, t_norm);
  for (std::size_t k = 0; k < latent.size(); ++k) tr.input(static_cast<Eigen::Index>(k) + 2, 0) = latent[k];
  mlp_.forward(tr);
  std::vector<double> positive(tr.output.rows());
  for (Eigen::Index k = 0; k < tr.output.rows(); ++k) positive[k] = positive_map(tr.output(k, 0));
  return plf_build(positive);
}

std::vector<double> latent_query(const CouplingBlock& block, const TemporalGrid& temporal, double a,
                                 double b, double t_norm) {
  std::vector<double> out(static_cast<std::size_t>(temporal.dim() + block.spatial().dim()));
  temporal.query(t_norm, std::span<double>(out.data(), temporal.dim()));
  block.spatial().query(std::clamp(a, 0.0, 1.0), std::clamp(b, 0.0, 1.0),
                        std::span<double>(out.data() + temporal.dim(), block.spatial().dim()));
  return out;
}

// ------------------------------------------------------------ DeformationField

DeformationField::DeformationField(const FieldConfig& config, int frames, const SceneBounds& bounds,
                                   std::uint64_t seed)
    : config_(config), frames_(frames), bounds_(bounds) {
  config_.validate();
  if (frames < 1) throw ConfigError("DeformationField: frame count must be >= 1");
  bounds_.validate();
  std::mt19937_64 rng(seed);
  temporal_ = TemporalGrid(temporal_resolutions(config_, frames), config_.temporal_features);
  fill_uniform(temporal_.data().value, config_.init_scale, rng);

  const int half = config_.control_points / 2;
  const double spacing = 0.5 / half;
  const double delta_bias = positive_map_inverse(spacing);
  const double slope_bias = positive_map_inverse(1.0);
  for (int k = 0; k < config_.n_blocks; ++k) {
    CouplingBlock block(kAxisCycle[k % 3], config_);
    const std::string prefix = "field.block" + std::to_string(k);
    block.spatial().data().name = prefix + ".spatial";
    fill_uniform(block.spatial().data().value, config_.init_scale, rng);
    auto& layers = block.mlp().layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = layers[l];
      layer.weight.name = prefix + ".mlp" + std::to_string(l) + ".weight";
      layer.bias.name = prefix + ".mlp" + std::to_string(l) + ".bias";
      if (l + 1 < layers.size()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        fill_uniform(layer.weight.value, bound, rng);
        fill_uniform(layer.bias.value, bound, rng);
      } else {
        std::fill(layer.weight.value.begin(), layer.weight.value.end(), 0.0);
        const int cp = config_.control_points;
        for (int i = 0; i < 2 * cp; ++i) layer.bias.value[i] = delta_bias;
        layer.bias.value[2 * cp] = slope_bias;
        layer.bias.value[2 * cp + 1] = slope_bias;
      }
    }
    blocks_.push_back(std::move(block));
  }
}

std::vector<diff::Parameter*> DeformationField::parameters() {
  std::vector<diff::Parameter*> out{&temporal_.data()};
  for (auto& block : blocks_) {
    out.push_back(&block.spatial().data());
    for (auto& layer : block.mlp().layers()) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

std::vector<const diff::Parameter*> DeformationField::parameters() const {
  auto mut = const_cast<DeformationField*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t DeformationField::parameter_count() const {
  std::size_t n = 0;
  for (const diff::Parameter* p : parameters()) n += p->size();
  return n;
}

void DeformationField::register_parameters(diff::ParameterTape& tape) {
  for (diff::Parameter* p : parameters()) tape.add(*p);
}

double DeformationField::time_coordinate(int frame) const {
  return frames_ > 1 ? static_cast<double>(frame) / (frames_ - 1) : 0.0;
}

void DeformationField::check_frame(int frame) const {
  if (frame < 0 || frame >= frames_) {
    throw std::out_of_range("DeformationField: frame " + std::to_string(frame) + " outside [0, " +
                            std::to_string(frames_ - 1) + "]");
  }
}

void DeformationField::to_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm,
                                               Trace* trace) const {
  if (trace) {
    trace->inverse = false;
    trace->blocks.resize(blocks_.size());
  }
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    blocks_[k].apply(coords, t_norm, temporal_, false, trace ? &trace->blocks[k] : nullptr);
  }
}

void DeformationField::from_canonical_normalized(CoordBatch& coords, std::span<const double> t_norm,
                                                 Trace* trace) const {
  if (trace) {
    trace->inverse = true;
    trace->blocks.resize(blocks_.size());
  }
  for (std::size_t k = blocks_.size(); k-- > 0;) {
    blocks_[k].apply(coords, t_norm, temporal_, true, trace ? &trace->blocks[k] : nullptr);
  }
}

void DeformationField::backward(const Trace& trace, CoordBatch& d_coords, diff::GradientBuffer& grads) const {
  if (!trace.inverse) {
    for (std::size_t k = blocks_.size(); k-- > 0;) blocks_[k].backward(trace.blocks[k], d_coords, temporal_, grads);
  } else {
    for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k].backward(trace.blocks[k], d_coords, temporal_, grads);
  }
}

Point3 DeformationField::to_canonical(const Point3& x, int frame) const {
  check_frame(frame);
  const Point3 n = normalize_affine(x, bounds_);
  CoordBatch c(3, 1);
  c << n.x, n.y, n.z;
  const double t = time_coordinate(frame);
  to_canonical_normalized(c, std::span<const double>(&t, 1), nullptr);
  return denormalize_affine(Point3{c(0, 0), c(1, 0), c(2, 0)}, bounds_);
}

Point3 DeformationField::from_canonical(const Point3& u, int frame) const {
  check_frame(frame);
  const Point3 n = normalize_affine(u, bounds_);
  CoordBatch c(3, 1);
  c << n.x, n.y, n.z;
  const double t = time_coordinate(frame);
  from_canonical_normalized(c, std::span<const double>(&t, 1), nullptr);
  return denormalize_affine(Point3{c(0, 0), c(1, 0), c(2, 0)}, bounds_);
}

}  // namespace cadex
