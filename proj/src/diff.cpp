#include "cadex/diff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cadex/errors.hpp"

namespace cadex::diff {

void ParameterTape::add(Parameter& p) {
  for (const Parameter* q : params_) {
    if (q->name == p.name) throw std::invalid_argument("ParameterTape: duplicate parameter " + p.name);
  }
  if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), 0.0);
  p.slot = static_cast<int>(params_.size());
  params_.push_back(&p);
}

Parameter& ParameterTape::find(const std::string& name) {
  for (Parameter* p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("ParameterTape: no parameter named " + name);
}

std::size_t ParameterTape::total_values() const {
  std::size_t n = 0;
  for (const Parameter* p : params_) n += p->size();
  return n;
}

void ParameterTape::zero_grad() {
  for (Parameter* p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

GradientBuffer ParameterTape::gradient_views() {
  std::vector<std::span<double>> views;
  views.reserve(params_.size());
  for (Parameter* p : params_) views.emplace_back(p->grad);
  return GradientBuffer(std::move(views));
}

namespace {

void check_finite(const std::vector<Parameter*>& params, bool gradients) {
  for (const Parameter* p : params) {
    const auto& data = gradients ? p->grad : p->value;
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (!std::isfinite(data[k])) {
        throw NumericalError(std::string("non-finite ") + (gradients ? "gradient" : "value") +
                             " in parameter '" + p->name + "' (owner " + p->owner + ") at index " +
                             std::to_string(k));
      }
    }
  }
}

}  // namespace

void ParameterTape::check_finite_gradients() const { check_finite(params_, true); }
void ParameterTape::check_finite_values() const { check_finite(params_, false); }

ScratchGradients::ScratchGradients(const ParameterTape& tape) {
  storage_.reserve(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i) storage_.emplace_back(tape[i].size(), 0.0);
}

GradientBuffer ScratchGradients::views() {
  std::vector<std::span<double>> v;
  v.reserve(storage_.size());
  for (auto& s : storage_) v.emplace_back(s);
  return GradientBuffer(std::move(v));
}

void ScratchGradients::zero() {
  for (auto& s : storage_) std::fill(s.begin(), s.end(), 0.0);
}

void ScratchGradients::accumulate_into(ParameterTape& tape) const {
  for (std::size_t i = 0; i < storage_.size(); ++i) {
    auto& g = tape[i].grad;
    const auto& s = storage_[i];
    for (std::size_t k = 0; k < s.size(); ++k) g[k] += s[k];
  }
}

Adam::Adam(const ParameterTape& tape, AdamConfig config) : config_(config) {
  if (config_.total_steps < 1) config_.total_steps = 1;
  state_.m.reserve(tape.size());
  state_.v.reserve(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i) {
    state_.m.emplace_back(tape[i].size(), 0.0);
    state_.v.emplace_back(tape[i].size(), 0.0);
  }
}

double Adam::learning_rate(ParamGroup group) const {
  const double base = group == ParamGroup::Depth ? config_.lr_depth : config_.lr_field;
  const double progress =
      std::min(1.0, static_cast<double>(state_.step) / static_cast<double>(config_.total_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return base * (config_.final_lr_ratio + (1.0 - config_.final_lr_ratio) * cosine);
}

void Adam::step(ParameterTape& tape) {
  if (state_.m.size() != tape.size()) throw std::logic_error("Adam: tape layout changed");
  const double lr_field = learning_rate(ParamGroup::Field);
  const double lr_depth = learning_rate(ParamGroup::Depth);
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    Parameter& p = tape[i];
    const double lr = p.group == ParamGroup::Depth ? lr_depth : lr_field;
    const double step_size = lr / bc1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
    auto& m = state_.m[i];
    auto& v = state_.v[i];
    double* val = p.value.data();
    double* g = p.grad.data();
    const std::size_t n = p.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double gk = g[k];
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      val[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + config_.eps);
      g[k] = 0.0;
    }
  }
  tape.advance_step();
  tape.check_finite_values();
}

}  // namespace cadex::diff
