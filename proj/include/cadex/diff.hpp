#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cadex::diff {

/// Learning-rate group; the optimizer keeps one schedule per group.
enum class ParamGroup : std::uint8_t { Field = 0, Depth = 1 };

/// One optimizable array. Value and gradient always share a shape.
struct Parameter {
  std::string name;
  std::string owner;
  ParamGroup group = ParamGroup::Field;
  std::vector<double> value;
  std::vector<double> grad;
  /// Index assigned by the ParameterTape that registered this parameter.
  int slot = -1;

  Parameter() = default;
  Parameter(std::string name_, std::string owner_, ParamGroup group_, std::size_t size)
      : name(std::move(name_)), owner(std::move(owner_)), group(group_), value(size, 0.0), grad(size, 0.0) {}

  std::size_t size() const { return value.size(); }
};

/// Gradient destinations indexed by parameter slot. Backward passes write
/// through these views, so a buffer can alias the parameters' own gradients
/// or point at thread-local scratch storage.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(std::vector<std::span<double>> views) : views_(std::move(views)) {}

  std::span<double> operator[](int slot) const { return views_[static_cast<std::size_t>(slot)]; }
  std::size_t size() const { return views_.size(); }

 private:
  std::vector<std::span<double>> views_;
};

/// Registry of every optimizable parameter. Non-owning: the modules own their
/// arrays, the tape only records where they live, so the owning objects must
/// not move while a tape refers to them.
class ParameterTape {
 public:
  /// Registers `p` and assigns its slot. Names must be unique.
  void add(Parameter& p);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  /// Throws std::out_of_range for unknown names.
  Parameter& find(const std::string& name);

  std::size_t total_values() const;
  void zero_grad();
  /// Views onto each parameter's own gradient array.
  GradientBuffer gradient_views();
  /// Throws NumericalError naming the first parameter with a non-finite gradient.
  void check_finite_gradients() const;
  /// Throws NumericalError naming the first parameter with a non-finite value.
  void check_finite_values() const;

  std::int64_t step_count() const { return steps_; }
  void advance_step() { ++steps_; }

 private:
  std::vector<Parameter*> params_;
  std::int64_t steps_ = 0;
};

/// Owns thread-local gradient storage mirroring a tape's layout.
class ScratchGradients {
 public:
  explicit ScratchGradients(const ParameterTape& tape);
  GradientBuffer views();
  void zero();
  /// Adds this scratch space into the tape's gradients.
  void accumulate_into(ParameterTape& tape) const;

 private:
  std::vector<std::vector<double>> storage_;
};

struct AdamConfig {
  double lr_field = 1e-3;
  double lr_depth = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  /// Cosine decay runs from the base rate down to base * final_lr_ratio.
  double final_lr_ratio = 0.1;
  std::int64_t total_steps = 1;
};

/// First/second moments per parameter plus the schedule.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

/// Adam with bias correction and a per-group cosine learning-rate schedule.
class Adam {
 public:
  Adam(const ParameterTape& tape, AdamConfig config);

  /// Applies one update from the tape's gradients, then clears them. Throws
  /// NumericalError when a parameter becomes non-finite.
  void step(ParameterTape& tape);
  double learning_rate(ParamGroup group) const;
  const OptimizerState& state() const { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  OptimizerState state_;
};

}  // namespace cadex::diff
