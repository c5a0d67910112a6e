#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cadex/data.hpp"
#include "cadex/depth.hpp"
#include "cadex/diff.hpp"
#include "cadex/field.hpp"
#include "cadex/loss.hpp"
#include "cadex/supervision.hpp"
#include "cadex/tracker.hpp"

namespace cadex {

/// Every tunable of a run. Serialized as JSON; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  int iterations = 5000;
  int batch_size = 512;
  int threads = 1;
  double min_depth = 1e-3;
  /// Scene bounds padding as a fraction of the extent of the initial depth.
  double bounds_pad = 0.1;
  FieldConfig field;
  diff::AdamConfig optimizer;
  LossWeights loss;
  SupervisionConfig supervision;
  TrackerConfig tracker;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  std::string to_json() const;
  /// Missing keys keep their defaults. Throws ConfigError for unknown keys,
  /// wrong types and invalid values.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
};

/// Everything a fit consumes, independent of where it came from.
struct Dataset {
  std::string video_id;
  int frames = 0;
  int width = 0;
  int height = 0;
  CameraIntrinsics K;
  FlowSet flows;
  std::vector<double> init_depth;  // frames * height * width
  FeatureMapStack features;        // frames == 0 when absent
  std::vector<CorrPair> external_pairs;
  std::optional<TrackSet> gt_tracks;

  /// Throws DataError on inconsistent shapes.
  void validate() const;
};

struct TelemetryRow {
  std::int64_t step = 0;
  double pixel = 0.0;
  double depth = 0.0;
  double reg = 0.0;
  double total = 0.0;
  double wall_time = 0.0;
};

struct FitReport {
  std::vector<TelemetryRow> telemetry;
  std::size_t flow_pairs = 0;
  std::size_t longterm_pairs = 0;
  std::size_t external_pairs = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

/// An optimized scene: field, depth maps and the settings that produced them.
struct Model {
  RunConfig config;
  CameraIntrinsics K;
  DeformationField field;
  DepthMapSet depth;
  std::int64_t steps = 0;
};

struct FitResult {
  Model model;
  FitReport report;
};

/// Returning false from the callback stops the optimization after that step.
using StepCallback = std::function<bool(const TelemetryRow&)>;

/// Supervision pairs of a dataset under a config, in a fixed order: flow,
/// long-term, external.
struct PairSets {
  std::vector<CorrPair> flow;
  std::vector<CorrPair> longterm;
  std::vector<CorrPair> external;

  std::vector<CorrPair> merged() const;
};
PairSets build_supervision(const Dataset& data, const RunConfig& config);

/// Initial depth maps and field for a dataset.
DepthMapSet initial_depth(const Dataset& data, const RunConfig& config);
DeformationField initial_field(const DepthMapSet& depth, const Dataset& data, const RunConfig& config);

/// Builds supervision, optimizes field and depth for config.iterations steps.
/// Throws ConfigError, DataError or NumericalError.
FitResult fit(const Dataset& data, const RunConfig& config, const StepCallback& on_step = {});

/// One optimization run over any field type exposing register_parameters and
/// the interface used by evaluate_objective.
template <class Field>
FitReport optimize(Field& field, DepthMapSet& depth, const CameraIntrinsics& K, std::vector<CorrPair> pairs,
                   const RunConfig& config, const StepCallback& on_step = {});

// ------------------------------------------------------------------ template impl

template <class Field>
FitReport optimize(Field& field, DepthMapSet& depth, const CameraIntrinsics& K, std::vector<CorrPair> pairs,
                   const RunConfig& config, const StepCallback& on_step) {
  using Clock = std::chrono::steady_clock;
  FitReport report;
  diff::ParameterTape tape;
  field.register_parameters(tape);
  depth.register_parameters(tape);
  diff::AdamConfig adam_cfg = config.optimizer;
  adam_cfg.total_steps = std::max(1, config.iterations);
  diff::Adam adam(tape, adam_cfg);
  if (config.iterations == 0) return report;

  const std::size_t pair_count = pairs.size();
  PairSampler sampler(std::move(pairs), config.seed ^ 0x9e3779b97f4a7c15ULL);
  const int threads = std::max(1, config.threads);
  std::vector<diff::ScratchGradients> scratch;
  if (threads > 1) {
    for (int k = 0; k < threads; ++k) scratch.emplace_back(tape);
  }
  const TermScales scales = TermScales::total(config.loss);
  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, (pair_count + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size));
  std::size_t epoch_eval = 0, epoch_skipped = 0;

  const auto start = Clock::now();
  for (int step = 1; step <= config.iterations; ++step) {
    const std::vector<CorrPair> batch = sampler.sample(static_cast<std::size_t>(config.batch_size));
    const double norm = static_cast<double>(batch.size());
    LossTerms terms;
    if (threads == 1) {
      diff::GradientBuffer g = tape.gradient_views();
      terms = evaluate_objective<Field>(batch, field, depth, K, config.loss, scales, &g, norm);
    } else {
      // Fixed chunking and in-order reduction keep results thread-count stable.
      std::vector<LossTerms> parts(threads);
      std::vector<std::thread> pool;
      const std::size_t chunk = (batch.size() + threads - 1) / threads;
      for (int k = 0; k < threads; ++k) {
        const std::size_t lo = std::min(batch.size(), k * chunk);
        const std::size_t hi = std::min(batch.size(), lo + chunk);
        pool.emplace_back([&, k, lo, hi] {
          scratch[k].zero();
          diff::GradientBuffer g = scratch[k].views();
          parts[k] = evaluate_objective<Field>(std::span<const CorrPair>(batch).subspan(lo, hi - lo), field, depth, K,
                                               config.loss, scales, &g, norm);
        });
      }
      for (auto& th : pool) th.join();
      for (int k = 0; k < threads; ++k) {
        scratch[k].accumulate_into(tape);
        terms.pixel += parts[k].pixel;
        terms.depth += parts[k].depth;
        terms.reg += parts[k].reg;
        terms.total += parts[k].total;
        terms.pairs += parts[k].pairs;
        terms.skipped += parts[k].skipped;
      }
    }
    tape.check_finite_gradients();
    adam.step(tape);
    depth.clamp_to_min();

    report.evaluated += terms.pairs;
    report.skipped += terms.skipped;
    epoch_eval += terms.pairs;
    epoch_skipped += terms.skipped;
    if (static_cast<std::size_t>(step) % steps_per_epoch == 0) {
      if (epoch_eval > 0 && static_cast<double>(epoch_skipped) > 0.01 * static_cast<double>(epoch_eval)) {
        report.warnings.push_back("step " + std::to_string(step) + ": " + std::to_string(epoch_skipped) + " of " +
                                  std::to_string(epoch_eval) + " pairs projected behind the camera in the last epoch");
      }
      epoch_eval = epoch_skipped = 0;
    }
    TelemetryRow row{step, terms.pixel, terms.depth, terms.reg, terms.total,
                     std::chrono::duration<double>(Clock::now() - start).count()};
    report.telemetry.push_back(row);
    if (on_step && !on_step(row)) {
      report.stopped_early = true;
      break;
    }
  }
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace cadex
