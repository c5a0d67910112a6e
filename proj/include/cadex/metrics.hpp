#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadex/data.hpp"

namespace cadex {

inline const std::vector<double> kDefaultThresholds{1.0, 2.0, 4.0, 8.0, 16.0};

/// A per-threshold metric and its mean; `defined` is false when there was
/// nothing to evaluate.
struct ThresholdMetric {
  std::vector<double> thresholds;
  std::vector<double> per_threshold;  // fractions in [0, 1]
  double mean = 0.0;
  bool defined = false;
};

/// Flattened point-level inputs. An empty mask selects every point.
struct PointView {
  std::span<const Pixel2> pred;
  std::span<const std::uint8_t> pred_visible;
  std::span<const Pixel2> gt;
  std::span<const std::uint8_t> gt_visible;
  std::span<const std::uint8_t> mask;
};

/// Fraction of GT-visible points within each threshold.
ThresholdMetric delta_avg(const PointView& points, const std::vector<double>& thresholds = kDefaultThresholds);

/// Jaccard per threshold with TP = gt-vis & pred-vis & within, FP = pred-vis &
/// (gt-occluded | beyond), FN = gt-vis & (pred-occluded | beyond).
ThresholdMetric average_jaccard(const PointView& points, const std::vector<double>& thresholds = kDefaultThresholds);

/// Fraction of points whose predicted visibility matches ground truth.
std::optional<double> occlusion_accuracy(std::span<const std::uint8_t> pred_visible,
                                         std::span<const std::uint8_t> gt_visible,
                                         std::span<const std::uint8_t> mask = {});

/// Mean L2 distance between predicted and GT second differences over triplets
/// of consecutive frames that are GT-visible.
std::optional<double> temporal_coherence(const TrackSet& pred, const TrackSet& gt);
/// Mean L2 norm of GT second differences over the same triplets, i.e. the
/// coherence error of a constant-velocity prediction.
std::optional<double> gt_acceleration_magnitude(const TrackSet& gt);

/// Mean disagreement between consecutive predicted steps and the flow sampled
/// at the track position, over predicted-visible consecutive frames.
std::optional<double> flow_disagreement(const TrackSet& pred, const FlowSet& flows);

struct EvalReport {
  std::size_t tracks = 0;
  std::size_t points = 0;
  ThresholdMetric delta;
  ThresholdMetric jaccard;
  std::optional<double> occlusion_accuracy;
  std::optional<double> temporal_coherence;
  std::optional<double> gt_temporal_coherence;
  std::optional<double> dag;

  /// Aggregate of several videos: means of defined per-video values.
  static EvalReport mean_of(const std::vector<EvalReport>& reports);
  std::string to_json() const;
  /// metric,value lines; percentages in [0, 100].
  std::string to_text() const;
};

/// Adapts ground truth and predictions into the point-level inputs: all
/// frames except each track's query frame. Throws DataError on shape mismatch.
EvalReport evaluate_tracks(const TrackSet& pred, const TrackSet& gt, const FlowSet* flows = nullptr,
                           const std::vector<double>& thresholds = kDefaultThresholds);

}  // namespace cadex
