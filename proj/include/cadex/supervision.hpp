#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "cadex/data.hpp"

namespace cadex {

struct SupervisionConfig {
  int flow_window = 12;
  /// Lattice stride for sampling flow pairs in each frame pair.
  int flow_stride = 2;
  int longterm_gap = 10;
  /// Long-term frame pairs sampled per clip = ceil(factor * frames).
  double longterm_pair_factor = 4.0;
  double theta_m = 0.75;
  double theta_s = 0.55;
  int n_s = 100;
  double theta_l = 30.0;
  int local_window = 11;
  bool use_flow = true;
  bool use_longterm = true;

  void validate() const;
};

/// A candidate match between cell `a` of one frame and cell `b` of another.
struct FeatureMatch {
  int a = 0;
  int b = 0;
  double similarity = 0.0;

  friend bool operator==(const FeatureMatch&, const FeatureMatch&) = default;
};

/// Cosine similarity of two unit descriptors (plain dot product, summed in
/// index order in double precision).
double cosine_similarity(const float* x, const float* y, int dim);

/// Mutually best matches above theta_m. Argmax ties go to the lowest cell index.
std::vector<FeatureMatch> mutual_maximum(const FeatureFrame& fi, const FeatureFrame& fj, double theta_m = 0.75);

/// Number of other cells in `f` whose similarity to `cell` exceeds theta_s.
int similar_cell_count(const FeatureFrame& f, int cell, double theta_s);
/// Keeps matches whose both endpoints have fewer than n_s similar cells.
std::vector<FeatureMatch> background_filter(const FeatureFrame& fi, const FeatureFrame& fj,
                                            const std::vector<FeatureMatch>& candidates, double theta_s = 0.55,
                                            int n_s = 100);

/// Sum of similarities between `cell` and every cell of the window centered on
/// it (itself included, truncated at the borders).
double local_similarity_sum(const FeatureFrame& f, int cell, int window);
/// Keeps matches whose both endpoints have local similarity above theta_l.
std::vector<FeatureMatch> local_noise_filter(const FeatureFrame& fi, const FeatureFrame& fj,
                                             const std::vector<FeatureMatch>& candidates, double theta_l = 30.0,
                                             int window = 11);

/// Runs mutual maximum, background and local-noise filters in that order on
/// one frame pair and converts survivors to full-resolution pairs.
std::vector<CorrPair> mine_frame_pair(const FeatureMapStack& features, int i, int j, const SupervisionConfig& config);

/// Random frame pairs with |i - j| > gap, without repetition.
std::vector<std::pair<int, int>> sample_longterm_frame_pairs(int frames, const SupervisionConfig& config,
                                                             std::mt19937_64& rng);

std::vector<CorrPair> build_longterm_pairs(const FeatureMapStack& features, const SupervisionConfig& config,
                                           std::mt19937_64& rng);

/// Every ordered frame pair with 1 <= |i - j| <= window.
std::vector<std::pair<int, int>> flow_frame_pairs(int frames, int window);

/// Flow pairs on a stride lattice for the requested frame pairs. Pixels with an
/// invalid flow or a target outside the image are dropped. Throws DataError
/// naming the first requested pair without a flow field.
std::vector<CorrPair> build_flow_pairs(const FlowSet& flows, const std::vector<std::pair<int, int>>& requested,
                                       int width, int height, int stride);

/// Uniform batches over a fixed pair set with random query/target roles.
class PairSampler {
 public:
  /// Throws ConfigError for an empty pair set.
  PairSampler(std::vector<CorrPair> pairs, std::uint64_t seed);

  const std::vector<CorrPair>& pairs() const { return pairs_; }
  /// Draws with replacement unless `without_replacement`, in which case
  /// batch_size must not exceed the pair count.
  std::vector<CorrPair> sample(std::size_t batch_size, bool without_replacement = false);

 private:
  std::vector<CorrPair> pairs_;
  std::mt19937_64 rng_;
};

/// Swaps query and target.
CorrPair flipped(const CorrPair& p);

}  // namespace cadex
