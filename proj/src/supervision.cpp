#include "cadex/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "cadex/errors.hpp"

namespace cadex {

void SupervisionConfig::validate() const {
  if (flow_window < 1) throw ConfigError("supervision.flow_window must be >= 1");
  if (flow_stride < 1) throw ConfigError("supervision.flow_stride must be >= 1");
  if (longterm_gap < 0) throw ConfigError("supervision.longterm_gap must be >= 0");
  if (!(longterm_pair_factor >= 0.0)) throw ConfigError("supervision.longterm_pair_factor must be >= 0");
  if (!(theta_m >= -1.0 && theta_m <= 1.0)) throw ConfigError("supervision.theta_m must lie in [-1, 1]");
  if (!(theta_s >= -1.0 && theta_s <= 1.0)) throw ConfigError("supervision.theta_s must lie in [-1, 1]");
  if (!(theta_l >= 0.0)) throw ConfigError("supervision.theta_l must be >= 0");
  if (n_s < 1) throw ConfigError("supervision.n_s must be >= 1");
  if (local_window < 1 || local_window % 2 == 0) throw ConfigError("supervision.local_window must be odd");
  if (!use_flow && !use_longterm) throw ConfigError("supervision: at least one of flow/longterm must be enabled");
}

double cosine_similarity(const float* x, const float* y, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += static_cast<double>(x[k]) * static_cast<double>(y[k]);
  return s;
}

std::vector<FeatureMatch> mutual_maximum(const FeatureFrame& fi, const FeatureFrame& fj, double theta_m) {
  const int ni = fi.cells();
  const int nj = fj.cells();
  std::vector<FeatureMatch> out;
  if (ni == 0 || nj == 0) return out;
  std::vector<double> sim(static_cast<std::size_t>(ni) * nj);
  for (int a = 0; a < ni; ++a) {
    for (int b = 0; b < nj; ++b) sim[static_cast<std::size_t>(a) * nj + b] = cosine_similarity(fi.cell(a), fj.cell(b), fi.dim);
  }
  std::vector<int> best_in_j(ni, 0);
  std::vector<int> best_in_i(nj, 0);
  for (int a = 0; a < ni; ++a) {
    const double* row = &sim[static_cast<std::size_t>(a) * nj];
    int best = 0;
    for (int b = 1; b < nj; ++b) {
      if (row[b] > row[best]) best = b;
    }
    best_in_j[a] = best;
  }
  for (int b = 0; b < nj; ++b) {
    int best = 0;
    for (int a = 1; a < ni; ++a) {
      if (sim[static_cast<std::size_t>(a) * nj + b] > sim[static_cast<std::size_t>(best) * nj + b]) best = a;
    }
    best_in_i[b] = best;
  }
  for (int a = 0; a < ni; ++a) {
    const int b = best_in_j[a];
    const double s = sim[static_cast<std::size_t>(a) * nj + b];
    if (best_in_i[b] == a && s > theta_m) out.push_back(FeatureMatch{a, b, s});
  }
  return out;
}

int similar_cell_count(const FeatureFrame& f, int cell, double theta_s) {
  int count = 0;
  const float* c = f.cell(cell);
  for (int k = 0; k < f.cells(); ++k) {
    if (k != cell && cosine_similarity(c, f.cell(k), f.dim) > theta_s) ++count;
  }
  return count;
}

std::vector<FeatureMatch> background_filter(const FeatureFrame& fi, const FeatureFrame& fj,
                                            const std::vector<FeatureMatch>& candidates, double theta_s, int n_s) {
  std::unordered_map<int, bool> keep_i;
  std::unordered_map<int, bool> keep_j;
  const auto keeps = [&](std::unordered_map<int, bool>& cache, const FeatureFrame& f, int cell) {
    auto it = cache.find(cell);
    if (it != cache.end()) return it->second;
    const bool k = similar_cell_count(f, cell, theta_s) < n_s;
    cache.emplace(cell, k);
    return k;
  };
  std::vector<FeatureMatch> out;
  for (const auto& m : candidates) {
    if (keeps(keep_i, fi, m.a) && keeps(keep_j, fj, m.b)) out.push_back(m);
  }
  return out;
}

double local_similarity_sum(const FeatureFrame& f, int cell, int window) {
  const int half = window / 2;
  const int cx = cell % f.width;
  const int cy = cell / f.width;
  const float* c = f.cell(cell);
  double sum = 0.0;
  for (int y = std::max(0, cy - half); y <= std::min(f.height - 1, cy + half); ++y) {
    for (int x = std::max(0, cx - half); x <= std::min(f.width - 1, cx + half); ++x) {
      sum += cosine_similarity(c, f.cell(y * f.width + x), f.dim);
    }
  }
  return sum;
}

std::vector<FeatureMatch> local_noise_filter(const FeatureFrame& fi, const FeatureFrame& fj,
                                             const std::vector<FeatureMatch>& candidates, double theta_l, int window) {
  std::vector<FeatureMatch> out;
  for (const auto& m : candidates) {
    if (local_similarity_sum(fi, m.a, window) > theta_l && local_similarity_sum(fj, m.b, window) > theta_l) {
      out.push_back(m);
    }
  }
  return out;
}

std::vector<CorrPair> mine_frame_pair(const FeatureMapStack& features, int i, int j, const SupervisionConfig& config) {
  const FeatureFrame fi = features.frame(i);
  const FeatureFrame fj = features.frame(j);
  auto matches = mutual_maximum(fi, fj, config.theta_m);
  matches = background_filter(fi, fj, matches, config.theta_s, config.n_s);
  matches = local_noise_filter(fi, fj, matches, config.theta_l, config.local_window);
  std::vector<CorrPair> out;
  out.reserve(matches.size());
  for (const auto& m : matches) {
    CorrPair p;
    p.i = i;
    p.j = j;
    p.p_i = features.cell_center(m.a % features.width, m.a / features.width);
    p.p_j = features.cell_center(m.b % features.width, m.b / features.width);
    p.kind = PairKind::LongTerm;
    p.confidence = m.similarity;
    out.push_back(p);
  }
  return out;
}

std::vector<std::pair<int, int>> sample_longterm_frame_pairs(int frames, const SupervisionConfig& config,
                                                             std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < frames; ++i) {
    for (int j = i + config.longterm_gap + 1; j < frames; ++j) all.emplace_back(i, j);
  }
  std::shuffle(all.begin(), all.end(), rng);
  const auto budget = static_cast<std::size_t>(std::ceil(config.longterm_pair_factor * frames));
  if (all.size() > budget) all.resize(budget);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<CorrPair> build_longterm_pairs(const FeatureMapStack& features, const SupervisionConfig& config,
                                           std::mt19937_64& rng) {
  std::vector<CorrPair> out;
  for (const auto& [i, j] : sample_longterm_frame_pairs(features.frames, config, rng)) {
    auto mined = mine_frame_pair(features, i, j, config);
    out.insert(out.end(), mined.begin(), mined.end());
  }
  return out;
}

std::vector<std::pair<int, int>> flow_frame_pairs(int frames, int window) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < frames; ++i) {
    for (int j = std::max(0, i - window); j <= std::min(frames - 1, i + window); ++j) {
      if (j != i) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<CorrPair> build_flow_pairs(const FlowSet& flows, const std::vector<std::pair<int, int>>& requested,
                                       int width, int height, int stride) {
  std::vector<CorrPair> out;
  for (const auto& [i, j] : requested) {
    const FlowField* f = flows.find(i, j);
    if (!f) throw DataError("missing flow field for frame pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    if (f->width != width || f->height != height) {
      throw DataError("flow field (" + std::to_string(i) + ", " + std::to_string(j) + ") has the wrong size");
    }
    for (int y = 0; y < height; y += stride) {
      for (int x = 0; x < width; x += stride) {
        if (!f->valid(x, y)) continue;
        const Pixel2 target{x + static_cast<double>(f->du(x, y)), y + static_cast<double>(f->dv(x, y))};
        if (!in_image(target, width, height)) continue;
        out.push_back(CorrPair{i, Pixel2{double(x), double(y)}, j, target, PairKind::Flow, 1.0});
      }
    }
  }
  return out;
}

CorrPair flipped(const CorrPair& p) {
  CorrPair q = p;
  q.i = p.j;
  q.p_i = p.p_j;
  q.j = p.i;
  q.p_j = p.p_i;
  return q;
}

PairSampler::PairSampler(std::vector<CorrPair> pairs, std::uint64_t seed) : pairs_(std::move(pairs)), rng_(seed) {
  if (pairs_.empty()) throw ConfigError("PairSampler: the correspondence set is empty");
}

std::vector<CorrPair> PairSampler::sample(std::size_t batch_size, bool without_replacement) {
  std::vector<CorrPair> batch;
  batch.reserve(batch_size);
  std::bernoulli_distribution flip(0.5);
  if (without_replacement) {
    if (batch_size > pairs_.size()) throw ConfigError("PairSampler: batch larger than the pair set");
    std::vector<std::size_t> order(pairs_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t k = 0; k < batch_size; ++k) {
      const CorrPair& p = pairs_[order[k]];
      batch.push_back(flip(rng_) ? flipped(p) : p);
    }
    return batch;
  }
  std::uniform_int_distribution<std::size_t> pick(0, pairs_.size() - 1);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const CorrPair& p = pairs_[pick(rng_)];
    batch.push_back(flip(rng_) ? flipped(p) : p);
  }
  return batch;
}

}  // namespace cadex
