#pragma once

#include <cmath>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "cadex/supervision.hpp"

namespace cadex::testing {

/// Owns the storage behind a FeatureFrame.
struct OwnedFrame {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> data;

  FeatureFrame view() const { return FeatureFrame{data, height, width, dim}; }
};

/// Unit descriptors drawn around `prototypes` random directions; small
/// prototype counts and noise give many near-duplicate cells.
inline OwnedFrame clustered_frame(int height, int width, int dim, int prototypes, double noise,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> protos(prototypes, std::vector<double>(dim));
  for (auto& p : protos) {
    for (auto& v : p) v = n(rng);
  }
  std::uniform_int_distribution<int> pick(0, prototypes - 1);
  OwnedFrame f{height, width, dim, std::vector<float>(static_cast<std::size_t>(height) * width * dim)};
  for (int c = 0; c < height * width; ++c) {
    const auto& p = protos[pick(rng)];
    std::vector<double> v(dim);
    double norm = 0.0;
    for (int k = 0; k < dim; ++k) {
      v[k] = p[k] + noise * n(rng);
      norm += v[k] * v[k];
    }
    norm = std::sqrt(norm);
    for (int k = 0; k < dim; ++k) f.data[static_cast<std::size_t>(c) * dim + k] = static_cast<float>(v[k] / norm);
  }
  return f;
}

inline double oracle_similarity(const FeatureFrame& f, int a, const FeatureFrame& g, int b) {
  double s = 0.0;
  for (int k = 0; k < f.dim; ++k) {
    s += static_cast<double>(f.data[static_cast<std::size_t>(a) * f.dim + k]) *
         static_cast<double>(g.data[static_cast<std::size_t>(b) * g.dim + k]);
  }
  return s;
}

using MatchSet = std::set<std::tuple<int, int, double>>;

inline MatchSet to_set(const std::vector<FeatureMatch>& m) {
  MatchSet s;
  for (const auto& x : m) s.emplace(x.a, x.b, x.similarity);
  return s;
}

/// (a, b) matches when b is the first maximizer of a's row, a is the first
/// maximizer of b's column, and the similarity exceeds theta_m.
inline MatchSet oracle_mutual_maximum(const FeatureFrame& fi, const FeatureFrame& fj, double theta_m) {
  MatchSet out;
  for (int a = 0; a < fi.cells(); ++a) {
    for (int b = 0; b < fj.cells(); ++b) {
      const double s = oracle_similarity(fi, a, fj, b);
      bool row_best = true;
      for (int b2 = 0; b2 < fj.cells() && row_best; ++b2) {
        const double s2 = oracle_similarity(fi, a, fj, b2);
        if (s2 > s || (s2 == s && b2 < b)) row_best = false;
      }
      bool col_best = true;
      for (int a2 = 0; a2 < fi.cells() && col_best; ++a2) {
        const double s2 = oracle_similarity(fi, a2, fj, b);
        if (s2 > s || (s2 == s && a2 < a)) col_best = false;
      }
      if (row_best && col_best && s > theta_m) out.emplace(a, b, s);
    }
  }
  return out;
}

inline bool oracle_background_keep(const FeatureFrame& f, int cell, double theta_s, int n_s) {
  int count = 0;
  for (int k = 0; k < f.cells(); ++k) {
    if (k == cell) continue;
    if (oracle_similarity(f, cell, f, k) > theta_s) ++count;
  }
  return count < n_s;
}

inline MatchSet oracle_background_filter(const FeatureFrame& fi, const FeatureFrame& fj, const MatchSet& in,
                                         double theta_s, int n_s) {
  MatchSet out;
  for (const auto& m : in) {
    if (oracle_background_keep(fi, std::get<0>(m), theta_s, n_s) &&
        oracle_background_keep(fj, std::get<1>(m), theta_s, n_s)) {
      out.insert(m);
    }
  }
  return out;
}

inline bool oracle_local_keep(const FeatureFrame& f, int cell, double theta_l, int window) {
  const int half = window / 2;
  const int cx = cell % f.width, cy = cell / f.width;
  double sum = 0.0;
  for (int k = 0; k < f.cells(); ++k) {
    const int x = k % f.width, y = k / f.width;
    if (std::abs(x - cx) <= half && std::abs(y - cy) <= half) sum += oracle_similarity(f, cell, f, k);
  }
  return sum > theta_l;
}

inline MatchSet oracle_local_noise_filter(const FeatureFrame& fi, const FeatureFrame& fj, const MatchSet& in,
                                          double theta_l, int window) {
  MatchSet out;
  for (const auto& m : in) {
    if (oracle_local_keep(fi, std::get<0>(m), theta_l, window) &&
        oracle_local_keep(fj, std::get<1>(m), theta_l, window)) {
      out.insert(m);
    }
  }
  return out;
}

}  // namespace cadex::testing
