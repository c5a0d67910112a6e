#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "cadex/data.hpp"

namespace cadex::testing {

// Straight-line metric reimplementations over whole track sets, skipping each
// track's query frame.

struct OracleScores {
  std::vector<double> delta;
  std::vector<double> jaccard;
  double oa = 0.0;
};

inline OracleScores oracle_scores(const TrackSet& pred, const TrackSet& gt, const std::vector<double>& thr) {
  OracleScores s;
  std::size_t total = 0, agree = 0;
  for (double x : thr) {
    double vis = 0, within = 0, tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
      for (int t = 0; t < gt.frames; ++t) {
        if (t == gt.tracks[k].query_frame) continue;
        const Pixel2 a = pred.tracks[k].positions[t];
        const Pixel2 b = gt.tracks[k].positions[t];
        const double dx = a.u - b.u, dy = a.v - b.v;
        const bool close = dx * dx + dy * dy < x * x;
        const bool g = gt.tracks[k].visible[t];
        const bool p = pred.tracks[k].visible[t];
        if (g) {
          vis += 1;
          within += close;
        }
        if (g && p && close) tp += 1;
        else {
          if (p) fp += 1;
          if (g) fn += 1;
        }
      }
    }
    s.delta.push_back(within / vis);
    s.jaccard.push_back(tp / (tp + fp + fn));
  }
  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    for (int t = 0; t < gt.frames; ++t) {
      if (t == gt.tracks[k].query_frame) continue;
      ++total;
      agree += (pred.tracks[k].visible[t] != 0) == (gt.tracks[k].visible[t] != 0);
    }
  }
  s.oa = static_cast<double>(agree) / static_cast<double>(total);
  return s;
}

inline std::optional<double> oracle_tc(const TrackSet& pred, const TrackSet& gt) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    const auto& g = gt.tracks[k];
    const auto& p = pred.tracks[k];
    for (int t = 1; t + 1 < gt.frames; ++t) {
      if (!(g.visible[t - 1] && g.visible[t] && g.visible[t + 1])) continue;
      const double gu = (g.positions[t + 1].u - g.positions[t].u) - (g.positions[t].u - g.positions[t - 1].u);
      const double gv = (g.positions[t + 1].v - g.positions[t].v) - (g.positions[t].v - g.positions[t - 1].v);
      const double pu = (p.positions[t + 1].u - p.positions[t].u) - (p.positions[t].u - p.positions[t - 1].u);
      const double pv = (p.positions[t + 1].v - p.positions[t].v) - (p.positions[t].v - p.positions[t - 1].v);
      sum += std::sqrt((pu - gu) * (pu - gu) + (pv - gv) * (pv - gv));
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// Bilinear sampling written as a tent-weighted sum over every pixel.
inline std::optional<double> oracle_dag(const TrackSet& pred, const FlowSet& flows) {
  double sum = 0.0;
  int n = 0;
  for (const Track& tr : pred.tracks) {
    for (int t = 0; t + 1 < pred.frames; ++t) {
      if (!tr.visible[t] || !tr.visible[t + 1]) continue;
      const FlowField* f = flows.find(t, t + 1);
      if (!f) continue;
      const Pixel2 a = tr.positions[t];
      if (!(a.u >= 0 && a.v >= 0 && a.u <= f->width - 1 && a.v <= f->height - 1)) continue;
      double fu = 0.0, fv = 0.0;
      bool ok = true;
      for (int y = 0; y < f->height; ++y) {
        for (int x = 0; x < f->width; ++x) {
          const double w = std::max(0.0, 1.0 - std::abs(a.u - x)) * std::max(0.0, 1.0 - std::abs(a.v - y));
          if (w == 0.0) continue;
          ok = ok && f->valid(x, y);
          fu += w * f->du(x, y);
          fv += w * f->dv(x, y);
        }
      }
      if (!ok) continue;
      const Pixel2 b = tr.positions[t + 1];
      const double eu = b.u - a.u - fu, ev = b.v - a.v - fv;
      sum += std::sqrt(eu * eu + ev * ev);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// Random prediction/ground-truth pair with errors spread across the thresholds.
struct RandomTracks {
  TrackSet pred, gt;
  FlowSet flows;
};

inline RandomTracks random_tracks(int n_tracks, int frames, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> step(0.0, 1.5);
  std::exponential_distribution<double> err(0.2);
  RandomTracks r;
  r.pred.frames = r.gt.frames = frames;
  for (int k = 0; k < n_tracks; ++k) {
    Track g, p;
    g.query_frame = p.query_frame = static_cast<int>(u01(rng) * frames) % frames;
    Pixel2 x{u01(rng) * (width - 1), u01(rng) * (height - 1)};
    for (int t = 0; t < frames; ++t) {
      x = {std::clamp(x.u + step(rng), 0.0, width - 1.0), std::clamp(x.v + step(rng), 0.0, height - 1.0)};
      g.positions.push_back(x);
      g.visible.push_back(u01(rng) < 0.8);
      const double e = err(rng), a = 2 * M_PI * u01(rng);
      p.positions.push_back({std::clamp(x.u + e * std::cos(a), 0.0, width - 1.0),
                             std::clamp(x.v + e * std::sin(a), 0.0, height - 1.0)});
      p.visible.push_back(g.visible.back() ? u01(rng) < 0.9 : u01(rng) < 0.2);
    }
    g.query = g.positions[g.query_frame];
    p.query = g.query;
    r.gt.tracks.push_back(std::move(g));
    r.pred.tracks.push_back(std::move(p));
  }
  for (int t = 0; t + 1 < frames; ++t) {
    FlowField f;
    f.from = t;
    f.to = t + 1;
    f.width = width;
    f.height = height;
    f.data.resize(static_cast<std::size_t>(3) * width * height);
    for (std::size_t c = 0; c < f.data.size(); c += 3) {
      f.data[c] = static_cast<float>(step(rng));
      f.data[c + 1] = static_cast<float>(step(rng));
      f.data[c + 2] = u01(rng) < 0.95 ? 1.0f : 0.0f;
    }
    r.flows.add(std::move(f));
  }
  return r;
}

}  // namespace cadex::testing
