#include "cadex/metrics.hpp"

#include <cmath>
#include "json.hpp"
#include <sstream>

#include "cadex/errors.hpp"

namespace cadex {

namespace {

bool selected(const PointView& pts, std::size_t k) { return pts.mask.empty() || pts.mask[k] != 0; }

double distance(const Pixel2& a, const Pixel2& b) {
  const double d = std::hypot(a.u - b.u, a.v - b.v);
  return std::isfinite(d) ? d : std::numeric_limits<double>::infinity();
}

void check_sizes(const PointView& pts, bool need_pred_vis) {
  const std::size_t n = pts.gt.size();
  if (pts.pred.size() != n || pts.gt_visible.size() != n || (need_pred_vis && pts.pred_visible.size() != n) ||
      (!pts.mask.empty() && pts.mask.size() != n)) {
    throw DataError("metrics: prediction and ground-truth arrays differ in length");
  }
}

void finish_mean(ThresholdMetric& m) {
  double s = 0.0;
  for (double v : m.per_threshold) s += v;
  m.mean = m.per_threshold.empty() ? 0.0 : s / static_cast<double>(m.per_threshold.size());
}

}  // namespace

ThresholdMetric delta_avg(const PointView& pts, const std::vector<double>& thresholds) {
  check_sizes(pts, false);
  ThresholdMetric m;
  m.thresholds = thresholds;
  std::vector<std::size_t> within(thresholds.size(), 0);
  std::size_t visible = 0;
  for (std::size_t k = 0; k < pts.gt.size(); ++k) {
    if (!selected(pts, k) || !pts.gt_visible[k]) continue;
    ++visible;
    const double d = distance(pts.pred[k], pts.gt[k]);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (d < thresholds[t]) ++within[t];
    }
  }
  m.defined = visible > 0;
  m.per_threshold.assign(thresholds.size(), 0.0);
  if (m.defined) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      m.per_threshold[t] = static_cast<double>(within[t]) / static_cast<double>(visible);
    }
  }
  finish_mean(m);
  return m;
}

ThresholdMetric average_jaccard(const PointView& pts, const std::vector<double>& thresholds) {
  check_sizes(pts, true);
  ThresholdMetric m;
  m.thresholds = thresholds;
  m.per_threshold.assign(thresholds.size(), 0.0);
  std::size_t visible = 0;
  for (std::size_t k = 0; k < pts.gt.size(); ++k) {
    if (selected(pts, k) && pts.gt_visible[k]) ++visible;
  }
  m.defined = visible > 0;
  if (!m.defined) return m;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < pts.gt.size(); ++k) {
      if (!selected(pts, k)) continue;
      const bool gv = pts.gt_visible[k] != 0;
      const bool pv = pts.pred_visible[k] != 0;
      const bool within = distance(pts.pred[k], pts.gt[k]) < thresholds[t];
      if (gv && pv && within) ++tp;
      if (pv && (!gv || !within)) ++fp;
      if (gv && (!pv || !within)) ++fn;
    }
    const std::size_t denom = tp + fp + fn;
    m.per_threshold[t] = denom ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  finish_mean(m);
  return m;
}

std::optional<double> occlusion_accuracy(std::span<const std::uint8_t> pred_visible,
                                         std::span<const std::uint8_t> gt_visible, std::span<const std::uint8_t> mask) {
  if (pred_visible.size() != gt_visible.size() || (!mask.empty() && mask.size() != gt_visible.size())) {
    throw DataError("occlusion_accuracy: arrays differ in length");
  }
  std::size_t n = 0, correct = 0;
  for (std::size_t k = 0; k < gt_visible.size(); ++k) {
    if (!mask.empty() && !mask[k]) continue;
    ++n;
    if ((pred_visible[k] != 0) == (gt_visible[k] != 0)) ++correct;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

void check_tracks(const TrackSet& pred, const TrackSet& gt) {
  if (pred.tracks.size() != gt.tracks.size() || pred.frames != gt.frames) {
    throw DataError("metrics: predicted and ground-truth track sets differ in shape");
  }
  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    if (pred.tracks[k].positions.size() != static_cast<std::size_t>(gt.frames) ||
        gt.tracks[k].positions.size() != static_cast<std::size_t>(gt.frames) ||
        pred.tracks[k].visible.size() != static_cast<std::size_t>(gt.frames) ||
        gt.tracks[k].visible.size() != static_cast<std::size_t>(gt.frames)) {
      throw DataError("metrics: track " + std::to_string(k) + " has the wrong length");
    }
  }
}

Pixel2 second_difference(const std::vector<Pixel2>& p, int t) {
  return Pixel2{p[t + 2].u - 2.0 * p[t + 1].u + p[t].u, p[t + 2].v - 2.0 * p[t + 1].v + p[t].v};
}

}  // namespace

std::optional<double> temporal_coherence(const TrackSet& pred, const TrackSet& gt) {
  check_tracks(pred, gt);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    const Track& g = gt.tracks[k];
    const Track& p = pred.tracks[k];
    for (int t = 0; t + 2 < gt.frames; ++t) {
      if (!g.visible[t] || !g.visible[t + 1] || !g.visible[t + 2]) continue;
      const Pixel2 ag = second_difference(g.positions, t);
      const Pixel2 ap = second_difference(p.positions, t);
      const double d = std::hypot(ap.u - ag.u, ap.v - ag.v);
      if (!std::isfinite(d)) continue;
      sum += d;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> gt_acceleration_magnitude(const TrackSet& gt) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Track& g : gt.tracks) {
    for (int t = 0; t + 2 < gt.frames; ++t) {
      if (!g.visible[t] || !g.visible[t + 1] || !g.visible[t + 2]) continue;
      const Pixel2 a = second_difference(g.positions, t);
      sum += std::hypot(a.u, a.v);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> flow_disagreement(const TrackSet& pred, const FlowSet& flows) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Track& tr : pred.tracks) {
    for (int t = 0; t + 1 < pred.frames; ++t) {
      if (!tr.visible[t] || !tr.visible[t + 1]) continue;
      const Pixel2& a = tr.positions[t];
      const Pixel2& b = tr.positions[t + 1];
      const FlowField* f = flows.find(t, t + 1);
      if (!f || !std::isfinite(a.u) || !std::isfinite(b.u) || !in_image(a, f->width, f->height)) continue;
      int x0 = std::min(static_cast<int>(std::floor(a.u)), f->width - 2);
      int y0 = std::min(static_cast<int>(std::floor(a.v)), f->height - 2);
      const double wx = a.u - x0;
      const double wy = a.v - y0;
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      const double ws[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
      double fu = 0.0, fv = 0.0;
      bool ok = true;
      for (int c = 0; c < 4; ++c) {
        if (ws[c] == 0.0) continue;
        if (!f->valid(xs[c], ys[c])) {
          ok = false;
          break;
        }
        fu += ws[c] * f->du(xs[c], ys[c]);
        fv += ws[c] * f->dv(xs[c], ys[c]);
      }
      if (!ok) continue;
      sum += std::hypot((b.u - a.u) - fu, (b.v - a.v) - fv);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

EvalReport evaluate_tracks(const TrackSet& pred, const TrackSet& gt, const FlowSet* flows,
                           const std::vector<double>& thresholds) {
  check_tracks(pred, gt);
  std::vector<Pixel2> pp, gp;
  std::vector<std::uint8_t> pv, gv, mask;
  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    const Track& g = gt.tracks[k];
    const Track& p = pred.tracks[k];
    for (int t = 0; t < gt.frames; ++t) {
      pp.push_back(p.positions[t]);
      gp.push_back(g.positions[t]);
      pv.push_back(p.visible[t]);
      gv.push_back(g.visible[t]);
      mask.push_back(t == g.query_frame ? 0 : 1);
    }
  }
  const PointView view{pp, pv, gp, gv, mask};
  EvalReport r;
  r.tracks = gt.tracks.size();
  for (auto m : mask) r.points += m;
  r.delta = delta_avg(view, thresholds);
  r.jaccard = average_jaccard(view, thresholds);
  r.occlusion_accuracy = occlusion_accuracy(pv, gv, mask);
  r.temporal_coherence = temporal_coherence(pred, gt);
  r.gt_temporal_coherence = gt_acceleration_magnitude(gt);
  if (flows) r.dag = flow_disagreement(pred, *flows);
  return r;
}

EvalReport EvalReport::mean_of(const std::vector<EvalReport>& reports) {
  EvalReport out;
  if (reports.empty()) return out;
  const auto avg_metric = [&](auto getter) {
    ThresholdMetric m = getter(reports.front());
    std::size_t n = 0;
    std::vector<double> acc(m.thresholds.size(), 0.0);
    for (const auto& r : reports) {
      const ThresholdMetric& x = getter(r);
      if (!x.defined) continue;
      ++n;
      for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += x.per_threshold[t];
    }
    m.defined = n > 0;
    for (std::size_t t = 0; t < acc.size(); ++t) m.per_threshold[t] = n ? acc[t] / n : 0.0;
    finish_mean(m);
    return m;
  };
  const auto avg_opt = [&](auto getter) -> std::optional<double> {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports) {
      const std::optional<double>& v = getter(r);
      if (v) {
        s += *v;
        ++n;
      }
    }
    if (!n) return std::nullopt;
    return s / static_cast<double>(n);
  };
  out.delta = avg_metric([](const EvalReport& r) -> const ThresholdMetric& { return r.delta; });
  out.jaccard = avg_metric([](const EvalReport& r) -> const ThresholdMetric& { return r.jaccard; });
  out.occlusion_accuracy = avg_opt([](const EvalReport& r) -> const std::optional<double>& { return r.occlusion_accuracy; });
  out.temporal_coherence = avg_opt([](const EvalReport& r) -> const std::optional<double>& { return r.temporal_coherence; });
  out.gt_temporal_coherence =
      avg_opt([](const EvalReport& r) -> const std::optional<double>& { return r.gt_temporal_coherence; });
  out.dag = avg_opt([](const EvalReport& r) -> const std::optional<double>& { return r.dag; });
  for (const auto& r : reports) {
    out.tracks += r.tracks;
    out.points += r.points;
  }
  return out;
}

namespace {

std::string threshold_key(const std::string& prefix, double x) {
  std::ostringstream os;
  os << prefix << x;
  return os.str();
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  const auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["tracks"] = tracks;
  j["points"] = points;
  j["delta_avg"] = delta.defined ? nlohmann::json(100.0 * delta.mean) : nlohmann::json(nullptr);
  j["average_jaccard"] = jaccard.defined ? nlohmann::json(100.0 * jaccard.mean) : nlohmann::json(nullptr);
  nlohmann::json per = nlohmann::json::object();
  nlohmann::json per_aj = nlohmann::json::object();
  for (std::size_t t = 0; t < delta.thresholds.size(); ++t) {
    per[threshold_key("", delta.thresholds[t])] = 100.0 * delta.per_threshold[t];
  }
  for (std::size_t t = 0; t < jaccard.thresholds.size(); ++t) {
    per_aj[threshold_key("", jaccard.thresholds[t])] = 100.0 * jaccard.per_threshold[t];
  }
  j["delta_per_threshold"] = per;
  j["jaccard_per_threshold"] = per_aj;
  j["occlusion_accuracy"] = occlusion_accuracy ? nlohmann::json(100.0 * *occlusion_accuracy) : nlohmann::json(nullptr);
  j["temporal_coherence"] = opt(temporal_coherence);
  j["gt_temporal_coherence"] = opt(gt_temporal_coherence);
  j["dag"] = opt(dag);
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os.precision(10);
  const auto line = [&](const std::string& name, bool defined, double v) {
    os << name << ',';
    if (defined) os << v;
    else os << "nan";
    os << '\n';
  };
  os << "metric,value\n";
  line("tracks", true, static_cast<double>(tracks));
  line("points", true, static_cast<double>(points));
  for (std::size_t t = 0; t < delta.thresholds.size(); ++t) {
    line(threshold_key("delta_", delta.thresholds[t]), delta.defined, 100.0 * delta.per_threshold[t]);
  }
  line("delta_avg", delta.defined, 100.0 * delta.mean);
  for (std::size_t t = 0; t < jaccard.thresholds.size(); ++t) {
    line(threshold_key("jaccard_", jaccard.thresholds[t]), jaccard.defined, 100.0 * jaccard.per_threshold[t]);
  }
  line("average_jaccard", jaccard.defined, 100.0 * jaccard.mean);
  line("occlusion_accuracy", occlusion_accuracy.has_value(), 100.0 * occlusion_accuracy.value_or(0.0));
  line("temporal_coherence", temporal_coherence.has_value(), temporal_coherence.value_or(0.0));
  line("gt_temporal_coherence", gt_temporal_coherence.has_value(), gt_temporal_coherence.value_or(0.0));
  line("dag", dag.has_value(), dag.value_or(0.0));
  return os.str();
}

}  // namespace cadex
