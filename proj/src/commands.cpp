#include "cadex/commands.hpp"

#include <fstream>

#include "cadex/errors.hpp"
#include "json.hpp"

namespace cadex::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const DataError*>(&e)) return kDataError;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumericalError;
  if (dynamic_cast<const std::out_of_range*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return kDataError;
  return kInternalError;
}

synth::SceneSpec scene_spec(const SynthOptions& o) {
  synth::SceneSpec s;
  if (o.preset == "desk") {
    s = synth::SceneSpec::desk();
  } else if (o.preset == "occlusion") {
    s = synth::SceneSpec::occlusion();
  } else if (o.preset == "still") {
    s = synth::SceneSpec::still();
  } else {
    throw ConfigError("unknown scene preset '" + o.preset + "' (expected desk, occlusion or still)");
  }
  s.seed = o.seed;
  if (o.no_noise) s.without_noise();
  if (o.sigma_flow) s.sigma_flow = *o.sigma_flow;
  if (o.sigma_depth) s.sigma_depth = *o.sigma_depth;
  if (o.sigma_feat) s.sigma_feat = *o.sigma_feat;
  s.validate();
  return s;
}

io::DatasetManifest cmd_synth(const SynthOptions& options, const fs::path& out_dir) {
  const synth::SceneSpec spec = scene_spec(options);
  const synth::Scene scene(spec);
  const synth::SynthData data = synth::generate(scene);
  io::SynthWriteOptions w;
  w.video_id = options.video_id.empty() ? spec.name : options.video_id;
  w.pairs_instead_of_features = options.with_pairs;
  w.mining_seed = options.seed;
  return io::write_synth_dataset(out_dir, data, w);
}

FitResult cmd_fit(const RunConfig& config, const fs::path& manifest, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  const io::DatasetManifest m = io::load_manifest(manifest);
  const Dataset data = io::load_dataset(m);
  FitResult result = fit(data, config);
  for (const auto& w : result.report.warnings) log << "warning: " << w << '\n';
  fs::create_directories(out_dir);
  io::save_checkpoint(out_dir / "checkpoint.bin", result.model);
  io::write_telemetry(out_dir / "telemetry.csv", result.report.telemetry);
  io::write_text(out_dir / "config.json", config.to_json() + "\n");
  json summary;
  summary["video_id"] = data.video_id;
  summary["steps"] = result.model.steps;
  summary["flow_pairs"] = result.report.flow_pairs;
  summary["longterm_pairs"] = result.report.longterm_pairs;
  summary["external_pairs"] = result.report.external_pairs;
  summary["evaluated_pairs"] = result.report.evaluated;
  summary["skipped_pairs"] = result.report.skipped;
  summary["seconds"] = result.report.seconds;
  summary["warnings"] = result.report.warnings;
  if (!result.report.telemetry.empty()) {
    const TelemetryRow& last = result.report.telemetry.back();
    summary["final"] = {{"L_p", last.pixel}, {"L_d", last.depth}, {"L_reg", last.reg}, {"total", last.total}};
  }
  io::write_text(out_dir / "fit_summary.json", summary.dump(2) + "\n");
  return result;
}

std::vector<TrackQuery> queries_of(const TrackSet& tracks) {
  std::vector<TrackQuery> out;
  out.reserve(tracks.tracks.size());
  for (const auto& t : tracks.tracks) out.push_back(TrackQuery{t.query_frame, t.query});
  return out;
}

TrackSet cmd_track(const fs::path& checkpoint, const std::vector<TrackQuery>& queries, const fs::path& out,
                   bool binary) {
  const Model model = io::load_checkpoint(checkpoint);
  TrackSet tracks = track_many(model.field, model.depth, model.K, queries, model.config.tracker);
  if (!out.empty()) {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    if (binary) {
      io::write_tracks_binary(out, tracks);
    } else {
      io::write_tracks_text(out, tracks);
    }
  }
  return tracks;
}

EvalReport cmd_eval(const fs::path& tracks_path, const fs::path& manifest, const fs::path& out_prefix) {
  const io::DatasetManifest m = io::load_manifest(manifest);
  const TrackSet pred = io::read_tracks(tracks_path);
  if (pred.frames != m.frames) throw DataError("tracks cover " + std::to_string(pred.frames) + " frames, dataset has " +
                                               std::to_string(m.frames));
  FlowSet flows;
  if (!m.flow_path.empty()) {
    const io::RasterStack r = io::load_rasters(m, io::RasterRole::Flow);
    const std::size_t n = r.frame_values();
    for (std::size_t k = 0; k < m.flow_pairs.size(); ++k) {
      if (m.flow_pairs[k].second != m.flow_pairs[k].first + 1) continue;
      FlowField f;
      f.from = m.flow_pairs[k].first;
      f.to = m.flow_pairs[k].second;
      f.width = m.width;
      f.height = m.height;
      f.data.assign(r.data.begin() + k * n, r.data.begin() + (k + 1) * n);
      flows.add(std::move(f));
    }
  }
  EvalReport report;
  if (!m.gt_tracks_path.empty()) {
    const TrackSet gt = io::read_tracks(m.resolve(m.gt_tracks_path));
    if (gt.tracks.size() != pred.tracks.size()) {
      throw DataError("tracks file holds " + std::to_string(pred.tracks.size()) + " tracks, ground truth has " +
                      std::to_string(gt.tracks.size()));
    }
    for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
      if (gt.tracks[k].query_frame != pred.tracks[k].query_frame || !(gt.tracks[k].query == pred.tracks[k].query)) {
        throw DataError("track " + std::to_string(k) + " was queried at a different frame or pixel than the ground truth");
      }
    }
    report = evaluate_tracks(pred, gt, m.flow_path.empty() ? nullptr : &flows);
  } else if (!m.flow_path.empty()) {
    report.tracks = pred.tracks.size();
    report.dag = flow_disagreement(pred, flows);
  } else {
    throw DataError("evaluation needs ground-truth tracks or flow fields in the manifest");
  }
  if (!out_prefix.empty()) {
    if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
    io::write_text(fs::path(out_prefix.string() + ".json"), report.to_json() + "\n");
    io::write_text(fs::path(out_prefix.string() + ".csv"), report.to_text());
  }
  return report;
}

void cmd_export(const fs::path& checkpoint, const std::string& what, const fs::path& out) {
  if (what == "loss") {
    const fs::path telemetry = checkpoint.parent_path() / "telemetry.csv";
    io::write_telemetry(out, io::read_telemetry(telemetry));
    return;
  }
  const Model model = io::load_checkpoint(checkpoint);
  if (what == "depth") {
    io::RasterStack r{model.depth.width(), model.depth.height(), 1, model.depth.frames(), {}};
    r.data.assign(model.depth.maps().value.begin(), model.depth.maps().value.end());
    io::write_raster(out, r);
  } else if (what == "field") {
    json j;
    j["frames"] = model.field.frames();
    j["bounds"] = {{"lo", model.field.bounds().lo}, {"hi", model.field.bounds().hi}};
    json params = json::array();
    for (const diff::Parameter* p : model.field.parameters()) params.push_back({{"name", p->name}, {"values", p->value}});
    j["parameters"] = params;
    io::write_text(out, j.dump() + "\n");
  } else {
    throw ConfigError("unknown export target '" + what + "' (expected depth, field or loss)");
  }
}

}  // namespace cadex::cli
