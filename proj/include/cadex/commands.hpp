#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cadex/fit.hpp"
#include "cadex/ingest.hpp"
#include "cadex/metrics.hpp"
#include "cadex/synth.hpp"

namespace cadex::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,
  kConfigError = 3,
  kDataError = 4,
  kNumericalError = 5,
};

/// Maps a failure onto the process exit code of its class.
int exit_code_for(const std::exception& e);

struct SynthOptions {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  bool no_noise = false;
  std::optional<double> sigma_flow;
  std::optional<double> sigma_depth;
  std::optional<double> sigma_feat;
  bool with_pairs = false;
  std::string video_id;
};

/// Throws ConfigError for an unknown preset.
synth::SceneSpec scene_spec(const SynthOptions& options);

io::DatasetManifest cmd_synth(const SynthOptions& options, const std::filesystem::path& out_dir);

/// Writes checkpoint.bin, telemetry.csv, config.json and fit_summary.json
/// into out_dir; warnings go to `log`.
FitResult cmd_fit(const RunConfig& config, const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                  std::ostream& log);

/// Query frames and pixels of a track set, in order.
std::vector<TrackQuery> queries_of(const TrackSet& tracks);

TrackSet cmd_track(const std::filesystem::path& checkpoint, const std::vector<TrackQuery>& queries,
                   const std::filesystem::path& out, bool binary);

/// Evaluates against the manifest's GT tracks (and flow for DAG). Writes
/// <out_prefix>.json and <out_prefix>.csv when out_prefix is non-empty.
EvalReport cmd_eval(const std::filesystem::path& tracks, const std::filesystem::path& manifest,
                    const std::filesystem::path& out_prefix);

/// what = depth | field | loss. Loss curves are read from the telemetry.csv
/// next to the checkpoint.
void cmd_export(const std::filesystem::path& checkpoint, const std::string& what, const std::filesystem::path& out);

}  // namespace cadex::cli
