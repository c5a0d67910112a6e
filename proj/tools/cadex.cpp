#include <CLI11.hpp>
#include <iostream>

#include "cadex/commands.hpp"
#include "cadex/errors.hpp"
#include "cadex/ingest.hpp"

namespace fs = std::filesystem;
using namespace cadex;

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Dense point tracking by test-time optimization of an invertible deformation field"};
  app.require_subcommand(0, 1);
  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults, "Print the default run configuration as JSON and exit");

  cli::SynthOptions synth_opts;
  std::string synth_out;
  double sigma_flow = -1.0, sigma_depth = -1.0, sigma_feat = -1.0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--preset", synth_opts.preset, "Scene preset: desk, occlusion or still");
  synth->add_option("--seed", synth_opts.seed, "Random seed");
  synth->add_flag("--no-noise", synth_opts.no_noise, "Emit exact flow, depth and features");
  synth->add_option("--sigma-flow", sigma_flow, "Flow noise in pixels");
  synth->add_option("--sigma-depth", sigma_depth, "Multiplicative depth noise");
  synth->add_option("--sigma-feat", sigma_feat, "Descriptor noise");
  synth->add_flag("--with-pairs", synth_opts.with_pairs, "Ship mined long-term pairs instead of feature maps");
  synth->add_option("--video-id", synth_opts.video_id, "Video id recorded in the manifest");

  std::string fit_manifest, fit_out, fit_config;
  int fit_iterations = -1, fit_threads = -1;
  std::int64_t fit_seed = -1;
  auto* fitc = app.add_subcommand("fit", "Optimize the deformation field and depth maps");
  fitc->add_option("--manifest", fit_manifest, "Dataset manifest")->required();
  fitc->add_option("--out", fit_out, "Run directory")->required();
  fitc->add_option("--config", fit_config, "Run configuration JSON");
  fitc->add_option("--iterations", fit_iterations, "Override the iteration count");
  fitc->add_option("--threads", fit_threads, "Override the thread count");
  fitc->add_option("--seed", fit_seed, "Override the seed");

  std::string track_ckpt, track_queries, track_out, track_manifest;
  int track_frame = 0, track_stride = 0;
  bool track_binary = false;
  auto* trackc = app.add_subcommand("track", "Track query pixels through every frame");
  trackc->add_option("--checkpoint", track_ckpt, "Checkpoint written by fit")->required();
  trackc->add_option("--out", track_out, "Track file")->required();
  auto* q1 = trackc->add_option("--queries", track_queries, "Query file with 'frame u v' lines");
  auto* q2 = trackc->add_option("--lattice", track_stride, "Track a lattice with this stride");
  auto* q3 = trackc->add_option("--gt-queries", track_manifest, "Use the query points of a manifest's GT tracks");
  q1->excludes(q2)->excludes(q3);
  q2->excludes(q3);
  trackc->add_option("--frame", track_frame, "Query frame for --lattice");
  trackc->add_flag("--binary", track_binary, "Write the binary track format");

  std::string eval_tracks, eval_manifest, eval_out;
  auto* evalc = app.add_subcommand("eval", "Evaluate tracks against ground truth and flow");
  evalc->add_option("--tracks", eval_tracks, "Track file")->required();
  evalc->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  evalc->add_option("--out", eval_out, "Report prefix; writes .json and .csv");

  std::string export_ckpt, export_what, export_out;
  auto* exportc = app.add_subcommand("export", "Dump depth maps, field parameters or loss curves");
  exportc->add_option("--checkpoint", export_ckpt, "Checkpoint written by fit")->required();
  exportc->add_option("--what", export_what, "depth, field or loss")
      ->required()
      ->check(CLI::IsMember({"depth", "field", "loss"}));
  exportc->add_option("--out", export_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsageError;
  }

  if (dump_defaults) {
    std::cout << RunConfig{}.to_json() << '\n';
    return cli::kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return cli::kUsageError;
  }

  if (synth->parsed()) {
    if (sigma_flow >= 0.0) synth_opts.sigma_flow = sigma_flow;
    if (sigma_depth >= 0.0) synth_opts.sigma_depth = sigma_depth;
    if (sigma_feat >= 0.0) synth_opts.sigma_feat = sigma_feat;
    const auto m = cli::cmd_synth(synth_opts, synth_out);
    std::cout << "wrote " << (fs::path(synth_out) / "manifest.json").string() << " (" << m.frames << " frames, "
              << m.width << "x" << m.height << ")\n";
  } else if (fitc->parsed()) {
    RunConfig config = fit_config.empty() ? RunConfig{} : RunConfig::load(fit_config);
    if (fit_iterations >= 0) config.iterations = fit_iterations;
    if (fit_threads >= 0) config.threads = fit_threads;
    if (fit_seed >= 0) config.seed = static_cast<std::uint64_t>(fit_seed);
    const FitResult r = cli::cmd_fit(config, fit_manifest, fit_out, std::cerr);
    std::cout << "fit " << r.model.steps << " steps in " << r.report.seconds << " s";
    if (!r.report.telemetry.empty()) std::cout << ", final loss " << r.report.telemetry.back().total;
    std::cout << '\n';
  } else if (trackc->parsed()) {
    std::vector<TrackQuery> queries;
    if (!track_queries.empty()) {
      queries = io::read_queries(track_queries);
    } else if (!track_manifest.empty()) {
      const auto m = io::load_manifest(track_manifest);
      if (m.gt_tracks_path.empty()) throw DataError("manifest has no ground-truth tracks");
      queries = cli::queries_of(io::read_tracks(m.resolve(m.gt_tracks_path)));
    } else {
      const Model model = io::load_checkpoint(track_ckpt);
      queries = lattice_queries(track_frame, model.K.width, model.K.height, track_stride > 0 ? track_stride : 4);
    }
    const TrackSet t = cli::cmd_track(track_ckpt, queries, track_out, track_binary);
    std::cout << "tracked " << t.tracks.size() << " queries over " << t.frames << " frames\n";
  } else if (evalc->parsed()) {
    const EvalReport r = cli::cmd_eval(eval_tracks, eval_manifest, eval_out);
    std::cout << r.to_text();
  } else if (exportc->parsed()) {
    cli::cmd_export(export_ckpt, export_what, export_out);
    std::cout << "wrote " << export_out << '\n';
  }
  return cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
}
