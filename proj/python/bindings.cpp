#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cadex/commands.hpp"
#include "cadex/errors.hpp"
#include "cadex/ingest.hpp"
#include "cadex/metrics.hpp"
#include "cadex/tracker.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace cadex;

namespace {

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  const auto opt = [](const std::optional<double>& v) -> py::object {
    return v ? py::object(py::float_(*v)) : py::object(py::none());
  };
  d["tracks"] = r.tracks;
  d["points"] = r.points;
  d["delta_per_threshold"] = r.delta.per_threshold;
  d["delta_avg"] = r.delta.defined ? py::object(py::float_(r.delta.mean)) : py::object(py::none());
  d["jaccard_per_threshold"] = r.jaccard.per_threshold;
  d["average_jaccard"] = r.jaccard.defined ? py::object(py::float_(r.jaccard.mean)) : py::object(py::none());
  d["occlusion_accuracy"] = opt(r.occlusion_accuracy);
  d["temporal_coherence"] = opt(r.temporal_coherence);
  d["gt_temporal_coherence"] = opt(r.gt_temporal_coherence);
  d["dag"] = opt(r.dag);
  return d;
}

std::vector<TrackQuery> queries_from(py::array_t<double, py::array::c_style | py::array::forcecast> q) {
  if (q.ndim() != 2 || q.shape(1) != 3) throw py::value_error("queries must have shape (N, 3): frame, u, v");
  auto a = q.unchecked<2>();
  std::vector<TrackQuery> out(q.shape(0));
  for (py::ssize_t k = 0; k < q.shape(0); ++k) out[k] = {static_cast<int>(a(k, 0)), Pixel2{a(k, 1), a(k, 2)}};
  return out;
}

py::tuple tracks_to_arrays(const TrackSet& t) {
  const py::ssize_t n = static_cast<py::ssize_t>(t.tracks.size()), T = t.frames;
  py::array_t<double> pos({n, T, py::ssize_t{2}});
  py::array_t<bool> vis({n, T});
  py::array_t<int> qf(n);
  auto p = pos.mutable_unchecked<3>();
  auto v = vis.mutable_unchecked<2>();
  auto f = qf.mutable_unchecked<1>();
  for (py::ssize_t k = 0; k < n; ++k) {
    f(k) = t.tracks[k].query_frame;
    for (py::ssize_t s = 0; s < T; ++s) {
      p(k, s, 0) = t.tracks[k].positions[s].u;
      p(k, s, 1) = t.tracks[k].positions[s].v;
      v(k, s) = t.tracks[k].visible[s] != 0;
    }
  }
  return py::make_tuple(pos, vis, qf);
}

TrackSet arrays_to_tracks(py::array_t<double, py::array::c_style | py::array::forcecast> positions,
                          py::array_t<bool, py::array::c_style | py::array::forcecast> visible,
                          py::array_t<int, py::array::c_style | py::array::forcecast> query_frames) {
  if (positions.ndim() != 3 || positions.shape(2) != 2) throw py::value_error("positions must have shape (N, T, 2)");
  const py::ssize_t n = positions.shape(0), T = positions.shape(1);
  if (visible.ndim() != 2 || visible.shape(0) != n || visible.shape(1) != T) {
    throw py::value_error("visible must have shape (N, T)");
  }
  if (query_frames.ndim() != 1 || query_frames.shape(0) != n) throw py::value_error("query_frames must have shape (N,)");
  auto p = positions.unchecked<3>();
  auto v = visible.unchecked<2>();
  auto f = query_frames.unchecked<1>();
  TrackSet t;
  t.frames = static_cast<int>(T);
  t.tracks.resize(n);
  for (py::ssize_t k = 0; k < n; ++k) {
    Track& tr = t.tracks[k];
    tr.query_frame = f(k);
    if (tr.query_frame < 0 || tr.query_frame >= T) throw py::value_error("query frame out of range");
    for (py::ssize_t s = 0; s < T; ++s) {
      tr.positions.push_back({p(k, s, 0), p(k, s, 1)});
      tr.visible.push_back(v(k, s) ? 1 : 0);
    }
    tr.query = tr.positions[tr.query_frame];
  }
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dense point tracking by test-time optimization of an invertible deformation field";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", data.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("default_config", [] { return RunConfig{}.to_json(); }, "Default run configuration as JSON.");
  m.def(
      "normalize_config", [](const std::string& text) { return RunConfig::from_json(text).to_json(); },
      py::arg("config_json"), "Validates a configuration and returns it with every key filled in.");

  m.def(
      "synth",
      [](const fs::path& out_dir, const std::string& preset, std::uint64_t seed, bool no_noise, bool with_pairs) {
        cli::SynthOptions o;
        o.preset = preset;
        o.seed = seed;
        o.no_noise = no_noise;
        o.with_pairs = with_pairs;
        const io::DatasetManifest man = cli::cmd_synth(o, out_dir);
        return out_dir / "manifest.json";
      },
      py::arg("out_dir"), py::arg("preset") = "desk", py::arg("seed") = 0, py::arg("no_noise") = false,
      py::arg("with_pairs") = false, "Writes a synthetic dataset and returns its manifest path.");

  m.def(
      "fit",
      [](const fs::path& manifest, const fs::path& out_dir, const std::optional<std::string>& config,
         std::optional<int> iterations, std::optional<std::uint64_t> seed) {
        RunConfig cfg = config ? RunConfig::from_json(*config) : RunConfig{};
        if (iterations) cfg.iterations = *iterations;
        if (seed) cfg.seed = *seed;
        std::ostringstream log;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = cli::cmd_fit(cfg, manifest, out_dir, log);
        }
        py::dict d;
        d["steps"] = r.model.steps;
        d["seconds"] = r.report.seconds;
        d["flow_pairs"] = r.report.flow_pairs;
        d["longterm_pairs"] = r.report.longterm_pairs;
        d["external_pairs"] = r.report.external_pairs;
        d["warnings"] = r.report.warnings;
        std::vector<double> total;
        for (const auto& row : r.report.telemetry) total.push_back(row.total);
        d["loss"] = py::array_t<double>(total.size(), total.data());
        d["checkpoint"] = out_dir / "checkpoint.bin";
        return d;
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("config") = py::none(), py::arg("iterations") = py::none(),
      py::arg("seed") = py::none(), "Optimizes a dataset and writes the run directory; returns a summary.");

  m.def(
      "lattice_queries",
      [](int frame, int width, int height, int stride) {
        const auto q = lattice_queries(frame, width, height, stride);
        py::array_t<double> a({static_cast<py::ssize_t>(q.size()), py::ssize_t{3}});
        auto v = a.mutable_unchecked<2>();
        for (std::size_t k = 0; k < q.size(); ++k) {
          v(k, 0) = q[k].frame;
          v(k, 1) = q[k].pixel.u;
          v(k, 2) = q[k].pixel.v;
        }
        return a;
      },
      py::arg("frame"), py::arg("width"), py::arg("height"), py::arg("stride") = 4);

  m.def(
      "track",
      [](const fs::path& checkpoint, py::array_t<double, py::array::c_style | py::array::forcecast> queries) {
        const auto q = queries_from(queries);
        TrackSet t;
        {
          py::gil_scoped_release release;
          t = cli::cmd_track(checkpoint, q, "", false);
        }
        py::tuple arrays = tracks_to_arrays(t);
        return py::make_tuple(arrays[0], arrays[1]);
      },
      py::arg("checkpoint"), py::arg("queries"),
      "Tracks (N, 3) queries of frame, u, v; returns positions (N, T, 2) and visibility (N, T).");

  m.def(
      "read_tracks",
      [](const fs::path& path) { return tracks_to_arrays(io::read_tracks(path)); }, py::arg("path"),
      "Returns positions (N, T, 2), visibility (N, T) and query frames (N,).");

  m.def(
      "evaluate",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> pred_positions,
         py::array_t<bool, py::array::c_style | py::array::forcecast> pred_visible,
         py::array_t<double, py::array::c_style | py::array::forcecast> gt_positions,
         py::array_t<bool, py::array::c_style | py::array::forcecast> gt_visible,
         py::array_t<int, py::array::c_style | py::array::forcecast> query_frames) {
        return report_dict(evaluate_tracks(arrays_to_tracks(pred_positions, pred_visible, query_frames),
                                           arrays_to_tracks(gt_positions, gt_visible, query_frames)));
      },
      py::arg("pred_positions"), py::arg("pred_visible"), py::arg("gt_positions"), py::arg("gt_visible"),
      py::arg("query_frames"), "Point-tracking metrics; fractions in [0, 1], query frames excluded.");

  m.def(
      "evaluate_files",
      [](const fs::path& tracks, const fs::path& manifest) { return report_dict(cli::cmd_eval(tracks, manifest, "")); },
      py::arg("tracks"), py::arg("manifest"), "Evaluates a track file against a dataset's ground truth and flow.");

  m.def(
      "read_raster",
      [](const fs::path& path) {
        io::RasterStack r = io::read_raster(path);
        py::array_t<float> a({static_cast<py::ssize_t>(r.count), static_cast<py::ssize_t>(r.height),
                              static_cast<py::ssize_t>(r.width), static_cast<py::ssize_t>(r.channels)});
        std::copy(r.data.begin(), r.data.end(), a.mutable_data());
        return a;
      },
      py::arg("path"), "Returns a float32 array of shape (count, height, width, channels).");

  m.def(
      "write_raster",
      [](const fs::path& path, py::array_t<float, py::array::c_style | py::array::forcecast> a) {
        if (a.ndim() != 4) throw py::value_error("raster must have shape (count, height, width, channels)");
        io::RasterStack r{static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(3)),
                          static_cast<int>(a.shape(0)), std::vector<float>(a.data(), a.data() + a.size())};
        io::write_raster(path, r);
      },
      py::arg("path"), py::arg("array"));
}
