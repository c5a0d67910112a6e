#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "cadex/fit.hpp"
#include "cadex/synth.hpp"

namespace cadex::testing {

struct SynthCase {
  synth::SceneSpec spec;
  synth::Scene scene;
  synth::SynthData data;
  Dataset dataset;

  explicit SynthCase(const synth::SceneSpec& s) : spec(s), scene(s), data(synth::generate(scene)) {
    dataset.video_id = spec.name;
    dataset.frames = spec.frames;
    dataset.width = spec.width;
    dataset.height = spec.height;
    dataset.K = scene.intrinsics();
    dataset.flows = data.flows;
    dataset.init_depth = data.init_depth;
    dataset.features = data.features;
    dataset.gt_tracks = data.gt.tracks;
  }
};

// An eight-frame 32x32 desk: cheap enough for unit tests.
inline synth::SceneSpec small_desk(std::uint64_t seed = 0) {
  synth::SceneSpec s = synth::SceneSpec::desk();
  s.frames = 8;
  s.width = 32;
  s.height = 32;
  s.flow_window = 4;
  s.seed = seed;
  return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cadex_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cadex::testing
