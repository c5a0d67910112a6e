#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cadex/data.hpp"
#include "cadex/fit.hpp"
#include "cadex/synth.hpp"

namespace cadex::io {

inline constexpr std::uint8_t kRasterVersion = 1;
inline constexpr int kManifestVersion = 1;
inline constexpr std::uint8_t kTrackVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// `count` frames of height x width cells with `channels` interleaved floats.
struct RasterStack {
  int width = 0;
  int height = 0;
  int channels = 1;
  int count = 0;
  std::vector<float> data;

  std::size_t frame_values() const { return static_cast<std::size_t>(width) * height * channels; }
};

struct RasterHeader {
  std::uint8_t version = kRasterVersion;
  int width = 0;
  int height = 0;
  int channels = 0;
  int count = 0;
};

std::vector<std::uint8_t> encode_raster(const RasterStack& r);
/// Throws FormatError for a bad magic, endianness marker or version and
/// DataError when the payload size disagrees with the header. `name` labels
/// the source in messages.
RasterStack decode_raster(std::span<const std::uint8_t> bytes, const std::string& name);
void write_raster(const std::filesystem::path& path, const RasterStack& r);
RasterStack read_raster(const std::filesystem::path& path);
/// Reads and checks only the header against the file size.
RasterHeader read_raster_header(const std::filesystem::path& path);

enum class RasterRole { Depth, Flow, Features, GtDepth };
std::string to_string(RasterRole role);

struct DatasetManifest {
  int version = kManifestVersion;
  std::string video_id;
  int frames = 0;
  int width = 0;
  int height = 0;
  CameraIntrinsics K;
  std::string depth_path;
  std::string depth_units = "meters";
  std::string flow_path;
  std::vector<std::pair<int, int>> flow_pairs;
  std::string features_path;
  int feature_stride = 0;
  std::string correspondences_path;
  std::string gt_tracks_path;
  std::string gt_depth_path;
  /// Directory relative paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const;
  std::string to_json() const;
  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b);
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
/// Parses and validates every referenced file's existence and shape. Errors
/// name the first inconsistent file.
DatasetManifest load_manifest(const std::filesystem::path& path);
RasterStack load_rasters(const DatasetManifest& m, RasterRole role);
Dataset load_dataset(const DatasetManifest& m);
/// Ground-truth depth as doubles; empty when the manifest has none.
std::vector<double> load_gt_depth(const DatasetManifest& m);

struct SynthWriteOptions {
  std::string video_id = "synthetic";
  /// Mine long-term pairs and ship them as the correspondence file instead of
  /// the feature maps.
  bool pairs_instead_of_features = false;
  SupervisionConfig supervision;
  std::uint64_t mining_seed = 0;
};
DatasetManifest write_synth_dataset(const std::filesystem::path& dir, const synth::SynthData& data,
                                    const SynthWriteOptions& options = {});

/// Header line then one record per line: i,u_i,v_i,j,u_j,v_j,kind,confidence.
void write_correspondences(const std::filesystem::path& path, std::span<const CorrPair> pairs);
std::vector<CorrPair> read_correspondences(const std::filesystem::path& path);

/// Text: a header line "cadex-tracks <version> <frames> <count>", then per
/// track "query_frame query_u query_v" followed by frames triples "u v visible".
void write_tracks_text(const std::filesystem::path& path, const TrackSet& tracks);
/// Binary: magic, endianness marker, version, flags, frames, count, then per
/// track the query and frames (u, v) doubles, visibility bytes and optional depths.
void write_tracks_binary(const std::filesystem::path& path, const TrackSet& tracks);
/// Detects the variant from the first bytes.
TrackSet read_tracks(const std::filesystem::path& path);

/// One query per line: "frame u v". Blank lines and lines starting with '#'
/// are ignored.
std::vector<TrackQuery> read_queries(const std::filesystem::path& path);

/// step,L_p,L_d,L_reg,total,wall_time
void write_telemetry(const std::filesystem::path& path, const std::vector<TelemetryRow>& rows);
std::vector<TelemetryRow> read_telemetry(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& name);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cadex::io
