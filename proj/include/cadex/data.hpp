#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cadex/geometry.hpp"

namespace cadex {

/// Dense displacement from frame `from` to frame `to`: per pixel (du, dv, valid).
struct FlowField {
  int from = 0;
  int to = 0;
  int width = 0;
  int height = 0;
  std::vector<float> data;  // height * width * 3, row-major, channels interleaved

  float du(int x, int y) const { return data[3 * (static_cast<std::size_t>(y) * width + x)]; }
  float dv(int x, int y) const { return data[3 * (static_cast<std::size_t>(y) * width + x) + 1]; }
  bool valid(int x, int y) const { return data[3 * (static_cast<std::size_t>(y) * width + x) + 2] > 0.5f; }
};

/// All flow fields of a clip, addressable by (from, to).
class FlowSet {
 public:
  void add(FlowField field);
  /// nullptr when the pair is not present.
  const FlowField* find(int from, int to) const;
  const std::vector<FlowField>& fields() const { return fields_; }
  std::size_t size() const { return fields_.size(); }

 private:
  std::vector<FlowField> fields_;
  std::map<std::pair<int, int>, std::size_t> index_;
};

/// Read-only view of one frame of dense descriptors (height * width cells of
/// `dim` floats, unit norm).
struct FeatureFrame {
  std::span<const float> data;
  int height = 0;
  int width = 0;
  int dim = 0;

  int cells() const { return height * width; }
  const float* cell(int index) const { return data.data() + static_cast<std::size_t>(index) * dim; }
};

/// Per-frame descriptor grids sharing (height, width, dim); one cell covers a
/// stride x stride block of full-resolution pixels.
struct FeatureMapStack {
  int frames = 0;
  int height = 0;
  int width = 0;
  int dim = 0;
  int stride = 1;
  std::vector<float> data;

  FeatureFrame frame(int t) const {
    const std::size_t n = static_cast<std::size_t>(height) * width * dim;
    return FeatureFrame{std::span<const float>(data).subspan(t * n, n), height, width, dim};
  }
  /// Full-resolution pixel at the center of cell (cx, cy).
  Pixel2 cell_center(int cx, int cy) const {
    const double off = 0.5 * (stride - 1);
    return Pixel2{stride * cx + off, stride * cy + off};
  }
};

enum class PairKind : std::uint8_t { Flow = 0, LongTerm = 1 };

std::string to_string(PairKind kind);
PairKind pair_kind_from_string(const std::string& s);

/// One supervision correspondence: pixel p_i in frame i matches p_j in frame j.
struct CorrPair {
  int i = 0;
  Pixel2 p_i;
  int j = 0;
  Pixel2 p_j;
  PairKind kind = PairKind::Flow;
  double confidence = 1.0;
};

/// A trajectory over every frame of a clip.
struct Track {
  int query_frame = 0;
  Pixel2 query;
  std::vector<Pixel2> positions;
  std::vector<std::uint8_t> visible;
  /// Depth of the warped point per frame; empty for ground truth.
  std::vector<double> warped_depth;
};

struct TrackSet {
  int frames = 0;
  std::vector<Track> tracks;
};

}  // namespace cadex
