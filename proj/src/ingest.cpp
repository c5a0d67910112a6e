#include "cadex/ingest.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "cadex/errors.hpp"
#include "json.hpp"

namespace cadex::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kRasterMagic[4] = {'C', 'D', 'X', 'R'};
constexpr char kTrackMagic[4] = {'C', 'D', 'X', 'T'};
constexpr char kCheckpointMagic[4] = {'C', 'D', 'X', 'C'};
constexpr std::uint16_t kEndianMarker = 0xFEFF;
constexpr std::size_t kRasterHeaderBytes = 16;

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class U>
  void uint(U v) {
    for (std::size_t k = 0; k < sizeof(U); ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void i32(std::int32_t v) { uint(static_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> in, std::string name) : in_(in), name_(std::move(name)) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw DataError(name_ + ": file is truncated (shape mismatch)");
  }
  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(static_cast<U>(in_[pos_ + k]) << (8 * k));
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::int32_t i32() { return static_cast<std::int32_t>(uint<std::uint32_t>()); }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  const std::string& name() const { return name_; }

 private:
  std::span<const std::uint8_t> in_;
  std::string name_;
  std::size_t pos_ = 0;
};

void check_magic(ByteReader& r, const char (&magic)[4], const char* what) {
  if (r.remaining() < 4) throw FormatError(r.name() + ": too short to be a " + what);
  const std::string m = r.str(4);
  if (std::memcmp(m.data(), magic, 4) != 0) throw FormatError(r.name() + ": not a " + std::string(what) + " (bad magic)");
}

void check_endianness(ByteReader& r) {
  const std::uint16_t marker = r.uint<std::uint16_t>();
  if (marker == 0xFFFE) throw FormatError(r.name() + ": endianness marker mismatch (big-endian data)");
  if (marker != kEndianMarker) throw FormatError(r.name() + ": invalid endianness marker");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError(where + ": cannot parse number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError(where + ": cannot parse integer '" + s + "'");
  return static_cast<int>(v);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

std::ifstream open_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ------------------------------------------------------------------ rasters

std::vector<std::uint8_t> encode_raster(const RasterStack& r) {
  if (r.width < 1 || r.height < 1 || r.width > 0xFFFF || r.height > 0xFFFF) {
    throw DataError("raster size must lie in [1, 65535]");
  }
  if (r.channels < 1 || r.channels > 0xFF) throw DataError("raster channels must lie in [1, 255]");
  if (r.count < 0) throw DataError("raster count must be non-negative");
  if (r.data.size() != r.frame_values() * static_cast<std::size_t>(r.count)) {
    throw DataError("raster data size does not match its shape");
  }
  ByteWriter w;
  w.bytes(kRasterMagic, 4);
  w.uint<std::uint16_t>(kEndianMarker);
  w.uint<std::uint8_t>(kRasterVersion);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(r.channels));
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(r.width));
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(r.height));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(r.count));
  w.data().reserve(kRasterHeaderBytes + 4 * r.data.size());
  for (float v : r.data) w.f32(v);
  return std::move(w.data());
}

namespace {

RasterHeader decode_header(ByteReader& rd, std::size_t total_bytes) {
  check_magic(rd, kRasterMagic, "raster file");
  if (rd.remaining() < kRasterHeaderBytes - 4) throw DataError(rd.name() + ": truncated raster header");
  check_endianness(rd);
  RasterHeader h;
  h.version = rd.u8();
  if (h.version != kRasterVersion) {
    throw FormatError(rd.name() + ": unsupported raster version " + std::to_string(h.version));
  }
  h.channels = rd.u8();
  h.width = rd.uint<std::uint16_t>();
  h.height = rd.uint<std::uint16_t>();
  h.count = static_cast<int>(rd.uint<std::uint32_t>());
  const std::size_t expected =
      kRasterHeaderBytes + 4ull * static_cast<std::size_t>(h.width) * h.height * h.channels * h.count;
  if (total_bytes != expected) {
    throw DataError(rd.name() + ": shape mismatch, header implies " + std::to_string(expected) + " bytes but file has " +
                    std::to_string(total_bytes));
  }
  return h;
}

}  // namespace

RasterStack decode_raster(std::span<const std::uint8_t> bytes, const std::string& name) {
  ByteReader rd(bytes, name);
  const RasterHeader h = decode_header(rd, bytes.size());
  RasterStack r;
  r.width = h.width;
  r.height = h.height;
  r.channels = h.channels;
  r.count = h.count;
  r.data.resize(r.frame_values() * r.count);
  for (auto& v : r.data) v = rd.f32();
  return r;
}

void write_raster(const fs::path& path, const RasterStack& r) { write_file(path, encode_raster(r)); }

RasterStack read_raster(const fs::path& path) { return decode_raster(read_file(path), path.string()); }

RasterHeader read_raster_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> head(kRasterHeaderBytes);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const std::size_t size = static_cast<std::size_t>(fs::file_size(path));
  ByteReader rd(head, path.string());
  return decode_header(rd, size);
}

std::string to_string(RasterRole role) {
  switch (role) {
    case RasterRole::Depth: return "depth";
    case RasterRole::Flow: return "flow";
    case RasterRole::Features: return "features";
    case RasterRole::GtDepth: return "gt_depth";
  }
  return "unknown";
}

// ------------------------------------------------------------------ manifest

fs::path DatasetManifest::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
  return a.version == b.version && a.video_id == b.video_id && a.frames == b.frames && a.width == b.width &&
         a.height == b.height && a.K.width == b.K.width && a.K.height == b.K.height && a.K.focal == b.K.focal &&
         a.K.cx == b.K.cx && a.K.cy == b.K.cy && a.depth_path == b.depth_path && a.depth_units == b.depth_units &&
         a.flow_path == b.flow_path && a.flow_pairs == b.flow_pairs && a.features_path == b.features_path &&
         a.feature_stride == b.feature_stride && a.correspondences_path == b.correspondences_path &&
         a.gt_tracks_path == b.gt_tracks_path && a.gt_depth_path == b.gt_depth_path;
}

std::string DatasetManifest::to_json() const {
  json j;
  j["format"] = "cadex-dataset";
  j["version"] = version;
  j["video_id"] = video_id;
  j["frames"] = frames;
  j["width"] = width;
  j["height"] = height;
  j["camera"] = {{"focal", K.focal}, {"cx", K.cx}, {"cy", K.cy}};
  j["depth"] = {{"path", depth_path}, {"units", depth_units}};
  if (!flow_path.empty()) j["flow"] = {{"path", flow_path}, {"pairs", flow_pairs}};
  if (!features_path.empty()) j["features"] = {{"path", features_path}, {"stride", feature_stride}};
  if (!correspondences_path.empty()) j["correspondences"] = {{"path", correspondences_path}};
  if (!gt_tracks_path.empty()) j["gt_tracks"] = {{"path", gt_tracks_path}};
  if (!gt_depth_path.empty()) j["gt_depth"] = {{"path", gt_depth_path}};
  return j.dump(2);
}

void write_manifest(const fs::path& path, const DatasetManifest& m) { write_text(path, m.to_json() + "\n"); }

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + ": missing key '" + key + "'");
  return *it;
}

template <class T>
T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": key '" + key + "' has the wrong type");
  }
}

void check_exists(const DatasetManifest& m, const std::string& rel, const std::string& role) {
  if (!fs::exists(m.resolve(rel))) {
    throw DataError("manifest references missing " + role + " file '" + m.resolve(rel).string() + "'");
  }
}

void check_raster(const DatasetManifest& m, const std::string& rel, const std::string& role, int width, int height,
                  int channels, int count) {
  check_exists(m, rel, role);
  const RasterHeader h = read_raster_header(m.resolve(rel));
  const auto mismatch = [&](const std::string& what) {
    throw DataError(role + " file '" + m.resolve(rel).string() + "': shape mismatch in " + what);
  };
  if (width > 0 && h.width != width) mismatch("width");
  if (height > 0 && h.height != height) mismatch("height");
  if (channels > 0 && h.channels != channels) mismatch("channels");
  if (count >= 0 && h.count != count) mismatch("frame count");
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  json j;
  {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
  }
  const std::string where = "manifest '" + path.string() + "'";
  if (get_as<std::string>(j, "format", where) != "cadex-dataset") throw FormatError(where + ": unknown format");
  DatasetManifest m;
  m.version = get_as<int>(j, "version", where);
  if (m.version != kManifestVersion) throw FormatError(where + ": unsupported version " + std::to_string(m.version));
  m.base_dir = path.parent_path();
  m.video_id = get_as<std::string>(j, "video_id", where);
  m.frames = get_as<int>(j, "frames", where);
  m.width = get_as<int>(j, "width", where);
  m.height = get_as<int>(j, "height", where);
  if (m.frames < 2 || m.width < 2 || m.height < 2) throw DataError(where + ": clip must be at least 2 frames of 2x2");
  const json& cam = require(j, "camera", where);
  m.K = CameraIntrinsics{m.width, m.height, get_as<double>(cam, "focal", where), get_as<double>(cam, "cx", where),
                         get_as<double>(cam, "cy", where)};
  const json& depth = require(j, "depth", where);
  m.depth_path = get_as<std::string>(depth, "path", where);
  if (depth.contains("units")) m.depth_units = get_as<std::string>(depth, "units", where);
  if (j.contains("flow")) {
    m.flow_path = get_as<std::string>(j["flow"], "path", where);
    m.flow_pairs = get_as<std::vector<std::pair<int, int>>>(j["flow"], "pairs", where);
  }
  if (j.contains("features")) {
    m.features_path = get_as<std::string>(j["features"], "path", where);
    m.feature_stride = get_as<int>(j["features"], "stride", where);
    if (m.feature_stride < 1) throw DataError(where + ": feature stride must be positive");
  }
  if (j.contains("correspondences")) m.correspondences_path = get_as<std::string>(j["correspondences"], "path", where);
  if (j.contains("gt_tracks")) m.gt_tracks_path = get_as<std::string>(j["gt_tracks"], "path", where);
  if (j.contains("gt_depth")) m.gt_depth_path = get_as<std::string>(j["gt_depth"], "path", where);

  check_raster(m, m.depth_path, "depth", m.width, m.height, 1, m.frames);
  if (!m.flow_path.empty()) {
    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : m.flow_pairs) {
      if (a < 0 || a >= m.frames || b < 0 || b >= m.frames || a == b || !seen.insert({a, b}).second) {
        throw DataError(where + ": invalid or duplicate flow pair (" + std::to_string(a) + ", " + std::to_string(b) + ")");
      }
    }
    check_raster(m, m.flow_path, "flow", m.width, m.height, 3, static_cast<int>(m.flow_pairs.size()));
  }
  if (!m.features_path.empty()) {
    check_raster(m, m.features_path, "features", m.width / m.feature_stride, m.height / m.feature_stride, -1, m.frames);
  }
  if (!m.correspondences_path.empty()) check_exists(m, m.correspondences_path, "correspondences");
  if (!m.gt_tracks_path.empty()) {
    check_exists(m, m.gt_tracks_path, "gt_tracks");
    if (read_tracks(m.resolve(m.gt_tracks_path)).frames != m.frames) {
      throw DataError("gt_tracks file '" + m.resolve(m.gt_tracks_path).string() + "': frame count mismatch");
    }
  }
  if (!m.gt_depth_path.empty()) check_raster(m, m.gt_depth_path, "gt_depth", m.width, m.height, 1, m.frames);
  return m;
}

RasterStack load_rasters(const DatasetManifest& m, RasterRole role) {
  std::string rel;
  switch (role) {
    case RasterRole::Depth: rel = m.depth_path; break;
    case RasterRole::Flow: rel = m.flow_path; break;
    case RasterRole::Features: rel = m.features_path; break;
    case RasterRole::GtDepth: rel = m.gt_depth_path; break;
  }
  if (rel.empty()) throw DataError("manifest has no " + to_string(role) + " file");
  return read_raster(m.resolve(rel));
}

Dataset load_dataset(const DatasetManifest& m) {
  Dataset d;
  d.video_id = m.video_id;
  d.frames = m.frames;
  d.width = m.width;
  d.height = m.height;
  d.K = m.K;
  const RasterStack depth = load_rasters(m, RasterRole::Depth);
  d.init_depth.assign(depth.data.begin(), depth.data.end());
  for (std::size_t k = 0; k < d.init_depth.size(); ++k) {
    if (!(d.init_depth[k] > 0.0) || !std::isfinite(d.init_depth[k])) {
      throw DataError("depth file '" + m.resolve(m.depth_path).string() + "': non-positive depth at value " +
                      std::to_string(k));
    }
  }
  if (!m.flow_path.empty()) {
    RasterStack flow = load_rasters(m, RasterRole::Flow);
    const std::size_t n = flow.frame_values();
    for (std::size_t k = 0; k < m.flow_pairs.size(); ++k) {
      FlowField f;
      f.from = m.flow_pairs[k].first;
      f.to = m.flow_pairs[k].second;
      f.width = m.width;
      f.height = m.height;
      f.data.assign(flow.data.begin() + k * n, flow.data.begin() + (k + 1) * n);
      d.flows.add(std::move(f));
    }
  }
  if (!m.features_path.empty()) {
    RasterStack feat = load_rasters(m, RasterRole::Features);
    d.features.frames = feat.count;
    d.features.width = feat.width;
    d.features.height = feat.height;
    d.features.dim = feat.channels;
    d.features.stride = m.feature_stride;
    d.features.data = std::move(feat.data);
  }
  if (!m.correspondences_path.empty()) d.external_pairs = read_correspondences(m.resolve(m.correspondences_path));
  if (!m.gt_tracks_path.empty()) d.gt_tracks = read_tracks(m.resolve(m.gt_tracks_path));
  d.validate();
  return d;
}

std::vector<double> load_gt_depth(const DatasetManifest& m) {
  if (m.gt_depth_path.empty()) return {};
  const RasterStack r = load_rasters(m, RasterRole::GtDepth);
  return std::vector<double>(r.data.begin(), r.data.end());
}

DatasetManifest write_synth_dataset(const fs::path& dir, const synth::SynthData& data,
                                    const SynthWriteOptions& options) {
  fs::create_directories(dir);
  const synth::GroundTruth& gt = data.gt;
  DatasetManifest m;
  m.video_id = options.video_id;
  m.frames = gt.frames;
  m.width = gt.width;
  m.height = gt.height;
  m.K = gt.K;
  m.base_dir = dir;

  const auto depth_raster = [&](const std::vector<double>& v) {
    RasterStack r{gt.width, gt.height, 1, gt.frames, {}};
    r.data.assign(v.begin(), v.end());
    return r;
  };
  m.depth_path = "depth.cdxr";
  write_raster(dir / m.depth_path, depth_raster(data.init_depth));
  m.gt_depth_path = "gt_depth.cdxr";
  write_raster(dir / m.gt_depth_path, depth_raster(gt.depth));

  RasterStack flow{gt.width, gt.height, 3, static_cast<int>(data.flows.size()), {}};
  for (const auto& f : data.flows.fields()) {
    m.flow_pairs.emplace_back(f.from, f.to);
    flow.data.insert(flow.data.end(), f.data.begin(), f.data.end());
  }
  m.flow_path = "flow.cdxr";
  write_raster(dir / m.flow_path, flow);

  if (options.pairs_instead_of_features) {
    std::mt19937_64 rng(options.mining_seed);
    const auto pairs = build_longterm_pairs(data.features, options.supervision, rng);
    m.correspondences_path = "correspondences.csv";
    write_correspondences(dir / m.correspondences_path, pairs);
  } else {
    const FeatureMapStack& fm = data.features;
    RasterStack feat{fm.width, fm.height, fm.dim, fm.frames, fm.data};
    m.features_path = "features.cdxr";
    m.feature_stride = fm.stride;
    write_raster(dir / m.features_path, feat);
  }
  m.gt_tracks_path = "gt_tracks.txt";
  write_tracks_text(dir / m.gt_tracks_path, gt.tracks);
  write_manifest(dir / "manifest.json", m);
  return m;
}

// ------------------------------------------------------------------ correspondences

void write_correspondences(const fs::path& path, std::span<const CorrPair> pairs) {
  std::ostringstream os;
  os << "i,u_i,v_i,j,u_j,v_j,kind,confidence\n";
  for (const auto& p : pairs) {
    os << p.i << ',' << fmt_double(p.p_i.u) << ',' << fmt_double(p.p_i.v) << ',' << p.j << ',' << fmt_double(p.p_j.u)
       << ',' << fmt_double(p.p_j.v) << ',' << to_string(p.kind) << ',' << fmt_double(p.confidence) << '\n';
  }
  write_text(path, os.str());
}

std::vector<CorrPair> read_correspondences(const fs::path& path) {
  std::ifstream in = open_text(path);
  std::string line;
  std::vector<CorrPair> out;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("i,", 0) == 0) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 8) throw FormatError(where + ": expected 8 fields, found " + std::to_string(f.size()));
    CorrPair p;
    p.i = parse_int(f[0], where);
    p.p_i = {parse_double(f[1], where), parse_double(f[2], where)};
    p.j = parse_int(f[3], where);
    p.p_j = {parse_double(f[4], where), parse_double(f[5], where)};
    try {
      p.kind = pair_kind_from_string(f[6]);
    } catch (const std::exception&) {
      throw FormatError(where + ": unknown pair kind '" + f[6] + "'");
    }
    p.confidence = parse_double(f[7], where);
    out.push_back(p);
  }
  return out;
}

// ------------------------------------------------------------------ tracks

void write_tracks_text(const fs::path& path, const TrackSet& ts) {
  std::ostringstream os;
  os << "cadex-tracks " << int(kTrackVersion) << ' ' << ts.frames << ' ' << ts.tracks.size() << '\n';
  for (const auto& t : ts.tracks) {
    if (t.positions.size() != static_cast<std::size_t>(ts.frames) || t.visible.size() != t.positions.size()) {
      throw DataError("track length does not match the frame count");
    }
    os << t.query_frame << ' ' << fmt_double(t.query.u) << ' ' << fmt_double(t.query.v);
    for (int f = 0; f < ts.frames; ++f) {
      os << ' ' << fmt_double(t.positions[f].u) << ' ' << fmt_double(t.positions[f].v) << ' ' << int(t.visible[f]);
    }
    os << '\n';
  }
  write_text(path, os.str());
}

void write_tracks_binary(const fs::path& path, const TrackSet& ts) {
  ByteWriter w;
  w.bytes(kTrackMagic, 4);
  w.uint<std::uint16_t>(kEndianMarker);
  w.uint<std::uint8_t>(kTrackVersion);
  bool has_depth = !ts.tracks.empty();
  for (const auto& t : ts.tracks) has_depth = has_depth && t.warped_depth.size() == static_cast<std::size_t>(ts.frames);
  w.uint<std::uint8_t>(has_depth ? 1 : 0);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ts.frames));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ts.tracks.size()));
  for (const auto& t : ts.tracks) {
    if (t.positions.size() != static_cast<std::size_t>(ts.frames) || t.visible.size() != t.positions.size()) {
      throw DataError("track length does not match the frame count");
    }
    w.i32(t.query_frame);
    w.f64(t.query.u);
    w.f64(t.query.v);
    for (const auto& p : t.positions) {
      w.f64(p.u);
      w.f64(p.v);
    }
    for (auto v : t.visible) w.uint<std::uint8_t>(v);
    if (has_depth) {
      for (double z : t.warped_depth) w.f64(z);
    }
  }
  write_file(path, w.data());
}

namespace {

TrackSet read_tracks_binary(std::span<const std::uint8_t> bytes, const std::string& name) {
  ByteReader r(bytes, name);
  check_magic(r, kTrackMagic, "track file");
  check_endianness(r);
  const std::uint8_t version = r.u8();
  if (version != kTrackVersion) throw FormatError(name + ": unsupported track version " + std::to_string(version));
  const bool has_depth = (r.u8() & 1) != 0;
  TrackSet ts;
  ts.frames = static_cast<int>(r.uint<std::uint32_t>());
  const std::uint32_t count = r.uint<std::uint32_t>();
  const std::size_t per_track = 4 + 16 + static_cast<std::size_t>(ts.frames) * (16 + 1 + (has_depth ? 8 : 0));
  if (r.remaining() != per_track * count) throw DataError(name + ": shape mismatch in track payload");
  ts.tracks.resize(count);
  for (auto& t : ts.tracks) {
    t.query_frame = r.i32();
    t.query.u = r.f64();
    t.query.v = r.f64();
    t.positions.resize(ts.frames);
    for (auto& p : t.positions) {
      p.u = r.f64();
      p.v = r.f64();
    }
    t.visible.resize(ts.frames);
    for (auto& v : t.visible) v = r.u8();
    if (has_depth) {
      t.warped_depth.resize(ts.frames);
      for (auto& z : t.warped_depth) z = r.f64();
    }
  }
  return ts;
}

TrackSet read_tracks_text(const fs::path& path) {
  std::ifstream in = open_text(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty track file");
  const auto head = tokens(line);
  if (head.size() != 4 || head[0] != "cadex-tracks") throw FormatError(path.string() + ": not a track file");
  const std::string where0 = path.string() + ":1";
  if (parse_int(head[1], where0) != kTrackVersion) throw FormatError(path.string() + ": unsupported track version");
  TrackSet ts;
  ts.frames = parse_int(head[2], where0);
  const int count = parse_int(head[3], where0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tk = tokens(line);
    if (tk.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tk.size() != 3 + 3 * static_cast<std::size_t>(ts.frames)) {
      throw DataError(where + ": expected " + std::to_string(3 + 3 * ts.frames) + " fields");
    }
    Track t;
    t.query_frame = parse_int(tk[0], where);
    t.query = {parse_double(tk[1], where), parse_double(tk[2], where)};
    for (int f = 0; f < ts.frames; ++f) {
      t.positions.push_back({parse_double(tk[3 + 3 * f], where), parse_double(tk[4 + 3 * f], where)});
      t.visible.push_back(parse_int(tk[5 + 3 * f], where) ? 1 : 0);
    }
    ts.tracks.push_back(std::move(t));
  }
  if (static_cast<int>(ts.tracks.size()) != count) {
    throw DataError(path.string() + ": header announces " + std::to_string(count) + " tracks, found " +
                    std::to_string(ts.tracks.size()));
  }
  return ts;
}

}  // namespace

TrackSet read_tracks(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kTrackMagic, 4) == 0) {
    return read_tracks_binary(bytes, path.string());
  }
  return read_tracks_text(path);
}

std::vector<TrackQuery> read_queries(const fs::path& path) {
  std::ifstream in = open_text(path);
  std::string line;
  std::vector<TrackQuery> out;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tk = tokens(line);
    if (tk.empty() || tk[0][0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tk.size() != 3) throw FormatError(where + ": expected 'frame u v'");
    out.push_back(TrackQuery{parse_int(tk[0], where), {parse_double(tk[1], where), parse_double(tk[2], where)}});
  }
  return out;
}

// ------------------------------------------------------------------ telemetry

void write_telemetry(const fs::path& path, const std::vector<TelemetryRow>& rows) {
  std::ostringstream os;
  os << "step,L_p,L_d,L_reg,total,wall_time\n";
  for (const auto& r : rows) {
    os << r.step << ',' << fmt_double(r.pixel) << ',' << fmt_double(r.depth) << ',' << fmt_double(r.reg) << ','
       << fmt_double(r.total) << ',' << fmt_double(r.wall_time) << '\n';
  }
  write_text(path, os.str());
}

std::vector<TelemetryRow> read_telemetry(const fs::path& path) {
  std::ifstream in = open_text(path);
  std::string line;
  std::vector<TelemetryRow> out;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 6) throw FormatError(where + ": expected 6 fields");
    out.push_back(TelemetryRow{parse_int(f[0], where), parse_double(f[1], where), parse_double(f[2], where),
                               parse_double(f[3], where), parse_double(f[4], where), parse_double(f[5], where)});
  }
  return out;
}

// ------------------------------------------------------------------ checkpoint

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  json meta;
  meta["config"] = json::parse(model.config.to_json());
  meta["frames"] = model.field.frames();
  meta["width"] = model.depth.width();
  meta["height"] = model.depth.height();
  meta["steps"] = model.steps;
  json params = json::array();
  for (const diff::Parameter* p : model.field.parameters()) params.push_back({{"name", p->name}, {"size", p->size()}});
  params.push_back({{"name", model.depth.maps().name}, {"size", model.depth.maps().size()}});
  meta["parameters"] = params;
  const std::string text = meta.dump();

  ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.uint<std::uint16_t>(kEndianMarker);
  w.uint<std::uint16_t>(kCheckpointVersion);
  w.uint<std::uint64_t>(text.size());
  w.bytes(text.data(), text.size());
  w.i32(model.K.width);
  w.i32(model.K.height);
  w.f64(model.K.focal);
  w.f64(model.K.cx);
  w.f64(model.K.cy);
  for (int a = 0; a < 3; ++a) {
    w.f64(model.field.bounds().lo[a]);
    w.f64(model.field.bounds().hi[a]);
  }
  for (const diff::Parameter* p : model.field.parameters()) {
    for (double v : p->value) w.f64(v);
  }
  for (double v : model.depth.maps().value) w.f64(v);
  for (int t = 0; t < model.depth.frames(); ++t) {
    for (double v : model.depth.init_frame(t)) w.f64(v);
  }
  return std::move(w.data());
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& name) {
  ByteReader r(bytes, name);
  check_magic(r, kCheckpointMagic, "checkpoint");
  check_endianness(r);
  const std::uint16_t version = r.uint<std::uint16_t>();
  if (version != kCheckpointVersion) throw FormatError(name + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t len = r.uint<std::uint64_t>();
  json meta;
  try {
    meta = json::parse(r.str(static_cast<std::size_t>(len)));
  } catch (const json::parse_error& e) {
    throw FormatError(name + ": corrupt checkpoint metadata: " + e.what());
  }
  Model m;
  m.config = RunConfig::from_json(meta.at("config").dump());
  const int frames = meta.at("frames").get<int>();
  const int width = meta.at("width").get<int>();
  const int height = meta.at("height").get<int>();
  m.steps = meta.at("steps").get<std::int64_t>();
  m.K.width = r.i32();
  m.K.height = r.i32();
  m.K.focal = r.f64();
  m.K.cx = r.f64();
  m.K.cy = r.f64();
  SceneBounds bounds;
  for (int a = 0; a < 3; ++a) {
    bounds.lo[a] = r.f64();
    bounds.hi[a] = r.f64();
  }
  m.field = DeformationField(m.config.field, frames, bounds, m.config.seed);
  const json& params = meta.at("parameters");
  auto field_params = m.field.parameters();
  if (params.size() != field_params.size() + 1) throw DataError(name + ": parameter list does not match the config");
  for (std::size_t k = 0; k < field_params.size(); ++k) {
    diff::Parameter& p = *field_params[k];
    if (params[k].at("name").get<std::string>() != p.name || params[k].at("size").get<std::size_t>() != p.size()) {
      throw DataError(name + ": parameter '" + p.name + "' does not match the config");
    }
    for (auto& v : p.value) v = r.f64();
  }
  const std::size_t depth_values = static_cast<std::size_t>(frames) * width * height;
  if (params.back().at("size").get<std::size_t>() != depth_values) throw DataError(name + ": depth size mismatch");
  std::vector<double> maps(depth_values), init(depth_values);
  for (auto& v : maps) v = r.f64();
  for (auto& v : init) v = r.f64();
  if (r.remaining() != 0) throw DataError(name + ": trailing bytes after checkpoint payload");
  m.depth = DepthMapSet(frames, width, height, std::move(init), m.config.min_depth);
  m.depth.maps().value = std::move(maps);
  return m;
}

void save_checkpoint(const fs::path& path, const Model& model) { write_file(path, encode_checkpoint(model)); }

Model load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path), path.string()); }

}  // namespace cadex::io
