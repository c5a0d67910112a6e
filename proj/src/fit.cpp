#include "cadex/fit.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cadex/errors.hpp"
#include "json.hpp"

namespace cadex {

using nlohmann::json;

namespace {

// Reads one JSON object into typed fields and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path("") + "' must be an object");
  }

  void read(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) wrong_type(key, "an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, std::int64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) wrong_type(key, "an integer");
      out = v->get<std::int64_t>();
    }
  }
  void read(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) wrong_type(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) wrong_type(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) wrong_type(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) wrong_type(key, "an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) wrong_type(key, "an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  void read(const char* key, std::vector<int>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) wrong_type(key, "an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) wrong_type(key, "an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  /// nullptr when the section is absent.
  const json* section(const char* key) { return take(key); }
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + path(item.key()) + "'");
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  [[noreturn]] void wrong_type(const char* key, const char* what) const {
    throw ConfigError("config key '" + path(key) + "' must be " + what);
  }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <class Fn>
void read_section(ObjectReader& parent, const char* key, Fn&& fn) {
  if (const json* s = parent.section(key)) {
    ObjectReader r(*s, parent.path(key));
    fn(r);
    r.finish();
  }
}

}  // namespace

void RunConfig::validate() const {
  if (iterations < 0) throw ConfigError("config key 'iterations' must be >= 0");
  if (batch_size < 1) throw ConfigError("config key 'batch_size' must be >= 1");
  if (threads < 1) throw ConfigError("config key 'threads' must be >= 1");
  if (!(min_depth > 0.0)) throw ConfigError("config key 'min_depth' must be > 0");
  if (!(bounds_pad >= 0.0)) throw ConfigError("config key 'bounds_pad' must be >= 0");
  field.validate();
  if (!(optimizer.lr_field >= 0.0) || !(optimizer.lr_depth >= 0.0)) {
    throw ConfigError("config keys 'optimizer.lr_field' and 'optimizer.lr_depth' must be >= 0");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("config keys 'optimizer.beta1' and 'optimizer.beta2' must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ConfigError("config key 'optimizer.eps' must be > 0");
  if (!(optimizer.final_lr_ratio >= 0.0 && optimizer.final_lr_ratio <= 1.0)) {
    throw ConfigError("config key 'optimizer.final_lr_ratio' must lie in [0, 1]");
  }
  loss.validate();
  supervision.validate();
  if (!(tracker.eps_d_fraction >= 0.0)) throw ConfigError("config key 'tracker.eps_d_fraction' must be >= 0");
  if (tracker.block_size < 1) throw ConfigError("config key 'tracker.block_size' must be >= 1");
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["iterations"] = iterations;
  j["batch_size"] = batch_size;
  j["threads"] = threads;
  j["min_depth"] = min_depth;
  j["bounds_pad"] = bounds_pad;
  j["field"] = {{"n_blocks", field.n_blocks},
                {"control_points", field.control_points},
                {"hidden_width", field.hidden_width},
                {"hidden_layers", field.hidden_layers},
                {"temporal_features", field.temporal_features},
                {"temporal_fractions", field.temporal_fractions},
                {"spatial_resolutions", field.spatial_resolutions},
                {"spatial_features", field.spatial_features},
                {"init_scale", field.init_scale}};
  j["optimizer"] = {{"lr_field", optimizer.lr_field},   {"lr_depth", optimizer.lr_depth},
                    {"beta1", optimizer.beta1},         {"beta2", optimizer.beta2},
                    {"eps", optimizer.eps},             {"final_lr_ratio", optimizer.final_lr_ratio}};
  j["loss"] = {{"lambda_d", loss.lambda_d}, {"lambda_reg", loss.lambda_reg}};
  j["supervision"] = {{"flow_window", supervision.flow_window},
                      {"flow_stride", supervision.flow_stride},
                      {"longterm_gap", supervision.longterm_gap},
                      {"longterm_pair_factor", supervision.longterm_pair_factor},
                      {"theta_m", supervision.theta_m},
                      {"theta_s", supervision.theta_s},
                      {"n_s", supervision.n_s},
                      {"theta_l", supervision.theta_l},
                      {"local_window", supervision.local_window},
                      {"use_flow", supervision.use_flow},
                      {"use_longterm", supervision.use_longterm}};
  j["tracker"] = {{"eps_d_fraction", tracker.eps_d_fraction}, {"block_size", tracker.block_size}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader r(j, "");
  r.read("seed", c.seed);
  r.read("iterations", c.iterations);
  r.read("batch_size", c.batch_size);
  r.read("threads", c.threads);
  r.read("min_depth", c.min_depth);
  r.read("bounds_pad", c.bounds_pad);
  read_section(r, "field", [&](ObjectReader& s) {
    s.read("n_blocks", c.field.n_blocks);
    s.read("control_points", c.field.control_points);
    s.read("hidden_width", c.field.hidden_width);
    s.read("hidden_layers", c.field.hidden_layers);
    s.read("temporal_features", c.field.temporal_features);
    s.read("temporal_fractions", c.field.temporal_fractions);
    s.read("spatial_resolutions", c.field.spatial_resolutions);
    s.read("spatial_features", c.field.spatial_features);
    s.read("init_scale", c.field.init_scale);
  });
  read_section(r, "optimizer", [&](ObjectReader& s) {
    s.read("lr_field", c.optimizer.lr_field);
    s.read("lr_depth", c.optimizer.lr_depth);
    s.read("beta1", c.optimizer.beta1);
    s.read("beta2", c.optimizer.beta2);
    s.read("eps", c.optimizer.eps);
    s.read("final_lr_ratio", c.optimizer.final_lr_ratio);
  });
  read_section(r, "loss", [&](ObjectReader& s) {
    s.read("lambda_d", c.loss.lambda_d);
    s.read("lambda_reg", c.loss.lambda_reg);
  });
  read_section(r, "supervision", [&](ObjectReader& s) {
    s.read("flow_window", c.supervision.flow_window);
    s.read("flow_stride", c.supervision.flow_stride);
    s.read("longterm_gap", c.supervision.longterm_gap);
    s.read("longterm_pair_factor", c.supervision.longterm_pair_factor);
    s.read("theta_m", c.supervision.theta_m);
    s.read("theta_s", c.supervision.theta_s);
    s.read("n_s", c.supervision.n_s);
    s.read("theta_l", c.supervision.theta_l);
    s.read("local_window", c.supervision.local_window);
    s.read("use_flow", c.supervision.use_flow);
    s.read("use_longterm", c.supervision.use_longterm);
  });
  read_section(r, "tracker", [&](ObjectReader& s) {
    s.read("eps_d_fraction", c.tracker.eps_d_fraction);
    s.read("block_size", c.tracker.block_size);
  });
  r.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void Dataset::validate() const {
  if (frames < 2) throw DataError("dataset needs at least 2 frames");
  if (width < 2 || height < 2) throw DataError("dataset images must be at least 2x2");
  if (K.width != width || K.height != height) throw DataError("dataset intrinsics do not match the image size");
  if (init_depth.size() != static_cast<std::size_t>(frames) * width * height) {
    throw DataError("dataset depth holds " + std::to_string(init_depth.size()) + " values, expected " +
                    std::to_string(static_cast<std::size_t>(frames) * width * height));
  }
  for (const auto& f : flows.fields()) {
    if (f.from < 0 || f.from >= frames || f.to < 0 || f.to >= frames) {
      throw DataError("flow field (" + std::to_string(f.from) + ", " + std::to_string(f.to) + ") has a bad frame index");
    }
    if (f.width != width || f.height != height || f.data.size() != static_cast<std::size_t>(width) * height * 3) {
      throw DataError("flow field (" + std::to_string(f.from) + ", " + std::to_string(f.to) + ") has the wrong size");
    }
  }
  if (features.frames != 0) {
    if (features.frames != frames) throw DataError("feature maps cover a different number of frames");
    if (features.data.size() != static_cast<std::size_t>(features.frames) * features.height * features.width * features.dim) {
      throw DataError("feature map data has the wrong size");
    }
  }
  for (std::size_t k = 0; k < external_pairs.size(); ++k) {
    const CorrPair& p = external_pairs[k];
    if (p.i < 0 || p.i >= frames || p.j < 0 || p.j >= frames || !in_image(p.p_i, width, height) ||
        !in_image(p.p_j, width, height)) {
      throw DataError("correspondence record " + std::to_string(k) + " lies outside the clip");
    }
  }
  if (gt_tracks && gt_tracks->frames != frames) throw DataError("ground-truth tracks cover a different frame count");
}

std::vector<CorrPair> PairSets::merged() const {
  std::vector<CorrPair> out = flow;
  out.insert(out.end(), longterm.begin(), longterm.end());
  out.insert(out.end(), external.begin(), external.end());
  return out;
}

PairSets build_supervision(const Dataset& data, const RunConfig& config) {
  PairSets sets;
  const SupervisionConfig& sc = config.supervision;
  if (sc.use_flow) {
    std::vector<std::pair<int, int>> requested;
    for (const auto& [i, j] : flow_frame_pairs(data.frames, sc.flow_window)) {
      if (data.flows.find(i, j)) requested.emplace_back(i, j);
    }
    sets.flow = build_flow_pairs(data.flows, requested, data.width, data.height, sc.flow_stride);
  }
  if (sc.use_longterm && data.features.frames > 0) {
    std::mt19937_64 rng(config.seed ^ 0x2545f4914f6cdd1dULL);
    sets.longterm = build_longterm_pairs(data.features, sc, rng);
  }
  sets.external = data.external_pairs;
  return sets;
}

DepthMapSet initial_depth(const Dataset& data, const RunConfig& config) {
  return DepthMapSet(data.frames, data.width, data.height, data.init_depth, config.min_depth);
}

DeformationField initial_field(const DepthMapSet& depth, const Dataset& data, const RunConfig& config) {
  return DeformationField(config.field, data.frames, scene_bounds_from_depth(depth, data.K, config.bounds_pad),
                          config.seed);
}

FitResult fit(const Dataset& data, const RunConfig& config, const StepCallback& on_step) {
  config.validate();
  data.validate();
  FitResult result;
  result.model.config = config;
  result.model.K = data.K;
  result.model.depth = initial_depth(data, config);
  result.model.field = initial_field(result.model.depth, data, config);
  const PairSets sets = build_supervision(data, config);
  std::vector<CorrPair> pairs = sets.merged();
  if (pairs.empty() && config.iterations > 0) throw DataError("no supervision pairs could be built from the dataset");
  result.report = optimize(result.model.field, result.model.depth, data.K, std::move(pairs), config, on_step);
  result.report.flow_pairs = sets.flow.size();
  result.report.longterm_pairs = sets.longterm.size();
  result.report.external_pairs = sets.external.size();
  result.model.steps = static_cast<std::int64_t>(result.report.telemetry.size());
  return result;
}

}  // namespace cadex
