#include "surfreg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>

#include "surfreg/error.hpp"

namespace surfreg {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::Config, "config key '" + key + "': " + what);
}

struct Binding {
  std::string key;
  std::function<void(PipelineConfig&, const json&)> set;
  std::function<json(PipelineConfig&)> get;
};

template <class T, class Access>
Binding bind(std::string key, Access access) {
  Binding b;
  b.key = key;
  b.get = [access](PipelineConfig& c) { return json(access(c)); };
  b.set = [access, key](PipelineConfig& c, const json& v) {
    T& slot = access(c);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) config_error(key, "expected a boolean");
      slot = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) config_error(key, "expected a string");
      slot = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) config_error(key, "expected a number");
      slot = v.get<T>();
    } else if constexpr (std::is_signed_v<T>) {
      if (!v.is_number_integer()) config_error(key, "expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        config_error(key, "integer out of range");
      }
      slot = static_cast<T>(x);
    } else {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        config_error(key, "expected a non-negative integer");
      }
      slot = static_cast<T>(v.get<std::uint64_t>());
    }
  };
  return b;
}

Binding bind_prompts(std::string key) {
  Binding b;
  b.key = key;
  b.get = [](PipelineConfig& c) {
    json arr = json::array();
    for (const Prompt& p : c.initial_prompts) arr.push_back({{"x", p.col}, {"y", p.row}, {"positive", p.positive}});
    return arr;
  };
  b.set = [key](PipelineConfig& c, const json& v) {
    if (!v.is_array()) config_error(key, "expected an array of {x, y, positive}");
    std::vector<Prompt> out;
    for (const json& e : v) {
      if (!e.is_object() || !e.contains("x") || !e.contains("y") || !e["x"].is_number_integer() ||
          !e["y"].is_number_integer()) {
        config_error(key, "each prompt needs integer x and y");
      }
      for (const auto& [k, _] : e.items()) {
        if (k != "x" && k != "y" && k != "positive") config_error(key, "unknown prompt field '" + k + "'");
      }
      Prompt p{e["x"].get<int>(), e["y"].get<int>(), true};
      if (e.contains("positive")) {
        if (!e["positive"].is_boolean()) config_error(key, "'positive' must be a boolean");
        p.positive = e["positive"].get<bool>();
      }
      out.push_back(p);
    }
    c.initial_prompts = std::move(out);
  };
  return b;
}

#define SURFREG_BIND(T, key, member) bind<T>(key, [](PipelineConfig& c) -> T& { return c.member; })

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> all = {
      SURFREG_BIND(std::string, "recording", recording),
      SURFREG_BIND(std::string, "model", model),
      SURFREG_BIND(int, "synth.frames", synth.frames),
      SURFREG_BIND(double, "synth.noise_sigma", synth.noise_sigma),
      SURFREG_BIND(double, "synth.noise_sigma_quadratic", synth.noise_sigma_quadratic),
      SURFREG_BIND(double, "synth.orbit_radius", synth.orbit_radius),
      SURFREG_BIND(double, "synth.orbit_height", synth.orbit_height),
      SURFREG_BIND(double, "synth.orbit_start", synth.orbit_start),
      SURFREG_BIND(double, "synth.orbit_sweep", synth.orbit_sweep),
      SURFREG_BIND(double, "synth.frame_interval", synth.frame_interval),
      SURFREG_BIND(bool, "synth.distractor", synth.distractor),
      SURFREG_BIND(std::size_t, "synth.model_samples", synth.model_samples),
      SURFREG_BIND(double, "reconstruction.send_voxel", send_voxel),
      SURFREG_BIND(double, "reconstruction.map_voxel", map_voxel),
      SURFREG_BIND(double, "seg.tau_iou", seg.tau_iou),
      SURFREG_BIND(double, "seg.rho_max", seg.rho_max),
      SURFREG_BIND(int, "seg.k_obs", seg.k_obs),
      SURFREG_BIND(double, "seg.segment_interval", seg.segment_interval),
      SURFREG_BIND(double, "seg.depth_gate", seg.depth_gate),
      SURFREG_BIND(double, "seg.voxel_res", seg.voxel_res),
      SURFREG_BIND(std::string, "seg.segmenter", segmenter),
      SURFREG_BIND(int, "seg.oracle_erosion", oracle_erosion),
      bind_prompts("seg.initial_prompts"),
      SURFREG_BIND(double, "reg.lambda_c", reg.lambda_c),
      SURFREG_BIND(double, "reg.lambda_r", reg.lambda_r),
      SURFREG_BIND(double, "reg.trim", reg.trim),
      SURFREG_BIND(double, "reg.d_max", reg.d_max),
      SURFREG_BIND(double, "reg.delta_s_min", reg.delta_s_min),
      SURFREG_BIND(int, "reg.levels", reg.levels),
      SURFREG_BIND(double, "reg.voxel_base", reg.voxel_base),
      SURFREG_BIND(double, "reg.tau_factor", reg.tau_factor),
      SURFREG_BIND(double, "reg.tau_decay", reg.tau_decay),
      SURFREG_BIND(int, "reg.icp_max_iterations", reg.icp_max_iterations),
      SURFREG_BIND(double, "reg.icp_eps_translation", reg.icp_eps_translation),
      SURFREG_BIND(double, "reg.icp_eps_rotation", reg.icp_eps_rotation),
      SURFREG_BIND(double, "reg.huber_delta", reg.huber_delta),
      SURFREG_BIND(double, "reg.normal_gate_deg", reg.normal_gate_deg),
      SURFREG_BIND(double, "reg.min_coverage", reg.min_coverage),
      SURFREG_BIND(int, "reg.escape_after", reg.escape_after),
      SURFREG_BIND(double, "reg.fpfh_radius_factor", reg.fpfh_radius_factor),
      SURFREG_BIND(int, "reg.normal_neighbors", reg.normal_neighbors),
      SURFREG_BIND(double, "reg.continuity_angle_deg", reg.continuity_angle_deg),
      SURFREG_BIND(double, "reg.continuity_distance", reg.continuity_distance),
      SURFREG_BIND(double, "reg.dedup_angle_deg", reg.dedup_angle_deg),
      SURFREG_BIND(double, "reg.dedup_distance", reg.dedup_distance),
      SURFREG_BIND(std::size_t, "reg.max_candidates", reg.max_candidates),
      SURFREG_BIND(int, "reg.ransac.sample_size", reg.ransac.sample_size),
      SURFREG_BIND(int, "reg.ransac.max_iterations", reg.ransac.max_iterations),
      SURFREG_BIND(double, "reg.ransac.confidence", reg.ransac.confidence),
      SURFREG_BIND(double, "reg.ransac.edge_ratio", reg.ransac.edge_ratio),
      SURFREG_BIND(double, "reg.ransac.inlier_factor", reg.ransac.inlier_factor),
      SURFREG_BIND(int, "reg.fgr.iterations", reg.fgr.iterations),
      SURFREG_BIND(double, "reg.fgr.division_factor", reg.fgr.division_factor),
      SURFREG_BIND(int, "reg.fgr.decrease_every", reg.fgr.decrease_every),
      SURFREG_BIND(double, "reg.fgr.tuple_scale", reg.fgr.tuple_scale),
      SURFREG_BIND(int, "reg.fgr.max_tuples", reg.fgr.max_tuples),
      SURFREG_BIND(double, "pipeline.register_interval", register_interval),
      SURFREG_BIND(std::size_t, "pipeline.queue_capacity", queue_capacity),
      SURFREG_BIND(std::uint64_t, "seed", seed),
      SURFREG_BIND(std::string, "output_dir", output_dir),
  };
  return all;
}

#undef SURFREG_BIND

const Binding& find_binding(const std::string& key) {
  for (const Binding& b : bindings()) {
    if (b.key == key) return b;
  }
  throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

// Flattens nested objects into dotted keys. Arrays are leaves.
void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  if (!node.is_object()) {
    out.emplace_back(prefix, node);
    return;
  }
  for (const auto& [k, v] : node.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
}

void rethrow_as_config(const std::string& scope, const std::function<void()>& check) {
  try {
    check();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, scope + ": " + e.what());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  rethrow_as_config("seg", [&] { seg.validate(); });
  rethrow_as_config("reg", [&] { reg.validate(); });
  if (!(send_voxel > 0.0)) config_error("reconstruction.send_voxel", "must be > 0");
  if (!(map_voxel > 0.0)) config_error("reconstruction.map_voxel", "must be > 0");
  if (synth.frames < 1) config_error("synth.frames", "must be >= 1");
  if (synth.noise_sigma < 0.0) config_error("synth.noise_sigma", "must be >= 0");
  if (synth.noise_sigma_quadratic < 0.0) config_error("synth.noise_sigma_quadratic", "must be >= 0");
  if (!(synth.orbit_radius > 0.0)) config_error("synth.orbit_radius", "must be > 0");
  if (!(synth.frame_interval > 0.0)) config_error("synth.frame_interval", "must be > 0");
  if (synth.model_samples < 100) config_error("synth.model_samples", "must be >= 100");
  if (segmenter != "oracle" && segmenter.rfind("service:", 0) != 0) {
    config_error("seg.segmenter", "expected 'oracle' or 'service:<url>', got '" + segmenter + "'");
  }
  if (segmenter.rfind("service:", 0) == 0 && segmenter.size() <= 8) config_error("seg.segmenter", "missing url");
  if (oracle_erosion < 0) config_error("seg.oracle_erosion", "must be >= 0");
  if (register_interval < 0.0) config_error("pipeline.register_interval", "must be >= 0");
  if (queue_capacity < 1) config_error("pipeline.queue_capacity", "must be >= 1");
  if (output_dir.empty()) config_error("output_dir", "must not be empty");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Binding& b : bindings()) keys.push_back(b.key);
  return keys;
}

void apply_config_json(PipelineConfig& cfg, const json& tree) {
  if (!tree.is_object()) throw Error(ErrorKind::Config, "config root must be an object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(tree, "", flat);
  for (const auto& [key, value] : flat) find_binding(key).set(cfg, value);
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::Config, "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  find_binding(key).set(cfg, value);
}

json config_to_json(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  json out = json::object();
  for (const Binding& b : bindings()) out[json::json_pointer("/" + [&] {
    std::string p = b.key;
    for (char& ch : p) ch = ch == '.' ? '/' : ch;
    return p;
  }())] = b.get(copy);
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  std::filesystem::path file = path;
  if (file.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env && *env) file = env;
  }
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::Io, "cannot open config file " + file.string());
    json tree;
    try {
      tree = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "config file " + file.string() + ": " + e.what());
    }
    apply_config_json(cfg, tree);
  }
  for (const std::string& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

}  // namespace surfreg
