#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfreg/registration.hpp"
#include "surfreg/segmentation.hpp"

namespace surfreg {

/// Synthetic source used when no recording is given: the bundled torso scene
/// observed along a circular orbit.
struct SynthConfig {
  int frames = 20;
  double noise_sigma = 0.0;
  double noise_sigma_quadratic = 0.0;
  double orbit_radius = 0.85;
  double orbit_height = 0.55;
  double orbit_start = -2.2;  // radians
  double orbit_sweep = 2.0;   // radians
  double frame_interval = 0.2;
  bool distractor = true;
  std::size_t model_samples = 20000;
};

struct PipelineConfig {
  std::string recording;  // empty: synthetic scene
  std::string model;      // mesh/cloud (.ply) for registration; empty: synthetic torso
  SynthConfig synth;
  double send_voxel = 0.01;
  double map_voxel = 0.01;
  SegConfig seg;
  RegConfig reg;
  std::string segmenter = "oracle";  // "oracle" | "service:<url>"
  int oracle_erosion = 0;
  std::vector<Prompt> initial_prompts;  // empty: centre of the PV image
  double register_interval = 1.0;       // seconds between registrations; 0 = every frame
  std::size_t queue_capacity = 4;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// Checks every embedded config; throws Config naming the offending key.
  void validate() const;
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "SURFREG_CONFIG";

/// Every configurable key in dotted form, in a stable order.
std::vector<std::string> config_keys();

/// Applies a JSON tree (nested objects and/or dotted keys). Unknown keys and
/// type mismatches throw Config naming the key.
void apply_config_json(PipelineConfig& cfg, const nlohmann::json& tree);
/// Applies one "dotted.key=value" override; the value is parsed as JSON and
/// falls back to a plain string.
void apply_override(PipelineConfig& cfg, const std::string& assignment);
nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Defaults, then the file (explicit path, else $SURFREG_CONFIG when set),
/// then overrides in order; validated at the end.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace surfreg
