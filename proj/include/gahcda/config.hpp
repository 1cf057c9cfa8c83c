#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gahcda/backbone.hpp"
#include "gahcda/losses.hpp"
#include "gahcda/synth.hpp"

namespace gahcda {

struct PhaseConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-5;

  friend bool operator==(const PhaseConfig&, const PhaseConfig&) = default;
};

struct RmsPropConfig {
  double alpha = 0.99;  ///< squared-gradient smoothing
  double eps = 1e-8;
  double momentum = 0.0;

  friend bool operator==(const RmsPropConfig&, const RmsPropConfig&) = default;
};

/// Everything that determines a run. Defaults follow the published setting;
/// apply_profile(cfg, "desk") switches to the CPU-scale profile.
struct RunConfig {
  std::string profile = "reference";
  PhaseConfig teacher;
  PhaseConfig adapt;
  RmsPropConfig rmsprop;
  std::uint64_t seed = 0;
  LossWeights lambdas;
  double gaze_sigma = 0.0;  ///< pixels; 0 selects 5% of the image width
  double w_floor = 0.2;
  UNetArch backbone;
  double pseudo_threshold = 0.5;
  bool strict = true;
  std::string output_dir = "runs/default";
  SynthConfig synth;
  std::vector<double> sweep_values{0.0, 0.25, 0.5, 1.0, 2.0};

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// "reference" (200 epochs, batch 32, lr 1e-5) or "desk" (CPU scale).
void apply_profile(RunConfig& cfg, const std::string& profile);

/// Throws ValidationError on any violated invariant.
void validate(const RunConfig& cfg);

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<nlohmann::json(const RunConfig&)> get;
  std::function<void(RunConfig&, const nlohmann::json&)> set;
  /// Parses a command-line string into the key's JSON type.
  std::function<nlohmann::json(const std::string&)> parse;
};

const std::vector<ConfigKey>& config_keys();

/// Applies one key (dotted name). Unknown keys are rejected.
void set_config_value(RunConfig& cfg, const std::string& key, const nlohmann::json& value);
/// `key=value` as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Reads TOML (.toml) or JSON (anything else). Nested tables map to dotted
/// keys; a top-level `profile` key is applied before the others.
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json(const nlohmann::json& j);

/// Flat {dotted key: value} object covering every key.
nlohmann::json config_to_json(const RunConfig& cfg);

/// SHA-1 of the canonical JSON form, ignoring output_dir.
std::string config_hash(const RunConfig& cfg);

/// One line per key: name, default, help.
std::string describe_config_keys(const RunConfig& defaults);

}  // namespace gahcda
