// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: strict JSON (unknown keys are errors), the "great-msd-default" preset, the
// built-in demo scenes, and JSON codecs for the configuration value types.

#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rfsim/channel.hpp"
#include "rfsim/dataset.hpp"
#include "rfsim/materials.hpp"
#include "rfsim/path_solver.hpp"

namespace rfsim {

/// Configuration problems; `what()` names the key path and, for syntax errors, line and column.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const AntennaArray& a);
nlohmann::json to_json(const OfdmGrid& g);
nlohmann::json to_json(const PathConfig& p);
nlohmann::json to_json(const TrajectoryConfig& t);

// Each decoder starts from `base`, applies the keys present and rejects unknown ones. `where` is
// the key path used in diagnostics.
AntennaArray antenna_array_from_json(const nlohmann::json& j, AntennaArray base, const std::string& where);
OfdmGrid ofdm_from_json(const nlohmann::json& j, OfdmGrid base, const std::string& where);
PathConfig path_config_from_json(const nlohmann::json& j, PathConfig base, const std::string& where);
TrajectoryConfig trajectory_config_from_json(const nlohmann::json& j, TrajectoryConfig base,
                                             const std::string& where);

struct CameraConfig {
  double fov_deg = 90.0;
  Vec3 position{57.70, 0.01, 25.70};
  Vec3 rotation_deg{10.0, 170.0, 0.0};
  bool operator==(const CameraConfig&) const = default;
};

struct SceneSource {
  std::string builtin = "urban-demo";  // used when `mesh` is empty
  std::string mesh;
  std::string bindings;
  bool operator==(const SceneSource&) const = default;
};

struct AdpConfig {
  int angle_fft = 32;
  int delay_fft = 64;
  int k = 5;
  bool operator==(const AdpConfig&) const = default;
};

struct RunConfig {
  std::string preset = "great-msd-default";
  SceneSource scene;
  std::string material_library;  // empty selects the built-in library
  AntennaArray tx_array;
  AntennaArray rx_array;
  OfdmGrid ofdm;
  PathConfig paths;  // frequency and seed are derived, not configured
  TrajectoryConfig trajectories;  // seed is derived
  CameraConfig camera;
  AdpConfig adp;
  std::string output_dir = "rfsim-out";
  std::uint64_t seed = 2025;
  int threads = 0;

  /// Path configuration with the carrier frequency and a seed derived from `seed`.
  PathConfig resolved_paths() const;
  TrajectoryConfig resolved_trajectories() const;
  std::vector<Material> materials() const;
  Scene load_scene() const;
  DatasetJob dataset_job(const Scene& scene) const;

  void validate() const;
  nlohmann::json to_json() const;
  bool operator==(const RunConfig&) const = default;
};

/// Reference deployment: 4x8 cross-polarized UPA in the yz-plane at [57.70, 0.01, 25.70], spacings
/// 2.0 / 0.5 wavelengths, single receive element, 100 trajectories of 1000 samples at 1 m/s.
RunConfig great_msd_default();
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Parses a config document. Keys override the named preset (default "great-msd-default").
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);

struct SceneText {
  std::string obj;
  std::string bindings;
};

std::vector<std::string> builtin_scene_names();
/// OBJ + bindings of a built-in scene ("empty" has no geometry and no text).
SceneText builtin_scene_text(const std::string& name);
Scene builtin_scene(const std::string& name, const std::vector<Material>& library);

}  // namespace rfsim
