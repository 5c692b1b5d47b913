// SPDX-License-Identifier: Apache-2.0
//
// Command implementations shared by the rfsim executable and the tests. Commands write data to
// `out` and diagnostics to `err`; failures surface as exceptions mapped to exit codes.

#pragma once

#include <json.hpp>

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsim/config.hpp"
#include "rfsim/dataset.hpp"
#include "rfsim/validation.hpp"

namespace rfsim {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitRuntime = 3, kExitValidation = 4 };

class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

inline constexpr const char* kTraceSchema = "rfsim.trace/1";
inline constexpr const char* kLocateSchema = "rfsim.locate/1";
inline constexpr const char* kValidateSchema = "rfsim.validate/1";

/// Paths from tx (default: the configured transmit array position) to rx.
nlohmann::json cmd_trace(const RunConfig& config, const std::optional<Vec3>& tx, const Vec3& rx,
                         bool json, std::ostream& out);

DatasetManifest cmd_dataset(const RunConfig& config, bool json, std::ostream& out, std::ostream& err);

/// Writes `<prefix>_pol<b>.pgm`, `<prefix>_combined.pgm` and `<prefix>.adp`.
nlohmann::json cmd_adp(const std::string& manifest_path, int trajectory, int frame,
                       const std::string& prefix, int angle_fft, int delay_fft, std::ostream& out);

struct LocateRequest {
  std::vector<int> train;  // empty: manifest split
  std::vector<int> test;   // empty: manifest split
  int k = 5;
  int angle_fft = 32;
  int delay_fft = 64;
  int threads = 1;
};

/// 3D errors (m) of every frame of `test` against a database built from `train`.
std::vector<double> localization_errors(const TrajectoryDataset& dataset, const LocateRequest& request);

nlohmann::json error_report(const std::vector<double>& errors);

nlohmann::json cmd_locate(const std::string& manifest_path, const LocateRequest& request, bool json,
                          std::ostream& out);

/// Throws ValidationFailure naming the failed oracles after printing the report.
std::vector<OracleResult> cmd_validate(const ValidationOptions& options, bool json, std::ostream& out);

/// Writes `<dir>/<name>.obj` and `<dir>/<name>.bindings.json`.
void cmd_scene_export(const std::string& name, const std::string& dir, std::ostream& out);

/// Parses "0-9,12,15-20" into ids.
std::vector<int> parse_id_list(const std::string& text);

}  // namespace rfsim
