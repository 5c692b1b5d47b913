// SPDX-License-Identifier: Apache-2.0
//
// Random-waypoint trajectories rendered into checksummed per-trajectory CSI shards.
//
// Shard layout (little-endian):
//   header  : magic "RFSCSI\0\1", u32 version, u32 trajectory id, u32 frame count,
//             u32 rows, u32 subcarriers, u32 dtype (1 = complex64)               (32 bytes)
//   frames  : f64 x, y, z, f64 timestamp, f64 min delay (inf without paths),
//             u32 path count, u32 reserved, then rows * subcarriers complex64
//             (row-major: row is the element pair, subcarrier fastest)
//   trailer : u32 CRC-32 of every preceding byte

#pragma once

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsim/adp.hpp"
#include "rfsim/channel.hpp"
#include "rfsim/geometry.hpp"
#include "rfsim/path_solver.hpp"

namespace rfsim {

inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr int kManifestVersion = 1;
inline constexpr std::size_t kShardHeaderBytes = 32;
inline constexpr std::size_t kFrameMetaBytes = 48;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ChecksumError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class VersionError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

enum class TrajectoryModel { RandomWaypoint };

struct TrajectoryConfig {
  TrajectoryModel model = TrajectoryModel::RandomWaypoint;
  Vec3 box_origin{-27.3, 1.0, 1.0};
  Vec3 box_dims{170.0, 16.0, 30.0};  // length (x), width (y), height (z)
  double speed = 1.0;                // m/s
  double sample_interval = 1.0;      // s
  int samples_per_trajectory = 1000;
  int trajectory_count = 100;
  int train_count = 90;
  std::uint64_t seed = 0;

  double step_length() const { return speed * sample_interval; }
  Box3 box() const { return {box_origin, box_origin + box_dims}; }
  void validate() const;
  bool operator==(const TrajectoryConfig&) const = default;
};

struct TrajectorySample {
  int trajectory_id = 0;
  int frame_index = 0;
  Vec3 position = Vec3::Zero();
  double timestamp = 0.0;
};

using Trajectory = std::vector<TrajectorySample>;

/// One trajectory; its stream depends only on (config.seed, id).
Trajectory generate_trajectory(const TrajectoryConfig& config, int id);
std::vector<Trajectory> generate_trajectories(const TrajectoryConfig& config);

struct ShardInfo {
  int trajectory_id = 0;
  std::string file;  // relative to the manifest directory
  int frames = 0;
  std::uint64_t bytes = 0;
  std::uint32_t crc32 = 0;
  std::uint64_t first_frame_offset = kShardHeaderBytes;
  std::uint64_t frame_stride = 0;
};

struct DatasetManifest {
  int format_version = kManifestVersion;
  int trajectory_count = 0;
  int samples_per_trajectory = 0;
  std::uint64_t frame_count = 0;
  int rows = 0;  // element pairs per frame
  int subcarriers = 0;
  int polarization_blocks = 1;
  std::vector<int> train;
  std::vector<int> test;
  std::vector<ShardInfo> shards;
  std::string scene_hash;
  nlohmann::json config;  // echo of every input that shaped the data
  std::string manifest_hash;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  /// FNV-1a of the canonical JSON without the hash field.
  std::string compute_hash() const;
};

struct DatasetJob {
  const Scene* scene = nullptr;
  AntennaArray bs;
  AntennaArray uav;  // position is overwritten per frame
  TrajectoryConfig trajectories;
  OfdmGrid grid;
  PathConfig paths;
  nlohmann::json config_echo = nlohmann::json::object();
};

struct DatasetOptions {
  std::string output_dir;
  int threads = 1;  // <= 0 selects the hardware concurrency
  std::function<void(std::uint64_t done, std::uint64_t total)> progress;
};

/// Writes one shard per trajectory in id order and the manifest last (temp file, then rename).
/// Output bytes do not depend on the thread count.
DatasetManifest generate_dataset(const DatasetJob& job, const DatasetOptions& options);

/// CSI of one sample: solve paths from the BS to the position, then synthesize.
CsiFrame synthesize_frame(const DatasetJob& job, const TrajectorySample& sample,
                          double* min_delay = nullptr);

struct DatasetFrame {
  CsiFrame csi;
  double min_delay = 0.0;
};

/// Lazy read access; each shard is checksum-verified on first touch.
class TrajectoryDataset {
 public:
  static TrajectoryDataset open(const std::string& manifest_path);

  const DatasetManifest& manifest() const { return manifest_; }
  int trajectory_count() const { return manifest_.trajectory_count; }
  int frames_in(int trajectory) const;
  DatasetFrame frame(int trajectory, int index) const;
  /// Throws ChecksumError naming the shard on any mismatch.
  void verify(int trajectory) const;

 private:
  std::string dir_;
  DatasetManifest manifest_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::vector<char>> verified_;
  const ShardInfo& shard(int trajectory) const;
};

TrajectoryDataset load_dataset(const std::string& manifest_path);

/// One entry per frame of the listed trajectories, in list then frame order.
FingerprintDb build_fingerprint_db(const TrajectoryDataset& dataset, const std::vector<int>& subset,
                                   int angle_fft, int delay_fft, int threads = 1);

/// Runs fn(i) for i in [0, n) on `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::uint32_t crc32_of(const void* data, std::size_t size, std::uint32_t crc = 0);

/// Writes through a sibling temp file and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace rfsim
