// SPDX-License-Identifier: Apache-2.0

#include "rfsim/dataset.hpp"

#include <zlib.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "rfsim/config.hpp"
#include "rfsim/hash.hpp"

namespace rfsim {

static_assert(std::endian::native == std::endian::little, "shard I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr char kShardMagic[8] = {'R', 'F', 'S', 'C', 'S', 'I', '\0', '\1'};
constexpr std::uint32_t kDtypeComplex64 = 1;
constexpr int kMaxWaypointDraws = 100000;

template <typename T>
void put(std::vector<char>& buf, std::size_t& at, T v) {
  std::memcpy(buf.data() + at, &v, sizeof v);
  at += sizeof v;
}

template <typename T>
T take(const char* p, std::size_t& at) {
  T v;
  std::memcpy(&v, p + at, sizeof v);
  at += sizeof v;
  return v;
}

std::string shard_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%05d.bin", id);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

void TrajectoryConfig::validate() const {
  if (!(box_dims.array() > 0.0).all() || !box_dims.allFinite() || !box_origin.allFinite())
    throw std::invalid_argument("trajectory box dimensions must be positive and finite");
  if (!(speed > 0.0)) throw std::invalid_argument("trajectory speed must be positive");
  if (!(sample_interval > 0.0)) throw std::invalid_argument("sample interval must be positive");
  if (samples_per_trajectory < 1) throw std::invalid_argument("samples_per_trajectory must be >= 1");
  if (trajectory_count < 1) throw std::invalid_argument("trajectory_count must be >= 1");
  if (train_count < 0 || train_count >= trajectory_count)
    throw std::invalid_argument("train_count must lie in [0, trajectory_count)");
  if ((box_dims.array() < step_length()).all())
    throw std::invalid_argument("trajectory box is smaller than one step in every axis");
}

Trajectory generate_trajectory(const TrajectoryConfig& config, int id) {
  config.validate();
  std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(id)));
  const auto draw = [&] {
    Vec3 u;
    for (int i = 0; i < 3; ++i) u(i) = unit_from_bits(rng());
    return Vec3(config.box_origin + config.box_dims.cwiseProduct(u));
  };
  const Box3 box = config.box();
  const double step = config.step_length();

  Trajectory out;
  out.reserve(static_cast<std::size_t>(config.samples_per_trajectory));
  Vec3 pos = draw();
  Vec3 waypoint = draw();
  for (int i = 0; i < config.samples_per_trajectory; ++i) {
    if (i > 0) {
      int draws = 0;
      while ((waypoint - pos).norm() < step) {
        if (++draws > kMaxWaypointDraws)
          throw std::runtime_error("no waypoint one step away could be drawn inside the box");
        waypoint = draw();
      }
      pos += step * (waypoint - pos).normalized();
      pos = pos.cwiseMax(box.min()).cwiseMin(box.max());
    }
    out.push_back({id, i, pos, i * config.sample_interval});
  }
  return out;
}

std::vector<Trajectory> generate_trajectories(const TrajectoryConfig& config) {
  config.validate();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(config.trajectory_count));
  for (int id = 0; id < config.trajectory_count; ++id) out.push_back(generate_trajectory(config, id));
  return out;
}

// -- manifest -----------------------------------------------------------------------------

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json shard_list = nlohmann::json::array();
  for (const auto& s : shards)
    shard_list.push_back({{"trajectory", s.trajectory_id},
                          {"file", s.file},
                          {"frames", s.frames},
                          {"bytes", s.bytes},
                          {"crc32", s.crc32},
                          {"first_frame_offset", s.first_frame_offset},
                          {"frame_stride", s.frame_stride}});
  return {{"format", "rfsim-dataset"},
          {"format_version", format_version},
          {"trajectory_count", trajectory_count},
          {"samples_per_trajectory", samples_per_trajectory},
          {"frame_count", frame_count},
          {"rows", rows},
          {"subcarriers", subcarriers},
          {"polarization_blocks", polarization_blocks},
          {"dtype", "complex64-le"},
          {"split", {{"train", train}, {"test", test}}},
          {"shards", shard_list},
          {"scene_hash", scene_hash},
          {"config", config},
          {"manifest_hash", manifest_hash}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  if (j.value("format", "") != "rfsim-dataset") throw DatasetError("not a dataset manifest");
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kManifestVersion)
    throw VersionError("unsupported manifest format_version " + std::to_string(m.format_version) +
                       " (expected " + std::to_string(kManifestVersion) + ")");
  m.trajectory_count = j.at("trajectory_count").get<int>();
  m.samples_per_trajectory = j.at("samples_per_trajectory").get<int>();
  m.frame_count = j.at("frame_count").get<std::uint64_t>();
  m.rows = j.at("rows").get<int>();
  m.subcarriers = j.at("subcarriers").get<int>();
  m.polarization_blocks = j.at("polarization_blocks").get<int>();
  m.train = j.at("split").at("train").get<std::vector<int>>();
  m.test = j.at("split").at("test").get<std::vector<int>>();
  for (const auto& s : j.at("shards")) {
    ShardInfo info;
    info.trajectory_id = s.at("trajectory").get<int>();
    info.file = s.at("file").get<std::string>();
    info.frames = s.at("frames").get<int>();
    info.bytes = s.at("bytes").get<std::uint64_t>();
    info.crc32 = s.at("crc32").get<std::uint32_t>();
    info.first_frame_offset = s.at("first_frame_offset").get<std::uint64_t>();
    info.frame_stride = s.at("frame_stride").get<std::uint64_t>();
    m.shards.push_back(std::move(info));
  }
  m.scene_hash = j.at("scene_hash").get<std::string>();
  m.config = j.at("config");
  m.manifest_hash = j.value("manifest_hash", "");
  return m;
}

std::string DatasetManifest::compute_hash() const {
  nlohmann::json j = to_json();
  j.erase("manifest_hash");
  Fnv1a h;
  h.str(j.dump());
  return hex64(h.digest());
}

// -- generation -------------------------------------------------------------------------------

std::uint32_t crc32_of(const void* data, std::size_t size, std::uint32_t crc) {
  const auto* p = static_cast<const Bytef*>(data);
  uLong c = crc;
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    c = ::crc32(c, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DatasetError("cannot write '" + tmp + "'");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw DatasetError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DatasetError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CsiFrame synthesize_frame(const DatasetJob& job, const TrajectorySample& sample, double* min_delay) {
  const auto paths = solve_paths(*job.scene, job.bs.position, sample.position, job.paths);
  AntennaArray uav = job.uav;
  uav.position = sample.position;
  CsiFrame frame = synthesize_csi(paths, job.bs, uav, job.grid);
  frame.timestamp = sample.timestamp;
  if (min_delay) {
    *min_delay = std::numeric_limits<double>::infinity();
    for (const auto& p : paths) *min_delay = std::min(*min_delay, p.delay);
  }
  return frame;
}

DatasetManifest generate_dataset(const DatasetJob& job, const DatasetOptions& options) {
  if (!job.scene) throw std::invalid_argument("dataset job has no scene");
  const TrajectoryConfig& tc = job.trajectories;
  tc.validate();
  job.grid.validate();
  job.paths.validate();
  job.bs.validate();
  job.uav.validate();
  if (job.paths.frequency_hz != job.grid.carrier_frequency)
    throw std::invalid_argument("path solver frequency must equal the OFDM carrier");
  check_narrowband(job.bs, job.uav, job.grid);

  std::error_code ec;
  fs::create_directories(options.output_dir, ec);
  if (ec) throw DatasetError("cannot create '" + options.output_dir + "': " + ec.message());

  DatasetManifest m;
  m.trajectory_count = tc.trajectory_count;
  m.samples_per_trajectory = tc.samples_per_trajectory;
  m.frame_count = static_cast<std::uint64_t>(tc.trajectory_count) * tc.samples_per_trajectory;
  m.rows = job.bs.element_count() * job.uav.element_count();
  m.subcarriers = job.grid.subcarrier_count;
  m.polarization_blocks = job.bs.polarization_count();
  for (int id = 0; id < tc.trajectory_count; ++id) (id < tc.train_count ? m.train : m.test).push_back(id);
  m.scene_hash = hex64(job.scene->content_hash());
  m.config = job.config_echo;
  m.config["dataset_inputs"] = {{"trajectories", to_json(tc)},
                                {"ofdm", to_json(job.grid)},
                                {"tx_array", to_json(job.bs)},
                                {"rx_array", to_json(job.uav)},
                                {"paths", to_json(job.paths)}};

  const std::size_t cells = static_cast<std::size_t>(m.rows) * m.subcarriers;
  const std::size_t stride = kFrameMetaBytes + cells * 8;
  const std::size_t frames = static_cast<std::size_t>(tc.samples_per_trajectory);
  std::uint64_t done = 0;

  for (int id = 0; id < tc.trajectory_count; ++id) {
    const Trajectory traj = generate_trajectory(tc, id);
    std::vector<char> buf(kShardHeaderBytes + frames * stride + 4);
    std::size_t at = 0;
    std::memcpy(buf.data(), kShardMagic, 8);
    at = 8;
    put<std::uint32_t>(buf, at, kShardVersion);
    put<std::uint32_t>(buf, at, static_cast<std::uint32_t>(id));
    put<std::uint32_t>(buf, at, static_cast<std::uint32_t>(frames));
    put<std::uint32_t>(buf, at, static_cast<std::uint32_t>(m.rows));
    put<std::uint32_t>(buf, at, static_cast<std::uint32_t>(m.subcarriers));
    put<std::uint32_t>(buf, at, kDtypeComplex64);

    parallel_for(frames, options.threads, [&](std::size_t i) {
      const auto& s = traj[i];
      double min_delay = 0.0;
      const CsiFrame f = synthesize_frame(job, s, &min_delay);
      if (!f.h.allFinite())
        throw DatasetError("non-finite CSI at trajectory " + std::to_string(id) + " frame " +
                           std::to_string(i) + " position (" + std::to_string(s.position.x()) +
                           ", " + std::to_string(s.position.y()) + ", " +
                           std::to_string(s.position.z()) + ")");
      std::size_t p = kShardHeaderBytes + i * stride;
      for (int a = 0; a < 3; ++a) put<double>(buf, p, s.position(a));
      put<double>(buf, p, s.timestamp);
      put<double>(buf, p, min_delay);
      put<std::uint32_t>(buf, p, static_cast<std::uint32_t>(f.path_count));
      put<std::uint32_t>(buf, p, 0u);
      for (Eigen::Index r = 0; r < f.h.rows(); ++r)
        for (Eigen::Index k = 0; k < f.h.cols(); ++k) {
          put<float>(buf, p, static_cast<float>(f.h(r, k).real()));
          put<float>(buf, p, static_cast<float>(f.h(r, k).imag()));
        }
    });

    std::size_t tail = buf.size() - 4;
    const std::uint32_t crc = crc32_of(buf.data(), tail);
    put<std::uint32_t>(buf, tail, crc);
    ShardInfo info;
    info.trajectory_id = id;
    info.file = shard_name(id);
    info.frames = static_cast<int>(frames);
    info.bytes = buf.size();
    info.crc32 = crc;
    info.frame_stride = stride;
    write_file_atomic((fs::path(options.output_dir) / info.file).string(),
                      std::string(buf.data(), buf.size()));
    m.shards.push_back(std::move(info));
    done += frames;
    if (options.progress) options.progress(done, m.frame_count);
  }

  m.manifest_hash = m.compute_hash();
  write_file_atomic((fs::path(options.output_dir) / "manifest.json").string(), m.to_json().dump(2) + "\n");
  return m;
}

// -- reading -----------------------------------------------------------------------------------

TrajectoryDataset TrajectoryDataset::open(const std::string& manifest_path) {
  TrajectoryDataset ds;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("malformed manifest '" + manifest_path + "': " + e.what());
  }
  try {
    ds.manifest_ = DatasetManifest::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("incomplete manifest '" + manifest_path + "': " + e.what());
  }
  if (ds.manifest_.shards.size() != static_cast<std::size_t>(ds.manifest_.trajectory_count))
    throw DatasetError("manifest shard count does not match trajectory_count");
  ds.dir_ = fs::path(manifest_path).parent_path().string();
  ds.verified_ = std::make_shared<std::vector<char>>(ds.manifest_.shards.size(), 0);
  return ds;
}

TrajectoryDataset load_dataset(const std::string& manifest_path) {
  return TrajectoryDataset::open(manifest_path);
}

const ShardInfo& TrajectoryDataset::shard(int trajectory) const {
  if (trajectory < 0 || trajectory >= manifest_.trajectory_count)
    throw std::out_of_range("trajectory " + std::to_string(trajectory) + " out of range [0, " +
                            std::to_string(manifest_.trajectory_count) + ")");
  return manifest_.shards[static_cast<std::size_t>(trajectory)];
}

int TrajectoryDataset::frames_in(int trajectory) const { return shard(trajectory).frames; }

void TrajectoryDataset::verify(int trajectory) const {
  const ShardInfo& s = shard(trajectory);
  {
    std::lock_guard lock(*mutex_);
    if ((*verified_)[static_cast<std::size_t>(trajectory)]) return;
  }
  const std::string path = (fs::path(dir_) / s.file).string();
  const std::string bytes = read_file(path);
  if (bytes.size() != s.bytes || bytes.size() < kShardHeaderBytes + 4)
    throw ChecksumError("checksum mismatch in shard '" + s.file + "': size " +
                        std::to_string(bytes.size()) + " != " + std::to_string(s.bytes));
  std::size_t at = bytes.size() - 4;
  const auto stored = take<std::uint32_t>(bytes.data(), at);
  const std::uint32_t actual = crc32_of(bytes.data(), bytes.size() - 4);
  if (stored != actual || actual != s.crc32)
    throw ChecksumError("checksum mismatch in shard '" + s.file + "'");
  if (!std::equal(kShardMagic, kShardMagic + 8, bytes.data()))
    throw DatasetError("shard '" + s.file + "' has a bad magic");
  at = 8;
  const auto version = take<std::uint32_t>(bytes.data(), at);
  if (version != kShardVersion)
    throw VersionError("shard '" + s.file + "' has unsupported version " + std::to_string(version));
  std::lock_guard lock(*mutex_);
  (*verified_)[static_cast<std::size_t>(trajectory)] = 1;
}

DatasetFrame TrajectoryDataset::frame(int trajectory, int index) const {
  const ShardInfo& s = shard(trajectory);
  if (index < 0 || index >= s.frames)
    throw std::out_of_range("frame " + std::to_string(index) + " out of range [0, " +
                            std::to_string(s.frames) + ") in trajectory " + std::to_string(trajectory));
  verify(trajectory);
  std::ifstream is((fs::path(dir_) / s.file).string(), std::ios::binary);
  if (!is) throw DatasetError("cannot open shard '" + s.file + "'");
  std::vector<char> rec(s.frame_stride);
  is.seekg(static_cast<std::streamoff>(s.first_frame_offset + static_cast<std::uint64_t>(index) * s.frame_stride));
  if (!is.read(rec.data(), static_cast<std::streamsize>(rec.size())))
    throw ChecksumError("short read in shard '" + s.file + "'");

  DatasetFrame out;
  std::size_t at = 0;
  for (int a = 0; a < 3; ++a) out.csi.rx_position(a) = take<double>(rec.data(), at);
  out.csi.timestamp = take<double>(rec.data(), at);
  out.min_delay = take<double>(rec.data(), at);
  out.csi.path_count = static_cast<int>(take<std::uint32_t>(rec.data(), at));
  take<std::uint32_t>(rec.data(), at);
  out.csi.h.resize(manifest_.rows, manifest_.subcarriers);
  for (Eigen::Index r = 0; r < out.csi.h.rows(); ++r)
    for (Eigen::Index k = 0; k < out.csi.h.cols(); ++k) {
      const float re = take<float>(rec.data(), at);
      const float im = take<float>(rec.data(), at);
      out.csi.h(r, k) = {re, im};
    }
  out.csi.tx_elements = manifest_.rows;
  out.csi.rx_elements = 1;
  return out;
}

FingerprintDb build_fingerprint_db(const TrajectoryDataset& dataset, const std::vector<int>& subset,
                                   int angle_fft, int delay_fft, int threads) {
  if (subset.empty()) throw std::invalid_argument("fingerprint subset is empty");
  std::vector<std::pair<int, int>> refs;
  for (int t : subset) {
    dataset.verify(t);
    for (int i = 0; i < dataset.frames_in(t); ++i) refs.emplace_back(t, i);
  }
  const int blocks = dataset.manifest().polarization_blocks;
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(refs.size()),
                      static_cast<Eigen::Index>(angle_fft) * delay_fft);
  std::vector<Vec3> positions(refs.size());
  parallel_for(refs.size(), threads, [&](std::size_t i) {
    const DatasetFrame f = dataset.frame(refs[i].first, refs[i].second);
    raw.row(static_cast<Eigen::Index>(i)) = frame_feature(f.csi, blocks, angle_fft, delay_fft).transpose();
    positions[i] = f.csi.rx_position;
  });
  return build_fingerprint_db(raw, std::move(positions), angle_fft, delay_fft, blocks);
}

}  // namespace rfsim
