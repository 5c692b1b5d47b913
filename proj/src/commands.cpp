// SPDX-License-Identifier: Apache-2.0

#include "rfsim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "rfsim/adp.hpp"
#include "rfsim/hash.hpp"

namespace rfsim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !os.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("cannot write '" + path + "'");
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const ValidationFailure*>(&e)) return kExitValidation;
  return kExitRuntime;
}

json cmd_trace(const RunConfig& config, const std::optional<Vec3>& tx_opt, const Vec3& rx, bool as_json,
               std::ostream& out) {
  const Scene scene = config.load_scene();
  const Vec3 tx = tx_opt.value_or(config.tx_array.position);
  const auto paths = solve_paths(scene, tx, rx, config.resolved_paths());
  json report = {{"schema", kTraceSchema},
                 {"tx", vec_json(tx)},
                 {"rx", vec_json(rx)},
                 {"frequency_hz", config.ofdm.carrier_frequency},
                 {"scene_hash", hex64(scene.content_hash())},
                 {"path_count", paths.size()},
                 {"paths", paths_to_json(paths)}};
  if (as_json) {
    out << report.dump(2) << "\n";
    return report;
  }
  char line[256];
  std::snprintf(line, sizeof line, "%4s  %-6s %12s %11s %9s %15s %15s\n", "#", "kind", "delay_ns",
                "length_m", "gain_db", "aod_az/el_deg", "aoa_az/el_deg");
  out << line;
  constexpr double deg = 180.0 / kPi;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    std::snprintf(line, sizeof line, "%4zu  %-6s %12.3f %11.4f %9.2f %7.1f/%-7.1f %7.1f/%-7.1f\n", i,
                  p.kind_signature.c_str(), p.delay * 1e9, p.total_length, p.gain_db(),
                  p.aod.azimuth * deg, p.aod.elevation * deg, p.aoa.azimuth * deg, p.aoa.elevation * deg);
    out << line;
  }
  out << paths.size() << " path(s)\n";
  return report;
}

DatasetManifest cmd_dataset(const RunConfig& config, bool as_json, std::ostream& out, std::ostream& err) {
  const Scene scene = config.load_scene();
  const DatasetJob job = config.dataset_job(scene);
  DatasetOptions opts;
  opts.output_dir = config.output_dir;
  opts.threads = config.threads;
  opts.progress = [&err](std::uint64_t done, std::uint64_t total) {
    err << "\rframes " << done << "/" << total << std::flush;
    if (done == total) err << "\n";
  };
  const DatasetManifest m = generate_dataset(job, opts);
  const std::string manifest_path = (fs::path(config.output_dir) / "manifest.json").string();
  if (as_json) {
    out << json{{"manifest", manifest_path},
                {"frame_count", m.frame_count},
                {"trajectory_count", m.trajectory_count},
                {"manifest_hash", m.manifest_hash}}
               .dump(2)
        << "\n";
  } else {
    out << "wrote " << m.frame_count << " frames in " << m.trajectory_count << " shard(s) to "
        << config.output_dir << "\nmanifest " << manifest_path << "\nmanifest_hash " << m.manifest_hash
        << "\n";
  }
  return m;
}

json cmd_adp(const std::string& manifest_path, int trajectory, int frame, const std::string& prefix,
             int angle_fft, int delay_fft, std::ostream& out) {
  const TrajectoryDataset ds = load_dataset(manifest_path);
  const DatasetFrame f = ds.frame(trajectory, frame);
  const auto blocks = compute_adp_blocks(f.csi, ds.manifest().polarization_blocks, angle_fft, delay_fft);
  const auto parent = fs::path(prefix).parent_path();
  if (!parent.empty()) fs::create_directories(parent);

  json files = json::array();
  json peaks = json::array();
  for (const auto& b : blocks) {
    const std::string path = prefix + "_pol" + std::to_string(b.block) + ".pgm";
    write_bytes(path, adp_to_pgm(b.magnitude));
    files.push_back(path);
    const auto [r, c] = adp_peak(b);
    peaks.push_back({{"block", b.block}, {"angle_bin", r}, {"delay_bin", c}, {"energy", b.energy()}});
  }
  const std::string combined = prefix + "_combined.pgm";
  write_bytes(combined, adp_to_pgm(combine_blocks(blocks).magnitude));
  files.push_back(combined);
  const std::string raw = prefix + ".adp";
  save_adp_raw(raw, blocks);
  files.push_back(raw);

  json report = {{"trajectory", trajectory},
                 {"frame", frame},
                 {"position", vec_json(f.csi.rx_position)},
                 {"angle_fft", angle_fft},
                 {"delay_fft", delay_fft},
                 {"csi_energy", f.csi.energy()},
                 {"blocks", peaks},
                 {"files", files}};
  out << report.dump(2) << "\n";
  return report;
}

std::vector<double> localization_errors(const TrajectoryDataset& ds, const LocateRequest& req) {
  const std::vector<int> train = req.train.empty() ? ds.manifest().train : req.train;
  const std::vector<int> test = req.test.empty() ? ds.manifest().test : req.test;
  if (train.empty() || test.empty()) throw std::invalid_argument("train and test sets must be non-empty");
  const FingerprintDb db = build_fingerprint_db(ds, train, req.angle_fft, req.delay_fft, req.threads);
  std::vector<std::pair<int, int>> refs;
  for (int t : test)
    for (int i = 0; i < ds.frames_in(t); ++i) refs.emplace_back(t, i);
  std::vector<double> errors(refs.size());
  parallel_for(refs.size(), req.threads, [&](std::size_t i) {
    const DatasetFrame f = ds.frame(refs[i].first, refs[i].second);
    errors[i] = (localize_nn(db, f.csi, req.k).estimate - f.csi.rx_position).norm();
  });
  return errors;
}

json error_report(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("no localization errors to report");
  const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  json cdf = json::array();
  for (double t : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
    const auto n = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
    cdf.push_back({{"error_m", t}, {"fraction", static_cast<double>(n) / static_cast<double>(errors.size())}});
  }
  return {{"count", errors.size()},
          {"mean_m", mean},
          {"median_m", quantile(errors, 0.5)},
          {"p90_m", quantile(errors, 0.9)},
          {"max_m", *std::max_element(errors.begin(), errors.end())},
          {"cdf", cdf}};
}

json cmd_locate(const std::string& manifest_path, const LocateRequest& req, bool as_json, std::ostream& out) {
  const TrajectoryDataset ds = load_dataset(manifest_path);
  const auto errors = localization_errors(ds, req);
  json report = {{"schema", kLocateSchema},
                 {"k", req.k},
                 {"train", req.train.empty() ? ds.manifest().train : req.train},
                 {"test", req.test.empty() ? ds.manifest().test : req.test},
                 {"errors", error_report(errors)}};
  if (as_json) {
    out << report.dump(2) << "\n";
  } else {
    const auto& e = report["errors"];
    out << "k=" << req.k << " test frames=" << e["count"].get<std::size_t>() << "\nmean "
        << e["mean_m"].get<double>() << " m, median " << e["median_m"].get<double>() << " m, p90 "
        << e["p90_m"].get<double>() << " m\n";
  }
  return report;
}

std::vector<OracleResult> cmd_validate(const ValidationOptions& options, bool as_json, std::ostream& out) {
  const auto results = run_validation(options);
  std::string failed;
  for (const auto& r : results)
    if (!r.pass) failed += (failed.empty() ? "" : ", ") + r.name;
  if (as_json) {
    json list = json::array();
    for (const auto& r : results)
      list.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
    out << json{{"schema", kValidateSchema}, {"pass", failed.empty()}, {"oracles", list}}.dump(2) << "\n";
  } else {
    for (const auto& r : results) {
      char line[256];
      std::snprintf(line, sizeof line, "%-4s %-22s %-32s %.3fs\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.detail.c_str(), r.seconds);
      out << line;
    }
  }
  if (!failed.empty()) throw ValidationFailure("oracle(s) failed: " + failed);
  return results;
}

void cmd_scene_export(const std::string& name, const std::string& dir, std::ostream& out) {
  const SceneText text = builtin_scene_text(name);
  if (text.obj.empty()) throw ConfigError("scene '" + name + "' has no geometry to export");
  fs::create_directories(dir);
  const std::string obj = (fs::path(dir) / (name + ".obj")).string();
  const std::string bindings = (fs::path(dir) / (name + ".bindings.json")).string();
  write_bytes(obj, text.obj);
  write_bytes(bindings, text.bindings);
  out << obj << "\n" << bindings << "\n";
}

std::vector<int> parse_id_list(const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    if (item.empty()) throw std::invalid_argument("empty entry in id list '" + text + "'");
    try {
      std::size_t used = 0;
      const auto dash = item.find('-', 1);
      if (dash == std::string::npos) {
        out.push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } else {
        const int lo = std::stoi(item.substr(0, dash), &used);
        const int hi = std::stoi(item.substr(dash + 1));
        if (lo > hi) throw std::invalid_argument(item);
        for (int i = lo; i <= hi; ++i) out.push_back(i);
      }
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad id list entry '" + item + "'");
    }
    start = end + 1;
  }
  return out;
}

}  // namespace rfsim
