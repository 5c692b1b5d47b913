// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero on any
// failure. Usage: acceptance <work-dir> [samples-per-trajectory (default 100)]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rfsim/commands.hpp"

using namespace rfsim;
namespace fs = std::filesystem;
using C = std::complex<double>;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Verdict friis() {
  const auto t0 = Clock::now();
  const OfdmGrid grid;
  const Vec3 tx(0, 0, 0), rx(100, 0, 0);
  PathConfig cfg;
  cfg.frequency_hz = grid.carrier_frequency;
  const auto f = synthesize_csi(solve_paths(Scene{}, tx, rx, cfg), AntennaArray::single(tx), AntennaArray::single(rx), grid);
  const double expected = (kSpeedOfLight / 3.5e9) / (4 * kPi * 100.0);
  double worst = 0.0;
  for (int k = 0; k < f.h.cols(); ++k) worst = std::max(worst, std::abs(20 * std::log10(std::abs(f.h(0, k)) / expected)));
  const double t = seconds_since(t0);
  return {worst <= 0.01 && t < 1.0, format("max deviation %.3g dB, %.3f s", worst, t)};
}

Verdict fresnel_oracles() {
  const auto normal = em::fresnel<double>(1.0, 4.0, 1.0);
  const double dev = std::max(std::abs(std::abs(normal.r_perp) - 1.0 / 3.0), std::abs(std::abs(normal.r_par) - 1.0 / 3.0));
  const auto b = em::fresnel<double>(1.0, 4.0, std::cos(std::atan(2.0)));
  const double null = std::abs(b.r_par);
  return {dev <= 1e-12 && null <= 1e-9, format("|r| - 1/3 = %.3g, |r_par(Brewster)| = %.3g", dev, null)};
}

// Flux balance from Snell's law and the amplitude ratios, lossless media.
Verdict energy_conservation() {
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> eta(1.0, 12.0), theta(0.0, kPi / 2 - 1e-3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double e1 = eta(rng), e2 = eta(rng), ti = theta(rng);
    const double n1 = std::sqrt(e1), n2 = std::sqrt(e2);
    const double st = n1 / n2 * std::sin(ti);
    const auto f = em::fresnel<double>(e1, e2, std::cos(ti));
    double dev_perp = 0.0, dev_par = 0.0;
    if (st >= 1.0) {
      dev_perp = std::abs(std::norm(f.r_perp) - 1.0);
      dev_par = std::abs(std::norm(f.r_par) - 1.0);
    } else {
      const double scale = n2 * std::sqrt(1 - st * st) / (n1 * std::cos(ti));
      dev_perp = std::abs(std::norm(f.r_perp) + scale * std::norm(f.t_perp) - 1.0);
      dev_par = std::abs(std::norm(f.r_par) + scale * std::norm(f.t_par) - 1.0);
    }
    worst = std::max({worst, dev_perp, dev_par});
  }
  return {worst <= 1e-9, format("worst flux imbalance %.3g over 1000 draws", worst)};
}

Verdict image_method() {
  PathConfig cfg;
  cfg.scattering = false;
  cfg.transmission = false;
  const Scene ground = builtin_scene("ground-plane", builtin_materials());
  double ground_dev = 1.0;
  for (const auto& p : solve_paths(ground, {0, 0, 10}, {50, 0, 2}, cfg))
    if (p.kind_signature == "R") ground_dev = std::abs(p.total_length - std::sqrt(2644.0));

  const Scene corner = build_scene(
      parse_obj_mesh("g a\nv 0 0 0\nv 0 40 0\nv 0 40 10\nv 0 0 10\nf 1 2 3 4\n"
                     "g b\nv 0 0 0\nv 40 0 0\nv 40 0 10\nv 0 0 10\nf 5 6 7 8\n"),
      {{"a", "metal"}, {"b", "metal"}}, builtin_materials());
  const Vec3 tx(6, 4, 2), rx(3, 9, 1);
  // Mirroring across x = 0 then y = 0 maps tx to (-x, -y, z).
  const double analytic = (Vec3(-tx.x(), -tx.y(), tx.z()) - rx).norm();
  cfg.max_reflection_depth = 2;
  double corner_dev = 1.0;
  for (const auto& p : solve_paths(corner, tx, rx, cfg))
    if (p.kind_signature == "RR") corner_dev = std::min(corner_dev, std::abs(p.total_length - analytic));
  return {ground_dev <= 1e-9 && corner_dev <= 1e-9,
          format("ground %.3g m, corner RR %.3g m", ground_dev, corner_dev)};
}

Verdict scattering_endpoints() {
  const Vec3 k = Vec3(1, 0.2, -1).normalized();
  const auto basis = em::angular_basis<double>(k);
  em::FieldPhasor2<double> in;
  in.basis = basis;
  in.components << C(0.6, 0.1), C(-0.3, 0.7);
  Material m = builtin_materials().front();
  const auto f = em::fresnel<double>(1.0, complex_permittivity(m, 3.5e9), std::abs(k.z()));
  m.scattering_coefficient = 0.0;
  const double diffuse = em::apply_scattering<double>(in, Vec3::Zero(), Vec3(4, 1, 3), Vec3::UnitZ(), m, 1.0, f, {}).power();
  m.scattering_coefficient = 1.0;
  const double specular = em::apply_reflection<double>(in, Vec3::UnitZ(), f, specular_attenuation(m)).power();
  double identity = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double s = i / 1000.0;
    identity = std::max(identity, std::abs(s * s + std::pow(specular_attenuation(s), 2) - 1.0));
  }
  return {diffuse == 0.0 && specular == 0.0 && identity <= 4 * std::numeric_limits<double>::epsilon(),
          format("diffuse(S=0) %.3g, specular(S=1) %.3g, max |S^2+R^2-1| %.3g", diffuse, specular, identity)};
}

Verdict parseval_and_peak() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  Eigen::MatrixXcd h(32, 64);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = {n01(rng), n01(rng)};
  const double rel = std::abs(compute_adp(h, 32, 64).energy() - h.squaredNorm()) / h.squaredNorm();

  // Row-major 4x8 block, spacing 2.0 / 0.5: direction cosines (0.25, 0.5) along (y, z) advance
  // the phase by 1/8 cycle per column and one whole cycle per row, i.e. 4/32 cycle per index.
  const OfdmGrid grid;
  const int angle_bin = 4, delay_bin = 9;
  PropagationPath p;
  p.departure = Vec3(std::sqrt(1 - 0.0625 - 0.25), 0.25, 0.5);
  p.arrival = p.departure;
  p.delay = delay_bin / (grid.subcarrier_spacing * 64);
  p.total_length = p.delay * kSpeedOfLight;
  p.transfer = Mat2c::Identity() * em::free_space_factor(p.total_length, grid.carrier_frequency);
  p.frequency_hz = grid.carrier_frequency;
  const auto tx = great_msd_default().tx_array;
  const auto frame = synthesize_csi({p}, tx, AntennaArray::single(tx.position + p.total_length * p.departure), grid);
  bool peaks = true;
  std::string where;
  for (const auto& b : compute_adp_blocks(frame, 2, 32, 64)) {
    const auto [r, c] = adp_peak(b);
    peaks &= r == angle_bin && c == delay_bin;
    where += format(" (%d,%d)", r, c);
  }
  return {rel <= 1e-6 && peaks, format("energy rel. dev %.3g, peaks%s vs (%d,%d)", rel, where.c_str(), angle_bin, delay_bin)};
}

Verdict dataset_shape() {
  const RunConfig preset = great_msd_default();
  const auto traj = generate_trajectories(preset.resolved_trajectories());
  std::size_t samples = 0;
  for (const auto& t : traj) samples += t.size();
  const int elements = preset.tx_array.element_count();

  RunConfig smoke = preset;
  smoke.trajectories.trajectory_count = 2;
  smoke.trajectories.samples_per_trajectory = 10;
  smoke.trajectories.train_count = 1;
  const auto dir = fs::temp_directory_path() / "rfsim_acceptance_smoke";
  fs::remove_all(dir);
  const auto t0 = Clock::now();
  const Scene scene = smoke.load_scene();
  DatasetOptions o;
  o.output_dir = dir.string();
  o.threads = 1;
  const auto m = generate_dataset(smoke.dataset_job(scene), o);
  const double t = seconds_since(t0);
  fs::remove_all(dir);
  const bool ok = traj.size() == 100 && samples == 100000 && elements == 64 && m.frame_count == 20 && t < 10.0;
  return {ok, format("%zu trajectories, %zu samples, %d elements; 2x10 smoke in %.2f s", traj.size(), samples, elements, t)};
}

struct Workload {
  fs::path dir;
  int samples = 100;
  std::string manifest_hash;
  double generation_seconds = 0.0;
};

RunConfig acceptance_config(int samples, int threads) {
  RunConfig c = great_msd_default();
  c.trajectories.samples_per_trajectory = samples;
  c.threads = threads;
  return c;
}

DatasetManifest generate(const RunConfig& c, const fs::path& out) {
  fs::remove_all(out);
  const Scene scene = c.load_scene();
  DatasetOptions o;
  o.output_dir = out.string();
  o.threads = c.threads;
  return generate_dataset(c.dataset_job(scene), o);
}

Verdict scaling_trend(Workload& w) {
  const auto t0 = Clock::now();
  const auto m = generate(acceptance_config(w.samples, 1), w.dir / "run1");
  w.manifest_hash = m.manifest_hash;
  w.generation_seconds = seconds_since(t0);
  const auto ds = load_dataset((w.dir / "run1" / "manifest.json").string());

  std::vector<int> test(10);
  std::iota(test.begin(), test.end(), 90);
  std::vector<double> means;
  std::string detail;
  for (int n : {10, 20, 40, 90}) {
    LocateRequest req;
    req.train.resize(static_cast<std::size_t>(n));
    std::iota(req.train.begin(), req.train.end(), 0);
    req.test = test;
    req.k = 5;
    const auto errors = localization_errors(ds, req);
    means.push_back(std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size()));
    detail += format("%s%d:%.2fm", detail.empty() ? "" : " ", n, means.back());
  }
  int violations = 0;
  for (std::size_t i = 1; i < means.size(); ++i) violations += means[i] > means[i - 1];
  const double t = seconds_since(t0);
  return {violations <= 1 && t < 1800.0,
          format("%s; %d violation(s); 100x%d frames, %.0f s total", detail.c_str(), violations, w.samples, t)};
}

Verdict determinism(const Workload& w) {
  if (w.manifest_hash.empty()) return {false, "first run did not complete"};
  const auto m = generate(acceptance_config(w.samples, 3), w.dir / "run2");
  return {m.manifest_hash == w.manifest_hash,
          format("threads 1: %s, threads 3: %s", w.manifest_hash.c_str(), m.manifest_hash.c_str())};
}

Verdict similarity_properties(const Workload& w) {
  const auto ds = load_dataset((w.dir / "run1" / "manifest.json").string());
  double reflexive_dev = 0.0, scale_dev = 0.0, worst_null = 0.0;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n01;
  for (int t : {0, 45, 95}) {
    const auto f = ds.frame(t, 0);
    const auto a = combine_blocks(compute_adp_blocks(f.csi, 2, 32, 64));
    reflexive_dev = std::max(reflexive_dev, std::abs(adp_similarity(a, a) - 1.0));
    auto scaled = a;
    scaled.magnitude *= 1e3;
    scale_dev = std::max(scale_dev, std::abs(adp_similarity(a, scaled) - adp_similarity(a, a)));
    Eigen::MatrixXcd noise(32, 64);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = {n01(rng), n01(rng)};
    const auto r = compute_adp(noise, 32, 64);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = {n01(rng), n01(rng)};
    worst_null = std::max(worst_null, adp_similarity(r, compute_adp(noise, 32, 64)));
  }
  return {reflexive_dev <= 1e-12 && scale_dev <= 1e-12 && worst_null < 0.2,
          format("reflexive dev %.3g, scale dev %.3g, random null max %.3f", reflexive_dev, scale_dev, worst_null)};
}

}  // namespace

int main(int argc, char** argv) {
  Workload w;
  w.dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "rfsim-acceptance";
  if (argc > 2) w.samples = std::stoi(argv[2]);
  fs::create_directories(w.dir);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"friis", friis},
      {"fresnel", fresnel_oracles},
      {"energy-conservation", energy_conservation},
      {"image-method", image_method},
      {"scattering-endpoints", scattering_endpoints},
      {"parseval-adp", parseval_and_peak},
      {"dataset-shape", dataset_shape},
      {"scaling-trend", [&] { return scaling_trend(w); }},
      {"determinism", [&] { return determinism(w); }},
      {"similarity", [&] { return similarity_properties(w); }}};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
