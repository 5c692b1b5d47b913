// SPDX-License-Identifier: Apache-2.0

#include "rfsim/validation.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <utility>

#include "rfsim/adp.hpp"
#include "rfsim/channel.hpp"
#include "rfsim/config.hpp"
#include "rfsim/em_core.hpp"
#include "rfsim/path_solver.hpp"

namespace rfsim {

namespace {

using C = std::complex<double>;
using FresnelFn = std::function<em::FresnelCoefficients<double>(C, C, double)>;

std::string fmt(const char* label, double value) {
  std::ostringstream s;
  s.precision(6);
  s << label << "=" << value;
  return s.str();
}

em::FresnelCoefficients<double> faulty_fresnel(C eta1, C eta2, double cos_i) {
  auto f = em::fresnel(eta1, eta2, cos_i);
  const C a = std::sqrt(eta2) * cos_i, b = std::sqrt(eta1) * f.cos_t;
  f.r_par = (a + b) / (a - b);
  return f;
}

OracleResult friis() {
  const Scene empty;
  const Vec3 tx(0, 0, 0), rx(100, 0, 0);
  const OfdmGrid grid;
  PathConfig cfg;
  cfg.frequency_hz = grid.carrier_frequency;
  const auto paths = solve_paths(empty, tx, rx, cfg);
  const CsiFrame f = synthesize_csi(paths, AntennaArray::single(tx), AntennaArray::single(rx), grid);
  const double expected = grid.wavelength() / (4 * kPi * 100.0);
  double worst = 0.0;
  for (int k = 0; k < grid.subcarrier_count; ++k)
    worst = std::max(worst, std::abs(20 * std::log10(std::abs(f.h(0, k)) / expected)));
  return {"friis", worst <= 0.01, fmt("max_dev_db", worst)};
}

OracleResult fresnel_normal(const FresnelFn& fr) {
  const auto f = fr(1.0, 4.0, 1.0);
  const double dev = std::max(std::abs(std::abs(f.r_perp) - 1.0 / 3.0), std::abs(std::abs(f.r_par) - 1.0 / 3.0));
  return {"fresnel-normal", dev <= 1e-12, fmt("abs_dev", dev)};
}

OracleResult brewster(const FresnelFn& fr) {
  const auto f = fr(1.0, 4.0, std::cos(std::atan(2.0)));
  const double mag = std::abs(f.r_par);
  return {"brewster", mag <= 1e-9, fmt("abs_r_par", mag)};
}

OracleResult snell() {
  const double theta = kPi / 6;
  const Vec3 k(std::sin(theta), 0, -std::cos(theta));
  const auto t = em::refract_direction<double>(k, Vec3::UnitZ(), 1.0, 4.0);
  const double dev = t ? std::abs(std::asin(std::hypot(t->x(), t->y())) - std::asin(0.25)) : 1.0;
  return {"snell", dev <= 1e-12, fmt("angle_dev_rad", dev)};
}

OracleResult energy(const FresnelFn& fr) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> eta(1.0, 12.0), cosd(1e-3, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double e1 = eta(rng), e2 = eta(rng);
    const auto f = fr(e1, e2, cosd(rng));
    const auto [perp, par] = em::flux_ratios(f);
    worst = std::max({worst, std::abs(perp.z() - 1.0), std::abs(par.z() - 1.0)});
  }
  return {"energy-conservation", worst <= 1e-9, fmt("max_flux_dev", worst)};
}

OracleResult image_ground() {
  const Scene s = builtin_scene("ground-plane", builtin_materials());
  PathConfig cfg;
  cfg.max_reflection_depth = 1;
  const auto paths = image_method_specular(s, {0, 0, 10}, {50, 0, 2}, 1, cfg);
  double dev = 1.0;
  int reflected = 0;
  for (const auto& p : paths)
    if (p.kind_signature == "R") {
      ++reflected;
      dev = std::abs(p.total_length - std::sqrt(2644.0));
    }
  return {"image-method-ground", reflected == 1 && dev <= 1e-9, fmt("length_dev_m", dev)};
}

OracleResult image_corner() {
  const std::string obj =
      "g wall_x\nv 0 0 0\nv 0 30 0\nv 0 30 10\nv 0 0 10\nf 1 2 3 4\n"
      "g wall_y\nv 0 0 0\nv 30 0 0\nv 30 0 10\nv 0 0 10\nf 5 6 7 8\n";
  const Scene s = build_scene(parse_obj_mesh(obj), {{"wall_x", "metal"}, {"wall_y", "metal"}},
                              builtin_materials());
  const Vec3 tx(5, 3, 1.5), rx(2, 8, 1.5);
  const double expected = (Vec3(-5, -3, 1.5) - rx).norm();
  PathConfig cfg;
  const auto paths = image_method_specular(s, tx, rx, 2, cfg);
  double dev = 1.0;
  for (const auto& p : paths)
    if (p.kind_signature == "RR") dev = std::min(dev, std::abs(p.total_length - expected));
  return {"image-method-corner", dev <= 1e-9, fmt("length_dev_m", dev)};
}

OracleResult parseval() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  Eigen::MatrixXcd h(32, 64);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = {n01(rng), n01(rng)};
  const auto adp = compute_adp(h, 64, 128);
  const double rel = std::abs(adp.energy() - h.squaredNorm()) / h.squaredNorm();
  return {"parseval", rel <= 1e-6, fmt("rel_energy_dev", rel)};
}

OracleResult scattering_endpoints() {
  Material m = builtin_materials().front();
  double worst = 0.0;
  for (double s = 0.0; s <= 1.0; s += 0.125) worst = std::max(worst, std::abs(s * s + std::pow(specular_attenuation(s), 2) - 1.0));
  m.scattering_coefficient = 0.0;
  const Vec3 k = Vec3(1, 0, -1).normalized();
  const auto basis = em::angular_basis<double>(k);
  const auto f = em::fresnel<double>(1.0, complex_permittivity(m, 3.5e9), std::abs(k.z()));
  const auto t = em::scattering_transfer<double>(basis, Vec3::Zero(), {5, 0, 5}, Vec3::UnitZ(), m, 1.0, f, {});
  const bool ok = worst <= 1e-15 && t.matrix.norm() == 0.0 && specular_attenuation(1.0) == 0.0;
  return {"scattering-endpoints", ok, fmt("max_identity_dev", worst)};
}

}  // namespace

std::vector<OracleResult> run_validation(const ValidationOptions& options) {
  const FresnelFn fr = options.inject_fresnel_fault
                           ? FresnelFn(faulty_fresnel)
                           : FresnelFn([](C a, C b, double c) { return em::fresnel(a, b, c); });
  const std::vector<std::pair<const char*, std::function<OracleResult()>>> suite = {
      {"friis", friis},
      {"fresnel-normal", [&] { return fresnel_normal(fr); }},
      {"brewster", [&] { return brewster(fr); }},
      {"snell", snell},
      {"energy-conservation", [&] { return energy(fr); }},
      {"image-method-ground", image_ground},
      {"image-method-corner", image_corner},
      {"parseval", parseval},
      {"scattering-endpoints", scattering_endpoints}};
  std::vector<OracleResult> out;
  for (const auto& [name, oracle] : suite) {
    const auto t0 = std::chrono::steady_clock::now();
    OracleResult r;
    try {
      r = oracle();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.name = name;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rfsim
