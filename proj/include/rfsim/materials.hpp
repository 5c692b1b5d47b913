// SPDX-License-Identifier: Apache-2.0
//
// Electromagnetic surface materials: complex permittivity in the ITU-R P.2040 form and the
// scattering parameters consumed by the diffuse-scattering model.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfsim {

/// Vacuum permittivity, F/m.
inline constexpr double kEpsilon0 = 8.8541878128e-12;
/// Speed of light in vacuum, m/s.
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

class MaterialError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LobeModel {
  enum class Kind { Lambertian, Directive };
  Kind kind = Kind::Lambertian;
  int alpha_r = 1;  // directive exponent, >= 1; ignored for Lambertian

  static LobeModel lambertian() { return {}; }
  static LobeModel directive(int alpha) { return {Kind::Directive, alpha}; }
  bool operator==(const LobeModel&) const = default;
};

struct Material {
  std::string name;
  double epsilon_r = 1.0;
  double sigma = 0.0;                   // S/m
  double scattering_coefficient = 0.0;  // S in [0, 1]
  LobeModel lobe;
  double xpd_ratio = 0.5;  // K_x in [0, 1]

  /// Throws MaterialError when an invariant is violated.
  void validate() const;

  static Material vacuum() {
    Material m;
    m.name = "vacuum";
    return m;
  }
  bool operator==(const Material&) const = default;
};

/// Relative permittivity eta = epsilon_r - j sigma / (2 pi f epsilon_0)  (e^{+j w t} convention).
std::complex<double> complex_permittivity(const Material& material, double frequency_hz);

/// R = sqrt(1 - S^2).
double specular_attenuation(const Material& material);
double specular_attenuation(double scattering_coefficient);

/// Scattering lobe f_s(k_i, k_s, n), normalized so that its integral over the
/// reflection hemisphere is one. All vectors are unit; n may point to either side.
double scattering_lobe(const LobeModel& lobe, const Eigen::Vector3d& k_i,
                       const Eigen::Vector3d& k_s, const Eigen::Vector3d& n);

/// Normalization of the directive lobe: the hemisphere integral of ((1 + k_r . k_s) / 2)^alpha.
double directive_lobe_norm(int alpha, double cos_theta_i);

/// Small illustrative library (concrete, glass, brick, wood, metal, ground).
std::vector<Material> builtin_materials();

std::vector<Material> parse_material_library(const std::string& json_text);
std::string material_library_to_json(const std::vector<Material>& materials);
std::vector<Material> load_material_library(const std::string& path);

}  // namespace rfsim
