// SPDX-License-Identifier: Apache-2.0

#include "rfsim/materials.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rfsim {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

void Material::validate() const {
  if (name.empty()) throw MaterialError("material without a name");
  if (!(epsilon_r >= 1.0)) throw MaterialError("material '" + name + "': epsilon_r must be >= 1");
  if (!(sigma >= 0.0)) throw MaterialError("material '" + name + "': sigma must be >= 0");
  if (!(scattering_coefficient >= 0.0 && scattering_coefficient <= 1.0))
    throw MaterialError("material '" + name + "': scattering_coefficient must lie in [0, 1]");
  if (!(xpd_ratio >= 0.0 && xpd_ratio <= 1.0))
    throw MaterialError("material '" + name + "': xpd_ratio must lie in [0, 1]");
  if (lobe.kind == LobeModel::Kind::Directive && lobe.alpha_r < 1)
    throw MaterialError("material '" + name + "': directive alpha_r must be >= 1");
}

std::complex<double> complex_permittivity(const Material& material, double frequency_hz) {
  if (!(frequency_hz > 0.0)) throw MaterialError("frequency must be positive");
  if (material.sigma == 0.0) return {material.epsilon_r, 0.0};
  return {material.epsilon_r, -material.sigma / (2.0 * kPi * frequency_hz * kEpsilon0)};
}

double specular_attenuation(double s) { return std::sqrt(1.0 - s * s); }

double specular_attenuation(const Material& material) {
  return specular_attenuation(material.scattering_coefficient);
}

// Hemisphere integral of (k_r . k_s)^k expanded binomially; even powers integrate to half the
// sphere, odd powers reduce to a finite series in sin(theta_i).
double directive_lobe_norm(int alpha, double cos_theta_i) {
  const double sin2 = 1.0 - cos_theta_i * cos_theta_i;
  double total = 0.0;
  for (int k = 0; k <= alpha; ++k) {
    double ik = 2.0 * kPi / (k + 1);
    if (k % 2 == 1) {
      double series = 0.0;
      double sin_pow = 1.0;
      for (int w = 0; w <= (k - 1) / 2; ++w) {
        series += binomial(2 * w, w) * sin_pow / std::pow(4.0, w);
        sin_pow *= sin2;
      }
      ik *= cos_theta_i * series;
    }
    total += binomial(alpha, k) * ik;
  }
  return total / std::pow(2.0, alpha);
}

double scattering_lobe(const LobeModel& lobe, const Eigen::Vector3d& k_i,
                       const Eigen::Vector3d& k_s, const Eigen::Vector3d& n) {
  // Orient the normal toward the side the wave arrives from.
  const Eigen::Vector3d n_out = k_i.dot(n) > 0.0 ? Eigen::Vector3d(-n) : n;
  const double cos_s = k_s.dot(n_out);
  if (cos_s <= 0.0) return 0.0;
  if (lobe.kind == LobeModel::Kind::Lambertian) return cos_s / kPi;

  const double cos_i = -k_i.dot(n_out);
  const Eigen::Vector3d k_r = k_i + 2.0 * cos_i * n_out;
  const double base = 0.5 * (1.0 + k_r.dot(k_s));
  return std::pow(base, lobe.alpha_r) / directive_lobe_norm(lobe.alpha_r, cos_i);
}

std::vector<Material> builtin_materials() {
  // Illustrative values in the range of ITU-R P.2040 tables near 3.5 GHz.
  return {
      {"concrete", 5.24, 0.123, 0.3, LobeModel::lambertian(), 0.5},
      {"brick", 3.91, 0.038, 0.3, LobeModel::lambertian(), 0.5},
      {"glass", 6.31, 0.036, 0.0, LobeModel::lambertian(), 0.5},
      {"wood", 1.99, 0.025, 0.2, LobeModel::lambertian(), 0.5},
      {"ground", 15.0, 0.035, 0.2, LobeModel::lambertian(), 0.5},
      {"metal", 1.0, 1e7, 0.0, LobeModel::lambertian(), 0.5},
  };
}

namespace {

nlohmann::json lobe_to_json(const LobeModel& lobe) {
  if (lobe.kind == LobeModel::Kind::Lambertian) return "lambertian";
  return nlohmann::json{{"directive", lobe.alpha_r}};
}

LobeModel lobe_from_json(const nlohmann::json& j, const std::string& name) {
  if (j.is_string() && j.get<std::string>() == "lambertian") return LobeModel::lambertian();
  if (j.is_object() && j.size() == 1 && j.contains("directive") && j["directive"].is_number_integer())
    return LobeModel::directive(j["directive"].get<int>());
  throw MaterialError("material '" + name +
                      "': lobe_model must be \"lambertian\" or {\"directive\": alpha}");
}

}  // namespace

std::vector<Material> parse_material_library(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MaterialError(std::string("material library: ") + e.what());
  }
  if (!doc.is_array()) throw MaterialError("material library must be a JSON array");

  static const char* kKeys[] = {"name", "epsilon_r", "sigma", "scattering_coefficient",
                                "lobe_model", "xpd_ratio"};
  std::vector<Material> out;
  for (const auto& item : doc) {
    if (!item.is_object()) throw MaterialError("material library entries must be objects");
    for (const auto& [key, value] : item.items()) {
      if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
        throw MaterialError("material library: unknown key '" + key + "'");
    }
    Material m;
    try {
      m.name = item.at("name").get<std::string>();
      m.epsilon_r = item.at("epsilon_r").get<double>();
      m.sigma = item.at("sigma").get<double>();
      m.scattering_coefficient = item.value("scattering_coefficient", 0.0);
      m.xpd_ratio = item.value("xpd_ratio", 0.5);
    } catch (const nlohmann::json::exception& e) {
      throw MaterialError(std::string("material library: ") + e.what());
    }
    if (item.contains("lobe_model")) m.lobe = lobe_from_json(item["lobe_model"], m.name);
    m.validate();
    for (const auto& prev : out)
      if (prev.name == m.name) throw MaterialError("duplicate material '" + m.name + "'");
    out.push_back(std::move(m));
  }
  return out;
}

std::string material_library_to_json(const std::vector<Material>& materials) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& m : materials) {
    doc.push_back({{"name", m.name},
                   {"epsilon_r", m.epsilon_r},
                   {"sigma", m.sigma},
                   {"scattering_coefficient", m.scattering_coefficient},
                   {"lobe_model", lobe_to_json(m.lobe)},
                   {"xpd_ratio", m.xpd_ratio}});
  }
  return doc.dump(2);
}

std::vector<Material> load_material_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MaterialError("cannot open material library '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_material_library(ss.str());
}

}  // namespace rfsim
