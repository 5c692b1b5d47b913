// SPDX-License-Identifier: Apache-2.0
//
// Deterministic path enumeration between two points. Specular chains come from the image
// method; transmission and diffuse scattering are limited to one event per path.

#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfsim/em_core.hpp"
#include "rfsim/geometry.hpp"

namespace rfsim {

using Mat2c = em::Mat2cT<double>;
using Basis = em::TransverseBasis<double>;

struct PathConfig {
  static constexpr int kMaxReflectionDepthCap = 6;

  double frequency_hz = 3.5e9;
  int max_reflection_depth = 3;
  int max_transmission_events = 1;
  bool line_of_sight = true;
  bool reflection = true;
  bool transmission = true;
  bool scattering = true;
  double scatter_tessellation_edge = 1.0;  // m
  std::uint64_t seed = 0;                  // drives the random scattering phases

  void validate() const;
  bool operator==(const PathConfig&) const = default;
};

enum class InteractionKind { Emit, SpecularReflect, Transmit, DiffuseScatter, Receive };

const char* to_string(InteractionKind kind);

struct Interaction {
  InteractionKind kind = InteractionKind::Emit;
  Vec3 point = Vec3::Zero();
  std::optional<std::uint32_t> triangle_id;
  double incidence_cosine = 1.0;
};

struct Angles {
  double azimuth = 0.0;    // rad, atan2(y, x)
  double elevation = 0.0;  // rad, above the xy plane
};

/// Direction angles of a unit vector.
Angles direction_angles(const Vec3& unit);

struct PropagationPath {
  std::vector<Interaction> interactions;
  double total_length = 0.0;  // m
  double delay = 0.0;         // s
  Vec3 departure = Vec3::UnitX();  // unit direction of travel leaving the transmitter
  Vec3 arrival = Vec3::UnitX();    // unit direction of travel reaching the receiver
  Angles aod;                      // of `departure`
  Angles aoa;                      // of `-arrival`, i.e. looking from the receiver to the source
  /// Maps components in angular_basis(departure) to components in angular_basis(arrival),
  /// including spreading and the propagation phase at `frequency_hz`.
  Mat2c transfer = Mat2c::Zero();
  double frequency_hz = 0.0;
  std::string kind_signature;

  /// 10 log10(|transfer|_F^2 / 2): mean gain over two orthogonal input polarizations.
  double gain_db() const;
};

/// Delay, then kind signature, then the interaction triangle ids.
bool path_order(const PropagationPath& a, const PropagationPath& b);

/// All paths up to the configured limits, sorted by path_order.
std::vector<PropagationPath> solve_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                         const PathConfig& config);

/// LOS (when visible) plus every valid specular chain of up to `depth` reflections.
std::vector<PropagationPath> image_method_specular(const Scene& scene, const Vec3& tx,
                                                   const Vec3& rx, int depth,
                                                   const PathConfig& config = {});

std::vector<PropagationPath> transmission_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                                const PathConfig& config);

std::vector<PropagationPath> scatter_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                           const PathConfig& config);

struct ScatterPatch {
  Vec3 center;
  double area = 0.0;
  std::uint32_t triangle_id = 0;
  std::uint32_t index = 0;  // within its triangle
};

/// Uniform subdivision of a triangle into m^2 similar patches, m = ceil(sqrt(area) / edge).
std::vector<ScatterPatch> tessellate(const Triangle& triangle, std::uint32_t triangle_id,
                                     double edge);

/// Random phases of one scatter patch; depends only on (seed, triangle, patch).
em::ScatteringPhases patch_phases(std::uint64_t seed, std::uint32_t triangle_id,
                                  std::uint32_t patch_index);

nlohmann::json path_to_json(const PropagationPath& path);
nlohmann::json paths_to_json(const std::vector<PropagationPath>& paths);

}  // namespace rfsim
